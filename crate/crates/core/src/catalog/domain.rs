use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    IntSeq,
    BitSeq,
    IntPairSeq,
    BitPairSeq,
    FloatSeq,
    ScalarInt,
    Text,
    PointSeq,
    StrPair,
}

/// Declared input space of a task.
///
/// `value_range` bounds sequence elements, scalar values and point
/// coordinates; float elements are drawn on a 0.01 grid inside it.
/// `pair_length_range` bounds the second string of a `StrPair`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDomain {
    pub shape: Shape,
    pub length_range: (usize, usize),
    pub value_range: (i64, i64),
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub charset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_length_range: Option<(usize, usize)>,
}

impl InputDomain {
    pub fn seq(shape: Shape, len: (usize, usize), range: (i64, i64)) -> Self {
        InputDomain {
            shape,
            length_range: len,
            value_range: range,
            charset: String::new(),
            pair_length_range: None,
        }
    }

    pub fn scalar(lo: i64, hi: i64) -> Self {
        Self::seq(Shape::ScalarInt, (1, 1), (lo, hi))
    }

    pub fn text(len: (usize, usize), charset: &str) -> Self {
        InputDomain {
            charset: charset.to_string(),
            ..Self::seq(Shape::Text, len, (0, 0))
        }
    }

    pub fn str_pair(len: (usize, usize), second: (usize, usize), charset: &str) -> Self {
        InputDomain {
            charset: charset.to_string(),
            pair_length_range: Some(second),
            ..Self::seq(Shape::StrPair, len, (0, 0))
        }
    }

    fn element_range(&self) -> (i64, i64) {
        match self.shape {
            Shape::BitSeq | Shape::BitPairSeq => (0, 1),
            _ => self.value_range,
        }
    }

    /// Structural sanity of the declaration itself.
    pub fn check(&self) -> Result<(), String> {
        let (min, max) = self.length_range;
        if min > max {
            return Err(format!("length range {min}..{max} is empty"));
        }
        if self.value_range.0 > self.value_range.1 {
            return Err("value range is empty".into());
        }
        if matches!(self.shape, Shape::Text | Shape::StrPair) && self.charset.is_empty() {
            return Err("text domains need a charset".into());
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        let (lo, hi) = self.element_range();
        let len = |rng: &mut R, (a, b): (usize, usize)| rng.gen_range(a..=b);
        let ints =
            |rng: &mut R, n: usize| -> Vec<Value> { (0..n).map(|_| Value::Int(rng.gen_range(lo..=hi))).collect() };
        let text = |rng: &mut R, n: usize| -> String {
            let chars: Vec<char> = self.charset.chars().collect();
            (0..n).map(|_| chars[rng.gen_range(0..chars.len())]).collect()
        };
        match self.shape {
            Shape::ScalarInt => Value::Int(rng.gen_range(lo..=hi)),
            Shape::IntSeq | Shape::BitSeq => {
                let n = len(rng, self.length_range);
                Value::List(ints(rng, n))
            }
            Shape::IntPairSeq | Shape::BitPairSeq => {
                let n = len(rng, self.length_range);
                let a = ints(rng, n);
                let b = ints(rng, n);
                Value::Tuple(vec![Value::List(a), Value::List(b)])
            }
            Shape::FloatSeq => {
                let n = len(rng, self.length_range);
                Value::List(
                    (0..n)
                        .map(|_| Value::Float(rng.gen_range(lo * 100..=hi * 100) as f64 / 100.0))
                        .collect(),
                )
            }
            Shape::Text => {
                let n = len(rng, self.length_range);
                Value::Str(text(rng, n))
            }
            Shape::StrPair => {
                let n = len(rng, self.length_range);
                let m = len(rng, self.pair_length_range.unwrap_or(self.length_range));
                Value::Tuple(vec![Value::Str(text(rng, n)), Value::Str(text(rng, m))])
            }
            Shape::PointSeq => {
                let n = len(rng, self.length_range);
                Value::List(
                    (0..n)
                        .map(|_| {
                            Value::Tuple(vec![
                                Value::Int(rng.gen_range(lo..=hi)),
                                Value::Int(rng.gen_range(lo..=hi)),
                            ])
                        })
                        .collect(),
                )
            }
        }
    }

    /// Checks that `v` lies inside the declared domain.
    pub fn validate(&self, v: &Value) -> Result<(), String> {
        let (lo, hi) = self.element_range();
        let in_len = |n: usize, (a, b): (usize, usize)| {
            if n < a || n > b {
                Err(format!("length {n} outside {a}..={b}"))
            } else {
                Ok(())
            }
        };
        let int_in = |x: &Value| match x {
            Value::Int(i) if (lo..=hi).contains(i) => Ok(()),
            Value::Int(i) => Err(format!("element {i} outside {lo}..={hi}")),
            other => Err(format!("expected int, got {}", other.literal_form())),
        };
        let int_seq = |x: &Value| -> Result<usize, String> {
            let items = x.as_list().ok_or("expected a list")?;
            items.iter().try_for_each(int_in)?;
            Ok(items.len())
        };
        let text_ok = |s: &str, range: (usize, usize)| -> Result<(), String> {
            in_len(s.chars().count(), range)?;
            match s.chars().find(|c| !self.charset.contains(*c)) {
                Some(c) => Err(format!("character {c:?} outside charset")),
                None => Ok(()),
            }
        };
        match self.shape {
            Shape::ScalarInt => int_in(v),
            Shape::IntSeq | Shape::BitSeq => in_len(int_seq(v)?, self.length_range),
            Shape::IntPairSeq | Shape::BitPairSeq => {
                let parts = v.as_tuple().ok_or("expected a tuple of two lists")?;
                if parts.len() != 2 {
                    return Err("expected a tuple of two lists".into());
                }
                let (a, b) = (int_seq(&parts[0])?, int_seq(&parts[1])?);
                if a != b {
                    return Err("paired streams must have equal length".into());
                }
                in_len(a, self.length_range)
            }
            Shape::FloatSeq => {
                let items = v.as_list().ok_or("expected a list")?;
                for x in items {
                    match x {
                        Value::Float(f) if f.is_finite() && *f >= lo as f64 && *f <= hi as f64 => {}
                        other => return Err(format!("bad float element {}", other.literal_form())),
                    }
                }
                in_len(items.len(), self.length_range)
            }
            Shape::Text => text_ok(v.as_str().ok_or("expected a string")?, self.length_range),
            Shape::StrPair => {
                let parts = v.as_tuple().ok_or("expected a tuple of two strings")?;
                match parts {
                    [Value::Str(a), Value::Str(b)] => {
                        text_ok(a, self.length_range)?;
                        text_ok(b, self.pair_length_range.unwrap_or(self.length_range))
                    }
                    _ => Err("expected a tuple of two strings".into()),
                }
            }
            Shape::PointSeq => {
                let items = v.as_list().ok_or("expected a list of points")?;
                for p in items {
                    match p.as_tuple() {
                        Some([x, y]) => {
                            int_in(x)?;
                            int_in(y)?;
                        }
                        _ => return Err(format!("bad point {}", p.literal_form())),
                    }
                }
                in_len(items.len(), self.length_range)
            }
        }
    }

    /// Converts plain JSON (as written by a language model: numbers, strings,
    /// nested arrays) into a value of this domain's shape.
    pub fn coerce_plain(&self, raw: &serde_json::Value) -> Result<Value, String> {
        use serde_json::Value as J;
        let int = |x: &J| -> Result<Value, String> {
            x.as_i64()
                .map(Value::Int)
                .ok_or_else(|| format!("expected integer, got {x}"))
        };
        let ints = |x: &J| -> Result<Value, String> {
            let arr = x.as_array().ok_or_else(|| format!("expected array, got {x}"))?;
            Ok(Value::List(arr.iter().map(int).collect::<Result<_, _>>()?))
        };
        let string = |x: &J| -> Result<Value, String> {
            x.as_str()
                .map(|s| Value::Str(s.to_string()))
                .ok_or_else(|| format!("expected string, got {x}"))
        };
        let pair = |x: &J| -> Result<(J, J), String> {
            match x.as_array().map(Vec::as_slice) {
                Some([a, b]) => Ok((a.clone(), b.clone())),
                _ => Err(format!("expected a pair, got {x}")),
            }
        };
        let value = match self.shape {
            Shape::ScalarInt => int(raw)?,
            Shape::IntSeq | Shape::BitSeq => ints(raw)?,
            Shape::IntPairSeq | Shape::BitPairSeq => {
                let (a, b) = pair(raw)?;
                Value::Tuple(vec![ints(&a)?, ints(&b)?])
            }
            Shape::FloatSeq => {
                let arr = raw.as_array().ok_or("expected array")?;
                Value::List(
                    arr.iter()
                        .map(|x| x.as_f64().map(Value::Float).ok_or("expected number"))
                        .collect::<Result<_, _>>()?,
                )
            }
            Shape::Text => string(raw)?,
            Shape::StrPair => {
                let (a, b) = pair(raw)?;
                Value::Tuple(vec![string(&a)?, string(&b)?])
            }
            Shape::PointSeq => {
                let arr = raw.as_array().ok_or("expected array of points")?;
                Value::List(
                    arr.iter()
                        .map(|p| {
                            let (x, y) = pair(p)?;
                            Ok(Value::Tuple(vec![int(&x)?, int(&y)?]))
                        })
                        .collect::<Result<_, String>>()?,
                )
            }
        };
        self.validate(&value)?;
        Ok(value)
    }

    /// One-paragraph description of the input space for prompts.
    pub fn describe(&self) -> String {
        let (a, b) = self.length_range;
        let (lo, hi) = self.value_range;
        match self.shape {
            Shape::ScalarInt => format!("a single integer in [{lo}, {hi}]"),
            Shape::IntSeq => format!("a list of {a} to {b} integers, each in [{lo}, {hi}]"),
            Shape::BitSeq => format!("a list of {a} to {b} bits (0 or 1)"),
            Shape::IntPairSeq => {
                format!("a pair of equal-length lists of {a} to {b} integers in [{lo}, {hi}], written [[...], [...]]")
            }
            Shape::BitPairSeq => {
                format!("a pair of equal-length lists of {a} to {b} bits, written [[...], [...]]")
            }
            Shape::FloatSeq => format!("a list of {a} to {b} numbers in [{lo}, {hi}]"),
            Shape::Text => format!("a string of {a} to {b} characters drawn from {:?}", self.charset),
            Shape::StrPair => {
                let (c, d) = self.pair_length_range.unwrap_or(self.length_range);
                format!(
                    "a pair of strings over {:?} (first {a} to {b} characters, second {c} to {d}), written [\"...\", \"...\"]",
                    self.charset
                )
            }
            Shape::PointSeq => format!("a list of {a} to {b} integer points [x, y] with coordinates in [{lo}, {hi}]"),
        }
    }
}
