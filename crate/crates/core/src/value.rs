//! Universal value representation shared by tasks, oracles and evaluators.
//!
//! Every task input and output is a [`Value`] tree. The tagged-JSON wire form
//! (`{"k": kind, "v": payload}`) is the contract with the guest runner, and
//! [`Value::literal_form`] is the Python-style rendering used in prompts and
//! for the memorization penalty.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Number};
use thiserror::Error;

/// Default absolute tolerance for float comparison.
pub const FLOAT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
    Tuple(Vec<Value>),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Str,
    List,
    Tuple,
    Null,
}

impl Kind {
    pub fn tag(self) -> &'static str {
        match self {
            Kind::Int => "i",
            Kind::Float => "f",
            Kind::Bool => "b",
            Kind::Str => "s",
            Kind::List => "l",
            Kind::Tuple => "t",
            Kind::Null => "n",
        }
    }

    fn from_tag(tag: &str) -> Option<Kind> {
        Some(match tag {
            "i" => Kind::Int,
            "f" => Kind::Float,
            "b" => Kind::Bool,
            "s" => Kind::Str,
            "l" => Kind::List,
            "t" => Kind::Tuple,
            "n" => Kind::Null,
            _ => return None,
        })
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ValueError {
    #[error("malformed tagged value: {0}")]
    Malformed(String),
    #[error("non-finite float payload")]
    NonFinite,
    #[error("invalid JSON: {0}")]
    Json(String),
}

impl Value {
    pub fn kind(&self) -> Kind {
        match self {
            Value::Int(_) => Kind::Int,
            Value::Float(_) => Kind::Float,
            Value::Bool(_) => Kind::Bool,
            Value::Str(_) => Kind::Str,
            Value::List(_) => Kind::List,
            Value::Tuple(_) => Kind::Tuple,
            Value::Null => Kind::Null,
        }
    }

    pub fn int_list<I: IntoIterator<Item = i64>>(items: I) -> Value {
        Value::List(items.into_iter().map(Value::Int).collect())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_tuple(&self) -> Option<&[Value]> {
        match self {
            Value::Tuple(items) => Some(items),
            _ => None,
        }
    }

    /// True when every float in the tree is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            Value::Float(f) => f.is_finite(),
            Value::List(items) | Value::Tuple(items) => items.iter().all(Value::is_finite),
            _ => true,
        }
    }

    /// Canonical tagged-JSON text.
    pub fn serialize(&self) -> String {
        serde_json::to_string(self).expect("tagged values always serialize")
    }

    pub fn deserialize(text: &str) -> Result<Value, ValueError> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| ValueError::Json(e.to_string()))?;
        Value::from_tagged(&raw)
    }

    pub fn to_tagged(&self) -> serde_json::Value {
        match self {
            Value::Int(i) => json!({"k": "i", "v": i}),
            Value::Float(f) => {
                let n = Number::from_f64(*f).expect("finite floats only");
                json!({"k": "f", "v": n})
            }
            Value::Bool(b) => json!({"k": "b", "v": b}),
            Value::Str(s) => json!({"k": "s", "v": s}),
            Value::List(items) => {
                json!({"k": "l", "v": items.iter().map(Value::to_tagged).collect::<Vec<_>>()})
            }
            Value::Tuple(items) => {
                json!({"k": "t", "v": items.iter().map(Value::to_tagged).collect::<Vec<_>>()})
            }
            Value::Null => json!({"k": "n"}),
        }
    }

    pub fn from_tagged(raw: &serde_json::Value) -> Result<Value, ValueError> {
        let obj: &Map<String, serde_json::Value> = raw
            .as_object()
            .ok_or_else(|| ValueError::Malformed("expected object".into()))?;
        let tag = obj
            .get("k")
            .and_then(|k| k.as_str())
            .ok_or_else(|| ValueError::Malformed("missing \"k\"".into()))?;
        let kind = Kind::from_tag(tag).ok_or_else(|| ValueError::Malformed(format!("unknown kind {tag:?}")))?;
        if obj.keys().any(|k| k != "k" && k != "v") {
            return Err(ValueError::Malformed("unexpected key".into()));
        }
        if kind == Kind::Null {
            return match obj.get("v") {
                None => Ok(Value::Null),
                Some(_) => Err(ValueError::Malformed("null carries no payload".into())),
            };
        }
        let payload = obj
            .get("v")
            .ok_or_else(|| ValueError::Malformed("missing \"v\"".into()))?;
        let bad = || ValueError::Malformed(format!("bad payload for kind {tag:?}"));
        Ok(match kind {
            Kind::Int => Value::Int(payload.as_i64().ok_or_else(bad)?),
            Kind::Float => {
                let f = payload.as_f64().ok_or_else(bad)?;
                if !f.is_finite() {
                    return Err(ValueError::NonFinite);
                }
                Value::Float(f)
            }
            Kind::Bool => Value::Bool(payload.as_bool().ok_or_else(bad)?),
            Kind::Str => Value::Str(payload.as_str().ok_or_else(bad)?.to_string()),
            Kind::List | Kind::Tuple => {
                let items = payload
                    .as_array()
                    .ok_or_else(bad)?
                    .iter()
                    .map(Value::from_tagged)
                    .collect::<Result<Vec<_>, _>>()?;
                if kind == Kind::List {
                    Value::List(items)
                } else {
                    Value::Tuple(items)
                }
            }
            Kind::Null => unreachable!(),
        })
    }

    /// Python-style literal, e.g. `[2, 2, 3]`, `(1, 2)`, `'abc'`.
    pub fn literal_form(&self) -> String {
        let mut out = String::new();
        self.write_literal(&mut out);
        out
    }

    fn write_literal(&self, out: &mut String) {
        match self {
            Value::Int(i) => out.push_str(&i.to_string()),
            Value::Float(f) => out.push_str(&float_literal(*f)),
            Value::Bool(true) => out.push_str("True"),
            Value::Bool(false) => out.push_str("False"),
            Value::Null => out.push_str("None"),
            Value::Str(s) => {
                out.push('\'');
                for c in s.chars() {
                    match c {
                        '\\' => out.push_str("\\\\"),
                        '\'' => out.push_str("\\'"),
                        '\n' => out.push_str("\\n"),
                        '\t' => out.push_str("\\t"),
                        '\r' => out.push_str("\\r"),
                        c => out.push(c),
                    }
                }
                out.push('\'');
            }
            Value::List(items) => {
                out.push('[');
                write_items(items, out);
                out.push(']');
            }
            Value::Tuple(items) => {
                out.push('(');
                write_items(items, out);
                if items.len() == 1 {
                    out.push(',');
                }
                out.push(')');
            }
        }
    }

    /// `(node_count, depth)`. Scalars have depth 1; a container adds one
    /// level on top of its deepest child, and an empty container still
    /// counts its (empty) element level, so `[]` has depth 2.
    pub fn size_and_depth(&self) -> (usize, usize) {
        match self {
            Value::List(items) | Value::Tuple(items) => {
                let mut count = 1;
                let mut deepest = 1;
                for item in items {
                    let (c, d) = item.size_and_depth();
                    count += c;
                    deepest = deepest.max(d);
                }
                (count, deepest + 1)
            }
            _ => (1, 1),
        }
    }
}

fn write_items(items: &[Value], out: &mut String) {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        item.write_literal(out);
    }
}

/// Shortest round-trip decimal in Python's spelling (`2.0`, `1e+21`).
fn float_literal(f: f64) -> String {
    let s = format!("{f:?}");
    match s.split_once('e') {
        Some((mantissa, exp)) if !exp.starts_with('-') => format!("{mantissa}e+{exp}"),
        _ => s,
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.literal_form())
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_tagged().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(deserializer)?;
        Value::from_tagged(&raw).map_err(D::Error::custom)
    }
}

/// Recursive comparison: identical kinds, exact scalars except floats which
/// match within `float_tol`. Lists and tuples never compare equal.
pub fn values_equal(a: &Value, b: &Value, float_tol: f64) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => (x - y).abs() <= float_tol,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Null, Value::Null) => true,
        (Value::List(xs), Value::List(ys)) | (Value::Tuple(xs), Value::Tuple(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| values_equal(x, y, float_tol))
        }
        _ => false,
    }
}
