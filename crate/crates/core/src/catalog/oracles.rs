//! Ground-truth functions. Each receives a domain-valid input and returns
//! the label; the `Err` path is a precondition violation the generic
//! domain check cannot see (e.g. a malformed RPN expression).

use crate::value::Value;

pub type OracleFn = fn(&Value) -> Result<Value, String>;

fn int(v: &Value) -> Result<i64, String> {
    v.as_int().ok_or_else(|| format!("expected int, got {v}"))
}

fn ints(v: &Value) -> Result<Vec<i64>, String> {
    v.as_list()
        .ok_or_else(|| format!("expected list, got {v}"))?
        .iter()
        .map(int)
        .collect()
}

fn int_pair(v: &Value) -> Result<(Vec<i64>, Vec<i64>), String> {
    match v.as_tuple() {
        Some([a, b]) => Ok((ints(a)?, ints(b)?)),
        _ => Err(format!("expected pair of lists, got {v}")),
    }
}

fn str_pair(v: &Value) -> Result<(&str, &str), String> {
    match v.as_tuple() {
        Some([Value::Str(a), Value::Str(b)]) => Ok((a, b)),
        _ => Err(format!("expected pair of strings, got {v}")),
    }
}

fn points(v: &Value) -> Result<Vec<(i64, i64)>, String> {
    v.as_list()
        .ok_or_else(|| format!("expected list of points, got {v}"))?
        .iter()
        .map(|p| match p.as_tuple() {
            Some([x, y]) => Ok((int(x)?, int(y)?)),
            _ => Err(format!("bad point {p}")),
        })
        .collect()
}

pub fn prime_factorization(v: &Value) -> Result<Value, String> {
    let mut n = int(v)?;
    if n < 1 {
        return Err("n must be positive".into());
    }
    let mut factors = Vec::new();
    let mut d = 2;
    while d * d <= n {
        while n % d == 0 {
            factors.push(d);
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        factors.push(n);
    }
    Ok(Value::int_list(factors))
}

pub fn digit_sum(v: &Value) -> Result<Value, String> {
    let n = int(v)?;
    if n < 0 {
        return Err("n must be non-negative".into());
    }
    let mut rest = n;
    let mut total = 0;
    while rest > 0 {
        total += rest % 10;
        rest /= 10;
    }
    Ok(Value::Int(total))
}

pub fn gcd_pair(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    let [mut a, mut b] = xs[..] else {
        return Err("expected exactly two integers".into());
    };
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    Ok(Value::Int(a))
}

pub fn collatz_steps(v: &Value) -> Result<Value, String> {
    let mut n = int(v)?;
    if n < 1 {
        return Err("n must be positive".into());
    }
    let mut steps = 0;
    while n != 1 {
        n = if n % 2 == 0 { n / 2 } else { 3 * n + 1 };
        steps += 1;
    }
    Ok(Value::Int(steps))
}

/// Integer square root by Newton iteration.
pub fn integer_sqrt(v: &Value) -> Result<Value, String> {
    let n = int(v)?;
    if n < 0 {
        return Err("n must be non-negative".into());
    }
    if n < 2 {
        return Ok(Value::Int(n));
    }
    let mut x = n;
    let mut y = (x + 1) / 2;
    while y < x {
        x = y;
        y = (x + n / x) / 2;
    }
    Ok(Value::Int(x))
}

pub const BASE_K: i64 = 3;

/// Little-endian base-3 addition of two digit streams; a final carry
/// extends the result by one digit.
pub fn base_k_addition(v: &Value) -> Result<Value, String> {
    let (a, b) = int_pair(v)?;
    let mut out = Vec::with_capacity(a.len() + 1);
    let mut carry = 0;
    for (x, y) in a.iter().zip(&b) {
        let s = x + y + carry;
        out.push(s % BASE_K);
        carry = s / BASE_K;
    }
    if carry > 0 {
        out.push(carry);
    }
    Ok(Value::int_list(out))
}

pub fn running_sum(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    let mut acc = 0;
    Ok(Value::int_list(xs.into_iter().map(|x| {
        acc += x;
        acc
    })))
}

pub fn running_max(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    let mut best = i64::MIN;
    Ok(Value::int_list(xs.into_iter().map(|x| {
        best = best.max(x);
        best
    })))
}

pub fn moving_average(v: &Value) -> Result<Value, String> {
    let items = v.as_list().ok_or("expected list")?;
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(items.len());
    for (i, x) in items.iter().enumerate() {
        sum += x.as_float().ok_or("expected floats")?;
        out.push(Value::Float(sum / (i + 1) as f64));
    }
    Ok(Value::List(out))
}

pub fn reverse_list(v: &Value) -> Result<Value, String> {
    let mut xs = ints(v)?;
    xs.reverse();
    Ok(Value::int_list(xs))
}

pub fn pairwise_diff(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    Ok(Value::int_list(xs.windows(2).map(|w| w[1] - w[0])))
}

/// Output lags the input by one step, starting from 0.
pub fn delayed_echo(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    let mut out = vec![0];
    out.extend_from_slice(&xs[..xs.len().saturating_sub(1)]);
    out.truncate(xs.len());
    Ok(Value::int_list(out))
}

/// Prefix parity of a bit stream.
pub fn parity_fold(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    let mut p = 0;
    Ok(Value::int_list(xs.into_iter().map(|b| {
        p ^= b;
        p
    })))
}

pub fn xor_fold(v: &Value) -> Result<Value, String> {
    Ok(Value::Int(ints(v)?.into_iter().fold(0, |a, b| a ^ b)))
}

pub fn binary_dot_product(v: &Value) -> Result<Value, String> {
    let (a, b) = int_pair(v)?;
    Ok(Value::Int(a.iter().zip(&b).map(|(x, y)| x * y).sum()))
}

/// 1 when ones are a strict majority, else 0.
pub fn majority_bit(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    let ones = xs.iter().filter(|&&b| b == 1).count();
    Ok(Value::Int((ones * 2 > xs.len()) as i64))
}

pub fn sort_list(v: &Value) -> Result<Value, String> {
    let mut xs = ints(v)?;
    xs.sort_unstable();
    Ok(Value::int_list(xs))
}

pub fn filter_even(v: &Value) -> Result<Value, String> {
    Ok(Value::int_list(ints(v)?.into_iter().filter(|x| x % 2 == 0)))
}

/// Occurrences of the pattern in the text, overlaps included.
pub fn count_occurrences(v: &Value) -> Result<Value, String> {
    let (text, pat) = str_pair(v)?;
    if pat.is_empty() {
        return Err("pattern must be nonempty".into());
    }
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pat.chars().collect();
    let count = t.windows(p.len()).filter(|w| *w == p.as_slice()).count();
    Ok(Value::Int(count as i64))
}

pub fn run_length_encode(v: &Value) -> Result<Value, String> {
    let s = v.as_str().ok_or("expected string")?;
    let mut runs: Vec<(char, i64)> = Vec::new();
    for c in s.chars() {
        match runs.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => runs.push((c, 1)),
        }
    }
    Ok(Value::List(
        runs.into_iter()
            .map(|(c, n)| Value::Tuple(vec![Value::Str(c.to_string()), Value::Int(n)]))
            .collect(),
    ))
}

/// Length of the longest strictly increasing subsequence (patience sorting).
pub fn lis_length(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    let mut tails: Vec<i64> = Vec::new();
    for x in xs {
        let pos = tails.partition_point(|&t| t < x);
        if pos == tails.len() {
            tails.push(x);
        } else {
            tails[pos] = x;
        }
    }
    Ok(Value::Int(tails.len() as i64))
}

pub fn edit_distance(v: &Value) -> Result<Value, String> {
    let (a, b) = str_pair(v)?;
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    Ok(Value::Int(prev[b.len()] as i64))
}

/// Evaluates a space-separated reverse-Polish expression over + - *.
pub fn rpn_eval(v: &Value) -> Result<Value, String> {
    let expr = v.as_str().ok_or("expected string")?;
    let mut stack: Vec<i64> = Vec::new();
    for token in expr.split_whitespace() {
        match token {
            "+" | "-" | "*" => {
                let b = stack.pop().ok_or("stack underflow")?;
                let a = stack.pop().ok_or("stack underflow")?;
                let r = match token {
                    "+" => a.checked_add(b),
                    "-" => a.checked_sub(b),
                    _ => a.checked_mul(b),
                };
                stack.push(r.ok_or("arithmetic overflow")?);
            }
            t => stack.push(t.parse().map_err(|_| format!("bad token {t:?}"))?),
        }
    }
    match stack[..] {
        [x] => Ok(Value::Int(x)),
        [] => Err("empty expression".into()),
        _ => Err("leftover operands".into()),
    }
}

pub fn two_sum_exists(v: &Value) -> Result<Value, String> {
    let xs = ints(v)?;
    let mut seen = std::collections::HashSet::new();
    for x in xs {
        if seen.contains(&-x) {
            return Ok(Value::Bool(true));
        }
        seen.insert(x);
    }
    Ok(Value::Bool(false))
}

fn doubled_area(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> i64 {
    ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs()
}

pub fn triangle_area_3pts(v: &Value) -> Result<Value, String> {
    let ps = points(v)?;
    let [a, b, c] = ps[..] else {
        return Err("expected exactly three points".into());
    };
    Ok(Value::Float(doubled_area(a, b, c) as f64 / 2.0))
}

pub fn max_triangle_area(v: &Value) -> Result<Value, String> {
    let ps = points(v)?;
    if ps.len() < 3 {
        return Err("need at least three points".into());
    }
    let mut best = 0;
    for i in 0..ps.len() {
        for j in i + 1..ps.len() {
            for k in j + 1..ps.len() {
                best = best.max(doubled_area(ps[i], ps[j], ps[k]));
            }
        }
    }
    Ok(Value::Float(best as f64 / 2.0))
}

pub fn manhattan_path_length(v: &Value) -> Result<Value, String> {
    let ps = points(v)?;
    Ok(Value::Int(
        ps.windows(2)
            .map(|w| (w[1].0 - w[0].0).abs() + (w[1].1 - w[0].1).abs())
            .sum(),
    ))
}
