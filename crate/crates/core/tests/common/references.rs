//! Brute-force references for every oracle, written independently of the
//! catalog implementations.

use std::collections::HashMap;

use iosynth_core::Value;

fn int(v: &Value) -> i64 {
    v.as_int().unwrap()
}

fn ints(v: &Value) -> Vec<i64> {
    v.as_list().unwrap().iter().map(int).collect()
}

fn pair_lists(v: &Value) -> (Vec<i64>, Vec<i64>) {
    let t = v.as_tuple().unwrap();
    (ints(&t[0]), ints(&t[1]))
}

fn pair_strs(v: &Value) -> (String, String) {
    let t = v.as_tuple().unwrap();
    (t[0].as_str().unwrap().to_string(), t[1].as_str().unwrap().to_string())
}

fn points(v: &Value) -> Vec<(f64, f64)> {
    v.as_list()
        .unwrap()
        .iter()
        .map(|p| {
            let t = p.as_tuple().unwrap();
            (int(&t[0]) as f64, int(&t[1]) as f64)
        })
        .collect()
}

fn list(xs: Vec<i64>) -> Value {
    Value::int_list(xs)
}

fn prime_factorization(v: &Value) -> Value {
    let mut n = int(v);
    let mut out = Vec::new();
    while n > 1 {
        let p = (2..=n).find(|d| n % d == 0).unwrap();
        out.push(p);
        n /= p;
    }
    list(out)
}

fn digit_sum(v: &Value) -> Value {
    Value::Int(int(v).to_string().bytes().map(|b| (b - b'0') as i64).sum())
}

fn gcd_pair(v: &Value) -> Value {
    let xs = ints(v);
    let (a, b) = (xs[0].abs(), xs[1].abs());
    if a == 0 || b == 0 {
        return Value::Int(a.max(b));
    }
    Value::Int((1..=a.min(b)).rev().find(|d| a % d == 0 && b % d == 0).unwrap())
}

fn collatz_steps(v: &Value) -> Value {
    fn steps(n: u128) -> i64 {
        match n {
            1 => 0,
            n if n % 2 == 0 => 1 + steps(n / 2),
            n => 1 + steps(3 * n + 1),
        }
    }
    Value::Int(steps(int(v) as u128))
}

fn integer_sqrt(v: &Value) -> Value {
    let n = int(v);
    Value::Int((0..=n).take_while(|r| r * r <= n).last().unwrap())
}

fn base_k_addition(v: &Value) -> Value {
    let (a, b) = pair_lists(v);
    let value = |ds: &[i64]| ds.iter().rev().fold(0i128, |acc, d| acc * 3 + *d as i128);
    let mut total = value(&a) + value(&b);
    let mut digits = Vec::new();
    for _ in 0..a.len() {
        digits.push((total % 3) as i64);
        total /= 3;
    }
    if total > 0 {
        digits.push(total as i64);
    }
    list(digits)
}

fn running_sum(v: &Value) -> Value {
    let xs = ints(v);
    list((0..xs.len()).map(|i| xs[..=i].iter().sum()).collect())
}

fn running_max(v: &Value) -> Value {
    let xs = ints(v);
    list((0..xs.len()).map(|i| *xs[..=i].iter().max().unwrap()).collect())
}

fn moving_average(v: &Value) -> Value {
    let xs: Vec<f64> = v.as_list().unwrap().iter().map(|x| x.as_float().unwrap()).collect();
    Value::List(
        (1..=xs.len())
            .map(|k| Value::Float(xs[..k].iter().sum::<f64>() / k as f64))
            .collect(),
    )
}

fn reverse_list(v: &Value) -> Value {
    let xs = ints(v);
    list((0..xs.len()).map(|i| xs[xs.len() - 1 - i]).collect())
}

fn pairwise_diff(v: &Value) -> Value {
    let xs = ints(v);
    list((1..xs.len()).map(|i| xs[i] - xs[i - 1]).collect())
}

fn delayed_echo(v: &Value) -> Value {
    let xs = ints(v);
    list((0..xs.len()).map(|i| if i == 0 { 0 } else { xs[i - 1] }).collect())
}

fn parity_fold(v: &Value) -> Value {
    let xs = ints(v);
    list((0..xs.len()).map(|i| xs[..=i].iter().sum::<i64>() % 2).collect())
}

fn xor_fold(v: &Value) -> Value {
    let xs = ints(v);
    let bit = |b: u32| (xs.iter().filter(|x| (*x >> b) & 1 == 1).count() % 2) as i64;
    Value::Int((0..8).map(|b| bit(b) << b).sum())
}

fn binary_dot_product(v: &Value) -> Value {
    let (a, b) = pair_lists(v);
    Value::Int((0..a.len()).filter(|&i| a[i] == 1 && b[i] == 1).count() as i64)
}

fn majority_bit(v: &Value) -> Value {
    let xs = ints(v);
    let ones = xs.iter().filter(|&&x| x == 1).count();
    Value::Int(if ones > xs.len() - ones { 1 } else { 0 })
}

fn sort_list(v: &Value) -> Value {
    let mut xs = ints(v);
    for i in 1..xs.len() {
        let mut j = i;
        while j > 0 && xs[j - 1] > xs[j] {
            xs.swap(j - 1, j);
            j -= 1;
        }
    }
    list(xs)
}

fn filter_even(v: &Value) -> Value {
    list(ints(v).into_iter().filter(|x| x.rem_euclid(2) == 0).collect())
}

fn count_occurrences(v: &Value) -> Value {
    let (text, pat) = pair_strs(v);
    Value::Int((0..text.len()).filter(|&i| text[i..].starts_with(&pat)).count() as i64)
}

fn run_length_encode(v: &Value) -> Value {
    let chars: Vec<char> = v.as_str().unwrap().chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut j = i;
        while j < chars.len() && chars[j] == chars[i] {
            j += 1;
        }
        out.push(Value::Tuple(vec![
            Value::Str(chars[i].to_string()),
            Value::Int((j - i) as i64),
        ]));
        i = j;
    }
    Value::List(out)
}

fn lis_length(v: &Value) -> Value {
    let xs = ints(v);
    let best = (0u32..1 << xs.len())
        .filter(|mask| {
            let picked: Vec<i64> = (0..xs.len()).filter(|i| mask >> i & 1 == 1).map(|i| xs[i]).collect();
            picked.windows(2).all(|w| w[0] < w[1])
        })
        .map(|mask| mask.count_ones())
        .max()
        .unwrap();
    Value::Int(best as i64)
}

fn edit_distance(v: &Value) -> Value {
    fn go(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if a.is_empty() || b.is_empty() {
            return a.len() + b.len();
        }
        if let Some(&d) = memo.get(&(a.len(), b.len())) {
            return d;
        }
        let d = if a[0] == b[0] {
            go(&a[1..], &b[1..], memo)
        } else {
            1 + go(&a[1..], b, memo)
                .min(go(a, &b[1..], memo))
                .min(go(&a[1..], &b[1..], memo))
        };
        memo.insert((a.len(), b.len()), d);
        d
    }
    let (a, b) = pair_strs(v);
    Value::Int(go(a.as_bytes(), b.as_bytes(), &mut HashMap::new()) as i64)
}

fn rpn_eval(v: &Value) -> Value {
    // rebuild the expression tree from the right
    fn eval(tokens: &mut Vec<&str>) -> i64 {
        let t = tokens.pop().unwrap();
        match t {
            "+" | "-" | "*" => {
                let rhs = eval(tokens);
                let lhs = eval(tokens);
                match t {
                    "+" => lhs + rhs,
                    "-" => lhs - rhs,
                    _ => lhs * rhs,
                }
            }
            n => n.parse().unwrap(),
        }
    }
    let mut tokens: Vec<&str> = v.as_str().unwrap().split_whitespace().collect();
    let r = eval(&mut tokens);
    assert!(tokens.is_empty());
    Value::Int(r)
}

fn two_sum_exists(v: &Value) -> Value {
    let xs = ints(v);
    Value::Bool((0..xs.len()).any(|i| (i + 1..xs.len()).any(|j| xs[i] + xs[j] == 0)))
}

fn shoelace(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
    0.5 * (p.0 * (q.1 - r.1) + q.0 * (r.1 - p.1) + r.0 * (p.1 - q.1)).abs()
}

fn triangle_area_3pts(v: &Value) -> Value {
    let p = points(v);
    Value::Float(shoelace(p[0], p[1], p[2]))
}

fn max_triangle_area(v: &Value) -> Value {
    let p = points(v);
    let mut best = 0.0f64;
    for a in &p {
        for b in &p {
            for c in &p {
                best = best.max(shoelace(*a, *b, *c));
            }
        }
    }
    Value::Float(best)
}

fn manhattan_path_length(v: &Value) -> Value {
    let p = points(v);
    Value::Int(
        (1..p.len())
            .map(|i| ((p[i].0 - p[i - 1].0).abs() + (p[i].1 - p[i - 1].1).abs()) as i64)
            .sum(),
    )
}

pub fn reference(oracle_id: &str) -> fn(&Value) -> Value {
    match oracle_id {
        "prime_factorization" => prime_factorization,
        "digit_sum" => digit_sum,
        "gcd_pair" => gcd_pair,
        "collatz_steps" => collatz_steps,
        "integer_sqrt" => integer_sqrt,
        "base_k_addition" => base_k_addition,
        "running_sum" => running_sum,
        "running_max" => running_max,
        "moving_average" => moving_average,
        "reverse_list" => reverse_list,
        "pairwise_diff" => pairwise_diff,
        "delayed_echo" => delayed_echo,
        "parity_fold" => parity_fold,
        "xor_fold" => xor_fold,
        "binary_dot_product" => binary_dot_product,
        "majority_bit" => majority_bit,
        "sort_list" => sort_list,
        "filter_even" => filter_even,
        "count_occurrences" => count_occurrences,
        "run_length_encode" => run_length_encode,
        "lis_length" => lis_length,
        "edit_distance" => edit_distance,
        "rpn_eval" => rpn_eval,
        "two_sum_exists" => two_sum_exists,
        "triangle_area_3pts" => triangle_area_3pts,
        "max_triangle_area" => max_triangle_area,
        "manhattan_path_length" => manhattan_path_length,
        other => panic!("no reference for {other}"),
    }
}
