#![allow(dead_code)]

pub mod references;

use std::path::PathBuf;

use iosynth_core::catalog::{build_split, task_def, Example, Task};
use iosynth_core::diff::DiffBlock;
use iosynth_core::engine::EngineConfig;
use iosynth_core::executor::{CaseOutcome, FakeExecutor};
use iosynth_core::llm::MockStep;
use iosynth_core::Value;

pub const TEMPLATE: &str = "def f(x):\n    return None\n";

pub const LEVEL1: &str = "def f(n):\n    return []\n";

pub const LEVEL2: &str = "def f(n):\n    return [n]\n";

pub const LEVEL3: &str = "\
def f(n):
    factors = []
    if n % 2 == 0:
        factors.append(2)
        n = n // 2
    if n > 1:
        factors.append(n)
    return factors
";

pub const LEVEL4: &str = "\
def f(n):
    factors = []
    d = 2
    while d <= n:
        while n % d == 0:
            factors.append(d)
            n = n // d
        d += 1
    return factors
";

/// Eight factorization pairs, written out by hand.
pub fn factor_pairs() -> Vec<Example> {
    let raw: [(i64, &[i64]); 8] = [
        (1, &[]),
        (2, &[2]),
        (3, &[3]),
        (4, &[2, 2]),
        (6, &[2, 3]),
        (8, &[2, 2, 2]),
        (12, &[2, 2, 3]),
        (30, &[2, 3, 5]),
    ];
    raw.iter()
        .map(|(n, out)| Example::new(Value::Int(*n), Value::int_list(out.iter().copied())))
        .collect()
}

/// A memorizing program in the style of the overfitting example.
pub fn lookup_program(pairs: &[Example]) -> String {
    let mut src = String::from("def f(n):\n");
    for (i, e) in pairs.iter().enumerate() {
        let kw = if i == 0 { "if" } else { "elif" };
        src.push_str(&format!(
            "    {kw} n == {}: return {}\n",
            e.input.literal_form(),
            e.output.literal_form()
        ));
    }
    src.push_str("    return []\n");
    src
}

fn ints(v: Vec<i64>) -> Value {
    Value::int_list(v)
}

pub fn model_level3(mut n: i64) -> Value {
    let mut factors = Vec::new();
    if n % 2 == 0 {
        factors.push(2);
        n /= 2;
    }
    if n > 1 {
        factors.push(n);
    }
    ints(factors)
}

pub fn model_level4(mut n: i64) -> Value {
    let mut factors = Vec::new();
    let mut d = 2;
    while d <= n {
        while n % d == 0 {
            factors.push(d);
            n /= d;
        }
        d += 1;
    }
    ints(factors)
}

pub fn prime_task() -> Task {
    build_split(task_def("prime_factorization").unwrap()).unwrap()
}

fn all_inputs(task: &Task, extra: &[Example]) -> Vec<Value> {
    task.visible
        .iter()
        .chain(task.hidden())
        .chain(extra)
        .map(|e| e.input.clone())
        .collect()
}

/// Fake executor covering the template, the four listings and the lookup
/// program on every input of the task and the factorization pairs.
pub fn prime_table(task: &Task) -> FakeExecutor {
    let pairs = factor_pairs();
    let inputs = all_inputs(task, &pairs);
    let n = |v: &Value| v.as_int().expect("integer input");
    let mut fake = FakeExecutor::new();
    fake.tabulate(TEMPLATE, &inputs, |_| CaseOutcome::ok(Value::Null));
    fake.tabulate(LEVEL1, &inputs, |_| CaseOutcome::ok(ints(vec![])));
    fake.tabulate(LEVEL2, &inputs, |v| CaseOutcome::ok(ints(vec![n(v)])));
    fake.tabulate(LEVEL3, &inputs, |v| CaseOutcome::ok(model_level3(n(v))));
    fake.tabulate(LEVEL4, &inputs, |v| CaseOutcome::ok(model_level4(n(v))));
    for table in [&task.visible, &pairs] {
        let src = lookup_program(table);
        fake.tabulate(&src, &inputs, |v| {
            let hit = table.iter().find(|e| &e.input == v);
            CaseOutcome::ok(hit.map_or_else(|| ints(vec![]), |e| e.output.clone()))
        });
    }
    fake
}

fn diff(blocks: &[DiffBlock]) -> String {
    let mut out = String::from("Applying the next transformation.\n\n");
    for b in blocks {
        out.push_str(&b.render());
    }
    out
}

/// Four responses walking the listings from the template to the loop.
pub fn replay_script() -> Vec<MockStep> {
    vec![
        MockStep::new(
            "f(2) == [2]  [NEW]",
            &diff(&[DiffBlock::new("def f(x):\n    return None", "def f(n):\n    return []")]),
        )
        .with_usage(900, 40),
        MockStep::new(
            "f(79) == [79]  [NEW]",
            &diff(&[DiffBlock::new("    return []", "    return [n]")]),
        )
        .with_usage(1000, 30),
        MockStep::new(
            "f(106) == [2, 53]  [NEW]",
            &format!("Split on divisibility.\n```python\n{LEVEL3}```\n"),
        )
        .with_usage(1100, 90),
        MockStep::new(
            "f(136) == [2, 2, 2, 17]  [NEW]",
            &diff(&[
                DiffBlock::new(
                    "    factors = []\n    if n % 2 == 0:\n        factors.append(2)\n        n = n // 2",
                    "    factors = []\n    d = 2\n    while d <= n:\n        while n % d == 0:\n            factors.append(d)\n            n = n // d\n        d += 1",
                ),
                DiffBlock::new("        d += 1\n    if n > 1:\n        factors.append(n)", "        d += 1"),
            ]),
        )
        .with_usage(1200, 110),
    ]
}

pub fn replay_config() -> EngineConfig {
    EngineConfig {
        islands: 1,
        total_iterations: 4,
        stages: 4,
        seed: 42,
        parallel: false,
        ..Default::default()
    }
}

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// Compares `actual` with a frozen file; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(rel: &str, actual: &str) {
    let path = manifest_dir().join(rel);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1 to create)", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {rel}");
}
