use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{CatalogError, Example, Sampler, Task, TaskDef};
use crate::value::{values_equal, Value};

pub const VISIBLE_COUNT: usize = 8;
pub const HIDDEN_COUNT: usize = 15;
pub const TRAIN_SEED: u64 = 42;
pub const TEST_SEED: u64 = 999;
const POOL_FACTOR: usize = 4;
const BACKUP_SEEDS: u64 = 16;

/// Per-task RNG stream for a seed.
fn task_rng(task_id: &str, seed: u64) -> ChaCha8Rng {
    let digest = Sha256::digest(format!("{task_id}:{seed}").as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(bytes))
}

fn sample_rpn<R: Rng>(rng: &mut R) -> Value {
    let operators = rng.gen_range(1..=4);
    let mut tokens = Vec::new();
    let (mut operands_left, mut ops_left, mut depth) = (operators + 1, operators, 0);
    while operands_left + ops_left > 0 {
        let push = operands_left > 0 && (depth < 2 || rng.gen_bool(0.5));
        if push {
            tokens.push(rng.gen_range(0..=9).to_string());
            operands_left -= 1;
            depth += 1;
        } else {
            tokens.push(["+", "-", "*"][rng.gen_range(0..3)].to_string());
            ops_left -= 1;
            depth -= 1;
        }
    }
    Value::Str(tokens.join(" "))
}

/// One random input for the task, drawn like the split generator does.
pub fn draw<R: Rng>(def: &TaskDef, rng: &mut R) -> Value {
    match def.sampler {
        Sampler::Domain => def.domain.sample(rng),
        Sampler::Rpn => sample_rpn(rng),
    }
}

fn contains(pool: &[Example], input: &Value) -> bool {
    pool.iter().any(|e| values_equal(&e.input, input, 0.0))
}

fn labelled(def: &TaskDef, input: Value) -> Result<Example, CatalogError> {
    let output = def.label(&input)?;
    Ok(Example { input, output })
}

/// Edge cases first, then seeded random draws, up to `target` distinct
/// inputs. Returns fewer when the draw budget runs out.
fn sample_pool(def: &TaskDef, seed: u64, target: usize) -> Result<Vec<Example>, CatalogError> {
    let mut pool: Vec<Example> = Vec::with_capacity(target);
    for e in &def.edge_cases {
        if pool.len() < target && !contains(&pool, e) {
            pool.push(labelled(def, e.clone())?);
        }
    }
    let mut rng = task_rng(def.id, seed);
    let budget = 100 * target + 1000;
    for _ in 0..budget {
        if pool.len() >= target {
            break;
        }
        let input = draw(def, &mut rng);
        if !contains(&pool, &input) {
            pool.push(labelled(def, input)?);
        }
    }
    Ok(pool)
}

/// `count` distinct examples: the task's edge cases, then seeded samples.
pub fn generate_examples(def: &TaskDef, seed: u64, count: usize) -> Result<Vec<Example>, CatalogError> {
    if count < def.edge_cases.len() {
        return Err(CatalogError::CountBelowEdgeCases {
            task: def.id.to_string(),
            count,
            edge_cases: def.edge_cases.len(),
        });
    }
    let pool = sample_pool(def, seed, count)?;
    if pool.len() < count {
        return Err(CatalogError::DomainTooSmall {
            task: def.id.to_string(),
            needed: count,
            found: pool.len(),
        });
    }
    Ok(pool)
}

/// Adds examples from `extra` that are new to `pool` and pass `keep`.
fn merge(pool: &mut Vec<Example>, extra: Vec<Example>, keep: impl Fn(&Value) -> bool) {
    for e in extra {
        if !contains(pool, &e.input) && keep(&e.input) {
            pool.push(e);
        }
    }
}

/// Builds the 8 visible / 15 hidden split with disjoint inputs.
pub fn build_split(def: &TaskDef) -> Result<Task, CatalogError> {
    let too_small = |needed, found| CatalogError::DomainTooSmall {
        task: def.id.to_string(),
        needed,
        found,
    };

    let mut train = sample_pool(def, TRAIN_SEED, POOL_FACTOR * VISIBLE_COUNT)?;
    for backup in 1..=BACKUP_SEEDS {
        if train.len() >= VISIBLE_COUNT {
            break;
        }
        let more = sample_pool(def, TRAIN_SEED + backup, POOL_FACTOR * VISIBLE_COUNT)?;
        merge(&mut train, more, |_| true);
    }
    if train.len() < VISIBLE_COUNT {
        return Err(too_small(VISIBLE_COUNT, train.len()));
    }

    let outside_train = |input: &Value| !contains(&train, input);
    let mut test = Vec::new();
    merge(
        &mut test,
        sample_pool(def, TEST_SEED, POOL_FACTOR * HIDDEN_COUNT)?,
        outside_train,
    );
    for backup in 1..=BACKUP_SEEDS {
        if test.len() >= HIDDEN_COUNT {
            break;
        }
        let more = sample_pool(def, TEST_SEED + backup, POOL_FACTOR * HIDDEN_COUNT)?;
        merge(&mut test, more, outside_train);
    }
    if test.len() < HIDDEN_COUNT {
        if !def.small_domain {
            return Err(too_small(HIDDEN_COUNT, test.len()));
        }
        merge(
            &mut test,
            sample_pool(def, TEST_SEED, POOL_FACTOR * HIDDEN_COUNT)?,
            |_| true,
        );
        if test.len() < HIDDEN_COUNT {
            return Err(too_small(HIDDEN_COUNT, test.len()));
        }
    }

    train.truncate(VISIBLE_COUNT);
    test.truncate(HIDDEN_COUNT);
    Ok(Task::new(def, train, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{registry, task_def, InputDomain};

    fn tiny(hi: i64, small_domain: bool) -> TaskDef {
        TaskDef {
            id: "tiny",
            domain: InputDomain::scalar(0, hi),
            edge_cases: vec![],
            small_domain,
            ..task_def("digit_sum").unwrap().clone()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let def = task_def("parity_fold").unwrap();
        let a = generate_examples(def, 7, 5).unwrap();
        let b = generate_examples(def, 7, 5).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_ne!(a, generate_examples(def, 8, 5).unwrap());
    }

    #[test]
    fn edge_cases_come_first() {
        let def = task_def("prime_factorization").unwrap();
        for seed in [0, 42, 999, 12345] {
            let ex = generate_examples(def, seed, 3).unwrap();
            assert_eq!(ex[0].input, Value::Int(1));
            assert_eq!(ex[0].output, Value::int_list([]));
        }
    }

    #[test]
    fn count_below_edge_cases_is_rejected() {
        let def = task_def("digit_sum").unwrap();
        assert!(matches!(
            generate_examples(def, 1, 2),
            Err(CatalogError::CountBelowEdgeCases { .. })
        ));
    }

    #[test]
    fn domain_too_small() {
        assert!(matches!(
            generate_examples(&tiny(5, false), 1, 23),
            Err(CatalogError::DomainTooSmall { .. })
        ));
        assert!(matches!(
            build_split(&tiny(20, false)),
            Err(CatalogError::DomainTooSmall { .. })
        ));
        // small-domain tasks may reuse training inputs in the test split
        let t = build_split(&tiny(20, true)).unwrap();
        assert_eq!(t.visible.len(), VISIBLE_COUNT);
        assert_eq!(t.hidden().len(), HIDDEN_COUNT);
    }

    #[test]
    fn rpn_samples_are_well_formed() {
        let def = task_def("rpn_eval").unwrap();
        let mut rng = task_rng("rpn_eval", 5);
        for _ in 0..500 {
            let v = sample_rpn(&mut rng);
            def.label(&v).unwrap();
        }
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        for def in registry() {
            let task = build_split(def).unwrap();
            assert_eq!(task.visible.len(), VISIBLE_COUNT, "{}", def.id);
            assert_eq!(task.hidden().len(), HIDDEN_COUNT, "{}", def.id);
            for h in task.hidden() {
                assert!(!contains(&task.visible, &h.input), "{}", def.id);
            }
            for (i, a) in task.visible.iter().enumerate() {
                for b in &task.visible[i + 1..] {
                    assert!(!values_equal(&a.input, &b.input, 0.0));
                }
            }
            assert_eq!(build_split(def).unwrap(), task);
        }
    }
}
