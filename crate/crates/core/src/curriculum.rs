//! Easy-to-hard ordering of visible examples and nested curriculum stages.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Example;

pub const DEFAULT_STAGES: usize = 4;
pub const DEFAULT_REPLAY_CAP: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DifficultyKey {
    pub total_size: usize,
    pub total_depth: usize,
    pub tiebreak: String,
}

pub fn difficulty_key(e: &Example) -> DifficultyKey {
    let (in_size, in_depth) = e.input.size_and_depth();
    let (out_size, out_depth) = e.output.size_and_depth();
    DifficultyKey {
        total_size: in_size + out_size,
        total_depth: in_depth + out_depth,
        tiebreak: e.input.literal_form(),
    }
}

/// One curriculum stage. `delta` is the suffix of `current` revealed at
/// this stage; `replay` is drawn from the previous stage's examples.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSlice {
    pub index: usize,
    pub current: Vec<Example>,
    pub delta: Vec<Example>,
    pub replay: Vec<Example>,
}

impl StageSlice {
    /// A single stage exposing everything, with nothing marked new.
    pub fn full(examples: Vec<Example>) -> StageSlice {
        StageSlice {
            index: 1,
            current: examples,
            delta: Vec::new(),
            replay: Vec::new(),
        }
    }

    /// Position in `current` where the newly revealed examples start.
    pub fn new_from(&self) -> usize {
        self.current.len() - self.delta.len()
    }
}

/// Serializable description of a plan: indices into the task's visible list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub seed: u64,
    pub order: Vec<usize>,
    pub stage_sizes: Vec<usize>,
    pub replay: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumPlan {
    pub stages: Vec<StageSlice>,
    pub summary: PlanSummary,
}

impl CurriculumPlan {
    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("stage count {stages} must lie in 1..={examples}")]
pub struct InvalidStageCount {
    pub stages: usize,
    pub examples: usize,
}

fn replay_rng(seed: u64, stage: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (stage as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Sorts by [`difficulty_key`] (stable) and cuts `stages` nested prefixes of
/// `ceil(n * s / S)` examples.
pub fn build_plan(
    visible: &[Example],
    stages: usize,
    replay_cap: usize,
    seed: u64,
) -> Result<CurriculumPlan, InvalidStageCount> {
    let n = visible.len();
    if stages == 0 || stages > n {
        return Err(InvalidStageCount { stages, examples: n });
    }
    let keys: Vec<DifficultyKey> = visible.iter().map(difficulty_key).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));

    let sizes: Vec<usize> = (1..=stages).map(|s| (n * s).div_ceil(stages)).collect();
    let mut slices = Vec::with_capacity(stages);
    let mut replay_indices = Vec::with_capacity(stages);
    let mut prev = 0;
    for (i, &size) in sizes.iter().enumerate() {
        let current: Vec<Example> = order[..size].iter().map(|&j| visible[j].clone()).collect();
        let delta = current[prev..].to_vec();
        let take = replay_cap.min(prev);
        let mut picked: Vec<usize> = sample(&mut replay_rng(seed, i + 1), prev, take).into_vec();
        picked.sort_unstable();
        let replay = picked.iter().map(|&p| current[p].clone()).collect();
        replay_indices.push(picked.iter().map(|&p| order[p]).collect());
        slices.push(StageSlice {
            index: i + 1,
            current,
            delta,
            replay,
        });
        prev = size;
    }
    Ok(CurriculumPlan {
        stages: slices,
        summary: PlanSummary {
            seed,
            order,
            stage_sizes: sizes,
            replay: replay_indices,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::{values_equal, Value};
    use proptest::prelude::*;

    fn ex(input: Value, output: Value) -> Example {
        Example::new(input, output)
    }

    fn factor_pairs() -> Vec<Example> {
        let pf = |n: i64, f: &[i64]| ex(Value::Int(n), Value::int_list(f.iter().copied()));
        vec![
            pf(30, &[2, 3, 5]),
            pf(12, &[2, 2, 3]),
            pf(1, &[]),
            pf(8, &[2, 2, 2]),
            pf(2, &[2]),
            pf(6, &[2, 3]),
            pf(3, &[3]),
            pf(4, &[2, 2]),
        ]
    }

    #[test]
    fn keys() {
        let k = difficulty_key(&ex(Value::int_list([1]), Value::int_list([1])));
        assert_eq!((k.total_size, k.total_depth, k.tiebreak.as_str()), (4, 4, "[1]"));
        let k = difficulty_key(&ex(Value::Int(1), Value::int_list([])));
        assert_eq!((k.total_size, k.total_depth, k.tiebreak.as_str()), (2, 3, "1"));
        let easy = ex(Value::Int(1), Value::int_list([]));
        let hard = ex(Value::Int(30), Value::int_list([2, 3, 5]));
        assert!(difficulty_key(&easy) < difficulty_key(&hard));
    }

    #[test]
    fn slice_sizes_and_replay() {
        let plan = build_plan(&factor_pairs(), 4, 4, 1).unwrap();
        let sizes: Vec<_> = plan.stages.iter().map(|s| s.current.len()).collect();
        assert_eq!(sizes, [2, 4, 6, 8]);
        assert!(plan.stages[0].replay.is_empty());
        assert_eq!(plan.stages[1].replay.len(), 2);
        assert_eq!(plan.stages[3].replay.len(), 4);
        assert_eq!(plan.stages[0].current[0].input, Value::Int(1));
    }

    #[test]
    fn single_stage_is_flat() {
        let plan = build_plan(&factor_pairs(), 1, 4, 1).unwrap();
        assert_eq!(plan.stage_count(), 1);
        assert_eq!(plan.stages[0].current.len(), 8);
        assert_eq!(plan.stages[0].delta.len(), 8);
        assert!(plan.stages[0].replay.is_empty());
    }

    #[test]
    fn invalid_stage_counts() {
        assert!(build_plan(&factor_pairs(), 0, 4, 1).is_err());
        assert!(build_plan(&factor_pairs(), 9, 4, 1).is_err());
    }

    #[test]
    fn deterministic() {
        let a = build_plan(&factor_pairs(), 4, 4, 7).unwrap();
        let b = build_plan(&factor_pairs(), 4, 4, 7).unwrap();
        assert_eq!(a, b);
    }

    fn same(a: &Example, b: &Example) -> bool {
        values_equal(&a.input, &b.input, 0.0) && values_equal(&a.output, &b.output, 0.0)
    }

    fn arb_examples() -> impl Strategy<Value = Vec<Example>> {
        prop::collection::vec((0i64..50, prop::collection::vec(0i64..9, 0..6)), 1..16).prop_map(|pairs| {
            let mut seen = std::collections::HashSet::new();
            pairs
                .into_iter()
                .filter(|(i, _)| seen.insert(*i))
                .map(|(i, out)| ex(Value::Int(i), Value::int_list(out)))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn plan_invariants(examples in arb_examples(), stages in 1usize..8, cap in 0usize..6, seed in any::<u64>()) {
            prop_assume!(stages <= examples.len());
            let plan = build_plan(&examples, stages, cap, seed).unwrap();
            let last = plan.stages.last().unwrap();
            prop_assert_eq!(last.current.len(), examples.len());
            // permutation of the visible set
            let mut order = plan.summary.order.clone();
            order.sort_unstable();
            prop_assert_eq!(order, (0..examples.len()).collect::<Vec<_>>());
            // monotone difficulty
            for w in last.current.windows(2) {
                prop_assert!(difficulty_key(&w[0]) <= difficulty_key(&w[1]));
            }
            let mut covered = 0;
            for (i, s) in plan.stages.iter().enumerate() {
                prop_assert!(!s.delta.is_empty());
                covered += s.delta.len();
                if i > 0 {
                    let prev = &plan.stages[i - 1].current;
                    prop_assert!(prev.len() < s.current.len());
                    prop_assert!(prev.iter().zip(&s.current).all(|(a, b)| same(a, b)));
                    prop_assert_eq!(s.replay.len(), cap.min(prev.len()));
                    for r in &s.replay {
                        prop_assert!(prev.iter().any(|p| same(p, r)));
                        prop_assert!(!s.delta.iter().any(|d| same(d, r)));
                    }
                } else {
                    prop_assert!(s.replay.is_empty());
                }
            }
            prop_assert_eq!(covered, examples.len());
        }
    }
}
