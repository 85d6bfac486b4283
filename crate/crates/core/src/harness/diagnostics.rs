use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::TaskSummary;
use crate::catalog::Family;

pub const DEFAULT_EPS_FRAC: f64 = 0.1;

/// Shape of a per-stage length sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrajectoryClass {
    Stable,
    MonotoneDown,
    Hump,
    MonotoneUp,
    Valley,
    Mixed,
}

impl TrajectoryClass {
    pub const ALL: [TrajectoryClass; 6] = [
        TrajectoryClass::Stable,
        TrajectoryClass::MonotoneDown,
        TrajectoryClass::Hump,
        TrajectoryClass::MonotoneUp,
        TrajectoryClass::Valley,
        TrajectoryClass::Mixed,
    ];
}

#[derive(Debug, Error, PartialEq)]
#[error("trajectory needs at least two finite values, got {0:?}")]
pub struct InvalidSequence(pub Vec<f64>);

/// Stable when the span stays within `eps_frac` of the mean; otherwise by
/// the pattern of rises and falls, flat steps ignored.
pub fn classify_trajectory(lengths: &[f64], eps_frac: f64) -> Result<TrajectoryClass, InvalidSequence> {
    if lengths.len() < 2 || lengths.iter().any(|x| !x.is_finite()) {
        return Err(InvalidSequence(lengths.to_vec()));
    }
    let max = lengths.iter().copied().fold(f64::MIN, f64::max);
    let min = lengths.iter().copied().fold(f64::MAX, f64::min);
    let mean = lengths.iter().sum::<f64>() / lengths.len() as f64;
    if max - min <= eps_frac * mean.abs() {
        return Ok(TrajectoryClass::Stable);
    }
    let mut runs: Vec<bool> = Vec::new();
    for w in lengths.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let up = w[1] > w[0];
        if runs.last() != Some(&up) {
            runs.push(up);
        }
    }
    Ok(match runs.as_slice() {
        [false] => TrajectoryClass::MonotoneDown,
        [true] => TrajectoryClass::MonotoneUp,
        [true, false] => TrajectoryClass::Hump,
        [false, true] => TrajectoryClass::Valley,
        _ => TrajectoryClass::Mixed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub class: TrajectoryClass,
    pub runs: usize,
    pub solved: usize,
}

/// Runs per trajectory class of their stage-best lengths. Single-stage runs
/// have no trajectory and are left out.
pub fn trajectory_table(tasks: &[TaskSummary], eps_frac: f64) -> Vec<TrajectoryRow> {
    let mut rows: Vec<TrajectoryRow> = TrajectoryClass::ALL
        .into_iter()
        .map(|class| TrajectoryRow {
            class,
            runs: 0,
            solved: 0,
        })
        .collect();
    for t in tasks {
        let lengths: Vec<f64> = t.stage_lengths.iter().map(|&l| l as f64).collect();
        if let Ok(class) = classify_trajectory(&lengths, eps_frac) {
            let row = &mut rows[class as usize];
            row.runs += 1;
            row.solved += usize::from(t.solved);
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverfitRow {
    pub family: Family,
    pub runs: usize,
    pub solved: usize,
    /// Perfect on the full visible set, failed on the hidden set.
    pub overfit: usize,
    /// Stopped with visible accuracy 1.0 and hidden accuracy below 1.0.
    pub early_stop_incorrect: usize,
    pub mean_len_solved: Option<f64>,
    pub mean_len_failed: Option<f64>,
    pub mean_copy_frequency: f64,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Per-family overfitting table.
pub fn overfit_diagnostics(tasks: &[TaskSummary]) -> Vec<OverfitRow> {
    Family::ALL
        .into_iter()
        .filter_map(|family| {
            let runs: Vec<&TaskSummary> = tasks.iter().filter(|t| t.family == family).collect();
            if runs.is_empty() {
                return None;
            }
            let lens = |solved: bool| -> Vec<f64> {
                runs.iter()
                    .filter(|t| t.solved == solved)
                    .map(|t| t.final_source_len as f64)
                    .collect()
            };
            let overfit = runs.iter().filter(|t| t.overfit()).count();
            let copies: Vec<f64> = runs.iter().map(|t| t.copy_frequency).collect();
            Some(OverfitRow {
                family,
                runs: runs.len(),
                solved: runs.iter().filter(|t| t.solved).count(),
                overfit,
                early_stop_incorrect: overfit,
                mean_len_solved: mean(&lens(true)),
                mean_len_failed: mean(&lens(false)),
                mean_copy_frequency: mean(&copies).unwrap_or(0.0),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Level;
    use proptest::prelude::*;
    use TrajectoryClass::*;

    fn classify(xs: &[f64]) -> TrajectoryClass {
        classify_trajectory(xs, DEFAULT_EPS_FRAC).unwrap()
    }

    #[test]
    fn every_label_is_reachable() {
        assert_eq!(classify(&[100.0, 100.0, 101.0, 99.0]), Stable);
        assert_eq!(classify(&[400.0, 300.0, 250.0, 200.0]), MonotoneDown);
        assert_eq!(classify(&[200.0, 400.0, 350.0, 250.0]), Hump);
        assert_eq!(classify(&[100.0, 150.0, 150.0, 300.0]), MonotoneUp);
        assert_eq!(classify(&[300.0, 100.0, 120.0, 310.0]), Valley);
        assert_eq!(classify(&[100.0, 300.0, 100.0, 300.0]), Mixed);
    }

    #[test]
    fn short_sequences_are_invalid() {
        assert!(classify_trajectory(&[], 0.1).is_err());
        assert!(classify_trajectory(&[5.0], 0.1).is_err());
        assert!(classify_trajectory(&[5.0, f64::NAN], 0.1).is_err());
    }

    fn row(family: Family, hidden: f64, visible: f64, len: usize, copy: f64) -> TaskSummary {
        TaskSummary {
            task_id: "t".into(),
            family,
            level: Level::Base,
            mode: "dio".into(),
            hidden_accuracy: hidden,
            solved: hidden == 1.0,
            visible_accuracy: visible,
            iterations: 1,
            prompt_tokens: 0,
            completion_tokens: 0,
            final_source_len: len,
            copy_frequency: copy,
            early_stop: false,
            stage_lengths: vec![len, len * 2],
            checkpoints: vec![],
            record: String::new(),
        }
    }

    #[test]
    fn overfit_table() {
        let tasks = vec![
            row(Family::Core, 1.0, 1.0, 100, 0.0),
            row(Family::Core, 0.8, 1.0, 300, 1.0),
            row(Family::Core, 0.2, 0.5, 200, 0.5),
            row(Family::Newton, 1.0, 1.0, 80, 0.0),
        ];
        let table = overfit_diagnostics(&tasks);
        assert_eq!(table.len(), 2);
        let core = &table[0];
        assert_eq!(
            (
                core.family,
                core.runs,
                core.solved,
                core.overfit,
                core.early_stop_incorrect
            ),
            (Family::Core, 3, 1, 1, 1)
        );
        assert_eq!(core.mean_len_solved, Some(100.0));
        assert_eq!(core.mean_len_failed, Some(250.0));
        assert_eq!(core.mean_copy_frequency, 0.5);
        assert_eq!(table[1].mean_len_failed, None);

        let traj = trajectory_table(&tasks, DEFAULT_EPS_FRAC);
        assert_eq!(traj.len(), 6);
        assert_eq!(
            (traj[MonotoneUp as usize].runs, traj[MonotoneUp as usize].solved),
            (4, 2)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn total_and_deterministic(xs in prop::collection::vec(0.0f64..1000.0, 2..8), eps in 0.0f64..0.5) {
            let a = classify_trajectory(&xs, eps).unwrap();
            prop_assert_eq!(a, classify_trajectory(&xs, eps).unwrap());
        }
    }
}
