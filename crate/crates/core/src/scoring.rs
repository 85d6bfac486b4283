//! Fitness, the stage selection score and held-out evaluation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{Example, Task};
use crate::curriculum::StageSlice;
use crate::executor::{truncate_tail, CaseOutcome, ExecError, ExecJob, ExecLimits, Executor};
use crate::source::{collapse_whitespace, lexeme_count};
use crate::value::{values_equal, FLOAT_TOLERANCE};

pub const LEXEME_CAP: usize = 512;
pub const MIN_LITERAL_LEN: usize = 3;
pub const MAX_FAILURES: usize = 3;
pub const DEFAULT_LAMBDA: f64 = 0.1;
const NOTE_DIAGNOSTIC_LIMIT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Penalties {
    pub lambda_c: f64,
    pub lambda_h: f64,
}

impl Default for Penalties {
    fn default() -> Self {
        Penalties {
            lambda_c: DEFAULT_LAMBDA,
            lambda_h: DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageScore {
    pub acc_curr: f64,
    pub omega_comp: f64,
    pub omega_hard: f64,
    pub lambda_c: f64,
    pub lambda_h: f64,
    pub total: f64,
}

impl StageScore {
    pub fn new(acc_curr: f64, omega_comp: f64, omega_hard: f64, p: Penalties) -> Self {
        StageScore {
            acc_curr,
            omega_comp,
            omega_hard,
            lambda_c: p.lambda_c,
            lambda_h: p.lambda_h,
            total: acc_curr - p.lambda_c * omega_comp - p.lambda_h * omega_hard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Current,
    Replay,
    Heldout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureArtifact {
    pub origin: Origin,
    pub input: crate::Value,
    pub expected: crate::Value,
    pub got: CaseOutcome,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub wall_time_ms: u64,
    pub failures: Vec<FailureArtifact>,
}

impl EvalReport {
    pub fn empty() -> Self {
        EvalReport {
            correct: 0,
            total: 0,
            accuracy: 0.0,
            wall_time_ms: 0,
            failures: Vec::new(),
        }
    }

    pub fn solved(&self) -> bool {
        self.total > 0 && self.correct == self.total
    }

    fn from_outcomes(
        examples: &[Example],
        outcomes: &[CaseOutcome],
        origin: Origin,
        wall_time_ms: u64,
        diagnostics: &str,
    ) -> Self {
        let mut correct = 0;
        let mut failures = Vec::new();
        for (ex, got) in examples.iter().zip(outcomes) {
            if is_correct(got, ex) {
                correct += 1;
            } else if failures.len() < MAX_FAILURES {
                failures.push(artifact(origin, ex, got, diagnostics));
            }
        }
        let total = examples.len();
        EvalReport {
            correct,
            total,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            wall_time_ms,
            failures,
        }
    }
}

/// Everything produced by scoring one program on one curriculum stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEval {
    pub score: StageScore,
    pub current: EvalReport,
    pub replay: EvalReport,
}

impl StageEval {
    /// Current-slice failures first, then replay failures.
    pub fn failures(&self) -> impl Iterator<Item = &FailureArtifact> {
        self.current.failures.iter().chain(&self.replay.failures)
    }
}

fn is_correct(got: &CaseOutcome, ex: &Example) -> bool {
    got.value()
        .is_some_and(|v| values_equal(v, &ex.output, FLOAT_TOLERANCE))
}

fn artifact(origin: Origin, ex: &Example, got: &CaseOutcome, diagnostics: &str) -> FailureArtifact {
    let mut note = format!("expected {}, got {}", ex.output.literal_form(), got.describe());
    let diag = diagnostics.trim();
    if !diag.is_empty() && !matches!(got, CaseOutcome::Ok { .. }) {
        note.push_str("\nstderr: ");
        note.push_str(&truncate_tail(diag, NOTE_DIAGNOSTIC_LIMIT));
    }
    FailureArtifact {
        origin,
        input: ex.input.clone(),
        expected: ex.output.clone(),
        got: got.clone(),
        note,
    }
}

/// Complexity penalty: lexeme count over [`LEXEME_CAP`], clamped to 1.
pub fn omega_comp(source: &str) -> f64 {
    (lexeme_count(source) as f64 / LEXEME_CAP as f64).min(1.0)
}

/// Number of examples with an input or output literal embedded in `source`.
pub fn hardcoded_count(source: &str, examples: &[Example]) -> usize {
    let haystack = collapse_whitespace(source);
    let embedded = |lit: String| {
        let lit = collapse_whitespace(&lit);
        lit.chars().count() >= MIN_LITERAL_LEN && haystack.contains(&lit)
    };
    examples
        .iter()
        .filter(|e| embedded(e.input.literal_form()) || embedded(e.output.literal_form()))
        .count()
}

/// Memorization penalty: fraction of examples whose literals appear in the source.
pub fn omega_hard(source: &str, examples: &[Example]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    hardcoded_count(source, examples) as f64 / examples.len() as f64
}

/// Runs programs for one task through an executor.
#[derive(Clone, Copy)]
pub struct Evaluator<'a> {
    pub executor: &'a dyn Executor,
    pub function_name: &'a str,
    pub limits: ExecLimits,
}

impl<'a> Evaluator<'a> {
    pub fn new(executor: &'a dyn Executor, function_name: &'a str) -> Self {
        Evaluator {
            executor,
            function_name,
            limits: ExecLimits::default(),
        }
    }

    pub fn with_limits(mut self, limits: ExecLimits) -> Self {
        self.limits = limits;
        self
    }

    fn run(&self, source: &str, examples: &[Example]) -> Result<(Vec<CaseOutcome>, u64, String), ExecError> {
        if examples.is_empty() {
            return Ok((Vec::new(), 0, String::new()));
        }
        let cases = examples.iter().map(|e| e.input.clone()).collect();
        let job = ExecJob::new(source, self.function_name, cases).with_limits(self.limits);
        let res = self.executor.execute(&job)?;
        if res.per_case.len() != examples.len() {
            return Err(ExecError::BackendUnavailable(format!(
                "executor returned {} outcomes for {} cases",
                res.per_case.len(),
                examples.len()
            )));
        }
        Ok((res.per_case, res.wall_time_ms, res.diagnostics))
    }

    pub fn evaluate(&self, source: &str, examples: &[Example], origin: Origin) -> Result<EvalReport, ExecError> {
        let (outcomes, wall, diag) = self.run(source, examples)?;
        Ok(EvalReport::from_outcomes(examples, &outcomes, origin, wall, &diag))
    }

    /// Raw per-case outcomes on the inputs of `examples`.
    pub fn outcomes(&self, source: &str, examples: &[Example]) -> Result<Vec<CaseOutcome>, ExecError> {
        Ok(self.run(source, examples)?.0)
    }

    /// Fraction of `examples` answered correctly.
    pub fn fitness(&self, source: &str, examples: &[Example]) -> Result<f64, ExecError> {
        Ok(self.evaluate(source, examples, Origin::Current)?.accuracy)
    }

    /// Scores `source` on a stage. Replay cases are part of the current
    /// slice, so their outcomes are reused instead of executed twice; replay
    /// accuracy is reported but does not enter the total.
    pub fn stage_score(&self, source: &str, slice: &StageSlice, penalties: Penalties) -> Result<StageEval, ExecError> {
        let (outcomes, wall, diag) = self.run(source, &slice.current)?;
        let current = EvalReport::from_outcomes(&slice.current, &outcomes, Origin::Current, wall, &diag);

        let by_input: HashMap<String, &CaseOutcome> = slice
            .current
            .iter()
            .zip(&outcomes)
            .map(|(e, o)| (e.input.serialize(), o))
            .collect();
        let mut replay_outcomes = Vec::with_capacity(slice.replay.len());
        let mut missing = Vec::new();
        for (i, e) in slice.replay.iter().enumerate() {
            match by_input.get(&e.input.serialize()) {
                Some(o) => replay_outcomes.push(Some((*o).clone())),
                None => {
                    replay_outcomes.push(None);
                    missing.push(i);
                }
            }
        }
        let mut replay_wall = 0;
        if !missing.is_empty() {
            let extra: Vec<Example> = missing.iter().map(|&i| slice.replay[i].clone()).collect();
            let (outs, w, _) = self.run(source, &extra)?;
            replay_wall = w;
            for (&i, o) in missing.iter().zip(outs) {
                replay_outcomes[i] = Some(o);
            }
        }
        let replay_outcomes: Vec<CaseOutcome> = replay_outcomes.into_iter().map(|o| o.expect("filled")).collect();
        let replay = EvalReport::from_outcomes(&slice.replay, &replay_outcomes, Origin::Replay, replay_wall, &diag);

        let score = StageScore::new(
            current.accuracy,
            omega_comp(source),
            omega_hard(source, &slice.current),
            penalties,
        );
        Ok(StageEval { score, current, replay })
    }

    /// Accuracy on the task's hidden examples.
    pub fn heldout_eval(&self, source: &str, task: &Task) -> Result<EvalReport, ExecError> {
        self.evaluate(source, task.hidden(), Origin::Heldout)
    }
}
