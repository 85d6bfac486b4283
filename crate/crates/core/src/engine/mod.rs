//! Island-model evolutionary search over curriculum stages.

mod autonomous;
mod island;
mod stage;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidate::Candidate;
use crate::catalog::{Family, Level, Task};
use crate::curriculum::{build_plan, InvalidStageCount, PlanSummary, DEFAULT_REPLAY_CAP, DEFAULT_STAGES};
use crate::diff::{apply_diffs, parse_response, DiffApplyKind, ParsedResponse};
use crate::executor::{ExecError, ExecLimits, Executor, DEFAULT_MEMORY_CAP_MB, DEFAULT_TIMEOUT_MS};
use crate::llm::{LlmClient, LlmError, Usage, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE};
use crate::prompt::{template_hash, PromptOptions, TaskHeader, TEMPLATE_VERSION};
use crate::scoring::{omega_hard, EvalReport, Evaluator, Penalties, StageScore, DEFAULT_LAMBDA};

pub use autonomous::{AutonomousConfig, AutonomousTrace};
pub use island::{
    build_context, insert_child, migrate, sample_parent, ContextPick, InsertOutcome, Island, SamplingMix,
    DEFAULT_POPULATION_CAP, SOFTMAX_TEMPERATURE,
};
pub use stage::StageRunner;

/// Stage-1 program for every task.
pub fn initial_program(function_name: &str) -> String {
    format!("def {function_name}(x):\n    return None\n")
}

/// The program a model reply describes: diffs applied to `parent`, or a
/// full rewrite. Unusable replies map to the event outcome they cause.
pub fn derive_source(parent: &str, reply: &str) -> Result<String, EventOutcome> {
    match parse_response(reply) {
        ParsedResponse::Diffs(blocks) => apply_diffs(parent, &blocks).map_err(|e| match e.kind {
            DiffApplyKind::NoMatch => EventOutcome::NoMatch,
            DiffApplyKind::AmbiguousMatch => EventOutcome::AmbiguousMatch,
        }),
        ParsedResponse::FullRewrite(s) => Ok(s),
        ParsedResponse::ParseFailure => Err(EventOutcome::ParseFailure),
    }
}

/// Iteration budgets with a recorded preset each.
pub const ITERATION_PRESETS: [usize; 2] = [20, 40];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub islands: usize,
    pub total_iterations: usize,
    pub stages: usize,
    pub migration_period: usize,
    pub sampling_mix: SamplingMix,
    pub lambda_c: f64,
    pub lambda_h: f64,
    pub timeout_ms: u64,
    pub memory_cap_mb: u64,
    pub seed: u64,
    pub population_cap: usize,
    pub replay_cap: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub prompt: PromptOptions,
    /// Stop the final stage as soon as some candidate passes every example.
    pub early_exit: bool,
    /// Run islands of one iteration concurrently.
    pub parallel: bool,
    pub autonomous: AutonomousConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            islands: 3,
            total_iterations: ITERATION_PRESETS[0],
            stages: DEFAULT_STAGES,
            migration_period: 5,
            sampling_mix: SamplingMix::default(),
            lambda_c: DEFAULT_LAMBDA,
            lambda_h: DEFAULT_LAMBDA,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            memory_cap_mb: DEFAULT_MEMORY_CAP_MB,
            seed: 0,
            population_cap: DEFAULT_POPULATION_CAP,
            replay_cap: DEFAULT_REPLAY_CAP,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            prompt: PromptOptions::default(),
            early_exit: true,
            parallel: true,
            autonomous: AutonomousConfig::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.sampling_mix.validate()?;
        if self.islands == 0 {
            return Err("islands must be at least 1".into());
        }
        if self.stages == 0 {
            return Err("stages must be at least 1".into());
        }
        if self.total_iterations < self.stages {
            return Err(format!(
                "total_iterations ({}) must be at least stages ({})",
                self.total_iterations, self.stages
            ));
        }
        if self.population_cap == 0 {
            return Err("population_cap must be at least 1".into());
        }
        if self.timeout_ms == 0 {
            return Err("timeout_ms must be positive".into());
        }
        for (name, v) in [
            ("lambda_c", self.lambda_c),
            ("lambda_h", self.lambda_h),
            ("temperature", self.temperature),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{name} must be a nonnegative number"));
            }
        }
        self.autonomous.validate()
    }

    pub fn penalties(&self) -> Penalties {
        Penalties {
            lambda_c: self.lambda_c,
            lambda_h: self.lambda_h,
        }
    }

    pub fn limits(&self) -> ExecLimits {
        ExecLimits {
            timeout_ms: self.timeout_ms,
            memory_cap_mb: self.memory_cap_mb,
        }
    }

    /// Iterations per stage: an even split, remainder to the last stages.
    pub fn stage_budgets(&self) -> Vec<usize> {
        let (base, rem) = (self.total_iterations / self.stages, self.total_iterations % self.stages);
        (0..self.stages)
            .map(|s| base + usize::from(s >= self.stages - rem))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error(transparent)]
    Curriculum(#[from] InvalidStageCount),
    #[error(transparent)]
    Backend(#[from] ExecError),
    #[error(transparent)]
    Llm(LlmError),
    #[error("task {0}: {1}")]
    Task(String, String),
}

impl EngineError {
    /// Errors caused by missing infrastructure rather than by the run itself.
    pub fn is_infrastructure(&self) -> bool {
        matches!(
            self,
            EngineError::Backend(ExecError::BackendUnavailable(_)) | EngineError::Llm(LlmError::Unavailable(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventOutcome {
    Inserted,
    DuplicateRejected,
    OutcompetedRejected,
    ParseFailure,
    NoMatch,
    AmbiguousMatch,
    LlmUnavailable,
    LlmMalformed,
}

impl From<InsertOutcome> for EventOutcome {
    fn from(o: InsertOutcome) -> Self {
        match o {
            InsertOutcome::Inserted => EventOutcome::Inserted,
            InsertOutcome::DuplicateRejected => EventOutcome::DuplicateRejected,
            InsertOutcome::OutcompetedRejected => EventOutcome::OutcompetedRejected,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokens {
    pub prompt: u64,
    pub completion: u64,
}

/// One mutation attempt on one island.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub iter: usize,
    pub stage: usize,
    pub island: usize,
    pub parent_id: String,
    pub child_id: Option<String>,
    pub outcome: EventOutcome,
    pub score: Option<StageScore>,
    pub tokens: Tokens,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBest {
    pub stage: usize,
    pub examples: usize,
    pub candidate_id: String,
    pub source: String,
    pub source_len: usize,
    pub score: StageScore,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationBest {
    pub iter: usize,
    pub stage: usize,
    pub candidate_id: String,
    pub total: f64,
    pub acc_curr: f64,
}

/// Hidden-set accuracy of an intermediate best, computed after the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub label: String,
    pub candidate_id: String,
    pub hidden_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task_id: String,
    pub family: Family,
    pub level: Level,
    pub run_key: String,
    pub mode: String,
    pub config: EngineConfig,
    pub prompt_template: String,
    pub prompt_template_hash: String,
    pub curriculum: Option<PlanSummary>,
    pub stage_bests: Vec<StageBest>,
    pub iteration_bests: Vec<IterationBest>,
    pub final_candidate_id: String,
    pub final_source: String,
    /// Accuracy of the final program on every example the search saw.
    pub final_visible_accuracy: f64,
    pub hidden: EvalReport,
    pub hidden_eval_count: usize,
    pub solved: bool,
    pub iterations_run: usize,
    pub early_stop: bool,
    pub usage: Usage,
    pub llm_failures: usize,
    pub skipped_iterations: usize,
    /// Memorization rule applied to the final program and the visible set.
    pub copy_frequency: f64,
    #[serde(default)]
    pub checkpoints: Vec<Checkpoint>,
    #[serde(default)]
    pub autonomous: Option<AutonomousTrace>,
    #[serde(skip)]
    pub events: Vec<Event>,
    /// Every generated program by candidate id.
    #[serde(skip)]
    pub candidates: BTreeMap<String, String>,
}

impl RunRecord {
    /// Source of a candidate by id, including stage seeds.
    pub fn source_of(&self, id: &str) -> Option<&str> {
        self.candidates.get(id).map(String::as_str)
    }
}

/// Mutable bookkeeping shared by the stages of one run.
#[derive(Debug, Default)]
pub(crate) struct RunState {
    pub run_key: String,
    pub next_call: usize,
    pub events: Vec<Event>,
    pub candidates: BTreeMap<String, String>,
    pub iteration_bests: Vec<IterationBest>,
    pub usage: Usage,
    pub llm_calls: usize,
    pub llm_unavailable: usize,
    pub llm_failures: usize,
    pub skipped: usize,
}

impl RunState {
    fn new(run_key: &str) -> Self {
        RunState {
            run_key: run_key.to_string(),
            ..Default::default()
        }
    }

    pub fn take_call_index(&mut self) -> usize {
        let i = self.next_call;
        self.next_call += 1;
        i
    }

    /// A dead endpoint: calls were made, every one failed as unavailable.
    fn llm_dead(&self) -> bool {
        self.llm_calls > 0 && self.llm_unavailable == self.llm_calls
    }
}

/// The search driver bound to one model client and one executor.
pub struct Engine<'a> {
    pub config: EngineConfig,
    pub llm: &'a dyn LlmClient,
    pub executor: &'a dyn Executor,
}

impl<'a> Engine<'a> {
    pub fn new(config: EngineConfig, llm: &'a dyn LlmClient, executor: &'a dyn Executor) -> Result<Self, EngineError> {
        config.validate().map_err(EngineError::Config)?;
        Ok(Engine { config, llm, executor })
    }

    pub fn evaluator<'t>(&'t self, task: &'t Task) -> Evaluator<'t> {
        Evaluator::new(self.executor, &task.function_name).with_limits(self.config.limits())
    }

    /// Runs the curriculum search on `task` and evaluates the result once on
    /// the hidden set.
    pub fn run_task(&self, task: &Task, run_key: &str) -> Result<RunRecord, EngineError> {
        let cfg = &self.config;
        let plan = build_plan(&task.visible, cfg.stages, cfg.replay_cap, cfg.seed)?;
        let header = TaskHeader::of(task);
        let evaluator = self.evaluator(task);
        let mut state = RunState::new(run_key);
        let budgets = cfg.stage_budgets();
        let last = plan.stages.len() - 1;

        let mut seed_source = initial_program(&task.function_name);
        let mut prev_best: Option<Candidate> = None;
        let mut stage_bests = Vec::new();
        let mut iter = 0;
        let mut early_stop = false;
        for (s, slice) in plan.stages.iter().enumerate() {
            let mut runner = StageRunner::new(
                self,
                &header,
                evaluator,
                slice.clone(),
                &seed_source,
                prev_best.as_ref(),
                iter,
                &mut state,
            )?;
            let mut used = 0;
            for _ in 0..budgets[s] {
                if s == last && cfg.early_exit && runner.solved() {
                    early_stop = true;
                    break;
                }
                iter += 1;
                used += 1;
                runner.step(iter, &mut state)?;
                if state.llm_dead() {
                    return Err(EngineError::Llm(LlmError::Unavailable(
                        "every model call of the run failed".into(),
                    )));
                }
            }
            let best = runner.best().clone();
            stage_bests.push(StageBest {
                stage: slice.index,
                examples: slice.current.len(),
                candidate_id: best.id.clone(),
                source: best.source.clone(),
                source_len: best.source.chars().count(),
                score: best.score,
                iterations: used,
            });
            seed_source = best.source.clone();
            prev_best = Some(best);
        }

        let best = prev_best.expect("at least one stage");
        let hidden = evaluator.heldout_eval(&best.source, task)?;
        Ok(self.finish(
            task,
            run_key,
            Some(plan.summary),
            stage_bests,
            best,
            hidden,
            iter,
            early_stop,
            state,
            None,
            &task.visible,
        ))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        task: &Task,
        run_key: &str,
        curriculum: Option<PlanSummary>,
        stage_bests: Vec<StageBest>,
        best: Candidate,
        hidden: EvalReport,
        iterations_run: usize,
        early_stop: bool,
        state: RunState,
        autonomous: Option<AutonomousTrace>,
        seen: &[crate::catalog::Example],
    ) -> RunRecord {
        RunRecord {
            task_id: task.id.clone(),
            family: task.family,
            level: task.level,
            run_key: run_key.to_string(),
            mode: String::new(),
            config: self.config.clone(),
            prompt_template: TEMPLATE_VERSION.to_string(),
            prompt_template_hash: template_hash(),
            curriculum,
            stage_bests,
            iteration_bests: state.iteration_bests,
            final_candidate_id: best.id.clone(),
            final_visible_accuracy: best.current.accuracy,
            copy_frequency: omega_hard(&best.source, seen),
            final_source: best.source,
            solved: hidden.solved(),
            hidden,
            hidden_eval_count: 1,
            iterations_run,
            early_stop,
            usage: state.usage,
            llm_failures: state.llm_failures,
            skipped_iterations: state.skipped,
            checkpoints: Vec::new(),
            autonomous,
            events: state.events,
            candidates: state.candidates,
        }
    }
}
