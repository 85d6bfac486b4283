//! Suites of runs, baselines and the reports built from them.

mod diagnostics;
mod rundir;
mod tts;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Family, Level, Task};
use crate::engine::{Checkpoint, Engine, EngineConfig, EngineError, RunRecord};
use crate::executor::Executor;
use crate::llm::LlmClient;

pub use diagnostics::{
    classify_trajectory, overfit_diagnostics, trajectory_table, InvalidSequence, OverfitRow, TrajectoryClass,
    TrajectoryRow, DEFAULT_EPS_FRAC,
};
pub use rundir::{events_jsonl, read_report, write_run_dir, write_tables, REPORT_FILE};
pub use tts::run_tts_baselines;

/// Iterations at which single-stage runs are checkpointed.
pub const FLAT_CHECKPOINTS: [usize; 4] = [3, 6, 12, 20];

/// Search-based suite modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    Dio,
    AblateCe,
    AblateTpp,
    AblateEf,
    Flat,
}

impl SearchMode {
    pub fn label(self) -> &'static str {
        match self {
            SearchMode::Dio => "dio",
            SearchMode::AblateCe => "ablate-ce",
            SearchMode::AblateTpp => "ablate-tpp",
            SearchMode::AblateEf => "ablate-ef",
            SearchMode::Flat => "flat",
        }
    }

    /// The engine configuration this mode runs with.
    pub fn apply(self, base: &EngineConfig) -> EngineConfig {
        let mut cfg = base.clone();
        if matches!(self, SearchMode::AblateCe | SearchMode::Flat) {
            cfg.stages = 1;
        }
        if matches!(self, SearchMode::AblateTpp | SearchMode::Flat) {
            cfg.prompt.tpp = false;
        }
        if matches!(self, SearchMode::AblateEf | SearchMode::Flat) {
            cfg.prompt.explicit_feedback = false;
        }
        cfg
    }
}

/// Test-time-scaling baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TtsVariant {
    Direct,
    BestOfN,
    SelfConsistency,
}

impl TtsVariant {
    pub fn label(self) -> &'static str {
        match self {
            TtsVariant::Direct => "direct",
            TtsVariant::BestOfN => "bon",
            TtsVariant::SelfConsistency => "sc",
        }
    }
}

/// Every mode a suite can run in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Dio,
    AblateCe,
    AblateTpp,
    AblateEf,
    Flat,
    Direct,
    #[serde(rename = "bon")]
    BestOfN,
    #[serde(rename = "sc")]
    SelfConsistency,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Dio,
        Mode::AblateCe,
        Mode::AblateTpp,
        Mode::AblateEf,
        Mode::Flat,
        Mode::Direct,
        Mode::BestOfN,
        Mode::SelfConsistency,
    ];

    pub fn search(self) -> Option<SearchMode> {
        Some(match self {
            Mode::Dio => SearchMode::Dio,
            Mode::AblateCe => SearchMode::AblateCe,
            Mode::AblateTpp => SearchMode::AblateTpp,
            Mode::AblateEf => SearchMode::AblateEf,
            Mode::Flat => SearchMode::Flat,
            _ => return None,
        })
    }

    pub fn tts(self) -> Option<TtsVariant> {
        Some(match self {
            Mode::Direct => TtsVariant::Direct,
            Mode::BestOfN => TtsVariant::BestOfN,
            Mode::SelfConsistency => TtsVariant::SelfConsistency,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match (self.search(), self.tts()) {
            (Some(m), _) => m.label(),
            (_, Some(v)) => v.label(),
            _ => unreachable!("every mode is a search mode or a baseline"),
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.label() == s)
    }
}

/// Which components were active for a suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub curriculum: bool,
    pub stages: usize,
    pub tpp: bool,
    pub explicit_feedback: bool,
    /// Samples per task for baselines.
    pub samples: Option<usize>,
}

impl AblationFlags {
    pub fn of(cfg: &EngineConfig, samples: Option<usize>) -> Self {
        AblationFlags {
            curriculum: cfg.stages > 1,
            stages: cfg.stages,
            tpp: cfg.prompt.tpp,
            explicit_feedback: cfg.prompt.explicit_feedback,
            samples,
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("sample count must be at least 1")]
    InvalidSamples,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {detail}")]
    Malformed { path: String, detail: String },
}

/// What a suite keeps of one completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task_id: String,
    pub family: Family,
    pub level: Level,
    pub mode: String,
    pub hidden_accuracy: f64,
    pub solved: bool,
    pub visible_accuracy: f64,
    pub iterations: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub final_source_len: usize,
    pub copy_frequency: f64,
    pub early_stop: bool,
    /// Character length of each stage's best program.
    pub stage_lengths: Vec<usize>,
    pub checkpoints: Vec<Checkpoint>,
    /// Path of the full record inside the run directory.
    pub record: String,
}

impl TaskSummary {
    pub fn of(record: &RunRecord) -> Self {
        TaskSummary {
            task_id: record.task_id.clone(),
            family: record.family,
            level: record.level,
            mode: record.mode.clone(),
            hidden_accuracy: record.hidden.accuracy,
            solved: record.solved,
            visible_accuracy: record.final_visible_accuracy,
            iterations: record.iterations_run,
            prompt_tokens: record.usage.prompt_tokens,
            completion_tokens: record.usage.completion_tokens,
            final_source_len: record.final_source.chars().count(),
            copy_frequency: record.copy_frequency,
            early_stop: record.early_stop,
            stage_lengths: record.stage_bests.iter().map(|b| b.source_len).collect(),
            checkpoints: record.checkpoints.clone(),
            record: format!("runs/{}/record.json", record.task_id),
        }
    }

    /// Perfect on every visible example, not on the hidden set.
    pub fn overfit(&self) -> bool {
        self.visible_accuracy >= 1.0 && !self.solved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task_id: String,
    pub error: String,
    pub infrastructure: bool,
}

impl TaskFailure {
    fn of(task: &Task, e: &EngineError) -> Self {
        TaskFailure {
            task_id: task.id.clone(),
            error: e.to_string(),
            infrastructure: e.is_infrastructure(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub level: Option<Level>,
    pub tasks: usize,
    pub solved: usize,
    pub pass_rate: f64,
    pub mean_sample_pass_ratio: f64,
}

impl LevelMetrics {
    fn over<'t>(level: Option<Level>, tasks: impl Iterator<Item = &'t TaskSummary>) -> Self {
        let (mut n, mut solved, mut acc) = (0, 0, 0.0);
        for t in tasks {
            n += 1;
            solved += usize::from(t.solved);
            acc += t.hidden_accuracy;
        }
        let mean = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
        LevelMetrics {
            level,
            tasks: n,
            solved,
            pass_rate: mean(solved as f64),
            mean_sample_pass_ratio: mean(acc),
        }
    }
}

/// Mean hidden accuracy at one checkpoint, with the tasks that moved since
/// the previous one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub label: String,
    pub tasks: usize,
    pub mean_sample_pass_ratio: f64,
    pub improved: usize,
    pub regressed: usize,
}

fn checkpoint_curve(tasks: &[TaskSummary]) -> Vec<CurvePoint> {
    let mut labels: Vec<&str> = Vec::new();
    for t in tasks {
        for c in &t.checkpoints {
            if !labels.contains(&c.label.as_str()) {
                labels.push(&c.label);
            }
        }
    }
    labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let at = |t: &TaskSummary, l: &str| t.checkpoints.iter().find(|c| c.label == l).map(|c| c.hidden_accuracy);
            let (mut n, mut sum, mut improved, mut regressed) = (0, 0.0, 0, 0);
            for t in tasks {
                let Some(acc) = at(t, label) else { continue };
                n += 1;
                sum += acc;
                if let Some(prev) = i.checked_sub(1).and_then(|j| at(t, labels[j])) {
                    improved += usize::from(acc > prev);
                    regressed += usize::from(acc < prev);
                }
            }
            CurvePoint {
                label: label.to_string(),
                tasks: n,
                mean_sample_pass_ratio: if n == 0 { 0.0 } else { sum / n as f64 },
                improved,
                regressed,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub mode: String,
    pub flags: Option<AblationFlags>,
    pub tasks: Vec<TaskSummary>,
    /// Tasks whose run did not complete; they are left out of every metric.
    pub failures: Vec<TaskFailure>,
    pub overall: LevelMetrics,
    pub levels: Vec<LevelMetrics>,
    pub pass_rate: f64,
    pub mean_sample_pass_ratio: f64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub iterations: usize,
    pub token_per_iter: f64,
    pub checkpoint_curve: Vec<CurvePoint>,
}

impl SuiteReport {
    pub fn aggregate(
        mode: &str,
        flags: Option<AblationFlags>,
        tasks: Vec<TaskSummary>,
        failures: Vec<TaskFailure>,
    ) -> Self {
        let overall = LevelMetrics::over(None, tasks.iter());
        let levels = Level::ALL
            .into_iter()
            .map(|l| LevelMetrics::over(Some(l), tasks.iter().filter(|t| t.level == l)))
            .filter(|m| m.tasks > 0)
            .collect();
        let prompt_tokens = tasks.iter().map(|t| t.prompt_tokens).sum();
        let completion_tokens = tasks.iter().map(|t| t.completion_tokens).sum();
        let iterations = tasks.iter().map(|t| t.iterations).sum();
        let token_per_iter = if iterations == 0 {
            0.0
        } else {
            (prompt_tokens + completion_tokens) as f64 / iterations as f64
        };
        SuiteReport {
            mode: mode.to_string(),
            flags,
            checkpoint_curve: checkpoint_curve(&tasks),
            pass_rate: overall.pass_rate,
            mean_sample_pass_ratio: overall.mean_sample_pass_ratio,
            overall,
            levels,
            prompt_tokens,
            completion_tokens,
            iterations,
            token_per_iter,
            tasks,
            failures,
        }
    }

    /// One report over the tasks of several. Differing modes or flags are
    /// recorded as `mixed` and absent.
    pub fn merge(reports: &[SuiteReport]) -> SuiteReport {
        let first = reports.first();
        let same = |f: &dyn Fn(&SuiteReport) -> bool| reports.iter().all(f);
        let mode = match first {
            Some(r) if same(&|x| x.mode == r.mode) => r.mode.clone(),
            Some(_) => "mixed".into(),
            None => String::new(),
        };
        let flags = first.and_then(|r| {
            if same(&|x| x.flags == r.flags) {
                r.flags.clone()
            } else {
                None
            }
        });
        let tasks = reports.iter().flat_map(|r| r.tasks.iter().cloned()).collect();
        let failures = reports.iter().flat_map(|r| r.failures.iter().cloned()).collect();
        SuiteReport::aggregate(&mode, flags, tasks, failures)
    }

    /// Deterministic pretty JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn infrastructure_failure(&self) -> bool {
        self.failures.iter().any(|f| f.infrastructure)
    }
}

/// A finished suite: the report and the full record of every completed run.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub report: SuiteReport,
    pub records: Vec<RunRecord>,
}

impl SuiteRun {
    fn collect(mode: &str, flags: AblationFlags, tasks: &[Task], results: Vec<Result<RunRecord, EngineError>>) -> Self {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for (task, result) in tasks.iter().zip(results) {
            match result {
                Ok(r) => records.push(r),
                Err(e) => {
                    log::error!("task {}: {e}", task.id);
                    failures.push(TaskFailure::of(task, &e));
                }
            }
        }
        let summaries = records.iter().map(TaskSummary::of).collect();
        SuiteRun {
            report: SuiteReport::aggregate(mode, Some(flags), summaries, failures),
            records,
        }
    }
}

/// Runs `f` over `tasks` on at most `workers` threads, keeping task order.
fn per_task<T, F>(tasks: &[Task], workers: usize, f: F) -> Result<Vec<T>, HarnessError>
where
    T: Send,
    F: Fn(&Task) -> T + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    Ok(pool.install(|| tasks.par_iter().map(&f).collect()))
}

/// Hidden accuracy of the intermediate bests: one per stage for curriculum
/// runs, at [`FLAT_CHECKPOINTS`] otherwise. Runs after the search, so the
/// search itself never sees these numbers.
pub fn checkpoints(engine: &Engine, task: &Task, record: &RunRecord) -> Result<Vec<Checkpoint>, EngineError> {
    let evaluator = engine.evaluator(task);
    let mut picks: Vec<(String, String)> = Vec::new();
    if record.stage_bests.len() > 1 {
        for b in &record.stage_bests {
            picks.push((format!("stage{}", b.stage), b.candidate_id.clone()));
        }
    } else {
        for k in FLAT_CHECKPOINTS
            .into_iter()
            .filter(|&k| k <= record.config.total_iterations)
        {
            // an early stop freezes the best from then on
            let id = record
                .iteration_bests
                .get(k - 1)
                .map_or(&record.final_candidate_id, |b| &b.candidate_id);
            picks.push((format!("iter{k}"), id.clone()));
        }
    }
    let mut cache: BTreeMap<String, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(picks.len());
    for (label, id) in picks {
        let acc = match cache.get(&id) {
            Some(&a) => a,
            None => {
                let source = record
                    .source_of(&id)
                    .ok_or_else(|| EngineError::Task(task.id.clone(), format!("no source for candidate {id}")))?;
                let a = evaluator.heldout_eval(source, task)?.accuracy;
                cache.insert(id.clone(), a);
                a
            }
        };
        out.push(Checkpoint {
            label,
            candidate_id: id,
            hidden_accuracy: acc,
        });
    }
    Ok(out)
}

/// Runs the search on every task under `mode`. A failing task is recorded
/// and the suite goes on.
pub fn run_suite(
    tasks: &[Task],
    config: &EngineConfig,
    mode: SearchMode,
    llm: &dyn LlmClient,
    executor: &dyn Executor,
    workers: usize,
) -> Result<SuiteRun, HarnessError> {
    let cfg = mode.apply(config);
    let results = per_task(tasks, workers, |task| {
        let engine = Engine::new(cfg.clone(), llm, executor)?;
        let mut record = engine.run_task(task, &task.id)?;
        record.mode = mode.label().to_string();
        record.checkpoints = checkpoints(&engine, task, &record)?;
        Ok(record)
    })?;
    Ok(SuiteRun::collect(
        mode.label(),
        AblationFlags::of(&cfg, None),
        tasks,
        results,
    ))
}

/// Autonomous discovery on every task.
pub fn run_autonomous_suite(
    tasks: &[Task],
    config: &EngineConfig,
    llm: &dyn LlmClient,
    executor: &dyn Executor,
    workers: usize,
) -> Result<SuiteRun, HarnessError> {
    let results = per_task(tasks, workers, |task| {
        let engine = Engine::new(config.clone(), llm, executor)?;
        let mut record = engine.run_autonomous(task, &task.id)?;
        record.mode = "autonomous".into();
        Ok(record)
    })?;
    let flags = AblationFlags {
        curriculum: false,
        stages: 1,
        tpp: config.prompt.tpp,
        explicit_feedback: config.prompt.explicit_feedback,
        samples: None,
    };
    Ok(SuiteRun::collect("autonomous", flags, tasks, results))
}
