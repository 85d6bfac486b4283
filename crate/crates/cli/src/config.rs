use std::path::{Path, PathBuf};

use iosynth_core::catalog::{Family, Level, Task};
use iosynth_core::engine::EngineConfig;
use iosynth_core::harness::Mode;
use serde::{Deserialize, Serialize};

/// How candidate programs are executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExecutorConfig {
    /// A runner process speaking the JSON-lines protocol.
    Subprocess { command: Vec<String> },
    /// A precomputed outcome table.
    Table { path: PathBuf },
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig::Subprocess {
            command: vec!["python3".into(), "-m".into(), "guest_runner".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskFilter {
    pub ids: Vec<String>,
    pub families: Vec<Family>,
    pub levels: Vec<Level>,
}

impl TaskFilter {
    /// Tasks passing every non-empty filter. Unknown ids are an error.
    pub fn select(&self, tasks: Vec<Task>) -> Result<Vec<Task>, String> {
        if let Some(missing) = self.ids.iter().find(|id| !tasks.iter().any(|t| &t.id == *id)) {
            return Err(format!("unknown task {missing:?}"));
        }
        Ok(tasks
            .into_iter()
            .filter(|t| self.ids.is_empty() || self.ids.contains(&t.id))
            .filter(|t| self.families.is_empty() || self.families.contains(&t.family))
            .filter(|t| self.levels.is_empty() || self.levels.contains(&t.level))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub engine: EngineConfig,
    pub executor: ExecutorConfig,
    pub tasks: TaskFilter,
    pub mode: Mode,
    /// Samples per task for the `bon` and `sc` baselines.
    pub samples: usize,
    /// Scripted model replies; without one the HTTP endpoint is used.
    pub mock: Option<PathBuf>,
    /// Exported benchmark to load instead of generating the catalog.
    pub benchmark: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            engine: EngineConfig::default(),
            executor: ExecutorConfig::default(),
            tasks: TaskFilter::default(),
            mode: Mode::Dio,
            samples: 40,
            mock: None,
            benchmark: None,
            out: PathBuf::from("out"),
            workers: 4,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<(), String> {
        self.engine.validate()?;
        if self.samples == 0 {
            return Err("samples must be at least 1".into());
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        if let ExecutorConfig::Subprocess { command } = &self.executor {
            if command.is_empty() {
                return Err("executor command is empty".into());
            }
        }
        Ok(())
    }
}
