use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CaseOutcome, ExecError, ExecJob, ExecResult, Executor};
use crate::source::source_hash;
use crate::value::Value;

pub const UNTABULATED: &str = "untabulated";

/// One row of a fake-executor table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub source_hash: String,
    pub input: Value,
    pub outcome: CaseOutcome,
}

/// Answers jobs from a `(normalized source hash, input) -> outcome` table.
#[derive(Debug, Clone, Default)]
pub struct FakeExecutor {
    table: HashMap<(String, String), CaseOutcome>,
}

impl FakeExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = TableEntry>) -> Self {
        let mut fake = Self::new();
        for e in entries {
            fake.insert_hashed(e.source_hash, &e.input, e.outcome);
        }
        fake
    }

    pub fn insert(&mut self, source: &str, input: &Value, outcome: CaseOutcome) {
        self.insert_hashed(source_hash(source), input, outcome);
    }

    pub fn insert_hashed(&mut self, hash: String, input: &Value, outcome: CaseOutcome) {
        self.table.insert((hash, input.serialize()), outcome);
    }

    /// Tabulates `source` on every input with `behaviour`.
    pub fn tabulate<'a, I, F>(&mut self, source: &str, inputs: I, behaviour: F)
    where
        I: IntoIterator<Item = &'a Value>,
        F: Fn(&Value) -> CaseOutcome,
    {
        let hash = source_hash(source);
        for input in inputs {
            self.insert_hashed(hash.clone(), input, behaviour(input));
        }
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Rows sorted by key, for stable files.
    pub fn entries(&self) -> Vec<TableEntry> {
        let mut keys: Vec<_> = self.table.keys().collect();
        keys.sort();
        keys.into_iter()
            .map(|k| TableEntry {
                source_hash: k.0.clone(),
                input: Value::deserialize(&k.1).expect("keys are serialized values"),
                outcome: self.table[k].clone(),
            })
            .collect()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(&self.entries()).expect("table serializes");
        fs::write(path, text + "\n")
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let entries: Vec<TableEntry> =
            serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Ok(Self::from_entries(entries))
    }

    fn lookup(&self, hash: &str, input: &Value) -> CaseOutcome {
        self.table
            .get(&(hash.to_string(), input.serialize()))
            .cloned()
            .unwrap_or_else(|| CaseOutcome::error(UNTABULATED))
    }
}

impl Executor for FakeExecutor {
    fn execute(&self, job: &ExecJob) -> Result<ExecResult, ExecError> {
        job.validate()?;
        let hash = source_hash(&job.program_source);
        Ok(ExecResult {
            per_case: job.cases.iter().map(|c| self.lookup(&hash, c)).collect(),
            wall_time_ms: 0,
            diagnostics: String::new(),
        })
    }
}
