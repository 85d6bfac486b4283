//! Execution of candidate programs on batches of inputs.
//!
//! [`SubprocessExecutor`] talks to an external runner over a one-shot
//! newline-delimited JSON protocol; [`FakeExecutor`] answers from a table so
//! the engine can be exercised without a guest interpreter.

mod fake;
mod subprocess;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::Value;

pub use fake::{FakeExecutor, TableEntry, UNTABULATED};
pub use subprocess::{SubprocessExecutor, RUNNER_ENV};

pub const DEFAULT_TIMEOUT_MS: u64 = 2000;
pub const DEFAULT_MEMORY_CAP_MB: u64 = 256;
/// Guest stderr kept in feedback artifacts.
pub const DIAGNOSTIC_LIMIT: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CaseOutcome {
    Ok {
        value: Value,
    },
    #[serde(rename = "error")]
    GuestError {
        message: String,
    },
    Timeout,
}

impl CaseOutcome {
    pub fn ok(value: Value) -> Self {
        CaseOutcome::Ok { value }
    }

    pub fn error(message: impl Into<String>) -> Self {
        CaseOutcome::GuestError {
            message: message.into(),
        }
    }

    pub fn value(&self) -> Option<&Value> {
        match self {
            CaseOutcome::Ok { value } => Some(value),
            _ => None,
        }
    }

    /// Short human rendering for prompts and reports.
    pub fn describe(&self) -> String {
        match self {
            CaseOutcome::Ok { value } => value.literal_form(),
            CaseOutcome::GuestError { message } => format!("error: {message}"),
            CaseOutcome::Timeout => "timeout".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecJob {
    pub program_source: String,
    pub function_name: String,
    pub cases: Vec<Value>,
    pub timeout_ms: u64,
    pub memory_cap_mb: u64,
}

impl ExecJob {
    pub fn new(source: &str, function_name: &str, cases: Vec<Value>) -> Self {
        ExecJob {
            program_source: source.to_string(),
            function_name: function_name.to_string(),
            cases,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            memory_cap_mb: DEFAULT_MEMORY_CAP_MB,
        }
    }

    pub fn with_limits(mut self, limits: ExecLimits) -> Self {
        self.timeout_ms = limits.timeout_ms;
        self.memory_cap_mb = limits.memory_cap_mb;
        self
    }

    pub fn validate(&self) -> Result<(), ExecError> {
        if self.timeout_ms == 0 {
            return Err(ExecError::InvalidJob("timeout_ms must be positive".into()));
        }
        if self.cases.is_empty() {
            return Err(ExecError::InvalidJob("a job needs at least one case".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecLimits {
    pub timeout_ms: u64,
    pub memory_cap_mb: u64,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits {
            timeout_ms: DEFAULT_TIMEOUT_MS,
            memory_cap_mb: DEFAULT_MEMORY_CAP_MB,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecResult {
    pub per_case: Vec<CaseOutcome>,
    pub wall_time_ms: u64,
    /// Tail of the runner's stderr, at most [`DIAGNOSTIC_LIMIT`] bytes.
    pub diagnostics: String,
}

#[derive(Debug, Error)]
pub enum ExecError {
    /// The runner could not be started or answered outside the protocol.
    /// Infrastructure failure: aborts the run.
    #[error("executor backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid job: {0}")]
    InvalidJob(String),
}

pub trait Executor: Send + Sync {
    fn execute(&self, job: &ExecJob) -> Result<ExecResult, ExecError>;
}

impl<E: Executor + ?Sized> Executor for &E {
    fn execute(&self, job: &ExecJob) -> Result<ExecResult, ExecError> {
        (**self).execute(job)
    }
}

impl<E: Executor + ?Sized> Executor for Box<E> {
    fn execute(&self, job: &ExecJob) -> Result<ExecResult, ExecError> {
        (**self).execute(job)
    }
}

/// Keeps the last `limit` bytes of `text`, on a char boundary.
pub(crate) fn truncate_tail(text: &str, limit: usize) -> String {
    if text.len() <= limit {
        return text.to_string();
    }
    let mut start = text.len() - limit;
    while !text.is_char_boundary(start) {
        start += 1;
    }
    text[start..].to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_wire_form() {
        let ok = CaseOutcome::ok(Value::int_list([2, 2, 3]));
        assert_eq!(
            serde_json::to_string(&ok).unwrap(),
            r#"{"status":"ok","value":{"k":"l","v":[{"k":"i","v":2},{"k":"i","v":2},{"k":"i","v":3}]}}"#
        );
        assert_eq!(
            serde_json::to_string(&CaseOutcome::error("boom")).unwrap(),
            r#"{"status":"error","message":"boom"}"#
        );
        assert_eq!(
            serde_json::to_string(&CaseOutcome::Timeout).unwrap(),
            r#"{"status":"timeout"}"#
        );
        let back: CaseOutcome = serde_json::from_str(r#"{"status":"timeout"}"#).unwrap();
        assert_eq!(back, CaseOutcome::Timeout);
    }

    #[test]
    fn job_validation() {
        let mut job = ExecJob::new("def f(x): return x", "f", vec![]);
        assert!(job.validate().is_err());
        job.cases.push(Value::Int(1));
        assert!(job.validate().is_ok());
        job.timeout_ms = 0;
        assert!(job.validate().is_err());
    }

    #[test]
    fn tail_truncation() {
        assert_eq!(truncate_tail("abcdef", 3), "def");
        assert_eq!(truncate_tail("ab", 3), "ab");
        assert_eq!(truncate_tail("aé", 1), "");
    }
}
