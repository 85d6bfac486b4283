//! Chat-completion clients: an HTTP client with retries and a scripted mock.

mod http;
mod mock;

use std::collections::BTreeMap;
use std::sync::{Condvar, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpClient, HttpConfig, ENV_API_KEY, ENV_API_URL, ENV_MODEL};
pub use mock::{MockScript, MockStep, ScriptedMock};

pub const DEFAULT_TEMPERATURE: f64 = 0.8;
pub const DEFAULT_MAX_TOKENS: u32 = 4096;
pub const DEFAULT_IN_FLIGHT: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Identifies the run issuing the call (task and mode).
    pub run_key: String,
    /// Position of this call in the run's call sequence, assigned by the caller
    /// before any parallel work so the numbering is schedule independent.
    pub call_index: usize,
}

impl ChatRequest {
    pub fn new(messages: Vec<Message>, run_key: &str, call_index: usize) -> Self {
        ChatRequest {
            model: String::new(),
            messages,
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
            run_key: run_key.to_string(),
            call_index,
        }
    }

    /// All message contents joined, used for hint matching.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LlmError {
    #[error("LLM unavailable: {0}")]
    Unavailable(String),
    #[error("malformed LLM response: {0}")]
    MalformedResponse(String),
    /// The mock saw a call its script does not allow. Aborts the run.
    #[error("mock script violation: {0}")]
    MockScriptViolation(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub calls: u64,
}

impl Usage {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    pub fn add(&mut self, r: &ChatResponse) {
        self.prompt_tokens += r.prompt_tokens;
        self.completion_tokens += r.completion_tokens;
        self.calls += 1;
    }

    pub fn merge(&mut self, other: &Usage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.calls += other.calls;
    }

    /// Tokens per search iteration.
    pub fn per_iteration(&self, iterations: usize) -> f64 {
        if iterations == 0 {
            0.0
        } else {
            self.total_tokens() as f64 / iterations as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerSnapshot {
    pub usage: Usage,
    pub retry_count: u64,
    pub failed_calls: u64,
    /// Usage per (run key, call index) bucket.
    pub buckets: BTreeMap<String, Usage>,
}

/// Thread-safe token accounting shared by a client's callers.
#[derive(Debug, Default)]
pub struct UsageLedger {
    inner: Mutex<LedgerSnapshot>,
}

impl UsageLedger {
    pub fn record(&self, req: &ChatRequest, resp: &ChatResponse) {
        let mut s = self.inner.lock().expect("ledger lock");
        s.usage.add(resp);
        s.buckets
            .entry(format!("{}#{:06}", req.run_key, req.call_index))
            .or_default()
            .add(resp);
    }

    pub fn record_retry(&self) {
        self.inner.lock().expect("ledger lock").retry_count += 1;
    }

    pub fn record_failure(&self) {
        self.inner.lock().expect("ledger lock").failed_calls += 1;
    }

    pub fn snapshot(&self) -> LedgerSnapshot {
        self.inner.lock().expect("ledger lock").clone()
    }
}

pub trait LlmClient: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError>;
    fn ledger(&self) -> &UsageLedger;
    /// Model id to stamp on requests, if the client has one.
    fn model(&self) -> &str {
        ""
    }
}

/// Counting semaphore bounding concurrent calls.
#[derive(Debug)]
pub(crate) struct InFlight {
    slots: Mutex<usize>,
    freed: Condvar,
}

pub(crate) struct Slot<'a>(&'a InFlight);

impl InFlight {
    pub(crate) fn new(cap: usize) -> Self {
        InFlight {
            slots: Mutex::new(cap.max(1)),
            freed: Condvar::new(),
        }
    }

    pub(crate) fn acquire(&self) -> Slot<'_> {
        let mut free = self.slots.lock().expect("in-flight lock");
        while *free == 0 {
            free = self.freed.wait(free).expect("in-flight lock");
        }
        *free -= 1;
        Slot(self)
    }
}

impl Drop for Slot<'_> {
    fn drop(&mut self) {
        *self.0.slots.lock().expect("in-flight lock") += 1;
        self.0.freed.notify_one();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn ledger_sums_under_concurrency() {
        let ledger = Arc::new(UsageLedger::default());
        std::thread::scope(|s| {
            for t in 0..8u64 {
                let ledger = ledger.clone();
                s.spawn(move || {
                    for i in 0..50u64 {
                        let req = ChatRequest::new(vec![], &format!("r{t}"), i as usize);
                        let resp = ChatResponse {
                            content: "x".into(),
                            prompt_tokens: t + i,
                            completion_tokens: 1,
                        };
                        ledger.record(&req, &resp);
                    }
                });
            }
        });
        let snap = ledger.snapshot();
        let expect_prompt: u64 = (0..8u64).flat_map(|t| (0..50u64).map(move |i| t + i)).sum();
        assert_eq!(snap.usage.prompt_tokens, expect_prompt);
        assert_eq!(snap.usage.completion_tokens, 400);
        assert_eq!(snap.usage.calls, 400);
        assert_eq!(snap.buckets.len(), 400);
        let bucket_total: u64 = snap.buckets.values().map(Usage::total_tokens).sum();
        assert_eq!(bucket_total, snap.usage.total_tokens());
    }

    #[test]
    fn in_flight_cap_bounds_concurrency() {
        let gate = InFlight::new(2);
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..6 {
                s.spawn(|| {
                    let _slot = gate.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(std::time::Duration::from_millis(10));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }

    #[test]
    fn per_iteration_tokens() {
        let u = Usage {
            prompt_tokens: 300,
            completion_tokens: 100,
            calls: 4,
        };
        assert_eq!(u.per_iteration(4), 100.0);
        assert_eq!(u.per_iteration(0), 0.0);
    }
}
