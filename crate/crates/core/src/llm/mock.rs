use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, LlmClient, LlmError, UsageLedger};

/// One scripted answer. `hint` must occur in the prompt for the step to fire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockStep {
    #[serde(default)]
    pub hint: String,
    pub response: String,
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

impl MockStep {
    pub fn new(hint: &str, response: &str) -> Self {
        MockStep {
            hint: hint.into(),
            response: response.into(),
            prompt_tokens: 0,
            completion_tokens: 0,
        }
    }

    pub fn with_usage(mut self, prompt_tokens: u64, completion_tokens: u64) -> Self {
        self.prompt_tokens = prompt_tokens;
        self.completion_tokens = completion_tokens;
        self
    }
}

/// A script shared by every run, or one script per run key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MockScript {
    Shared(Vec<MockStep>),
    PerRun(BTreeMap<String, Vec<MockStep>>),
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    fn steps(&self, run_key: &str) -> Option<&[MockStep]> {
        match self {
            MockScript::Shared(steps) => Some(steps),
            MockScript::PerRun(map) => map.get(run_key).map(Vec::as_slice),
        }
    }
}

/// Deterministic client answering `script[call_index]` for the request's run.
#[derive(Debug)]
pub struct ScriptedMock {
    script: MockScript,
    ledger: UsageLedger,
}

impl ScriptedMock {
    pub fn new(script: MockScript) -> Self {
        ScriptedMock {
            script,
            ledger: UsageLedger::default(),
        }
    }

    pub fn from_steps(steps: Vec<MockStep>) -> Self {
        Self::new(MockScript::Shared(steps))
    }
}

impl LlmClient for ScriptedMock {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let steps = self
            .script
            .steps(&req.run_key)
            .ok_or_else(|| LlmError::MockScriptViolation(format!("no script for run {}", req.run_key)))?;
        let step = steps
            .get(req.call_index)
            .ok_or_else(|| LlmError::MockScriptViolation("exhausted".into()))?;
        if !req.prompt_text().contains(&step.hint) {
            return Err(LlmError::MockScriptViolation(format!(
                "step {} expects hint {:?} in the prompt",
                req.call_index, step.hint
            )));
        }
        let resp = ChatResponse {
            content: step.response.clone(),
            prompt_tokens: step.prompt_tokens,
            completion_tokens: step.completion_tokens,
        };
        self.ledger.record(req, &resp);
        Ok(resp)
    }

    fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    fn model(&self) -> &str {
        "scripted-mock"
    }
}
