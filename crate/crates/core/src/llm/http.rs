use std::thread;
use std::time::Duration;

use serde_json::json;

use super::{ChatRequest, ChatResponse, InFlight, LlmClient, LlmError, UsageLedger, DEFAULT_IN_FLIGHT};

pub const ENV_API_URL: &str = "LLM_API_URL";
pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_MODEL: &str = "LLM_MODEL";

const COMPLETIONS_PATH: &str = "/chat/completions";

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub max_retries: u32,
    pub backoff_base: Duration,
    pub request_timeout: Duration,
    pub in_flight: usize,
}

impl HttpConfig {
    pub fn new(url: &str, model: &str) -> Self {
        HttpConfig {
            url: url.to_string(),
            api_key: None,
            model: model.to_string(),
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
            request_timeout: Duration::from_secs(180),
            in_flight: DEFAULT_IN_FLIGHT,
        }
    }

    /// Reads the endpoint from the environment; `None` when the URL is unset.
    pub fn from_env() -> Option<Self> {
        let url = std::env::var(ENV_API_URL).ok().filter(|u| !u.trim().is_empty())?;
        let model = std::env::var(ENV_MODEL).unwrap_or_default();
        let mut cfg = HttpConfig::new(url.trim(), &model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Some(cfg)
    }

    /// The URL as given if it already names the completions route, else with it appended.
    pub fn endpoint(&self) -> String {
        let base = self.url.trim_end_matches('/');
        if base.ends_with(COMPLETIONS_PATH) {
            base.to_string()
        } else {
            format!("{base}{COMPLETIONS_PATH}")
        }
    }
}

/// Blocking client for OpenAI-style chat completion endpoints.
pub struct HttpClient {
    config: HttpConfig,
    agent: ureq::Agent,
    ledger: UsageLedger,
    gate: InFlight,
}

enum Failure {
    Retryable(String),
    Fatal(LlmError),
}

impl HttpClient {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout))
            .build()
            .into();
        HttpClient {
            gate: InFlight::new(config.in_flight),
            config,
            agent,
            ledger: UsageLedger::default(),
        }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<ChatResponse, Failure> {
        let mut req = self.agent.post(self.config.endpoint());
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Failure::Retryable(format!("transport: {e}")))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Failure::Retryable(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Failure::Fatal(LlmError::Unavailable(format!(
                "HTTP {status}: {}",
                text.chars().take(300).collect::<String>()
            ))));
        }
        let raw: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| Failure::Fatal(LlmError::MalformedResponse(e.to_string())))?;
        parse_completion(&raw).map_err(Failure::Fatal)
    }
}

pub(crate) fn parse_completion(raw: &serde_json::Value) -> Result<ChatResponse, LlmError> {
    let content = raw
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .filter(|c| !c.is_empty())
        .ok_or_else(|| LlmError::MalformedResponse("no choices[0].message.content".into()))?;
    let count = |key: &str| {
        raw.pointer(&format!("/usage/{key}"))
            .and_then(|v| v.as_u64())
            .unwrap_or(0)
    };
    Ok(ChatResponse {
        content: content.to_string(),
        prompt_tokens: count("prompt_tokens"),
        completion_tokens: count("completion_tokens"),
    })
}

impl LlmClient for HttpClient {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let model = if req.model.is_empty() {
            &self.config.model
        } else {
            &req.model
        };
        let body = json!({
            "model": model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let _slot = self.gate.acquire();
        let mut delay = self.config.backoff_base;
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                self.ledger.record_retry();
                log::warn!("LLM call failed ({last}); retry {attempt} in {delay:?}");
                thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Ok(resp) => {
                    self.ledger.record(req, &resp);
                    return Ok(resp);
                }
                Err(Failure::Retryable(msg)) => last = msg,
                Err(Failure::Fatal(e)) => {
                    self.ledger.record_failure();
                    return Err(e);
                }
            }
        }
        self.ledger.record_failure();
        Err(LlmError::Unavailable(format!(
            "{last} after {} retries",
            self.config.max_retries
        )))
    }

    fn ledger(&self) -> &UsageLedger {
        &self.ledger
    }

    fn model(&self) -> &str {
        &self.config.model
    }
}
