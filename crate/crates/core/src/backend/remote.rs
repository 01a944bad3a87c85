use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::{json, Value};

use super::{BackendError, LlmBackend, PromptRequest, Repair};

pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

/// Settings for an OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    /// Reads `PROACTIVE_LLM_URL`, `PROACTIVE_LLM_MODEL` and `PROACTIVE_LLM_KEY`.
    pub fn from_env() -> Result<RemoteConfig, BackendError> {
        let url = std::env::var("PROACTIVE_LLM_URL")
            .map_err(|_| BackendError::Config("PROACTIVE_LLM_URL is not set".into()))?;
        let model = std::env::var("PROACTIVE_LLM_MODEL").unwrap_or_else(|_| "deepseek-chat".to_string());
        let timeout = std::env::var("PROACTIVE_LLM_TIMEOUT_MS").ok().and_then(|v| v.parse().ok()).unwrap_or(60_000);
        Ok(RemoteConfig {
            url,
            model,
            api_key: std::env::var("PROACTIVE_LLM_KEY").ok(),
            timeout: Duration::from_millis(timeout),
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
        })
    }
}

/// Sends one request body and returns the decoded response body.
pub trait Transport: Send + Sync {
    fn post(&self, body: &Value) -> Result<Value, BackendError>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    timeout_ms: u64,
}

impl HttpTransport {
    pub fn new(cfg: &RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpTransport {
            client,
            url: cfg.url.clone(),
            api_key: cfg.api_key.clone(),
            timeout_ms: cfg.timeout.as_millis() as u64,
        })
    }
}

impl Transport for HttpTransport {
    fn post(&self, body: &Value) -> Result<Value, BackendError> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout(self.timeout_ms)
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(BackendError::Transport(format!("HTTP {status}: {}", truncate(&text, 300))));
        }
        resp.json().map_err(|e| BackendError::Transport(e.to_string()))
    }
}

/// Counting semaphore bounding concurrent remote calls.
struct Gate {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteBackend {
    model: String,
    transport: Box<dyn Transport>,
    gate: Gate,
}

impl RemoteBackend {
    pub fn new(cfg: &RemoteConfig) -> Result<Self, BackendError> {
        Ok(RemoteBackend::with_transport(&cfg.model, cfg.max_in_flight, Box::new(HttpTransport::new(cfg)?)))
    }

    pub fn from_env() -> Result<Self, BackendError> {
        RemoteBackend::new(&RemoteConfig::from_env()?)
    }

    pub fn with_transport(model: &str, max_in_flight: usize, transport: Box<dyn Transport>) -> Self {
        RemoteBackend {
            model: model.to_string(),
            transport,
            gate: Gate { limit: max_in_flight.max(1), used: Mutex::new(0), freed: Condvar::new() },
        }
    }

    /// Chat-completions request body for `req`.
    pub fn body(&self, req: &PromptRequest, repair: Option<&Repair>) -> Value {
        let mut messages = vec![json!({
            "role": "system",
            "content": format!("{}\n\n{}", req.system_text, req.response_schema.instructions()),
        })];
        for shot in &req.few_shots {
            messages.push(json!({"role": "user", "content": shot.input}));
            messages.push(json!({"role": "assistant", "content": shot.output}));
        }
        messages.push(json!({"role": "user", "content": req.user_text}));
        if let Some(r) = repair {
            messages.push(json!({"role": "assistant", "content": r.previous}));
            messages.push(json!({"role": "user", "content": r.instruction(req.response_schema)}));
        }
        json!({
            "model": self.model,
            "messages": messages,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "response_format": {"type": "json_object"},
        })
    }
}

impl LlmBackend for RemoteBackend {
    fn raw(&self, req: &PromptRequest, repair: Option<&Repair>) -> Result<String, BackendError> {
        let body = self.body(req, repair);
        let _permit = self.gate.acquire();
        let resp = self.transport.post(&body)?;
        resp.pointer("/choices/0/message/content").and_then(Value::as_str).map(str::to_string).ok_or_else(|| {
            BackendError::Transport(format!("unexpected response shape: {}", truncate(&resp.to_string(), 200)))
        })
    }

    fn name(&self) -> &str {
        &self.model
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{complete, Role, Schema};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    struct CannedTransport {
        replies: Mutex<Vec<String>>,
        seen: Arc<Mutex<Vec<Value>>>,
    }

    impl Transport for CannedTransport {
        fn post(&self, body: &Value) -> Result<Value, BackendError> {
            self.seen.lock().unwrap().push(body.clone());
            let content = self.replies.lock().unwrap().remove(0);
            Ok(json!({"choices": [{"message": {"role": "assistant", "content": content}}]}))
        }
    }

    #[test]
    fn prose_then_repair_then_error() {
        let seen = Arc::new(Mutex::new(Vec::new()));
        let t = CannedTransport {
            replies: Mutex::new(vec!["Sure! Here you go.".into(), "Still prose.".into()]),
            seen: seen.clone(),
        };
        let b = RemoteBackend::with_transport("m", 4, Box::new(t));
        let req = PromptRequest::new(Role::Judge, Schema::JudgeScores, "judge", "score this");
        let got = complete::<Value>(&b, &req);
        assert!(matches!(got, Err(BackendError::Validation { .. })));
        let seen = seen.lock().unwrap();
        assert_eq!(seen.len(), 2);
        let retry = seen[1]["messages"].as_array().unwrap();
        assert_eq!(retry.len(), 4);
        assert!(retry[3]["content"].as_str().unwrap().contains("could not be used"));
    }

    #[test]
    fn in_flight_cap_holds() {
        struct Slow {
            now: AtomicUsize,
            peak: AtomicUsize,
        }
        impl Transport for Arc<Slow> {
            fn post(&self, _body: &Value) -> Result<Value, BackendError> {
                let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(n, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(20));
                self.now.fetch_sub(1, Ordering::SeqCst);
                Ok(json!({"choices": [{"message": {"content": "{}"}}]}))
            }
        }
        let slow = Arc::new(Slow { now: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
        let b = RemoteBackend::with_transport("m", 2, Box::new(slow.clone()));
        let req = PromptRequest::new(Role::Judge, Schema::JudgeScores, "", "");
        std::thread::scope(|s| {
            for _ in 0..6 {
                s.spawn(|| b.raw(&req, None).unwrap());
            }
        });
        assert!(slow.peak.load(Ordering::SeqCst) <= 2);
    }
}
