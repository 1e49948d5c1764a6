//! Text-generation backends: an HTTP client, a recorded-fixture replayer and
//! a recording wrapper used to build fixtures.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::PolicyError;

/// Environment variable holding the bearer token for the HTTP service.
pub const API_KEY_VAR: &str = "GENERATION_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(s: impl Into<String>) -> Self {
        Self { role: "system".into(), content: s.into() }
    }
    pub fn user(s: impl Into<String>) -> Self {
        Self { role: "user".into(), content: s.into() }
    }
    pub fn assistant(s: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: s.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationRequest {
    /// Requesting agent; used by replay, not sent over the wire.
    #[serde(skip)]
    pub agent: String,
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

pub trait GenerationService: Send + Sync {
    fn complete(&self, request: &GenerationRequest) -> Result<String, PolicyError>;
}

/// POSTs `{model, temperature, messages}` as JSON. Accepts either
/// `{"text": ...}` or a chat-completions style `choices[0].message.content`.
pub struct HttpService {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpService {
    pub fn new(endpoint: &str) -> Self {
        let config = ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs(120))).build();
        Self {
            endpoint: endpoint.to_string(),
            api_key: std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty()),
            agent: config.into(),
        }
    }
}

pub(crate) fn extract_text(v: &serde_json::Value) -> Option<String> {
    if let Some(t) = v.get("text").and_then(|t| t.as_str()) {
        return Some(t.to_string());
    }
    v.pointer("/choices/0/message/content").and_then(|t| t.as_str()).map(str::to_string)
}

impl GenerationService for HttpService {
    fn complete(&self, request: &GenerationRequest) -> Result<String, PolicyError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(k) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = req.send_json(request).map_err(|e| match e {
            ureq::Error::StatusCode(code) if (400..500).contains(&code) && code != 429 => {
                PolicyError::BadResponse(format!("HTTP {code}"))
            }
            other => PolicyError::Transport(other.to_string()),
        })?;
        let body: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| PolicyError::BadResponse(e.to_string()))?;
        extract_text(&body).ok_or_else(|| PolicyError::BadResponse("no text in response".into()))
    }
}

/// Stored responses, replayed in order per agent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedFixture {
    pub responses: BTreeMap<String, Vec<String>>,
}

impl RecordedFixture {
    pub fn parse(text: &str) -> Result<Self, PolicyError> {
        serde_json::from_str(text).map_err(|e| PolicyError::Fixture(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fixture serializes");
        s.push('\n');
        s
    }
}

pub struct RecordedService {
    fixture: RecordedFixture,
    cursor: Mutex<BTreeMap<String, usize>>,
}

impl RecordedService {
    pub fn new(fixture: RecordedFixture) -> Self {
        Self { fixture, cursor: Mutex::new(BTreeMap::new()) }
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path).map_err(|e| PolicyError::Fixture(format!("{}: {e}", path.display())))?;
        Ok(Self::new(RecordedFixture::parse(&text)?))
    }
}

impl GenerationService for RecordedService {
    fn complete(&self, request: &GenerationRequest) -> Result<String, PolicyError> {
        let mut cur = self.cursor.lock().expect("cursor lock");
        let i = cur.entry(request.agent.clone()).or_default();
        let r = self
            .fixture
            .responses
            .get(&request.agent)
            .and_then(|q| q.get(*i))
            .ok_or_else(|| PolicyError::Fixture(format!("no response {} for {}", *i, request.agent)))?;
        *i += 1;
        Ok(r.clone())
    }
}

/// Wraps a service and keeps every response, keyed by agent.
pub struct RecordingService<S> {
    inner: S,
    log: Mutex<RecordedFixture>,
}

impl<S: GenerationService> RecordingService<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, log: Mutex::new(RecordedFixture::default()) }
    }

    pub fn fixture(&self) -> RecordedFixture {
        self.log.lock().expect("log lock").clone()
    }
}

impl<S: GenerationService> GenerationService for RecordingService<S> {
    fn complete(&self, request: &GenerationRequest) -> Result<String, PolicyError> {
        let r = self.inner.complete(request)?;
        self.log
            .lock()
            .expect("log lock")
            .responses
            .entry(request.agent.clone())
            .or_default()
            .push(r.clone());
        Ok(r)
    }
}

impl<S: GenerationService + ?Sized> GenerationService for std::sync::Arc<S> {
    fn complete(&self, request: &GenerationRequest) -> Result<String, PolicyError> {
        (**self).complete(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(agent: &str) -> GenerationRequest {
        GenerationRequest { agent: agent.into(), model: "m".into(), temperature: 0.6, messages: vec![ChatMessage::user("hi")] }
    }

    #[test]
    fn replays_per_agent_in_order() {
        let mut f = RecordedFixture::default();
        f.responses.insert("a".into(), vec!["1".into(), "2".into()]);
        f.responses.insert("b".into(), vec!["x".into()]);
        let s = RecordedService::new(f);
        assert_eq!(s.complete(&req("a")).unwrap(), "1");
        assert_eq!(s.complete(&req("b")).unwrap(), "x");
        assert_eq!(s.complete(&req("a")).unwrap(), "2");
        let e = s.complete(&req("a")).unwrap_err();
        assert!(!e.is_retriable());
    }

    #[test]
    fn recording_captures_responses() {
        let mut f = RecordedFixture::default();
        f.responses.insert("a".into(), vec!["1".into()]);
        let rec = RecordingService::new(RecordedService::new(f.clone()));
        rec.complete(&req("a")).unwrap();
        assert_eq!(rec.fixture(), f);
        assert_eq!(RecordedFixture::parse(&f.to_json()).unwrap(), f);
    }

    #[test]
    fn request_wire_format_omits_agent() {
        let v = serde_json::to_value(req("a")).unwrap();
        assert_eq!(v.as_object().unwrap().keys().collect::<Vec<_>>(), ["messages", "model", "temperature"]);
    }

    #[test]
    fn extracts_both_response_shapes() {
        assert_eq!(extract_text(&serde_json::json!({"text": "a"})).as_deref(), Some("a"));
        let v = serde_json::json!({"choices": [{"message": {"content": "b"}}]});
        assert_eq!(extract_text(&v).as_deref(), Some("b"));
        assert_eq!(extract_text(&serde_json::json!({})), None);
    }
}
