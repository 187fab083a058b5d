//! Chat-completion gateway with per-session conversation contexts.
//!
//! A [`Provider`] owns a backend and a registry of [`ChatContext`]s keyed by
//! session id. Every [`Session::send`] transmits the full history and either
//! commits both the user turn and the reply, or leaves the context untouched.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::protocol::{ChatMessage, Role};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

/// Static description of one model endpoint. Credentials are never stored
/// here; `api_key_env` names the environment variable that holds them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub name: String,
    #[serde(default)]
    pub endpoint: String,
    pub model_id: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
}

impl ProviderConfig {
    pub fn new(name: impl Into<String>, model_id: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            endpoint: String::new(),
            model_id: model_id.into(),
            temperature: DEFAULT_TEMPERATURE,
            extras: BTreeMap::new(),
            api_key_env: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.name.trim().is_empty() {
            return Err(ProviderError::InvalidConfig("provider name is empty".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(ProviderError::InvalidConfig(format!(
                "{}: temperature must be finite and >= 0, got {}",
                self.name, self.temperature
            )));
        }
        Ok(())
    }
}

/// Ordered conversation history for one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatContext {
    pub session_id: String,
    pub messages: Vec<ChatMessage>,
}

impl ChatContext {
    pub fn new(session_id: impl Into<String>, system_text: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            messages: vec![ChatMessage::system(system_text)],
        }
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Role expected at position `i`: system first, then user/assistant alternating.
    fn expected_role(i: usize) -> Role {
        match i {
            0 => Role::System,
            i if i % 2 == 1 => Role::User,
            _ => Role::Assistant,
        }
    }

    pub fn push(&mut self, message: ChatMessage) -> Result<(), ProviderError> {
        let expected = Self::expected_role(self.messages.len());
        if message.role != expected {
            return Err(ProviderError::Protocol(format!(
                "session {}: expected {:?} message at position {}, got {:?}",
                self.session_id,
                expected,
                self.messages.len(),
                message.role
            )));
        }
        if message.content.is_empty() {
            return Err(ProviderError::Protocol(format!("session {}: empty message content", self.session_id)));
        }
        self.messages.push(message);
        Ok(())
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, m) in self.messages.iter().enumerate() {
            if m.role != Self::expected_role(i) {
                return Err(format!("message {i} has role {:?}", m.role));
            }
            if m.content.is_empty() {
                return Err(format!("message {i} is empty"));
            }
        }
        Ok(())
    }

    /// Drops every turn after the system message.
    pub fn reset(&mut self) {
        self.messages.truncate(1);
    }
}

/// What a backend receives on every call: the whole history plus decoding
/// parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ChatRequest<'a> {
    pub model: &'a str,
    pub messages: &'a [ChatMessage],
    pub temperature: f64,
    #[serde(flatten)]
    pub extras: &'a BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure: {message}")]
    Transport { message: String, retryable: bool },
    #[error("malformed backend reply: {0}")]
    Malformed(String),
    #[error("script exhausted")]
    ScriptExhausted,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("session `{0}` already open")]
    DuplicateSession(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("malformed backend reply: {0}")]
    Malformed(String),
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("script must not be empty")]
    EmptyScript,
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
    #[error("context invariant violated: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
        }
    }
}

/// A backend plus the contexts of every session opened against it.
pub struct Provider {
    config: ProviderConfig,
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
    sessions: Mutex<HashMap<String, ChatContext>>,
}

impl fmt::Debug for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Provider").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Provider {
    pub fn new(config: ProviderConfig, backend: Arc<dyn ChatBackend>) -> Result<Arc<Self>, ProviderError> {
        Self::with_retry(config, backend, RetryPolicy::default())
    }

    pub fn with_retry(
        config: ProviderConfig,
        backend: Arc<dyn ChatBackend>,
        retry: RetryPolicy,
    ) -> Result<Arc<Self>, ProviderError> {
        config.validate()?;
        Ok(Arc::new(Self {
            config,
            backend,
            retry,
            sessions: Mutex::new(HashMap::new()),
        }))
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn sessions(&self) -> std::sync::MutexGuard<'_, HashMap<String, ChatContext>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn open_session(
        self: &Arc<Self>,
        session_id: impl Into<String>,
        system_text: impl Into<String>,
    ) -> Result<Session, ProviderError> {
        let id = session_id.into();
        let system_text = system_text.into();
        if system_text.is_empty() {
            return Err(ProviderError::Protocol("system message must not be empty".into()));
        }
        let mut sessions = self.sessions();
        if sessions.contains_key(&id) {
            return Err(ProviderError::DuplicateSession(id));
        }
        sessions.insert(id.clone(), ChatContext::new(id.clone(), system_text));
        Ok(Session {
            provider: Arc::clone(self),
            id,
        })
    }

    pub fn context(&self, session_id: &str) -> Option<ChatContext> {
        self.sessions().get(session_id).cloned()
    }

    /// Clears the history of every session on this provider.
    pub fn reset_all(&self) {
        for ctx in self.sessions().values_mut() {
            ctx.reset();
        }
    }

    fn call_with_retry(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let request = ChatRequest {
            model: &self.config.model_id,
            messages,
            temperature: self.config.temperature,
            extras: &self.config.extras,
        };
        let attempts = self.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.retry.base_delay * 2u32.saturating_pow(attempt - 1));
            }
            match self.backend.complete(&request) {
                Ok(reply) => return Ok(reply),
                Err(BackendError::Transport { message, retryable }) => {
                    log::warn!("{}: transport failure (attempt {}): {message}", self.config.name, attempt + 1);
                    last = message;
                    if !retryable {
                        return Err(ProviderError::Transport {
                            attempts: attempt + 1,
                            message: last,
                        });
                    }
                }
                Err(BackendError::Malformed(m)) => return Err(ProviderError::Malformed(m)),
                Err(BackendError::ScriptExhausted) => return Err(ProviderError::ScriptExhausted),
            }
        }
        Err(ProviderError::Transport {
            attempts,
            message: last,
        })
    }
}

/// Handle to one conversation. Sends on a session must not overlap.
#[derive(Debug, Clone)]
pub struct Session {
    provider: Arc<Provider>,
    id: String,
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn provider(&self) -> &Arc<Provider> {
        &self.provider
    }

    pub fn context(&self) -> Result<ChatContext, ProviderError> {
        self.provider
            .context(&self.id)
            .ok_or_else(|| ProviderError::UnknownSession(self.id.clone()))
    }

    pub fn context_len(&self) -> Result<usize, ProviderError> {
        self.context().map(|c| c.len())
    }

    /// Appends `user_text`, transmits the full history and appends the reply.
    /// On any error the stored context is left exactly as it was.
    pub fn send(&self, user_text: &str) -> Result<String, ProviderError> {
        let mut draft = self.context()?;
        draft.push(ChatMessage::user(user_text))?;
        let reply = self.provider.call_with_retry(&draft.messages)?;
        if reply.trim().is_empty() {
            return Err(ProviderError::Malformed("empty assistant reply".into()));
        }
        draft.push(ChatMessage::assistant(reply.clone()))?;
        debug_assert!(draft.check_invariants().is_ok());
        let mut sessions = self.provider.sessions();
        let slot = sessions
            .get_mut(&self.id)
            .ok_or_else(|| ProviderError::UnknownSession(self.id.clone()))?;
        *slot = draft;
        Ok(reply)
    }

    /// Reduces the context to its system message.
    pub fn reset_contexts(&self) -> Result<(), ProviderError> {
        let mut sessions = self.provider.sessions();
        let ctx = sessions
            .get_mut(&self.id)
            .ok_or_else(|| ProviderError::UnknownSession(self.id.clone()))?;
        ctx.reset();
        Ok(())
    }
}

/// One scripted backend step: a reply, or an injected transport failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptStep {
    Reply(String),
    Fail { fail: String },
}

impl From<&str> for ScriptStep {
    fn from(s: &str) -> Self {
        ScriptStep::Reply(s.to_string())
    }
}

impl From<String> for ScriptStep {
    fn from(s: String) -> Self {
        ScriptStep::Reply(s)
    }
}

/// Deterministic in-process backend that consumes canned replies in order
/// and records every transmitted history.
pub struct ScriptedBackend {
    steps: Mutex<VecDeque<ScriptStep>>,
    transcript: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedBackend {
    pub fn new<S: Into<ScriptStep>>(script: impl IntoIterator<Item = S>) -> Result<Self, ProviderError> {
        let steps: VecDeque<ScriptStep> = script.into_iter().map(Into::into).collect();
        if steps.is_empty() {
            return Err(ProviderError::EmptyScript);
        }
        Ok(Self {
            steps: Mutex::new(steps),
            transcript: Mutex::new(Vec::new()),
        })
    }

    /// Histories transmitted so far, one entry per call (including failed ones).
    pub fn transcript(&self) -> Vec<Vec<ChatMessage>> {
        self.transcript.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn remaining(&self) -> usize {
        self.steps.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        self.transcript
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(request.messages.to_vec());
        match self.steps.lock().unwrap_or_else(|e| e.into_inner()).pop_front() {
            Some(ScriptStep::Reply(r)) => Ok(r),
            Some(ScriptStep::Fail { fail }) => Err(BackendError::Transport {
                message: fail,
                retryable: true,
            }),
            None => Err(BackendError::ScriptExhausted),
        }
    }
}

/// Convenience constructor matching the scripted-provider contract.
pub fn scripted_provider<S: Into<ScriptStep>>(
    config: ProviderConfig,
    script: impl IntoIterator<Item = S>,
) -> Result<Arc<Provider>, ProviderError> {
    Provider::new(config, Arc::new(ScriptedBackend::new(script)?))
}

/// Backend computed by a closure over the request.
pub struct FnBackend<F>(pub F);

impl<F> ChatBackend for FnBackend<F>
where
    F: Fn(&ChatRequest<'_>) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        (self.0)(request)
    }
}

/// OpenAI-style `POST {endpoint}` chat-completion client.
pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            api_key,
            agent,
        }
    }

    /// Reads the credential from the variable named by `api_key_env`.
    pub fn from_config(config: &ProviderConfig, timeout: Duration) -> Result<Self, ProviderError> {
        if config.endpoint.is_empty() {
            return Err(ProviderError::InvalidConfig(format!("{}: endpoint is empty", config.name)));
        }
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::InvalidConfig(format!("{}: environment variable {var} is not set", config.name))
            })?),
            None => None,
        };
        Ok(Self::new(config.endpoint.clone(), api_key, timeout))
    }
}

/// Extracts the assistant text from an OpenAI-style response body.
pub fn parse_completion(body: &Value) -> Result<String, BackendError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed(format!("no choices[0].message.content in {body}")))
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest<'_>) -> Result<String, BackendError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| BackendError::Transport {
            message: e.to_string(),
            retryable: true,
        })?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(BackendError::Transport {
                message: format!("HTTP {status}"),
                retryable: true,
            });
        }
        if status >= 400 {
            return Err(BackendError::Transport {
                message: format!("HTTP {status}"),
                retryable: false,
            });
        }
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        parse_completion(&body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ProviderConfig {
        ProviderConfig::new("gen", "model-x")
    }

    fn provider(script: &[&str]) -> (Arc<Provider>, Arc<ScriptedBackend>) {
        let backend = Arc::new(ScriptedBackend::new(script.iter().copied()).unwrap());
        let p = Provider::with_retry(cfg(), backend.clone(), RetryPolicy::immediate(3)).unwrap();
        (p, backend)
    }

    #[test]
    fn open_session_holds_system_message() {
        let (p, _) = provider(&["A"]);
        let s = p.open_session("s1", "persona").unwrap();
        let ctx = s.context().unwrap();
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx.messages[0].role, Role::System);
        assert_eq!(p.open_session("s1", "again").unwrap_err(), ProviderError::DuplicateSession("s1".into()));
    }

    #[test]
    fn sessions_are_independent() {
        let (p, _) = provider(&["A", "B"]);
        let a = p.open_session("a", "sys").unwrap();
        let b = p.open_session("b", "sys").unwrap();
        a.send("hi").unwrap();
        assert_eq!(a.context_len().unwrap(), 3);
        assert_eq!(b.context_len().unwrap(), 1);
    }

    #[test]
    fn send_grows_by_two_and_transmits_full_history() {
        let (p, backend) = provider(&["A", "B"]);
        let s = p.open_session("s", "sys").unwrap();
        assert_eq!(s.send("u1").unwrap(), "A");
        assert_eq!(s.context_len().unwrap(), 3);
        assert_eq!(s.send("u2").unwrap(), "B");
        let ctx = s.context().unwrap();
        assert_eq!(ctx.len(), 5);
        ctx.check_invariants().unwrap();
        let roles: Vec<_> = ctx.messages.iter().map(|m| m.role).collect();
        assert_eq!(roles, vec![Role::System, Role::User, Role::Assistant, Role::User, Role::Assistant]);
        let sent = backend.transcript();
        assert_eq!(sent[0].len(), 2);
        assert_eq!(sent[1].len(), 4);
    }

    #[test]
    fn exhausted_script_is_a_distinct_error() {
        let (p, _) = provider(&["A", "B"]);
        let s = p.open_session("s", "sys").unwrap();
        s.send("1").unwrap();
        s.send("2").unwrap();
        assert_eq!(s.send("3").unwrap_err(), ProviderError::ScriptExhausted);
        assert_eq!(s.context_len().unwrap(), 5);
        assert!(matches!(ScriptedBackend::new(Vec::<String>::new()), Err(ProviderError::EmptyScript)));
    }

    #[test]
    fn transport_failure_rolls_back_after_bounded_retries() {
        let backend = Arc::new(
            ScriptedBackend::new(vec![
                ScriptStep::from("A"),
                ScriptStep::Fail { fail: "timeout".into() },
                ScriptStep::Fail { fail: "timeout".into() },
                ScriptStep::Fail { fail: "timeout".into() },
                ScriptStep::from("late"),
            ])
            .unwrap(),
        );
        let p = Provider::with_retry(cfg(), backend.clone(), RetryPolicy::immediate(3)).unwrap();
        let s = p.open_session("s", "sys").unwrap();
        s.send("u1").unwrap();
        let before = s.context().unwrap();
        let err = s.send("u2").unwrap_err();
        assert_eq!(
            err,
            ProviderError::Transport {
                attempts: 3,
                message: "timeout".into()
            }
        );
        assert_eq!(s.context().unwrap(), before);
        assert_eq!(backend.remaining(), 1);
    }

    #[test]
    fn transient_failure_is_retried() {
        let backend = Arc::new(ScriptedBackend::new(vec![ScriptStep::Fail { fail: "x".into() }, "ok".into()]).unwrap());
        let p = Provider::with_retry(cfg(), backend, RetryPolicy::immediate(3)).unwrap();
        let s = p.open_session("s", "sys").unwrap();
        assert_eq!(s.send("u").unwrap(), "ok");
        assert_eq!(s.context_len().unwrap(), 3);
    }

    #[test]
    fn empty_reply_is_malformed_and_rolled_back() {
        let (p, _) = provider(&["  "]);
        let s = p.open_session("s", "sys").unwrap();
        assert!(matches!(s.send("u"), Err(ProviderError::Malformed(_))));
        assert_eq!(s.context_len().unwrap(), 1);
    }

    #[test]
    fn reset_keeps_only_the_system_message() {
        let (p, _) = provider(&["A", "B", "C"]);
        let s = p.open_session("s", "sys").unwrap();
        s.reset_contexts().unwrap();
        assert_eq!(s.context_len().unwrap(), 1);
        s.send("1").unwrap();
        s.send("2").unwrap();
        s.reset_contexts().unwrap();
        let ctx = s.context().unwrap();
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx.messages[0].content, "sys");
        s.send("3").unwrap();
        assert_eq!(s.context_len().unwrap(), 3);
    }

    #[test]
    fn reset_all_clears_every_session() {
        let (p, _) = provider(&["A", "B"]);
        let a = p.open_session("a", "sys").unwrap();
        let b = p.open_session("b", "sys").unwrap();
        a.send("x").unwrap();
        b.send("y").unwrap();
        p.reset_all();
        assert_eq!((a.context_len().unwrap(), b.context_len().unwrap()), (1, 1));
    }

    #[test]
    fn context_push_enforces_alternation() {
        let mut ctx = ChatContext::new("s", "sys");
        assert!(ctx.push(ChatMessage::assistant("a")).is_err());
        ctx.push(ChatMessage::user("u")).unwrap();
        assert!(ctx.push(ChatMessage::user("u")).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        assert_eq!(c.temperature, 0.1);
        c.temperature = -0.5;
        assert!(c.validate().is_err());
        let parsed: ProviderConfig = serde_json::from_str(r#"{"name":"n","model_id":"m"}"#).unwrap();
        assert_eq!(parsed.temperature, DEFAULT_TEMPERATURE);
    }

    #[test]
    fn request_serializes_with_flattened_extras() {
        let mut extras = BTreeMap::new();
        extras.insert("reasoning_effort".to_string(), Value::from("medium"));
        let msgs = vec![ChatMessage::system("s"), ChatMessage::user("u")];
        let req = ChatRequest {
            model: "gpt",
            messages: &msgs,
            temperature: 0.1,
            extras: &extras,
        };
        let v = serde_json::to_value(&req).unwrap();
        assert_eq!(v["model"], "gpt");
        assert_eq!(v["messages"][1]["role"], "user");
        assert_eq!(v["reasoning_effort"], "medium");
    }

    fn serve_once(status: &str, body: &str) -> (String, thread::JoinHandle<String>) {
        use std::io::{Read, Write};
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let reply = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        );
        let handle = thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0u8; 4096];
            loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(head_end) = text.find("\r\n\r\n") {
                    if text[..head_end].to_ascii_lowercase().contains("transfer-encoding: chunked") {
                        if text[head_end..].ends_with("0\r\n\r\n") {
                            break;
                        }
                        continue;
                    }
                    let len = text[..head_end]
                        .lines()
                        .find_map(|l| l.to_ascii_lowercase().strip_prefix("content-length:").map(|v| v.trim().parse::<usize>().unwrap()))
                        .unwrap_or(0);
                    if buf.len() >= head_end + 4 + len {
                        break;
                    }
                }
                if n == 0 {
                    break;
                }
            }
            stream.write_all(reply.as_bytes()).unwrap();
            String::from_utf8_lossy(&buf).into_owned()
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    #[test]
    fn http_backend_round_trip() {
        let (url, server) = serve_once("200 OK", r#"{"choices":[{"message":{"role":"assistant","content":"int main(){}"}}]}"#);
        let backend = HttpBackend::new(url, Some("k3y".into()), Duration::from_secs(5));
        let msgs = vec![ChatMessage::system("s"), ChatMessage::user("u")];
        let extras = BTreeMap::new();
        let req = ChatRequest {
            model: "m",
            messages: &msgs,
            temperature: 0.1,
            extras: &extras,
        };
        assert_eq!(backend.complete(&req).unwrap(), "int main(){}");
        let raw = server.join().unwrap();
        assert!(raw.contains("Bearer k3y"));
        let body: Value = serde_json::from_str(&raw[raw.find("\r\n\r\n").unwrap() + 4..]).unwrap();
        assert_eq!(body["temperature"], 0.1);
        assert_eq!(body["messages"][1]["content"], "u");
    }

    #[test]
    fn http_server_errors_are_retryable() {
        let (url, server) = serve_once("503 Service Unavailable", "{}");
        let backend = HttpBackend::new(url, None, Duration::from_secs(5));
        let msgs = vec![ChatMessage::system("s")];
        let extras = BTreeMap::new();
        let req = ChatRequest {
            model: "m",
            messages: &msgs,
            temperature: 0.0,
            extras: &extras,
        };
        assert!(matches!(backend.complete(&req), Err(BackendError::Transport { retryable: true, .. })));
        server.join().unwrap();
    }

    #[test]
    fn completion_parsing() {
        let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": "hi"}}]});
        assert_eq!(parse_completion(&body).unwrap(), "hi");
        assert!(parse_completion(&serde_json::json!({"error": "x"})).is_err());
    }
}
