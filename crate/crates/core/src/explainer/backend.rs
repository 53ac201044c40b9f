//! Chat-completion backends: a blocking HTTP client for the common
//! messages-in / choices-out wire format, a rule-table stub, a replay
//! backend over recorded transcripts, and a recording wrapper.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable holding the HTTP backend's bearer token.
pub const API_KEY_ENV: &str = "HEADSCOPE_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// Hex SHA-256 of the request's JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    /// Worth retrying: timeouts, connection failures, 429 and 5xx.
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("backend failure: {0}")]
    Fatal(String),
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;
}

impl<B: ChatBackend + ?Sized> ChatBackend for &B {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for Box<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 5, base_delay: Duration::from_millis(500) }
    }
}

/// Outcome of [`complete_with_retry`] when every attempt failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryExhausted {
    pub attempts: u32,
    pub last: BackendError,
}

/// Call `backend`, retrying transient failures with exponential backoff.
/// Fatal errors are returned after the first attempt.
pub fn complete_with_retry(
    backend: &dyn ChatBackend,
    request: &ChatRequest,
    policy: RetryPolicy,
) -> Result<String, RetryExhausted> {
    let mut delay = policy.base_delay;
    let mut attempt = 0;
    loop {
        attempt += 1;
        match backend.complete(request) {
            Ok(reply) => return Ok(reply),
            Err(e @ BackendError::Fatal(_)) => return Err(RetryExhausted { attempts: attempt, last: e }),
            Err(e) if attempt >= policy.max_attempts.max(1) => {
                return Err(RetryExhausted { attempts: attempt, last: e })
            }
            Err(e) => {
                tracing::warn!(attempt, error = %e, "retrying chat completion");
                thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
        }
    }
}

pub struct HttpBackend {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct WireReply {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Fatal(e.to_string()))?;
        Ok(Self { endpoint: endpoint.into(), api_key, client })
    }

    /// Reads the key from [`API_KEY_ENV`] when set.
    pub fn from_env(endpoint: impl Into<String>, timeout: Duration) -> Result<Self, BackendError> {
        Self::new(endpoint, std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()), timeout)
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut call = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| BackendError::Transient(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| BackendError::Transient(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(BackendError::Transient(format!("HTTP {status}: {body}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}: {body}")));
        }
        let reply: WireReply =
            serde_json::from_str(&body).map_err(|e| BackendError::Fatal(format!("malformed reply: {e}")))?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Fatal("reply has no message content".into()))
    }
}

/// Reply for classification requests no rule covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubFallback {
    Reply(String),
    /// Yes or No from a hash of the seed and the example text.
    Coin { seed: u64 },
}

/// Offline backend. Explanation requests get `explanation`; classification
/// requests are answered by an exact match on the quoted example, then by
/// the first substring rule that matches, then by the fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubBackend {
    pub explanation: String,
    #[serde(default)]
    pub exact: BTreeMap<String, String>,
    #[serde(default)]
    pub contains: Vec<(String, String)>,
    pub fallback: StubFallback,
}

impl StubBackend {
    pub fn new(explanation: impl Into<String>, fallback: StubFallback) -> Self {
        Self { explanation: explanation.into(), exact: BTreeMap::new(), contains: Vec::new(), fallback }
    }

    /// Answers Yes for every `active` example and No for every `inactive` one.
    pub fn ground_truth_echo<'a>(
        explanation: impl Into<String>,
        active: impl IntoIterator<Item = &'a str>,
        inactive: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let mut stub = Self::new(explanation, StubFallback::Reply("No".into()));
        stub.exact.extend(active.into_iter().map(|t| (t.to_owned(), "Yes".to_owned())));
        stub.exact.extend(inactive.into_iter().map(|t| (t.to_owned(), "No".to_owned())));
        stub
    }

    pub fn with_rule(mut self, substring: impl Into<String>, reply: impl Into<String>) -> Self {
        self.contains.push((substring.into(), reply.into()));
        self
    }
}

/// The quoted example of a classification prompt, if `text` is one.
pub fn quoted_example(text: &str) -> Option<&str> {
    let start = text.find(super::EXAMPLE_OPEN)? + super::EXAMPLE_OPEN.len();
    let end = text.rfind(super::EXAMPLE_CLOSE)?;
    (end >= start).then(|| &text[start..end])
}

impl ChatBackend for StubBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let example = request.messages.iter().find_map(|m| quoted_example(&m.content));
        let Some(example) = example else {
            return Ok(self.explanation.clone());
        };
        if let Some(reply) = self.exact.get(example) {
            return Ok(reply.clone());
        }
        if let Some((_, reply)) = self.contains.iter().find(|(k, _)| example.contains(k.as_str())) {
            return Ok(reply.clone());
        }
        Ok(match &self.fallback {
            StubFallback::Reply(r) => r.clone(),
            StubFallback::Coin { seed } => {
                let mut h = Sha256::new();
                h.update(seed.to_le_bytes());
                h.update(example.as_bytes());
                if h.finalize()[0] & 1 == 1 { "Yes" } else { "No" }.to_owned()
            }
        })
    }
}

/// One request/reply pair as persisted in transcripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub fingerprint: String,
    pub request: ChatRequest,
    pub reply: Result<String, String>,
}

/// Serves replies from recorded transcripts by request fingerprint.
#[derive(Debug, Clone, Default)]
pub struct ReplayBackend {
    replies: BTreeMap<String, String>,
}

impl ReplayBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        let replies = entries.into_iter().filter_map(|e| Some((e.fingerprint, e.reply.ok()?))).collect();
        Self { replies }
    }

    /// Reads a JSON-lines file of [`TranscriptEntry`].
    pub fn from_jsonl(path: &Path) -> std::io::Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for line in raw.lines().filter(|l| !l.trim().is_empty()) {
            entries.push(serde_json::from_str(line).map_err(std::io::Error::other)?);
        }
        Ok(Self::from_entries(entries))
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let fp = request.fingerprint();
        self.replies.get(&fp).cloned().ok_or_else(|| BackendError::Fatal(format!("no recorded reply for request {fp}")))
    }
}

/// Wraps a backend and keeps every request and reply in call order.
pub struct Recording<B> {
    inner: B,
    log: Mutex<Vec<TranscriptEntry>>,
}

impl<B: ChatBackend> Recording<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, log: Mutex::new(Vec::new()) }
    }

    pub fn take_transcript(&self) -> Vec<TranscriptEntry> {
        std::mem::take(&mut *self.log.lock().expect("transcript lock"))
    }
}

impl<B: ChatBackend> ChatBackend for Recording<B> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let reply = self.inner.complete(request);
        self.log.lock().expect("transcript lock").push(TranscriptEntry {
            fingerprint: request.fingerprint(),
            request: request.clone(),
            reply: reply.clone().map_err(|e| e.to_string()),
        });
        reply
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn request(text: &str) -> ChatRequest {
        ChatRequest { model: "m".into(), temperature: 0.0, max_tokens: 8, messages: vec![ChatMessage::user(text)] }
    }

    struct Flaky {
        failures: u32,
        calls: AtomicU32,
        error: BackendError,
    }

    impl ChatBackend for Flaky {
        fn complete(&self, _: &ChatRequest) -> Result<String, BackendError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(self.error.clone())
            } else {
                Ok("fine".into())
            }
        }
    }

    const FAST: RetryPolicy = RetryPolicy { max_attempts: 5, base_delay: Duration::ZERO };

    #[test]
    fn retries_transient_then_gives_up() {
        let b = Flaky { failures: 4, calls: AtomicU32::new(0), error: BackendError::Transient("x".into()) };
        assert_eq!(complete_with_retry(&b, &request("q"), FAST).unwrap(), "fine");
        assert_eq!(b.calls.load(Ordering::SeqCst), 5);

        let b = Flaky { failures: 5, calls: AtomicU32::new(0), error: BackendError::Transient("x".into()) };
        let err = complete_with_retry(&b, &request("q"), FAST).unwrap_err();
        assert_eq!(err.attempts, 5);

        let b = Flaky { failures: 1, calls: AtomicU32::new(0), error: BackendError::Fatal("bad key".into()) };
        assert_eq!(complete_with_retry(&b, &request("q"), FAST).unwrap_err().attempts, 1);
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        assert_eq!(request("a").fingerprint(), request("a").fingerprint());
        assert_ne!(request("a").fingerprint(), request("b").fingerprint());
        assert_eq!(request("a").fingerprint().len(), 64);
    }

    #[test]
    fn stub_rules_and_coin() {
        let classify = |ex: &str| request(&format!("Q\n\n{}{ex}{}", super::super::EXAMPLE_OPEN, super::super::EXAMPLE_CLOSE));
        let stub = StubBackend::new("canned", StubFallback::Reply("No".into())).with_rule("early", "Yes");
        assert_eq!(stub.complete(&request("explain please")).unwrap(), "canned");
        assert_eq!(stub.complete(&classify("as early as")).unwrap(), "Yes");
        assert_eq!(stub.complete(&classify("such as")).unwrap(), "No");

        let coin = StubBackend::new("c", StubFallback::Coin { seed: 3 });
        let answers: Vec<String> = (0..64).map(|i| coin.complete(&classify(&format!("p{i}"))).unwrap()).collect();
        let yes = answers.iter().filter(|a| *a == "Yes").count();
        assert!(yes > 16 && yes < 48, "{yes}");
        assert_eq!(coin.complete(&classify("p7")).unwrap(), answers[7]);
    }

    #[test]
    fn recording_and_replay_round_trip() {
        let rec = Recording::new(StubBackend::new("canned", StubFallback::Reply("No".into())));
        rec.complete(&request("one")).unwrap();
        rec.complete(&request("two")).unwrap();
        let log = rec.take_transcript();
        assert_eq!(log.len(), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let lines: Vec<String> = log.iter().map(|e| serde_json::to_string(e).unwrap()).collect();
        std::fs::write(&path, lines.join("\n")).unwrap();
        let replay = ReplayBackend::from_jsonl(&path).unwrap();
        assert_eq!(replay.complete(&request("two")).unwrap(), "canned");
        assert!(matches!(replay.complete(&request("three")), Err(BackendError::Fatal(_))));
    }

    /// Serves one canned HTTP response per accepted connection and returns
    /// the request bodies it saw.
    fn serve(responses: Vec<(u16, String)>) -> (String, thread::JoinHandle<Vec<(String, String)>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0;
                let mut auth = String::new();
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = line.trim().to_owned();
                    }
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push((auth, String::from_utf8(buf).unwrap()));
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (url, handle)
    }

    #[test]
    fn http_backend_retries_and_parses() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":" Yes."}}]}"#.to_owned();
        let (url, server) = serve(vec![(503, "busy".into()), (200, ok)]);
        let backend = HttpBackend::new(url, Some("k123".into()), Duration::from_secs(10)).unwrap();
        let reply = complete_with_retry(&backend, &request("hello"), FAST).unwrap();
        assert_eq!(reply, " Yes.");
        let seen = server.join().unwrap();
        assert_eq!(seen.len(), 2);
        assert!(seen[1].0.ends_with("Bearer k123"));
        let body: serde_json::Value = serde_json::from_str(&seen[1].1).unwrap();
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["max_tokens"], 8);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["messages"][0]["content"], "hello");
    }

    #[test]
    fn http_client_errors_are_fatal() {
        let (url, server) = serve(vec![(401, "{\"error\":\"no key\"}".into())]);
        let backend = HttpBackend::new(url, None, Duration::from_secs(10)).unwrap();
        let err = complete_with_retry(&backend, &request("hello"), FAST).unwrap_err();
        assert_eq!(err.attempts, 1);
        assert!(matches!(err.last, BackendError::Fatal(_)));
        server.join().unwrap();
    }
}
