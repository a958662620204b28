//! JSON-over-HTTP plumbing shared by the remote embedder and remote agents.
//!
//! [`Transport`] is the seam: production code uses [`HttpTransport`], tests
//! plug in canned, echoing or failing transports. [`RemoteClient`] adds
//! bounded retries and an optional JSONL audit trail on top.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use thiserror::Error;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
}

impl TransportError {
    pub fn is_retryable(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Connect(_) => true,
            TransportError::Status { status, .. } => *status == 429 || *status >= 500,
            TransportError::Decode(_) => false,
        }
    }
}

pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        headers: &[(String, String)],
        body: &Value,
    ) -> std::result::Result<Value, TransportError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt; total attempts are `max_retries + 1`.
    pub max_retries: u32,
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

/// Append-only JSONL record of every remote request and its outcome.
pub struct AuditLog {
    sink: Mutex<Box<dyn Write + Send>>,
}

impl AuditLog {
    pub fn to_file(path: &Path) -> Result<Self> {
        let file: File = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self::to_writer(Box::new(file)))
    }

    pub fn to_writer(sink: Box<dyn Write + Send>) -> Self {
        Self {
            sink: Mutex::new(sink),
        }
    }

    fn record(&self, entry: &Value) {
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        if let Err(e) = writeln!(sink, "{entry}") {
            log::warn!("failed to write audit entry: {e}");
        }
    }
}

#[derive(Clone)]
pub struct RemoteClient {
    transport: Arc<dyn Transport>,
    retry: RetryPolicy,
    headers: Vec<(String, String)>,
    audit: Option<Arc<AuditLog>>,
}

impl RemoteClient {
    pub fn new(transport: Arc<dyn Transport>, retry: RetryPolicy) -> Self {
        Self {
            transport,
            retry,
            headers: Vec::new(),
            audit: None,
        }
    }

    pub fn with_bearer_token(mut self, token: &str) -> Self {
        self.headers
            .push(("Authorization".into(), format!("Bearer {token}")));
        self
    }

    pub fn with_audit(mut self, audit: Arc<AuditLog>) -> Self {
        self.audit = Some(audit);
        self
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    /// POSTs `body`, retrying transient failures. Non-retryable failures
    /// return immediately; exhausting retries yields [`Error::Transport`].
    pub fn call(&self, url: &str, body: &Value) -> Result<Value> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let outcome = self.transport.post_json(url, &self.headers, body);
            if let Some(audit) = &self.audit {
                let ts = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_millis() as u64)
                    .unwrap_or(0);
                let result = match &outcome {
                    Ok(v) => json!({ "ok": v }),
                    Err(e) => json!({ "error": e.to_string() }),
                };
                audit.record(&json!({
                    "ts_ms": ts,
                    "url": url,
                    "attempt": attempts,
                    "request": body,
                    "response": result,
                }));
            }
            match outcome {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempts <= self.retry.max_retries => {
                    log::warn!("remote call to {url} failed (attempt {attempts}): {e}; retrying");
                    if !self.retry.backoff.is_zero() {
                        std::thread::sleep(self.retry.backoff * attempts);
                    }
                }
                Err(e) => {
                    return Err(Error::Transport {
                        attempts,
                        message: e.to_string(),
                    })
                }
            }
        }
    }
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use super::*;

    /// Blocking HTTP transport with a global per-request timeout.
    pub struct HttpTransport {
        agent: ureq::Agent,
    }

    impl HttpTransport {
        pub fn new(timeout: Duration) -> Self {
            let agent = ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .http_status_as_error(false)
                .build()
                .into();
            Self { agent }
        }
    }

    impl Transport for HttpTransport {
        fn post_json(
            &self,
            url: &str,
            headers: &[(String, String)],
            body: &Value,
        ) -> std::result::Result<Value, TransportError> {
            let mut req = self.agent.post(url);
            for (k, v) in headers {
                req = req.header(k.as_str(), v.as_str());
            }
            let mut resp = req.send_json(body).map_err(map_err)?;
            let status = resp.status().as_u16();
            let text = resp.body_mut().read_to_string().map_err(map_err)?;
            if !(200..300).contains(&status) {
                return Err(TransportError::Status { status, body: text });
            }
            serde_json::from_str(&text).map_err(|e| TransportError::Decode(e.to_string()))
        }
    }

    fn map_err(e: ureq::Error) -> TransportError {
        match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => TransportError::Timeout,
            ureq::Error::Io(io) => TransportError::Connect(io.to_string()),
            ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
                TransportError::Connect(e.to_string())
            }
            other => TransportError::Decode(other.to_string()),
        }
    }
}

/// Test doubles for [`Transport`].
pub mod testing {
    use std::collections::VecDeque;
    use std::sync::atomic::{AtomicU32, Ordering};

    use super::*;

    /// Replays a fixed sequence of outcomes; the last one repeats forever.
    pub struct ScriptedTransport {
        script: Mutex<VecDeque<std::result::Result<Value, TransportError>>>,
        calls: AtomicU32,
    }

    impl ScriptedTransport {
        pub fn new(script: Vec<std::result::Result<Value, TransportError>>) -> Self {
            assert!(!script.is_empty(), "script needs at least one outcome");
            Self {
                script: Mutex::new(script.into()),
                calls: AtomicU32::new(0),
            }
        }

        pub fn always(outcome: std::result::Result<Value, TransportError>) -> Self {
            Self::new(vec![outcome])
        }

        pub fn calls(&self) -> u32 {
            self.calls.load(Ordering::SeqCst)
        }
    }

    impl Transport for ScriptedTransport {
        fn post_json(
            &self,
            _url: &str,
            _headers: &[(String, String)],
            _body: &Value,
        ) -> std::result::Result<Value, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut s = self.script.lock().unwrap();
            if s.len() > 1 {
                s.pop_front().unwrap()
            } else {
                s.front().cloned().unwrap()
            }
        }
    }

    /// Computes a response from the request body.
    pub struct FnTransport<F>(pub F);

    impl<F> Transport for FnTransport<F>
    where
        F: Fn(&str, &Value) -> std::result::Result<Value, TransportError> + Send + Sync,
    {
        fn post_json(
            &self,
            url: &str,
            _headers: &[(String, String)],
            body: &Value,
        ) -> std::result::Result<Value, TransportError> {
            (self.0)(url, body)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::ScriptedTransport;
    use super::*;

    fn client(t: Arc<ScriptedTransport>, retries: u32) -> RemoteClient {
        RemoteClient::new(
            t,
            RetryPolicy {
                max_retries: retries,
                backoff: Duration::ZERO,
            },
        )
    }

    #[test]
    fn timeout_retries_exactly_n_times_then_fails() {
        let t = Arc::new(ScriptedTransport::always(Err(TransportError::Timeout)));
        let err = client(t.clone(), 3).call("http://x", &json!({})).unwrap_err();
        assert!(matches!(err, Error::Transport { attempts: 4, .. }), "{err}");
        assert_eq!(t.calls(), 4);
    }

    #[test]
    fn recovers_after_transient_failure() {
        let t = Arc::new(ScriptedTransport::new(vec![
            Err(TransportError::Status { status: 503, body: String::new() }),
            Ok(json!({"fine": true})),
        ]));
        let v = client(t.clone(), 2).call("http://x", &json!({})).unwrap();
        assert_eq!(v, json!({"fine": true}));
        assert_eq!(t.calls(), 2);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = Arc::new(ScriptedTransport::always(Err(TransportError::Status {
            status: 400,
            body: "bad".into(),
        })));
        let err = client(t.clone(), 5).call("http://x", &json!({})).unwrap_err();
        assert!(matches!(err, Error::Transport { attempts: 1, .. }));
        assert_eq!(t.calls(), 1);
    }

    #[test]
    fn audit_log_records_each_attempt() {
        #[derive(Clone, Default)]
        struct Buf(Arc<Mutex<Vec<u8>>>);
        impl Write for Buf {
            fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
                self.0.lock().unwrap().extend_from_slice(b);
                Ok(b.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let buf = Buf::default();
        let audit = Arc::new(AuditLog::to_writer(Box::new(buf.clone())));
        let t = Arc::new(ScriptedTransport::new(vec![Err(TransportError::Timeout), Ok(json!(1))]));
        client(t, 1).with_audit(audit).call("http://x", &json!({"q": 1})).unwrap();
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["attempt"], 1);
        assert_eq!(lines[1]["response"]["ok"], 1);
    }
}
