use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use async_trait::async_trait;
use thiserror::Error;

use super::dispatch::Feed;
use super::NotificationEvent;

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("sink unavailable: {0}")]
    Unavailable(String),

    #[error("sink rejected event with status {0}")]
    Rejected(u16),
}

/// Delivery backend for alert events. Implementations must accept the same
/// idempotency key more than once without side effects beyond the first.
#[async_trait]
pub trait NotificationSink: Send + Sync {
    fn name(&self) -> &str;
    async fn deliver(&self, event: &NotificationEvent) -> Result<(), SinkError>;
}

/// Exposes a [`Feed`] through the sink interface.
pub struct FeedSink {
    feed: Arc<dyn Feed>,
}

impl FeedSink {
    pub fn new(feed: Arc<dyn Feed>) -> Self {
        FeedSink { feed }
    }
}

#[async_trait]
impl NotificationSink for FeedSink {
    fn name(&self) -> &str {
        "feed"
    }

    async fn deliver(&self, event: &NotificationEvent) -> Result<(), SinkError> {
        self.feed.insert(event).map(|_| ()).map_err(|e| SinkError::Unavailable(e.to_string()))
    }
}

/// POSTs the event as JSON with an `Idempotency-Key` header; any 2xx is an ack.
pub struct WebhookSink {
    name: String,
    url: String,
    client: reqwest::Client,
}

impl WebhookSink {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Result<Self, SinkError> {
        let url = url.into();
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| SinkError::Unavailable(e.to_string()))?;
        Ok(WebhookSink { name: format!("webhook:{url}"), url, client })
    }
}

#[async_trait]
impl NotificationSink for WebhookSink {
    fn name(&self) -> &str {
        &self.name
    }

    async fn deliver(&self, event: &NotificationEvent) -> Result<(), SinkError> {
        let response = self
            .client
            .post(&self.url)
            .header("Idempotency-Key", &event.idempotency_key)
            .json(event)
            .send()
            .await
            .map_err(|e| SinkError::Unavailable(e.to_string()))?;
        let status = response.status();
        if status.is_success() {
            Ok(())
        } else {
            Err(SinkError::Rejected(status.as_u16()))
        }
    }
}

/// Appends one JSON object per line. Keys already present in the file are
/// skipped, so redelivery leaves the log unchanged.
pub struct LogFileSink {
    path: PathBuf,
    seen: Mutex<HashSet<String>>,
}

impl LogFileSink {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, SinkError> {
        let path = path.into();
        let seen = read_keys(&path).map_err(|e| SinkError::Unavailable(format!("{}: {e}", path.display())))?;
        Ok(LogFileSink { path, seen: Mutex::new(seen) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn read_keys(path: &Path) -> std::io::Result<HashSet<String>> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashSet::new()),
        Err(e) => return Err(e),
    };
    let mut keys = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        // tolerate a torn last line from a crash
        if let Ok(event) = serde_json::from_str::<NotificationEvent>(&line) {
            keys.insert(event.idempotency_key);
        }
    }
    Ok(keys)
}

#[async_trait]
impl NotificationSink for LogFileSink {
    fn name(&self) -> &str {
        "log"
    }

    async fn deliver(&self, event: &NotificationEvent) -> Result<(), SinkError> {
        let mut seen = self.seen.lock().unwrap();
        if seen.contains(&event.idempotency_key) {
            return Ok(());
        }
        let mut line = serde_json::to_vec(event).map_err(|e| SinkError::Unavailable(e.to_string()))?;
        line.push(b'\n');
        let io = |e: std::io::Error| SinkError::Unavailable(format!("{}: {e}", self.path.display()));
        let mut file = std::fs::OpenOptions::new().create(true).append(true).open(&self.path).map_err(io)?;
        file.write_all(&line).map_err(io)?;
        file.flush().map_err(io)?;
        seen.insert(event.idempotency_key.clone());
        Ok(())
    }
}
