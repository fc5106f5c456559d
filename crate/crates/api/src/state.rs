use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use nephro_core::notify::{Dispatcher, LogFileSink, NotificationSink, WebhookSink};
use nephro_core::{BlobStore, ClinicalReference, Clock, Diary, FileRepository, NotificationEvent};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use crate::auth::Auth;
use crate::config::Config;
use crate::mailer::Mailer;

#[derive(Debug, Error)]
pub enum StartupError {
    #[error("store: {0}")]
    Store(#[from] nephro_core::DiaryError),
    #[error("credentials: {0}")]
    Credentials(String),
    #[error("hospital list {path}: {message}")]
    Hospitals { path: String, message: String },
    #[error("alert sink: {0}")]
    Sink(#[from] nephro_core::notify::SinkError),
}

/// Entry of the static nearby-hospitals list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hospital {
    pub name: String,
    pub address: String,
    pub phone: String,
    pub lat: f64,
    pub lon: f64,
}

pub fn load_hospitals(path: &Path) -> Result<Vec<Hospital>, StartupError> {
    let err = |message: String| StartupError::Hospitals { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let list: Vec<Hospital> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    if let Some(h) = list.iter().find(|h| !(-90.0..=90.0).contains(&h.lat) || !(-180.0..=180.0).contains(&h.lon)) {
        return Err(err(format!("{}: coordinates out of range", h.name)));
    }
    Ok(list)
}

/// Hands new events to the background worker that pushes them to external
/// sinks. The in-app feed is already written by the time events get here.
#[derive(Clone, Default)]
pub struct AlertQueue {
    tx: Option<mpsc::Sender<Vec<NotificationEvent>>>,
}

impl AlertQueue {
    /// Queue that drops everything; used when no external sink is configured.
    pub fn disabled() -> Self {
        AlertQueue { tx: None }
    }

    /// Spawns the delivery worker. It exits once every queue handle is dropped
    /// and the backlog is drained.
    pub fn start(dispatcher: Dispatcher, capacity: usize) -> (Self, JoinHandle<()>) {
        let (tx, mut rx) = mpsc::channel::<Vec<NotificationEvent>>(capacity);
        let handle = tokio::spawn(async move {
            while let Some(events) = rx.recv().await {
                for outcome in dispatcher.deliver_sinks(&events).await {
                    if let nephro_core::notify::SinkResult::Failed(reason) = &outcome.result {
                        tracing::warn!(
                            sink = %outcome.sink,
                            key = %outcome.idempotency_key,
                            attempts = outcome.attempts,
                            %reason,
                            "alert delivery failed"
                        );
                    }
                }
            }
        });
        (AlertQueue { tx: Some(tx) }, handle)
    }

    pub fn enqueue(&self, events: &[NotificationEvent]) {
        let Some(tx) = &self.tx else { return };
        if events.is_empty() {
            return;
        }
        if let Err(e) = tx.try_send(events.to_vec()) {
            // the feed already has these; only the external copies are lost
            tracing::warn!(count = events.len(), error = %e, "alert queue full, dropping external delivery");
        }
    }
}

#[derive(Clone)]
pub struct AppState {
    pub diary: Arc<Diary>,
    pub auth: Arc<Auth>,
    pub mailer: Arc<dyn Mailer>,
    pub hospitals: Arc<Vec<Hospital>>,
    pub alerts: AlertQueue,
    pub config: Arc<Config>,
}

/// Opens the configured store without any of the HTTP machinery.
pub fn open_diary(config: &Config, clock: Arc<dyn Clock>) -> Result<Diary, StartupError> {
    let reference = Arc::new(ClinicalReference::load(&config.bp_reference, &config.growth_reference)?);
    let repo = Arc::new(FileRepository::open(&config.store_path)?);
    let blobs = BlobStore::new(&config.blob_dir, config.max_upload_bytes);
    Ok(Diary::open(repo, clock, reference, blobs)?)
}

/// Opens the store and wires everything together. Must run inside a Tokio
/// runtime when external sinks are configured; the returned handle is the
/// delivery worker.
pub fn build_state(
    config: Config,
    clock: Arc<dyn Clock>,
    mailer: Arc<dyn Mailer>,
) -> Result<(AppState, Option<JoinHandle<()>>), StartupError> {
    let diary = Arc::new(open_diary(&config, clock.clone())?);
    let auth = Auth::open(config.auth.clone(), clock, Some(config.store_path.join("credentials.json")))
        .map_err(StartupError::Credentials)?;
    let hospitals = match &config.hospitals {
        Some(path) => load_hospitals(path)?,
        None => Vec::new(),
    };

    let mut sinks: Vec<Arc<dyn NotificationSink>> = Vec::new();
    for url in &config.webhook_urls {
        sinks.push(Arc::new(WebhookSink::new(url.clone(), Duration::from_millis(config.webhook_timeout_ms))?));
    }
    if let Some(path) = &config.alert_log {
        sinks.push(Arc::new(LogFileSink::open(path.clone())?));
    }
    let (alerts, worker) = if sinks.is_empty() {
        (AlertQueue::disabled(), None)
    } else {
        let dispatcher = Dispatcher::new(None, sinks, config.retry.policy());
        let (queue, handle) = AlertQueue::start(dispatcher, config.delivery_queue);
        (queue, Some(handle))
    };

    let state = AppState {
        diary,
        auth: Arc::new(auth),
        mailer,
        hospitals: Arc::new(hospitals),
        alerts,
        config: Arc::new(config),
    };
    Ok((state, worker))
}
