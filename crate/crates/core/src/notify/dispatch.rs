use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::sinks::NotificationSink;
use super::NotificationEvent;

/// Persistent in-app feed. `insert` returns `Ok(false)` when an event with
/// the same idempotency key is already stored.
pub trait Feed: Send + Sync {
    fn insert(&self, event: &NotificationEvent) -> crate::Result<bool>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub attempts: u32,
    #[serde(with = "millis")]
    pub initial_backoff: Duration,
    pub multiplier: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, initial_backoff: Duration::from_secs(1), multiplier: 2 }
    }
}

impl RetryPolicy {
    /// Delay before attempt `n + 1` (after `n` failures, `n ≥ 1`).
    pub fn backoff(&self, failures: u32) -> Duration {
        self.initial_backoff * self.multiplier.saturating_pow(failures.saturating_sub(1))
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum FeedOutcome {
    Inserted,
    Duplicate,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum SinkResult {
    Delivered,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SinkOutcome {
    pub sink: String,
    pub idempotency_key: String,
    pub attempts: u32,
    pub result: SinkResult,
}

/// What happened to each event: one feed cell per event and one sink cell
/// per (event, sink) pair, event-major.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DeliveryReport {
    pub feed: Vec<(String, FeedOutcome)>,
    pub sinks: Vec<SinkOutcome>,
}

impl DeliveryReport {
    pub fn failures(&self) -> impl Iterator<Item = &SinkOutcome> {
        self.sinks.iter().filter(|o| matches!(o.result, SinkResult::Failed(_)))
    }
}

/// Fans events out to the feed and to external sinks. Nothing here returns
/// an error; failures end up in the [`DeliveryReport`].
#[derive(Clone)]
pub struct Dispatcher {
    feed: Option<Arc<dyn Feed>>,
    sinks: Vec<Arc<dyn NotificationSink>>,
    retry: RetryPolicy,
}

impl Dispatcher {
    pub fn new(feed: Option<Arc<dyn Feed>>, sinks: Vec<Arc<dyn NotificationSink>>, retry: RetryPolicy) -> Self {
        Dispatcher { feed, sinks, retry }
    }

    pub fn sink_count(&self) -> usize {
        self.sinks.len()
    }

    pub fn write_feed(&self, events: &[NotificationEvent]) -> Vec<(String, FeedOutcome)> {
        let Some(feed) = &self.feed else { return Vec::new() };
        events
            .iter()
            .map(|event| {
                let outcome = match feed.insert(event) {
                    Ok(true) => FeedOutcome::Inserted,
                    Ok(false) => FeedOutcome::Duplicate,
                    Err(e) => FeedOutcome::Failed(e.to_string()),
                };
                (event.idempotency_key.clone(), outcome)
            })
            .collect()
    }

    pub async fn deliver_sinks(&self, events: &[NotificationEvent]) -> Vec<SinkOutcome> {
        let mut outcomes = Vec::with_capacity(events.len() * self.sinks.len());
        for event in events {
            for sink in &self.sinks {
                outcomes.push(self.deliver_one(sink.as_ref(), event).await);
            }
        }
        outcomes
    }

    pub async fn dispatch(&self, events: &[NotificationEvent]) -> DeliveryReport {
        let feed = self.write_feed(events);
        let sinks = self.deliver_sinks(events).await;
        DeliveryReport { feed, sinks }
    }

    async fn deliver_one(&self, sink: &dyn NotificationSink, event: &NotificationEvent) -> SinkOutcome {
        let attempts = self.retry.attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            match sink.deliver(event).await {
                Ok(()) => {
                    return SinkOutcome {
                        sink: sink.name().to_owned(),
                        idempotency_key: event.idempotency_key.clone(),
                        attempts: attempt,
                        result: SinkResult::Delivered,
                    }
                }
                Err(e) => {
                    tracing::warn!(sink = sink.name(), attempt, error = %e, "notification delivery failed");
                    last_error = e.to_string();
                    if attempt < attempts {
                        tokio::time::sleep(self.retry.backoff(attempt)).await;
                    }
                }
            }
        }
        SinkOutcome {
            sink: sink.name().to_owned(),
            idempotency_key: event.idempotency_key.clone(),
            attempts,
            result: SinkResult::Failed(last_error),
        }
    }
}
