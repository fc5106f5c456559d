use std::sync::Mutex;

use async_trait::async_trait;
use lettre::message::Mailbox;
use lettre::transport::smtp::authentication::Credentials;
use lettre::{AsyncSmtpTransport, AsyncTransport, Message, Tokio1Executor};
use thiserror::Error;

use crate::config::{MailerKind, MailerSettings};

#[derive(Debug, Error)]
pub enum MailError {
    #[error("mail delivery is not configured")]
    Disabled,
    #[error("mail delivery failed: {0}")]
    Failed(String),
}

#[async_trait]
pub trait Mailer: Send + Sync {
    async fn send_otp(&self, to: &str, code: &str, ttl_minutes: i64) -> Result<(), MailError>;

    /// False when code sign-in should be refused outright.
    fn enabled(&self) -> bool {
        true
    }
}

pub fn from_settings(settings: &MailerSettings) -> Result<Box<dyn Mailer>, MailError> {
    match settings.kind {
        MailerKind::Disabled => Ok(Box::new(DisabledMailer)),
        MailerKind::Smtp => Ok(Box::new(SmtpMailer::new(settings)?)),
    }
}

pub struct DisabledMailer;

#[async_trait]
impl Mailer for DisabledMailer {
    async fn send_otp(&self, _: &str, _: &str, _: i64) -> Result<(), MailError> {
        Err(MailError::Disabled)
    }

    fn enabled(&self) -> bool {
        false
    }
}

/// Plain SMTP to a relay; TLS is expected to be handled by the relay or the
/// network in front of it.
pub struct SmtpMailer {
    transport: AsyncSmtpTransport<Tokio1Executor>,
    from: Mailbox,
}

impl SmtpMailer {
    pub fn new(settings: &MailerSettings) -> Result<Self, MailError> {
        let from = settings.from.parse().map_err(|e| MailError::Failed(format!("mailer.from: {e}")))?;
        let mut builder = AsyncSmtpTransport::<Tokio1Executor>::builder_dangerous(&settings.host).port(settings.port);
        if let (Some(user), Some(pass)) = (&settings.username, &settings.password) {
            builder = builder.credentials(Credentials::new(user.clone(), pass.clone()));
        }
        Ok(SmtpMailer { transport: builder.build(), from })
    }
}

#[async_trait]
impl Mailer for SmtpMailer {
    async fn send_otp(&self, to: &str, code: &str, ttl_minutes: i64) -> Result<(), MailError> {
        let to: Mailbox = to.parse().map_err(|e| MailError::Failed(format!("recipient: {e}")))?;
        let message = Message::builder()
            .from(self.from.clone())
            .to(to)
            .subject("Your NephroCare sign-in code")
            .body(format!("Your sign-in code is {code}. It expires in {ttl_minutes} minutes and can be used once.\n"))
            .map_err(|e| MailError::Failed(e.to_string()))?;
        self.transport.send(message).await.map_err(|e| MailError::Failed(e.to_string()))?;
        Ok(())
    }
}

/// Test double that keeps every message instead of sending it.
#[derive(Debug, Default)]
pub struct CapturingMailer {
    sent: Mutex<Vec<(String, String)>>,
}

impl CapturingMailer {
    pub fn new() -> Self {
        Self::default()
    }

    /// `(recipient, code)` pairs in send order.
    pub fn sent(&self) -> Vec<(String, String)> {
        self.sent.lock().unwrap().clone()
    }

    pub fn last_code_for(&self, email: &str) -> Option<String> {
        self.sent.lock().unwrap().iter().rev().find(|(to, _)| to == email).map(|(_, c)| c.clone())
    }
}

#[async_trait]
impl Mailer for CapturingMailer {
    async fn send_otp(&self, to: &str, code: &str, _: i64) -> Result<(), MailError> {
        self.sent.lock().unwrap().push((to.to_owned(), code.to_owned()));
        Ok(())
    }
}
