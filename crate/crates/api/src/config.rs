//! Service configuration: one TOML document, with any key overridable from
//! the environment.
//!
//! `NEPHRO_<KEY>` sets a top-level key and `NEPHRO_<SECTION>__<KEY>` a key
//! inside a section, e.g. `NEPHRO_LISTEN=0.0.0.0:8080` or
//! `NEPHRO_MAILER__HOST=smtp.internal`. Values are read as TOML scalars when
//! they parse as one (numbers, booleans) and as strings otherwise.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use nephro_core::notify::RetryPolicy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "NEPHRO_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub listen: SocketAddr,
    /// Root directory of the patient and doctor store.
    pub store_path: PathBuf,
    pub blob_dir: PathBuf,
    pub max_upload_bytes: usize,
    pub bp_reference: PathBuf,
    pub growth_reference: PathBuf,
    /// JSON list of `{name, address, phone, lat, lon}`; empty list when unset.
    pub hospitals: Option<PathBuf>,
    pub webhook_urls: Vec<String>,
    pub webhook_timeout_ms: u64,
    /// Append-only JSON-lines alert log; disabled when unset.
    pub alert_log: Option<PathBuf>,
    pub delivery_queue: usize,
    pub retry: RetrySettings,
    pub auth: AuthSettings,
    pub mailer: MailerSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySettings {
    pub attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthSettings {
    pub password_hash_cost: u32,
    pub token_ttl_hours: i64,
    pub otp_ttl_minutes: i64,
    pub otp_requests_per_hour: usize,
    pub min_password_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MailerKind {
    /// OTP login is switched off; requests get 503.
    Disabled,
    Smtp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MailerSettings {
    pub kind: MailerKind,
    pub host: String,
    pub port: u16,
    pub username: Option<String>,
    pub password: Option<String>,
    pub from: String,
}

impl Default for Config {
    fn default() -> Self {
        let data = nephro_rules::bundled_data_dir();
        Config {
            listen: "127.0.0.1:8080".parse().unwrap(),
            store_path: PathBuf::from("data/store"),
            blob_dir: PathBuf::from("data/blobs"),
            max_upload_bytes: nephro_core::DEFAULT_MAX_IMAGE_BYTES,
            bp_reference: data.join(nephro_rules::BP_REFERENCE_FILE),
            growth_reference: data.join(nephro_rules::GROWTH_REFERENCE_FILE),
            hospitals: None,
            webhook_urls: Vec::new(),
            webhook_timeout_ms: 5000,
            alert_log: None,
            delivery_queue: 1024,
            retry: RetrySettings::default(),
            auth: AuthSettings::default(),
            mailer: MailerSettings::default(),
        }
    }
}

impl Default for RetrySettings {
    fn default() -> Self {
        let p = RetryPolicy::default();
        RetrySettings { attempts: p.attempts, initial_backoff_ms: p.initial_backoff.as_millis() as u64, multiplier: p.multiplier }
    }
}

impl Default for AuthSettings {
    fn default() -> Self {
        AuthSettings {
            password_hash_cost: bcrypt::DEFAULT_COST,
            token_ttl_hours: 24,
            otp_ttl_minutes: 10,
            otp_requests_per_hour: 5,
            min_password_len: 8,
        }
    }
}

impl Default for MailerSettings {
    fn default() -> Self {
        MailerSettings {
            kind: MailerKind::Disabled,
            host: "localhost".into(),
            port: 25,
            username: None,
            password: None,
            from: "NephroCare <no-reply@localhost>".into(),
        }
    }
}

impl RetrySettings {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.attempts,
            initial_backoff: Duration::from_millis(self.initial_backoff_ms),
            multiplier: self.multiplier,
        }
    }
}

impl Config {
    /// Reads `path` (if given), applies environment overrides, resolves
    /// relative paths against the config file's directory and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(path, std::env::vars())
    }

    pub fn load_with_env(path: Option<&Path>, env: impl IntoIterator<Item = (String, String)>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_owned(), source })?,
            None => String::new(),
        };
        let mut doc: toml::Table = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        apply_env(&mut doc, env)?;
        let mut config: Config = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if let Some(dir) = path.and_then(Path::parent) {
            config.resolve_relative(dir);
        }
        config.validate()?;
        Ok(config)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store_path);
        fix(&mut self.blob_dir);
        fix(&mut self.bp_reference);
        fix(&mut self.growth_reference);
        if let Some(p) = self.hospitals.as_mut() {
            fix(p);
        }
        if let Some(p) = self.alert_log.as_mut() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(4..=31).contains(&self.auth.password_hash_cost) {
            return bad(format!("auth.password_hash_cost must be 4..=31, got {}", self.auth.password_hash_cost));
        }
        if self.auth.token_ttl_hours <= 0 || self.auth.otp_ttl_minutes <= 0 {
            return bad("auth TTLs must be positive".into());
        }
        if self.retry.attempts == 0 || self.retry.multiplier == 0 {
            return bad("retry.attempts and retry.multiplier must be at least 1".into());
        }
        if self.delivery_queue == 0 {
            return bad("delivery_queue must be at least 1".into());
        }
        for url in &self.webhook_urls {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                return bad(format!("webhook url {url:?} must be http(s)"));
            }
        }
        Ok(())
    }
}

fn apply_env(doc: &mut toml::Table, env: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
    let mut vars: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(str::to_ascii_lowercase).collect();
        // NEPHRO_CONFIG names the file itself
        if path == ["config"] {
            continue;
        }
        let value = parse_scalar(&raw);
        let (last, parents) = path.split_last().expect("split yields at least one part");
        let mut table = &mut *doc;
        for part in parents {
            let entry = table.entry(part.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| ConfigError::Invalid(format!("{key}: {part} is not a section")))?;
        }
        table.insert(last.clone(), value);
    }
    Ok(())
}

fn parse_scalar(raw: &str) -> toml::Value {
    // parse as the right-hand side of a TOML assignment: 42, true, ["a"]
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_owned())),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}
