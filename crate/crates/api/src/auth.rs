//! Credentials, sessions and one-time codes.
//!
//! Passwords are stored only as bcrypt hashes. Sessions are random 256-bit
//! tokens held in memory; restarting the service signs everyone out. Codes
//! are six digits, expire after a configurable time and verify once.

use std::collections::{HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, TimeDelta, Utc};
use nephro_core::clock::{iso_seconds, Clock};
use nephro_core::model::{Actor, Role};
use nephro_core::{DoctorId, PatientId};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::config::AuthSettings;
use crate::error::{ApiError, ApiResult};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "role", content = "id", rename_all = "snake_case")]
pub enum Principal {
    Patient(PatientId),
    Doctor(DoctorId),
}

impl Principal {
    pub fn role(&self) -> Role {
        match self {
            Principal::Patient(_) => Role::Patient,
            Principal::Doctor(_) => Role::Doctor,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Principal::Patient(id) => id.as_str(),
            Principal::Doctor(id) => id.as_str(),
        }
    }

    pub fn actor(&self) -> Actor {
        match self {
            Principal::Patient(id) => Actor::Patient(id.clone()),
            Principal::Doctor(id) => Actor::Doctor(id.clone()),
        }
    }
}

/// Stored login. Never leaves this module except to disk.
#[derive(Clone, Serialize, Deserialize)]
struct Credential {
    principal: Principal,
    email: String,
    password_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IssuedToken {
    pub token: String,
    pub role: Role,
    pub principal_id: String,
    #[serde(with = "iso_seconds")]
    pub expires_at: DateTime<Utc>,
}

struct Session {
    principal: Principal,
    expires_at: DateTime<Utc>,
}

struct OtpChallenge {
    code: String,
    expires_at: DateTime<Utc>,
    consumed: bool,
}

#[derive(Default)]
struct OtpState {
    challenges: Vec<OtpChallenge>,
    requests: VecDeque<DateTime<Utc>>,
}

pub struct Auth {
    settings: AuthSettings,
    clock: Arc<dyn Clock>,
    path: Option<PathBuf>,
    credentials: RwLock<Vec<Credential>>,
    sessions: Mutex<HashMap<String, Session>>,
    otps: Mutex<HashMap<String, OtpState>>,
    /// Verified against when the email is unknown, so both paths cost the same.
    dummy_hash: String,
}

pub fn normalize_email(email: &str) -> String {
    email.trim().to_ascii_lowercase()
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|_| ApiError::internal())
}

impl Auth {
    /// Loads credentials from `path` when given (created on first write).
    pub fn open(settings: AuthSettings, clock: Arc<dyn Clock>, path: Option<PathBuf>) -> Result<Self, String> {
        let credentials = match &path {
            Some(p) if p.exists() => nephro_core::repo::read_json(p).map_err(|e| e.to_string())?,
            _ => Vec::new(),
        };
        let dummy_hash = bcrypt::hash("placeholder password", settings.password_hash_cost).map_err(|e| e.to_string())?;
        Ok(Auth {
            settings,
            clock,
            path,
            credentials: RwLock::new(credentials),
            sessions: Mutex::new(HashMap::new()),
            otps: Mutex::new(HashMap::new()),
            dummy_hash,
        })
    }

    pub fn settings(&self) -> &AuthSettings {
        &self.settings
    }

    pub fn email_taken(&self, role: Role, email: &str) -> bool {
        let email = normalize_email(email);
        self.credentials.read().unwrap().iter().any(|c| c.principal.role() == role && c.email == email)
    }

    pub async fn hash_password(&self, password: &str) -> ApiResult<String> {
        if password.chars().count() < self.settings.min_password_len {
            return Err(ApiError::validation(format!(
                "password must be at least {} characters",
                self.settings.min_password_len
            )));
        }
        let password = password.to_owned();
        let cost = self.settings.password_hash_cost;
        blocking(move || bcrypt::hash(password, cost)).await?.map_err(|_| ApiError::internal())
    }

    /// Creates the principal with `create` and stores its credential, all
    /// under the credential lock so two registrations cannot claim one email.
    pub fn register(
        &self,
        role: Role,
        email: &str,
        password_hash: String,
        create: impl FnOnce() -> ApiResult<Principal>,
    ) -> ApiResult<Principal> {
        let email = normalize_email(email);
        if !email.contains('@') || email.len() < 3 {
            return Err(ApiError::validation("a valid email is required"));
        }
        let mut creds = self.credentials.write().unwrap();
        if creds.iter().any(|c| c.principal.role() == role && c.email == email) {
            return Err(ApiError::conflict("email already registered"));
        }
        let principal = create()?;
        debug_assert_eq!(principal.role(), role);
        creds.push(Credential { principal: principal.clone(), email, password_hash });
        if let Some(path) = &self.path {
            if let Err(e) = nephro_core::repo::write_json_atomic(path, &*creds) {
                creds.pop();
                tracing::error!(error = %e, "cannot persist credentials");
                return Err(ApiError::internal());
            }
        }
        Ok(principal)
    }

    fn candidates(&self, email: &str, role: Option<Role>) -> Vec<Credential> {
        let email = normalize_email(email);
        let mut found: Vec<Credential> = self
            .credentials
            .read()
            .unwrap()
            .iter()
            .filter(|c| c.email == email && role.is_none_or(|r| c.principal.role() == r))
            .cloned()
            .collect();
        // without an explicit role the patient login is tried first
        found.sort_by_key(|c| c.principal.role());
        found
    }

    /// Password login. Wrong password and unknown email fail identically.
    pub async fn login(&self, email: &str, password: &str, role: Option<Role>) -> ApiResult<IssuedToken> {
        let candidates = self.candidates(email, role);
        let password = password.to_owned();
        let dummy = self.dummy_hash.clone();
        let matched = blocking(move || {
            if candidates.is_empty() {
                let _ = bcrypt::verify(&password, &dummy);
                return None;
            }
            candidates
                .into_iter()
                .find(|c| bcrypt::verify(&password, &c.password_hash).unwrap_or(false))
                .map(|c| c.principal)
        })
        .await?;
        match matched {
            Some(principal) => Ok(self.issue(principal)),
            None => Err(ApiError::bad_credentials()),
        }
    }

    pub fn issue(&self, principal: Principal) -> IssuedToken {
        let mut bytes = [0u8; 32];
        rand::rng().fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        let expires_at = self.clock.now() + TimeDelta::hours(self.settings.token_ttl_hours);
        let issued = IssuedToken {
            token: token.clone(),
            role: principal.role(),
            principal_id: principal.id().to_owned(),
            expires_at,
        };
        let mut sessions = self.sessions.lock().unwrap();
        let now = self.clock.now();
        sessions.retain(|_, s| s.expires_at > now);
        sessions.insert(token, Session { principal, expires_at });
        issued
    }

    /// The principal behind a live token.
    pub fn authenticate(&self, token: &str) -> Option<Principal> {
        let mut sessions = self.sessions.lock().unwrap();
        let now = self.clock.now();
        match sessions.get(token) {
            Some(s) if s.expires_at > now => Some(s.principal.clone()),
            Some(_) => {
                sessions.remove(token);
                None
            }
            None => None,
        }
    }

    pub fn revoke(&self, token: &str) {
        self.sessions.lock().unwrap().remove(token);
    }

    /// Records a code request. Returns the new code when the email belongs
    /// to someone; unknown emails are rate-limited the same way but get no
    /// code, so the response does not reveal which emails exist.
    pub fn otp_request(&self, email: &str) -> ApiResult<Option<String>> {
        let email = normalize_email(email);
        let now = self.clock.now();
        let known = !self.candidates(&email, None).is_empty();
        let mut otps = self.otps.lock().unwrap();
        let state = otps.entry(email).or_default();
        while state.requests.front().is_some_and(|t| *t <= now - TimeDelta::hours(1)) {
            state.requests.pop_front();
        }
        if state.requests.len() >= self.settings.otp_requests_per_hour {
            return Err(ApiError::new(
                axum::http::StatusCode::TOO_MANY_REQUESTS,
                "rate_limited",
                "too many code requests; try again later",
            ));
        }
        state.requests.push_back(now);
        if !known {
            return Ok(None);
        }
        let code = format!("{:06}", rand::rng().random_range(0..1_000_000u32));
        state.challenges.retain(|c| !c.consumed && c.expires_at > now);
        state.challenges.push(OtpChallenge {
            code: code.clone(),
            expires_at: now + TimeDelta::minutes(self.settings.otp_ttl_minutes),
            consumed: false,
        });
        Ok(Some(code))
    }

    pub fn otp_verify(&self, email: &str, code: &str, role: Option<Role>) -> ApiResult<IssuedToken> {
        let email = normalize_email(email);
        let now = self.clock.now();
        let verified = {
            let mut otps = self.otps.lock().unwrap();
            let challenge = otps.get_mut(&email).and_then(|state| {
                state
                    .challenges
                    .iter_mut()
                    .find(|c| !c.consumed && c.expires_at > now && constant_time_eq(c.code.as_bytes(), code.trim().as_bytes()))
            });
            match challenge {
                Some(c) => {
                    c.consumed = true;
                    true
                }
                None => false,
            }
        };
        if !verified {
            return Err(ApiError::bad_credentials());
        }
        let principal = self.candidates(&email, role).into_iter().next().map(|c| c.principal);
        principal.map(|p| self.issue(p)).ok_or_else(ApiError::bad_credentials)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nephro_core::ManualClock;

    fn auth(clock: Arc<ManualClock>) -> Auth {
        let settings = AuthSettings { password_hash_cost: 4, ..AuthSettings::default() };
        Auth::open(settings, clock, None).unwrap()
    }

    fn clock() -> Arc<ManualClock> {
        Arc::new(ManualClock::new(DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z").unwrap().to_utc()))
    }

    #[tokio::test]
    async fn password_round_trip() {
        let a = auth(clock());
        let hash = a.hash_password("correct horse").await.unwrap();
        assert!(!hash.contains("correct horse"));
        let p = Principal::Patient(PatientId::generate());
        a.register(Role::Patient, "A@Example.org ", hash, || Ok(p.clone())).unwrap();
        let t = a.login("a@example.org", "correct horse", None).await.unwrap();
        assert_eq!(a.authenticate(&t.token), Some(p));
        assert_eq!(t.token.len(), 64);
        assert_eq!(a.login("a@example.org", "wrong", None).await.unwrap_err(), ApiError::bad_credentials());
        assert_eq!(a.login("nobody@example.org", "wrong", None).await.unwrap_err(), ApiError::bad_credentials());
        assert!(a.hash_password("short").await.is_err());
    }

    #[tokio::test]
    async fn tokens_expire() {
        let c = clock();
        let a = auth(c.clone());
        let t = a.issue(Principal::Doctor(DoctorId::generate()));
        c.advance(TimeDelta::hours(24) - TimeDelta::seconds(1));
        assert!(a.authenticate(&t.token).is_some());
        c.advance(TimeDelta::seconds(1));
        assert!(a.authenticate(&t.token).is_none());
    }

    #[test]
    fn codes_are_six_digits() {
        let a = auth(clock());
        a.register(Role::Doctor, "d@x.org", "h".into(), || Ok(Principal::Doctor(DoctorId::generate()))).unwrap();
        let code = a.otp_request("d@x.org").unwrap().unwrap();
        assert_eq!(code.len(), 6);
        assert!(code.bytes().all(|b| b.is_ascii_digit()));
        assert!(a.otp_request("unknown@x.org").unwrap().is_none());
    }

    #[test]
    fn constant_time_compare() {
        assert!(constant_time_eq(b"123456", b"123456"));
        assert!(!constant_time_eq(b"123456", b"123457"));
        assert!(!constant_time_eq(b"12345", b"123456"));
    }
}
