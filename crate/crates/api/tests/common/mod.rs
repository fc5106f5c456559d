#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, TimeZone, Utc};
use http_body_util::BodyExt;
use nephro_api::config::Config;
use nephro_api::mailer::CapturingMailer;
use nephro_api::{build_state, router, AppState};
use nephro_core::ManualClock;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

pub mod matrix;

pub const PASSWORD: &str = "correct horse battery";

pub fn at(y: i32, m: u32, d: u32, hh: u32, mm: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(y, m, d, hh, mm, 0).unwrap()
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|_| panic!("not JSON: {}", self.text()))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

pub struct TestApp {
    pub app: Router,
    pub state: AppState,
    pub clock: Arc<ManualClock>,
    pub mailer: Arc<CapturingMailer>,
    pub dir: TempDir,
}

pub fn test_config(dir: &std::path::Path) -> Config {
    let mut config = Config { store_path: dir.join("store"), blob_dir: dir.join("blobs"), ..Config::default() };
    config.auth.password_hash_cost = 4;
    config
}

impl TestApp {
    pub fn new(now: DateTime<Utc>) -> Self {
        let dir = tempfile::tempdir().unwrap();
        Self::with_config(now, test_config(dir.path()), dir)
    }

    pub fn with_config(now: DateTime<Utc>, config: Config, dir: TempDir) -> Self {
        let clock = Arc::new(ManualClock::new(now));
        let mailer = Arc::new(CapturingMailer::new());
        let (state, _worker) = build_state(config, clock.clone(), mailer.clone()).unwrap();
        TestApp { app: router(state.clone()), state, clock, mailer, dir }
    }

    pub async fn request(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let mut builder = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            builder = builder.header("authorization", format!("Bearer {t}"));
        }
        let body = match body {
            Some(v) => {
                builder = builder.header("content-type", "application/json");
                Body::from(serde_json::to_vec(&v).unwrap())
            }
            None => Body::empty(),
        };
        self.send(builder.body(body).unwrap()).await
    }

    pub async fn send(&self, req: Request<Body>) -> Reply {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        Reply { status, headers, body }
    }

    pub async fn get(&self, uri: &str, token: Option<&str>) -> Reply {
        self.request(Method::GET, uri, token, None).await
    }

    pub async fn post(&self, uri: &str, token: Option<&str>, body: Value) -> Reply {
        self.request(Method::POST, uri, token, Some(body)).await
    }

    /// Registers and signs in a doctor; returns `(id, token)`.
    pub async fn doctor(&self, name: &str, email: &str) -> (String, String) {
        let r = self
            .post(
                "/doctors",
                None,
                json!({ "name": name, "center": "Paediatric Nephrology OPD", "contact": "+91 11 2658 8500", "email": email, "password": PASSWORD }),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        let id = r.json()["id"].as_str().unwrap().to_owned();
        (id, self.login(email, "doctor").await)
    }

    /// Registers and signs in a patient; returns `(id, token)`.
    pub async fn patient(&self, name: &str, email: &str, dob: &str, sex: &str, doctor: Option<&str>) -> (String, String) {
        let r = self
            .post(
                "/patients",
                None,
                json!({ "name": name, "date_of_birth": dob, "sex": sex, "doctor_id": doctor, "email": email, "password": PASSWORD }),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        let id = r.json()["id"].as_str().unwrap().to_owned();
        (id, self.login(email, "patient").await)
    }

    pub async fn login(&self, email: &str, role: &str) -> String {
        let r = self.post("/auth/login", None, json!({ "email": email, "password": PASSWORD, "role": role })).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text());
        r.json()["token"].as_str().unwrap().to_owned()
    }

    /// POST that must succeed; returns the JSON body.
    pub async fn ok(&self, uri: &str, token: &str, body: Value) -> Value {
        let r = self.post(uri, Some(token), body).await;
        assert!(r.status.is_success(), "POST {uri}: {} {}", r.status, r.text());
        r.json()
    }
}

pub struct ThreeDay {
    pub patient: String,
    pub doctor: String,
    pub patient_token: String,
    pub doctor_token: String,
}

/// Same sequence as the core crate's three-day fixture, over HTTP. Its
/// export must equal `crates/core/tests/fixtures/three_day_export.csv`.
pub async fn three_day_fixture(t: &TestApp) -> ThreeDay {
    t.clock.set(at(2024, 3, 1, 7, 0));
    let (doctor, dt) = t.doctor("Dr. Arvind Bagga", "bagga@example.org").await;
    let (patient, pt) = t.patient("Riya", "riya.family@example.org", "2017-06-15", "F", Some(&doctor)).await;
    let p = |suffix: &str| format!("/patients/{patient}/{suffix}");

    t.clock.set(at(2024, 3, 1, 8, 0));
    t.ok(&p("entries"), &pt, json!({ "date": "2024-03-01", "grade": "1+", "symptoms": "puffy eyes, mild" })).await;
    t.clock.set(at(2024, 3, 1, 10, 0));
    t.ok(
        &p("measurements"),
        &dt,
        json!({ "date": "2024-03-01", "systolic": 104, "diastolic": 66, "height_cm": 118.4, "weight_kg": 22.35, "comments": "Started \"prednisolone\"" }),
    )
    .await;
    t.clock.set(at(2024, 3, 1, 10, 5));
    let pred = t
        .ok(
            &p("prescriptions"),
            &dt,
            json!({ "medicine_name": "Prednisolone", "category": "steroid", "dose_amount": 20.0, "dose_unit": "mg", "frequency": 2, "start": "2024-03-01", "end": "2024-03-03" }),
        )
        .await["prescription"]["id"]
        .as_str()
        .unwrap()
        .to_owned();
    t.clock.set(at(2024, 3, 1, 10, 6));
    let enal = t
        .ok(
            &p("prescriptions"),
            &dt,
            json!({ "medicine_name": "Enalapril", "category": "other", "dose_amount": 2.5, "dose_unit": "mg", "frequency": 1, "start": "2024-03-01", "end": null }),
        )
        .await["prescription"]["id"]
        .as_str()
        .unwrap()
        .to_owned();
    t.clock.set(at(2024, 3, 1, 20, 0));
    t.ok(&p("doses"), &pt, json!({ "prescription_id": pred, "date": "2024-03-01", "taken": true })).await;
    t.ok(&p("doses"), &pt, json!({ "prescription_id": enal, "date": "2024-03-01", "taken": true })).await;

    // sessions last a day, so sign in again each morning
    t.clock.set(at(2024, 3, 2, 8, 0));
    let (pt, dt) = (t.login("riya.family@example.org", "patient").await, t.login("bagga@example.org", "doctor").await);
    t.ok(&p("entries"), &pt, json!({ "date": "2024-03-02", "grade": "3+", "symptoms": "swelling\nlegs" })).await;
    t.clock.set(at(2024, 3, 2, 11, 0));
    t.ok(&p("advice"), &dt, json!({ "text": "Reduce salt, check urine daily" })).await;
    t.clock.set(at(2024, 3, 2, 12, 0));
    t.ok(&p("advice"), &pt, json!({ "text": "Feels tired" })).await;
    t.clock.set(at(2024, 3, 2, 20, 0));
    t.ok(&p("doses"), &pt, json!({ "prescription_id": pred, "date": "2024-03-02", "taken": true })).await;
    t.ok(&p("doses"), &pt, json!({ "prescription_id": enal, "date": "2024-03-02", "taken": false })).await;

    t.clock.set(at(2024, 3, 3, 8, 0));
    let (pt, dt) = (t.login("riya.family@example.org", "patient").await, t.login("bagga@example.org", "doctor").await);
    t.ok(&p("entries"), &pt, json!({ "date": "2024-03-03", "grade": "trace", "symptoms": "" })).await;
    t.clock.set(at(2024, 3, 3, 9, 0));
    t.ok(&p("measurements"), &dt, json!({ "date": "2024-03-03", "height_cm": 118.5 })).await;
    t.clock.set(at(2024, 3, 3, 9, 30));
    t.ok(&p("measurements"), &dt, json!({ "date": "2024-03-03", "systolic": 142, "diastolic": 94, "weight_kg": 22.0 })).await;
    t.clock.set(at(2024, 3, 3, 9, 45));
    t.ok(&p("tests"), &dt, json!({ "tests": ["Serum albumin", "Urine PCR"], "comments": "fasting" })).await;
    t.clock.set(at(2024, 3, 3, 20, 0));
    t.ok(&p("doses"), &pt, json!({ "prescription_id": pred, "date": "2024-03-03", "taken": false })).await;

    ThreeDay { patient, doctor, patient_token: pt, doctor_token: dt }
}

pub fn golden_export() -> Vec<u8> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/three_day_export.csv");
    std::fs::read(path).unwrap()
}
