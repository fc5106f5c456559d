//! The documented access matrix: every authenticated route against the five
//! kinds of caller.

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use serde_json::{json, Value};

use super::{at, TestApp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Caller {
    PatientSelf,
    PatientOther,
    LinkedDoctor,
    UnlinkedDoctor,
    Anonymous,
}

pub const CALLERS: [Caller; 5] =
    [Caller::PatientSelf, Caller::PatientOther, Caller::LinkedDoctor, Caller::UnlinkedDoctor, Caller::Anonymous];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Success,
    Status(u16),
}

use Expect::{Status, Success};

const ANON: Expect = Status(401);
const DENY: Expect = Status(403);

/// Patient or linked doctor.
const SHARED: [Expect; 5] = [Success, DENY, Success, DENY, ANON];
const DOCTOR: [Expect; 5] = [DENY, DENY, Success, DENY, ANON];
const SELF_ONLY: [Expect; 5] = [Success, DENY, DENY, DENY, ANON];
const ANY_SIGNED_IN: [Expect; 5] = [Success, Success, Success, Success, ANON];

#[derive(Debug, Clone)]
pub enum Payload {
    None,
    Json(Value),
    Png,
}

#[derive(Debug, Clone)]
pub struct Route {
    pub method: Method,
    /// `{p}` patient, `{d}` linked doctor, `{rx}` prescription, `{report}` report, `{d3}` spare doctor.
    pub path: &'static str,
    pub payload: Payload,
    pub expect: [Expect; 5],
}

fn route(method: Method, path: &'static str, payload: Payload, expect: [Expect; 5]) -> Route {
    Route { method, path, payload, expect }
}

pub fn routes() -> Vec<Route> {
    use Payload::{Json as J, None as N};
    let today = "2024-03-10";
    vec![
        route(Method::GET, "/me", N, ANY_SIGNED_IN),
        route(Method::GET, "/hospitals/nearby", N, ANY_SIGNED_IN),
        route(Method::GET, "/doctors/{d}", N, ANY_SIGNED_IN),
        route(Method::GET, "/doctors/{d}/patients", N, DOCTOR),
        route(Method::GET, "/doctors/{d}/overview", N, DOCTOR),
        route(Method::GET, "/doctors/{d}/notifications", N, DOCTOR),
        route(Method::GET, "/patients/{p}", N, SHARED),
        route(Method::PATCH, "/patients/{p}", J(json!({ "contact": "+91 00000 00000" })), SHARED),
        route(Method::POST, "/patients/{p}/verify", N, DOCTOR),
        route(Method::POST, "/patients/{p}/entries", J(json!({ "date": today, "grade": "2+" })), SHARED),
        route(Method::GET, "/patients/{p}/entries", N, SHARED),
        route(
            Method::POST,
            "/patients/{p}/measurements",
            J(json!({ "date": today, "systolic": 100, "diastolic": 60 })),
            DOCTOR,
        ),
        route(
            Method::POST,
            "/patients/{p}/prescriptions",
            J(json!({ "medicine_name": "Prednisolone", "category": "steroid", "dose_amount": 10, "dose_unit": "mg", "frequency": 1, "start": today, "end": null })),
            DOCTOR,
        ),
        route(Method::GET, "/patients/{p}/prescriptions", N, SHARED),
        route(Method::PATCH, "/patients/{p}/prescriptions/{rx}", J(json!({ "dose_amount": 15 })), DOCTOR),
        route(Method::POST, "/patients/{p}/doses", J(json!({ "prescription_id": "{rx}", "date": today, "taken": true })), SHARED),
        route(Method::POST, "/patients/{p}/reports", Payload::Png, SHARED),
        route(Method::GET, "/patients/{p}/reports", N, SHARED),
        route(Method::GET, "/patients/{p}/reports/{report}", N, SHARED),
        route(Method::POST, "/patients/{p}/advice", J(json!({ "text": "Drink water" })), SHARED),
        route(Method::POST, "/patients/{p}/tests", J(json!({ "tests": ["Serum albumin"] })), DOCTOR),
        route(Method::POST, "/patients/{p}/notify", J(json!({ "body": "Please call the clinic" })), DOCTOR),
        route(Method::GET, "/patients/{p}/timeline", N, SHARED),
        route(Method::GET, "/patients/{p}/export.csv", N, SHARED),
        route(Method::GET, "/patients/{p}/notifications", N, SHARED),
        route(Method::GET, "/patients/{p}/status", N, SHARED),
        route(Method::GET, "/patients/{p}/adherence", N, SHARED),
        // last: a successful transfer changes who is linked
        route(Method::POST, "/patients/{p}/transfer", J(json!({ "doctor_id": "{d3}" })), SELF_ONLY),
    ]
}

pub struct World {
    pub patient: String,
    pub other_patient: String,
    pub doctor: String,
    pub unlinked_doctor: String,
    pub spare_doctor: String,
    pub prescription: String,
    pub report: String,
    tokens: [Option<String>; 5],
}

pub const PNG: &[u8] = b"\x89PNG\r\n\x1a\n\0\0\0\rIHDR";

impl World {
    pub async fn build(t: &TestApp) -> World {
        t.clock.set(at(2024, 3, 10, 9, 0));
        let (doctor, dt) = t.doctor("Dr. Linked", "linked@example.org").await;
        let (unlinked, ut) = t.doctor("Dr. Elsewhere", "elsewhere@example.org").await;
        let (spare, _) = t.doctor("Dr. Spare", "spare@example.org").await;
        let (patient, pt) = t.patient("Asha", "asha@example.org", "2016-02-01", "F", Some(&doctor)).await;
        let (other, ot) = t.patient("Kabir", "kabir@example.org", "2015-08-20", "M", Some(&unlinked)).await;
        let rx = t
            .ok(
                &format!("/patients/{patient}/prescriptions"),
                &dt,
                json!({ "medicine_name": "Enalapril", "category": "other", "dose_amount": 2.5, "dose_unit": "mg", "frequency": 1, "start": "2024-03-01", "end": null }),
            )
            .await["prescription"]["id"]
            .as_str()
            .unwrap()
            .to_owned();
        let r = t.send(png_request(&format!("/patients/{patient}/reports"), Some(&pt))).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text());
        let report = r.json()["id"].as_str().unwrap().to_owned();
        World {
            patient,
            other_patient: other,
            doctor,
            unlinked_doctor: unlinked,
            spare_doctor: spare,
            prescription: rx,
            report,
            tokens: [Some(pt), Some(ot), Some(dt), Some(ut), None],
        }
    }

    pub fn token(&self, caller: Caller) -> Option<&str> {
        self.tokens[CALLERS.iter().position(|c| *c == caller).unwrap()].as_deref()
    }

    pub fn fill(&self, template: &str) -> String {
        template
            .replace("{p}", &self.patient)
            .replace("{d3}", &self.spare_doctor)
            .replace("{d}", &self.doctor)
            .replace("{rx}", &self.prescription)
            .replace("{report}", &self.report)
    }
}

pub fn png_request(uri: &str, token: Option<&str>) -> Request<Body> {
    let mut b = Request::builder().method(Method::POST).uri(uri).header("content-type", "image/png");
    if let Some(t) = token {
        b = b.header("authorization", format!("Bearer {t}"));
    }
    b.body(Body::from(PNG)).unwrap()
}

pub struct Cell {
    pub method: Method,
    pub path: &'static str,
    pub caller: Caller,
    pub expected: Expect,
    pub actual: StatusCode,
}

impl Cell {
    pub fn holds(&self) -> bool {
        match self.expected {
            Success => self.actual.is_success(),
            Status(code) => self.actual.as_u16() == code,
        }
    }
}

/// Runs every route × caller against one world. Denied and anonymous calls
/// go first within a route so the successful call does not affect them.
pub async fn run(t: &TestApp, world: &World) -> Vec<Cell> {
    let mut cells = Vec::new();
    for r in routes() {
        let uri = world.fill(r.path);
        let mut order: Vec<(Caller, Expect)> = CALLERS.iter().copied().zip(r.expect).collect();
        order.sort_by_key(|(_, e)| matches!(e, Success));
        for (caller, expected) in order {
            let token = world.token(caller);
            let reply = match &r.payload {
                Payload::None => t.request(r.method.clone(), &uri, token, None).await,
                Payload::Json(v) => {
                    let body: Value = serde_json::from_str(&world.fill(&v.to_string())).unwrap();
                    t.request(r.method.clone(), &uri, token, Some(body)).await
                }
                Payload::Png => t.send(png_request(&uri, token)).await,
            };
            cells.push(Cell { method: r.method.clone(), path: r.path, caller, expected, actual: reply.status });
        }
    }
    cells
}
