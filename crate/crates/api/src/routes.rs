use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::header::{CONTENT_DISPOSITION, CONTENT_TYPE};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use chrono::{NaiveDate, TimeDelta};
use nephro_core::model::{Role, TestOrder};
use nephro_core::{
    DateRange, DetailsUpdate, DiaryError, NewDoctor, NewMeasurement, NewPatient, NewPrescription, NotificationEvent,
    PrescriptionUpdate,
};
use nephro_rules::UrineProteinGrade;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::auth::Principal;
use crate::error::{ApiError, ApiResult};
use crate::extract::{doctor_id, patient_id, record_id, ApiJson, ApiQuery, Session};
use crate::state::AppState;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

/// Cap for JSON bodies; report uploads use `max_upload_bytes` instead.
pub const JSON_BODY_LIMIT: usize = 64 * 1024;

pub fn router(state: AppState) -> Router {
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/health", get(health))
        .route("/auth/login", post(login))
        .route("/auth/logout", post(logout))
        .route("/auth/otp/request", post(otp_request))
        .route("/auth/otp/verify", post(otp_verify))
        .route("/me", get(me))
        .route("/patients", post(register_patient))
        .route("/patients/{id}", get(get_patient).patch(update_patient))
        .route("/patients/{id}/verify", post(verify_patient))
        .route("/patients/{id}/transfer", post(transfer))
        .route("/patients/{id}/entries", get(list_entries).post(add_entry))
        .route("/patients/{id}/measurements", post(add_measurement))
        .route("/patients/{id}/prescriptions", get(list_prescriptions).post(add_prescription))
        .route("/patients/{id}/prescriptions/{rx}", patch(update_prescription))
        .route("/patients/{id}/doses", post(add_dose))
        .route("/patients/{id}/reports", get(list_reports).post(add_report).layer(DefaultBodyLimit::max(limit)))
        .route("/patients/{id}/reports/{report}", get(report_content))
        .route("/patients/{id}/advice", post(add_advice))
        .route("/patients/{id}/tests", post(order_tests))
        .route("/patients/{id}/notify", post(notify))
        .route("/patients/{id}/timeline", get(timeline))
        .route("/patients/{id}/export.csv", get(export))
        .route("/patients/{id}/notifications", get(notifications))
        .route("/patients/{id}/status", get(status))
        .route("/patients/{id}/adherence", get(adherence))
        .route("/doctors", post(register_doctor))
        .route("/doctors/{id}", get(get_doctor))
        .route("/doctors/{id}/patients", get(doctor_patients))
        .route("/doctors/{id}/overview", get(doctor_overview))
        .route("/doctors/{id}/notifications", get(doctor_notifications))
        .route("/hospitals/nearby", get(hospitals))
        .layer(DefaultBodyLimit::max(JSON_BODY_LIMIT))
        .with_state(state)
}

fn created<T: Serialize>(body: T) -> Response {
    (StatusCode::CREATED, Json(body)).into_response()
}

fn ok<T: Serialize>(body: T) -> Response {
    Json(body).into_response()
}

fn client_key(headers: &HeaderMap, body_key: Option<String>) -> ApiResult<Option<String>> {
    let header = match headers.get(IDEMPOTENCY_HEADER) {
        Some(v) => Some(v.to_str().map_err(|_| ApiError::validation("malformed Idempotency-Key"))?.trim().to_owned()),
        None => None,
    };
    let key = header.or(body_key).filter(|k| !k.is_empty());
    if key.as_ref().is_some_and(|k| k.len() > 200) {
        return Err(ApiError::validation("idempotency key longer than 200 characters"));
    }
    Ok(key)
}

async fn health() -> Response {
    ok(json!({ "status": "ok" }))
}

// ---- registration and sign-in ----

#[derive(Deserialize)]
struct PatientRegistration {
    #[serde(flatten)]
    profile: NewPatient,
    email: String,
    password: String,
}

#[derive(Deserialize)]
struct DoctorRegistration {
    #[serde(flatten)]
    profile: NewDoctor,
    email: String,
    password: String,
}

/// A dangling doctor reference is a bad field here, not a missing resource.
fn registration_error(e: DiaryError) -> ApiError {
    match e {
        DiaryError::UnknownDoctor(id) => ApiError::validation(format!("unknown doctor {id}")),
        other => other.into(),
    }
}

async fn register_patient(State(s): State<AppState>, ApiJson(req): ApiJson<PatientRegistration>) -> ApiResult<Response> {
    if s.auth.email_taken(Role::Patient, &req.email) {
        return Err(ApiError::conflict("email already registered"));
    }
    let hash = s.auth.hash_password(&req.password).await?;
    let mut profile = None;
    s.auth.register(Role::Patient, &req.email, hash, || {
        let p = s.diary.create_patient(req.profile).map_err(registration_error)?;
        let principal = Principal::Patient(p.id.clone());
        profile = Some(p);
        Ok(principal)
    })?;
    let profile = profile.expect("set by the registration closure");
    Ok(created(json!({ "id": profile.id, "profile": profile })))
}

async fn register_doctor(State(s): State<AppState>, ApiJson(req): ApiJson<DoctorRegistration>) -> ApiResult<Response> {
    if s.auth.email_taken(Role::Doctor, &req.email) {
        return Err(ApiError::conflict("email already registered"));
    }
    let hash = s.auth.hash_password(&req.password).await?;
    let mut profile = None;
    s.auth.register(Role::Doctor, &req.email, hash, || {
        let d = s.diary.create_doctor(req.profile)?;
        let principal = Principal::Doctor(d.id.clone());
        profile = Some(d);
        Ok(principal)
    })?;
    let profile = profile.expect("set by the registration closure");
    Ok(created(json!({ "id": profile.id, "profile": profile })))
}

#[derive(Deserialize)]
struct LoginRequest {
    email: String,
    password: String,
    role: Option<Role>,
}

async fn login(State(s): State<AppState>, ApiJson(req): ApiJson<LoginRequest>) -> ApiResult<Response> {
    Ok(ok(s.auth.login(&req.email, &req.password, req.role).await?))
}

async fn logout(State(s): State<AppState>, _session: Session, headers: HeaderMap) -> StatusCode {
    if let Some(token) = headers
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
    {
        s.auth.revoke(token.trim());
    }
    StatusCode::NO_CONTENT
}

#[derive(Deserialize)]
struct OtpRequest {
    email: String,
}

async fn otp_request(State(s): State<AppState>, ApiJson(req): ApiJson<OtpRequest>) -> ApiResult<Response> {
    if !s.mailer.enabled() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "otp_disabled", "code sign-in is not available"));
    }
    if let Some(code) = s.auth.otp_request(&req.email)? {
        let to = crate::auth::normalize_email(&req.email);
        // failures are logged, not returned, so the reply never reveals
        // whether the address is registered
        if let Err(e) = s.mailer.send_otp(&to, &code, s.auth.settings().otp_ttl_minutes).await {
            tracing::error!(error = %e, "sign-in code not sent");
        }
    }
    Ok((StatusCode::ACCEPTED, Json(json!({ "status": "accepted" }))).into_response())
}

#[derive(Deserialize)]
struct OtpVerify {
    email: String,
    code: String,
    role: Option<Role>,
}

async fn otp_verify(State(s): State<AppState>, ApiJson(req): ApiJson<OtpVerify>) -> ApiResult<Response> {
    Ok(ok(s.auth.otp_verify(&req.email, &req.code, req.role)?))
}

async fn me(State(s): State<AppState>, session: Session) -> ApiResult<Response> {
    let actor = session.actor();
    let profile = match &session.0 {
        Principal::Patient(id) => serde_json::to_value(s.diary.profile(&actor, id)?),
        Principal::Doctor(id) => serde_json::to_value(s.diary.doctor(id)?),
    }
    .map_err(|_| ApiError::internal())?;
    Ok(ok(json!({ "role": session.0.role(), "id": session.0.id(), "profile": profile })))
}

// ---- patient profile ----

async fn get_patient(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.profile(&session.actor(), &patient_id(&id)?)?))
}

async fn update_patient(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiJson(update): ApiJson<DetailsUpdate>,
) -> ApiResult<Response> {
    Ok(ok(s.diary.update_details(&session.actor(), &patient_id(&id)?, update)?))
}

async fn verify_patient(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.verify_patient(&session.actor(), &patient_id(&id)?)?))
}

#[derive(Deserialize)]
struct TransferRequest {
    doctor_id: String,
}

async fn transfer(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<TransferRequest>,
) -> ApiResult<Response> {
    let pid = patient_id(&id)?;
    let actor = session.actor();
    // who may transfer is decided before whether the target exists
    if session.0 != Principal::Patient(pid.clone()) {
        s.diary.profile(&actor, &pid)?;
        return Err(ApiError::forbidden("only the patient may change doctor"));
    }
    Ok(ok(s.diary.transfer_patient(&actor, &pid, &doctor_id(&req.doctor_id)?)?))
}

// ---- diary writes ----

#[derive(Deserialize)]
struct EntryRequest {
    date: NaiveDate,
    grade: UrineProteinGrade,
    #[serde(default)]
    symptoms: String,
}

async fn add_entry(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<EntryRequest>,
) -> ApiResult<Response> {
    let recorded = s.diary.record_entry(&session.actor(), &patient_id(&id)?, req.date, req.grade, &req.symptoms)?;
    s.alerts.enqueue(&recorded.events);
    Ok(created(recorded))
}

async fn list_entries(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.entries(&session.actor(), &patient_id(&id)?)?))
}

async fn add_measurement(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<NewMeasurement>,
) -> ApiResult<Response> {
    let recorded = s.diary.record_measurement(&session.actor(), &patient_id(&id)?, req)?;
    s.alerts.enqueue(&recorded.events);
    Ok(created(recorded))
}

#[derive(Serialize)]
struct WithEvents<T> {
    #[serde(flatten)]
    record: T,
    events: Vec<NotificationEvent>,
}

#[derive(Serialize)]
struct PrescriptionResponse {
    prescription: nephro_core::model::Prescription,
}

async fn add_prescription(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<NewPrescription>,
) -> ApiResult<Response> {
    let (prescription, events) = s.diary.add_prescription(&session.actor(), &patient_id(&id)?, req)?;
    s.alerts.enqueue(&events);
    Ok(created(WithEvents { record: PrescriptionResponse { prescription }, events }))
}

async fn update_prescription(
    State(s): State<AppState>,
    session: Session,
    Path((id, rx)): Path<(String, String)>,
    ApiJson(req): ApiJson<PrescriptionUpdate>,
) -> ApiResult<Response> {
    let pid = patient_id(&id)?;
    let (prescription, events) = s.diary.update_prescription(&session.actor(), &pid, &record_id(&rx)?, req)?;
    s.alerts.enqueue(&events);
    Ok(ok(WithEvents { record: PrescriptionResponse { prescription }, events }))
}

async fn list_prescriptions(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.record(&session.actor(), &patient_id(&id)?)?.prescriptions))
}

#[derive(Deserialize)]
struct DoseRequest {
    prescription_id: String,
    date: NaiveDate,
    taken: bool,
}

async fn add_dose(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<DoseRequest>,
) -> ApiResult<Response> {
    let pid = patient_id(&id)?;
    let dose = s.diary.record_dose(&session.actor(), &pid, &record_id(&req.prescription_id)?, req.date, req.taken)?;
    Ok(created(dose))
}

#[derive(Deserialize)]
struct ReportQuery {
    #[serde(default)]
    description: String,
}

/// Raw upload: the body is the file, `Content-Type` its media type.
async fn add_report(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiQuery(query): ApiQuery<ReportQuery>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let pid = patient_id(&id)?;
    let body = body.map_err(|e| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(e.status(), "too_large", format!("upload exceeds {} bytes", s.config.max_upload_bytes))
        } else {
            ApiError::validation(e.body_text())
        }
    })?;
    let media_type = headers
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .map(|v| v.split(';').next().unwrap_or("").trim().to_ascii_lowercase())
        .unwrap_or_default();
    let report = s.diary.add_report(&session.actor(), &pid, &body, &media_type, &query.description)?;
    Ok(created(report))
}

async fn list_reports(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.reports(&session.actor(), &patient_id(&id)?)?))
}

async fn report_content(
    State(s): State<AppState>,
    session: Session,
    Path((id, report)): Path<(String, String)>,
) -> ApiResult<Response> {
    let (upload, bytes) = s.diary.report_content(&session.actor(), &patient_id(&id)?, &record_id(&report)?)?;
    Ok(([(CONTENT_TYPE, upload.blob.media_type)], bytes).into_response())
}

#[derive(Deserialize)]
struct AdviceRequest {
    text: String,
    client_key: Option<String>,
}

async fn add_advice(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    headers: HeaderMap,
    ApiJson(req): ApiJson<AdviceRequest>,
) -> ApiResult<Response> {
    let key = client_key(&headers, req.client_key)?;
    let (advice, events) = s.diary.add_advice(&session.actor(), &patient_id(&id)?, &req.text, key.as_deref())?;
    s.alerts.enqueue(&events);
    Ok(created(json!({ "advice": advice, "events": events })))
}

#[derive(Deserialize)]
struct TestsRequest {
    tests: Vec<String>,
    #[serde(default)]
    comments: String,
}

async fn order_tests(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<TestsRequest>,
) -> ApiResult<Response> {
    let (order, events): (TestOrder, _) = s.diary.order_tests(&session.actor(), &patient_id(&id)?, req.tests, &req.comments)?;
    s.alerts.enqueue(&events);
    Ok(created(json!({ "order": order, "events": events })))
}

#[derive(Deserialize)]
struct NotifyRequest {
    body: String,
    client_key: Option<String>,
}

async fn notify(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    headers: HeaderMap,
    ApiJson(req): ApiJson<NotifyRequest>,
) -> ApiResult<Response> {
    let key = client_key(&headers, req.client_key)?;
    let (event, inserted) = s.diary.notify_patient(&session.actor(), &patient_id(&id)?, &req.body, key.as_deref())?;
    if inserted {
        s.alerts.enqueue(std::slice::from_ref(&event));
    }
    Ok((StatusCode::ACCEPTED, Json(json!({ "event": event, "inserted": inserted }))).into_response())
}

// ---- patient reads ----

#[derive(Deserialize)]
struct RangeQuery {
    start: Option<NaiveDate>,
    end: Option<NaiveDate>,
}

async fn timeline(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<RangeQuery>,
) -> ApiResult<Response> {
    let range = match (q.start, q.end) {
        (None, None) => None,
        (start, end) => Some(DateRange::new(start.unwrap_or(NaiveDate::MIN), end.unwrap_or(NaiveDate::MAX))?),
    };
    Ok(ok(s.diary.timeline(&session.actor(), &patient_id(&id)?, range)?))
}

async fn export(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    let pid = patient_id(&id)?;
    let csv = s.diary.export_csv(&session.actor(), &pid)?;
    let disposition = format!("attachment; filename=\"diary-{pid}.csv\"");
    Ok(([(CONTENT_TYPE, nephro_core::export::CONTENT_TYPE.to_owned()), (CONTENT_DISPOSITION, disposition)], csv).into_response())
}

async fn notifications(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.notifications(&session.actor(), &patient_id(&id)?)?))
}

async fn status(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.status(&session.actor(), &patient_id(&id)?)?))
}

/// Defaults to the seven days ending today.
async fn adherence(
    State(s): State<AppState>,
    session: Session,
    Path(id): Path<String>,
    ApiQuery(q): ApiQuery<RangeQuery>,
) -> ApiResult<Response> {
    let end = q.end.unwrap_or_else(|| s.diary.clock().today());
    let start = q.start.unwrap_or(end - TimeDelta::days(6));
    let range = DateRange::new(start, end)?;
    Ok(ok(s.diary.adherence(&session.actor(), &patient_id(&id)?, range)?))
}

// ---- doctor views ----

async fn get_doctor(State(s): State<AppState>, _session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.doctor(&doctor_id(&id)?)?))
}

async fn doctor_patients(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.patients_of(&session.actor(), &doctor_id(&id)?)?))
}

async fn doctor_overview(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.overview(&session.actor(), &doctor_id(&id)?)?))
}

async fn doctor_notifications(State(s): State<AppState>, session: Session, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(ok(s.diary.doctor_notifications(&session.actor(), &doctor_id(&id)?)?))
}

async fn hospitals(State(s): State<AppState>, _session: Session) -> Json<Value> {
    Json(json!(*s.hospitals))
}
