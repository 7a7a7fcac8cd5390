//! JSON-over-HTTP front end for registration and login.
//!
//! Every response body is an envelope `{"version": 1, "payload": ...}` or
//! `{"version": 1, "error": {"code": ..., "message": ...}}`. Images are not
//! inlined; clients fetch `GET /inkblot/{session}/{j}` as PNG.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::authcore::{
    response_from_display, AccountStore, AuditLog, AuthConfig, AuthError, Authenticator, RegistrationTicket,
    SessionToken, StoreError,
};
use crate::inkblot::export_png;
use crate::matching::Permutation;
use crate::PROTOCOL_VERSION;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("account store: {0}")]
    Store(#[from] StoreError),
    #[error("audit log: {0}")]
    Audit(std::io::Error),
    #[error("invalid CORS origin {0:?}")]
    CorsOrigin(String),
    #[error(transparent)]
    Auth(#[from] AuthError),
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// `None` keeps accounts in memory only.
    pub store_path: Option<PathBuf>,
    pub audit_path: Option<PathBuf>,
    pub auth: AuthConfig,
    /// Origin allowed to call the API from a browser.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            store_path: None,
            audit_path: None,
            auth: AuthConfig::default(),
            cors_origin: None,
        }
    }
}

/// Closed set of error codes a client can see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedJson,
    InvalidRequest,
    DuplicateUser,
    SessionNotFound,
    SessionExpired,
    LockedOut,
    NotFound,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::MalformedJson | ErrorCode::InvalidRequest => StatusCode::BAD_REQUEST,
            ErrorCode::DuplicateUser => StatusCode::CONFLICT,
            ErrorCode::SessionNotFound | ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::SessionExpired => StatusCode::GONE,
            ErrorCode::LockedOut => StatusCode::TOO_MANY_REQUESTS,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
}

impl ApiError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError { code, message: message.into() }
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> Self {
        let code = match &e {
            AuthError::DuplicateUser(_) => ErrorCode::DuplicateUser,
            AuthError::SessionNotFound => ErrorCode::SessionNotFound,
            AuthError::SessionExpired => ErrorCode::SessionExpired,
            AuthError::LockedOut { .. } => ErrorCode::LockedOut,
            AuthError::ImageIndex(_) => ErrorCode::NotFound,
            AuthError::Store(_) => ErrorCode::Internal,
            _ => ErrorCode::InvalidRequest,
        };
        if code == ErrorCode::Internal {
            log::error!("request failed: {e}");
            return ApiError::new(code, "internal error");
        }
        ApiError::new(code, e.to_string())
    }
}

/// Response envelope. Exactly one of `payload` and `error` is present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiEnvelope<T> {
    pub version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
}

fn json_response<T: Serialize>(status: StatusCode, envelope: &ApiEnvelope<T>) -> Response {
    let body = serde_json::to_vec(envelope).expect("envelopes serialize");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.code.status();
        json_response::<()>(status, &ApiEnvelope { version: PROTOCOL_VERSION, payload: None, error: Some(self) })
    }
}

struct Payload<T>(T);

impl<T: Serialize> IntoResponse for Payload<T> {
    fn into_response(self) -> Response {
        json_response(StatusCode::OK, &ApiEnvelope { version: PROTOCOL_VERSION, payload: Some(self.0), error: None })
    }
}

type ApiResult<T> = Result<Payload<T>, ApiError>;

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => ApiError::new(ErrorCode::InvalidRequest, e.to_string()),
            _ => ApiError::new(ErrorCode::MalformedJson, e.to_string()),
        }
    })
}

fn parse_token(raw: &str) -> Result<SessionToken, ApiError> {
    raw.parse().map_err(|_| ApiError::new(ErrorCode::SessionNotFound, "unknown session"))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        log::error!("worker panicked: {e}");
        ApiError::new(ErrorCode::Internal, "internal error")
    })?
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CredentialsRequest {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterCompleteRequest {
    pub session: String,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub reject: bool,
}

/// Which order `assignment` is given in.
#[derive(Debug, Clone, Copy, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentOrder {
    /// `assignment[i]` is the image chosen for wire label `i`.
    #[default]
    Wire,
    /// `assignment[d]` is the image chosen for the `d`-th alphabetically displayed label.
    Display,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginCompleteRequest {
    pub session: String,
    /// One-based image numbers.
    pub assignment: Vec<usize>,
    #[serde(default)]
    pub order: AssignmentOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistrationPayload {
    pub session: String,
    pub k: usize,
    pub expires_at_ms: u64,
    pub images: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisteredPayload {
    pub username: String,
    /// One-based positions whose label repeats an earlier one.
    pub duplicate_labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RegisterCompletePayload {
    Registered(RegisteredPayload),
    Regenerated(RegistrationPayload),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginPayload {
    pub session: String,
    pub k: usize,
    pub expires_at_ms: u64,
    pub images: Vec<String>,
    /// Labels in wire order.
    pub labels: Vec<String>,
    /// One-based wire positions, listed in alphabetical display order.
    pub display_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginResultPayload {
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthPayload {
    pub status: String,
    pub protocol_version: u32,
    pub store: String,
    pub accounts: usize,
}

fn image_urls(token: &SessionToken, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("/inkblot/{token}/{j}")).collect()
}

fn registration_payload(t: &RegistrationTicket) -> RegistrationPayload {
    RegistrationPayload {
        session: t.token.to_string(),
        k: t.inkblots.k(),
        expires_at_ms: t.expires_at.as_millis() as u64,
        images: image_urls(&t.token, t.inkblots.k()),
    }
}

type Shared = Arc<Authenticator>;

async fn health(State(auth): State<Shared>) -> ApiResult<HealthPayload> {
    let store = match auth.store_path() {
        Some(p) => format!("file:{}", p.display()),
        None => "memory".into(),
    };
    Ok(Payload(HealthPayload {
        status: "ok".into(),
        protocol_version: PROTOCOL_VERSION,
        store,
        accounts: auth.account_count(),
    }))
}

async fn register_begin(State(auth): State<Shared>, body: Bytes) -> ApiResult<RegistrationPayload> {
    let req: CredentialsRequest = parse_body(&body)?;
    blocking(move || Ok(Payload(registration_payload(&auth.begin_registration(&req.username, &req.password)?)))).await
}

async fn register_complete(State(auth): State<Shared>, body: Bytes) -> ApiResult<RegisterCompletePayload> {
    let req: RegisterCompleteRequest = parse_body(&body)?;
    let token = parse_token(&req.session)?;
    blocking(move || {
        let payload = match (req.reject, req.labels) {
            (true, None) => RegisterCompletePayload::Regenerated(registration_payload(&auth.reject_registration(&token)?)),
            (false, Some(labels)) => {
                let done = auth.complete_registration(&token, &labels)?;
                RegisterCompletePayload::Registered(RegisteredPayload {
                    username: done.record.username,
                    duplicate_labels: done.duplicate_labels,
                })
            }
            _ => return Err(ApiError::new(ErrorCode::InvalidRequest, "send either labels or reject: true")),
        };
        Ok(Payload(payload))
    })
    .await
}

async fn login_begin(State(auth): State<Shared>, body: Bytes) -> ApiResult<LoginPayload> {
    let req: CredentialsRequest = parse_body(&body)?;
    blocking(move || {
        let t = auth.begin_login(&req.username, &req.password)?;
        Ok(Payload(LoginPayload {
            session: t.token.to_string(),
            k: t.labels.len(),
            expires_at_ms: t.expires_at.as_millis() as u64,
            images: image_urls(&t.token, t.labels.len()),
            labels: t.labels,
            display_order: t.display_order.iter().map(|w| w + 1).collect(),
        }))
    })
    .await
}

async fn login_complete(State(auth): State<Shared>, body: Bytes) -> ApiResult<LoginResultPayload> {
    let req: LoginCompleteRequest = parse_body(&body)?;
    let token = parse_token(&req.session)?;
    blocking(move || {
        let response = match req.order {
            AssignmentOrder::Wire => Permutation::from_one_based(&req.assignment).map_err(AuthError::from)?,
            AssignmentOrder::Display => {
                let (_, display_order) = auth.login_labels(&token)?;
                response_from_display(&display_order, &req.assignment)?
            }
        };
        let outcome = auth.complete_login(&token, &response)?;
        Ok(Payload(LoginResultPayload { accepted: outcome.accepted }))
    })
    .await
}

async fn inkblot(State(auth): State<Shared>, Path((session, j)): Path<(String, String)>) -> Result<Response, ApiError> {
    let token = parse_token(&session)?;
    let j: usize = j.parse().map_err(|_| ApiError::new(ErrorCode::NotFound, "image index must be a positive integer"))?;
    blocking(move || {
        let image = match auth.registration_inkblot(&token, j) {
            Err(AuthError::SessionNotFound) => auth.login_inkblot(&token, j)?,
            other => other?,
        };
        let png = export_png(&image).map_err(|e| {
            log::error!("png export failed: {e}");
            ApiError::new(ErrorCode::Internal, "internal error")
        })?;
        Ok(
            (
                [(header::CONTENT_TYPE, HeaderValue::from_static("image/png")), (header::CACHE_CONTROL, HeaderValue::from_static("no-store"))],
                png,
            )
                .into_response(),
        )
    })
    .await
}

async fn fallback() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

/// The route table over a shared authenticator.
pub fn router(auth: Arc<Authenticator>, cors_origin: Option<&str>) -> Result<Router, ServiceError> {
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/register/begin", post(register_begin))
        .route("/register/complete", post(register_complete))
        .route("/login/begin", post(login_begin))
        .route("/login/complete", post(login_complete))
        .route("/inkblot/{session}/{j}", get(inkblot))
        .fallback(fallback)
        .with_state(auth);
    if let Some(origin) = cors_origin {
        let value = HeaderValue::from_str(origin).map_err(|_| ServiceError::CorsOrigin(origin.to_string()))?;
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::exact(value))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    Ok(app)
}

/// Opens the store (refusing a corrupt one) and builds the authenticator.
pub fn build_authenticator(config: &ServiceConfig) -> Result<Authenticator, ServiceError> {
    let store = match &config.store_path {
        Some(p) => AccountStore::open(p)?,
        None => AccountStore::in_memory(),
    };
    let audit = match &config.audit_path {
        Some(p) => AuditLog::with_file(p).map_err(ServiceError::Audit)?,
        None => AuditLog::default(),
    };
    Ok(Authenticator::builder(config.auth.clone()).store(store).audit(audit).build()?)
}

/// A bound, not yet running, service.
pub struct BoundService {
    listener: TcpListener,
    app: Router,
}

impl BoundService {
    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    /// Serves until `shutdown` resolves.
    pub async fn run_until(self, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> Result<(), ServiceError> {
        axum::serve(self.listener, self.app).with_graceful_shutdown(shutdown).await?;
        Ok(())
    }
}

pub async fn bind(config: &ServiceConfig) -> Result<BoundService, ServiceError> {
    let auth = Arc::new(build_authenticator(config)?);
    let app = router(auth, config.cors_origin.as_deref())?;
    let listener = TcpListener::bind(config.bind).await.map_err(|source| ServiceError::Bind { addr: config.bind, source })?;
    Ok(BoundService { listener, app })
}

/// Binds and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let bound = bind(&config).await?;
    log::info!("listening on {}", bound.local_addr()?);
    bound
        .run_until(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
