//! HTTP routes. Handlers hand the work to [`App`] on the blocking pool since
//! alignment and session writes are synchronous.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, HeaderName, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::app::{App, AttemptRequest, CreateSession, FeedbackRequest};
use crate::ApiError;

pub const CORRELATION_HEADER: &str = "x-correlation-id";

/// JSON body whose rejections use the common error shape.
pub struct ApiJson<T>(pub T);

#[axum::async_trait]
impl<T, S> FromRequest<S> for ApiJson<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(rejection) => {
                let code = match &rejection {
                    JsonRejection::JsonDataError(_) => "invalid-request",
                    JsonRejection::JsonSyntaxError(_) => "syntax",
                    JsonRejection::MissingJsonContentType(_) => "unsupported-media-type",
                    _ => "invalid-request",
                };
                Err(ApiError::new(rejection.status(), code, rejection.body_text()))
            }
        }
    }
}

async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

pub fn router(app: Arc<App>) -> Router {
    let v1 = Router::new()
        .route("/feedback", post(feedback))
        .route("/prompts/:id", get(prompt))
        .route("/adg/:id", get(graph))
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(session))
        .route("/sessions/:id/attempts", post(submit_attempt))
        .route("/sessions/:id/feedback/latest", get(latest_feedback))
        .route_layer(middleware::from_fn_with_state(app.clone(), require_token));
    Router::new()
        .route("/healthz", get(healthz))
        .nest("/v1", v1)
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such route") })
        .layer(middleware::from_fn(correlate))
        .with_state(app)
}

/// Echoes or assigns a correlation id and logs the exchange under it.
async fn correlate(mut req: Request, next: Next) -> Response {
    let id = req
        .headers()
        .get(CORRELATION_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|v| !v.is_empty() && v.len() <= 128)
        .map(str::to_string)
        .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    let value = HeaderValue::from_str(&id).unwrap_or_else(|_| HeaderValue::from_static("invalid"));
    req.headers_mut().insert(HeaderName::from_static(CORRELATION_HEADER), value.clone());
    let (method, path) = (req.method().clone(), req.uri().path().to_string());
    let started = std::time::Instant::now();
    let mut response = next.run(req).await;
    tracing::info!(
        correlation_id = %id,
        %method,
        %path,
        status = response.status().as_u16(),
        elapsed_ms = started.elapsed().as_millis() as u64,
        "request"
    );
    response.headers_mut().insert(HeaderName::from_static(CORRELATION_HEADER), value);
    response
}

async fn require_token(State(app): State<Arc<App>>, req: Request, next: Next) -> Response {
    if let Some(token) = &app.config.auth_token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token")
                .into_response();
        }
    }
    next.run(req).await
}

async fn healthz(State(app): State<Arc<App>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "prompts": app.catalog().prompt_ids().collect::<Vec<_>>(),
        "provider_calls": app.provider_calls(),
    }))
}

/// The report is the body proper; the timestamp lives in the envelope so
/// identical requests give identical reports.
async fn feedback(
    State(app): State<Arc<App>>,
    ApiJson(request): ApiJson<FeedbackRequest>,
) -> Result<Response, ApiError> {
    let report = blocking(move || app.generate(request)).await?;
    Ok(Json(json!({ "generated_at": Utc::now(), "report": report })).into_response())
}

async fn prompt(State(app): State<Arc<App>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.prompt(&id)?).into_response())
}

async fn graph(State(app): State<Arc<App>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let adg = app
        .catalog()
        .graph(&id)
        .ok_or_else(|| ApiError::not_found("unknown-graph", &id, format!("unknown graph {id:?}")))?;
    Ok(Json(adg).into_response())
}

async fn create_session(
    State(app): State<Arc<App>>,
    ApiJson(request): ApiJson<CreateSession>,
) -> Result<Response, ApiError> {
    let record = blocking(move || app.create_session(request)).await?;
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn session(State(app): State<Arc<App>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.session(&id)?).into_response())
}

async fn submit_attempt(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    ApiJson(request): ApiJson<AttemptRequest>,
) -> Result<Response, ApiError> {
    let accepted = blocking(move || app.submit_attempt(&id, request)).await?;
    Ok((StatusCode::CREATED, Json(accepted)).into_response())
}

async fn latest_feedback(State(app): State<Arc<App>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(Json(app.latest_feedback(&id)?).into_response())
}

/// Serves until ctrl-c.
pub async fn serve(app: Arc<App>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(app.config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
