use std::path::PathBuf;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::StreamExt;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::adaptor::Adaptor;
use crate::error::AdaptorError;

pub const NDJSON: &str = "application/x-ndjson";

#[derive(Clone)]
struct Api {
    adaptor: Arc<Adaptor>,
    /// Run calls that may prompt on the blocking pool.
    offload: bool,
}

type Shared = State<Api>;
type ApiResult = Result<Response, AdaptorError>;

#[derive(Debug, Default, Deserialize)]
pub struct TokenQuery {
    token: Option<String>,
}

#[derive(Deserialize)]
struct AuthRequest {
    app_id: String,
    token: Option<String>,
}

#[derive(Deserialize)]
struct CreateRequest {
    class: String,
    #[serde(default)]
    params: Value,
    token: Option<String>,
}

/// Builds the loopback API. When `widgets` is set, its files are served
/// under `/widgets/`.
pub fn router(adaptor: Arc<Adaptor>, widgets: Option<PathBuf>) -> Router {
    build(Api { adaptor, offload: true }, widgets)
}

/// Router whose handlers call the core directly on the request task. Only
/// for approval policies that never block, as in simulations.
pub fn inline_router(adaptor: Arc<Adaptor>) -> Router {
    build(Api { adaptor, offload: false }, None)
}

fn build(api_state: Api, widgets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/auth", post(auth))
        .route("/events", get(events))
        .route("/objects", get(list_objects).post(create_object))
        .route("/objects/{id}", get(get_object).delete(close_object))
        .route("/objects/{id}/{method}", post(invoke))
        .with_state(api_state);
    match widgets {
        Some(dir) => api.nest_service("/widgets", ServeDir::new(dir)),
        None => api,
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, AdaptorError> {
    serde_json::from_slice(body).map_err(|e| AdaptorError::BadRequest(format!("invalid body: {e}")))
}

/// Token from `Authorization: Bearer`, then the query string, then the body.
fn token(headers: &HeaderMap, query: &TokenQuery, body: Option<&str>) -> Result<String, AdaptorError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .or(query.token.as_deref())
        .or(body)
        .map(str::to_string)
        .ok_or(AdaptorError::Unauthorized)
}

/// Runs a core call that may block on an approval prompt or a TCP connect.
async fn blocking<T, F>(api: &Api, f: F) -> Result<T, AdaptorError>
where
    F: FnOnce() -> Result<T, AdaptorError> + Send + 'static,
    T: Send + 'static,
{
    if !api.offload {
        return f();
    }
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| AdaptorError::Internal(e.to_string()))?
}

async fn auth(State(api): Shared, body: Bytes) -> ApiResult {
    let req: AuthRequest = parse_body(&body)?;
    let adaptor = api.adaptor.clone();
    let grant = blocking(&api, move || adaptor.authenticate(&req.app_id, req.token.as_deref())).await?;
    Ok(Json(grant).into_response())
}

async fn events(State(api): Shared, headers: HeaderMap, Query(q): Query<TokenQuery>) -> ApiResult {
    let token = token(&headers, &q, None)?;
    let rx = api.adaptor.events(&token)?;
    let body = Body::from_stream(
        rx.into_stream()
            .map(|frame| Ok::<_, std::convert::Infallible>(Bytes::from(frame.to_line()))),
    );
    let mut resp = Response::new(body);
    let h = resp.headers_mut();
    h.insert(header::CONTENT_TYPE, HeaderValue::from_static(NDJSON));
    h.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    Ok(resp)
}

async fn list_objects(State(api): Shared, headers: HeaderMap, Query(q): Query<TokenQuery>) -> ApiResult {
    let token = token(&headers, &q, None)?;
    let objects = api.adaptor.list_objects(&token)?;
    Ok(Json(json!({ "objects": objects })).into_response())
}

async fn create_object(State(api): Shared, headers: HeaderMap, Query(q): Query<TokenQuery>, body: Bytes) -> ApiResult {
    let req: CreateRequest = parse_body(&body)?;
    let token = token(&headers, &q, req.token.as_deref())?;
    let adaptor = api.adaptor.clone();
    let created = blocking(&api, move || adaptor.create_object(&token, &req.class, req.params)).await?;
    let mut resp = (StatusCode::CREATED, Json(&created)).into_response();
    if let Some(id) = created["object_id"].as_str() {
        if let Ok(v) = HeaderValue::from_str(&format!("/objects/{id}")) {
            resp.headers_mut().insert(header::LOCATION, v);
        }
    }
    Ok(resp)
}

async fn get_object(
    State(api): Shared,
    headers: HeaderMap,
    Query(q): Query<TokenQuery>,
    Path(id): Path<String>,
) -> ApiResult {
    let token = token(&headers, &q, None)?;
    Ok(Json(api.adaptor.describe(&token, &id)?).into_response())
}

async fn close_object(
    State(api): Shared,
    headers: HeaderMap,
    Query(q): Query<TokenQuery>,
    Path(id): Path<String>,
) -> ApiResult {
    let token = token(&headers, &q, None)?;
    api.adaptor.close_object(&token, &id)?;
    Ok(Json(json!({ "closed": id })).into_response())
}

async fn invoke(
    State(api): Shared,
    headers: HeaderMap,
    Query(q): Query<TokenQuery>,
    Path((id, method)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult {
    let mut args: Value = if body.is_empty() { json!({}) } else { parse_body(&body)? };
    let body_token = args
        .as_object_mut()
        .and_then(|m| m.remove("token"))
        .and_then(|v| v.as_str().map(str::to_string));
    let token = token(&headers, &q, body_token.as_deref())?;
    let adaptor = api.adaptor.clone();
    let result = blocking(&api, move || adaptor.invoke(&token, &id, &method, args)).await?;
    Ok(Json(result).into_response())
}
