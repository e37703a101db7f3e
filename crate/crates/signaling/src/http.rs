use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::StreamExt;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use webvoice_core::{EventReceiver, SessionDescriptor};

use crate::error::SignalError;
use crate::model::RegisterRequest;
use crate::server::SignalingServer;

pub const NDJSON: &str = "application/x-ndjson";

type Shared = State<Arc<SignalingServer>>;
type ApiResult = Result<Response, SignalError>;

#[derive(Debug, Default, Deserialize)]
pub struct Params {
    command: Option<String>,
    offset: Option<i64>,
    limit: Option<i64>,
    token: Option<String>,
}

#[derive(Deserialize)]
struct AuthRequest {
    aor: String,
    secret: String,
}

/// Builds the HTTP front end over a shared server core.
pub fn router(server: Arc<SignalingServer>) -> Router {
    Router::new()
        .route("/auth", post(auth))
        .route("/login", get(list_logins).post(register_self))
        .route("/login/{aor}", get(get_login).post(post_login))
        .route(
            "/login/{aor}/{cid}",
            get(get_contact).put(update_contact).delete(unregister_contact),
        )
        .route("/call", get(list_calls).post(create_call))
        .route("/call/{id}", get(get_call).post(post_call))
        .route("/call/{id}/{pid}", get(get_participant).delete(leave_call))
        .with_state(server)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, SignalError> {
    serde_json::from_slice(body).map_err(|e| SignalError::BadRequest(format!("invalid body: {e}")))
}

/// Resolves the caller from `Authorization: Bearer` or a `token` query
/// parameter. Unknown tokens count as unauthenticated.
fn caller(server: &SignalingServer, headers: &HeaderMap, params: &Params) -> Option<String> {
    let bearer = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim);
    bearer
        .or(params.token.as_deref())
        .and_then(|t| server.identify(t))
}

fn stream_response(sub_id: String, rx: EventReceiver) -> Response {
    let body = Body::from_stream(
        rx.into_stream()
            .map(|frame| Ok::<_, std::convert::Infallible>(Bytes::from(frame.to_line()))),
    );
    let mut resp = Response::new(body);
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(NDJSON));
    headers.insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    if let Ok(v) = HeaderValue::from_str(&sub_id) {
        headers.insert("x-subscription-id", v);
    }
    resp
}

fn created(location: String, body: Value) -> Response {
    let mut resp = (StatusCode::CREATED, Json(body)).into_response();
    if let Ok(v) = HeaderValue::from_str(&location) {
        resp.headers_mut().insert(header::LOCATION, v);
    }
    resp
}

async fn auth(State(server): Shared, body: Bytes) -> ApiResult {
    let req: AuthRequest = parse_body(&body)?;
    let token = server.authenticate(&req.aor, &req.secret)?;
    Ok(Json(json!({ "token": token, "aor": req.aor })).into_response())
}

async fn list_logins(State(server): Shared, Query(params): Query<Params>) -> ApiResult {
    Ok(Json(server.list_logins(params.offset, params.limit)?).into_response())
}

async fn register_self(
    State(server): Shared,
    headers: HeaderMap,
    Query(params): Query<Params>,
    body: Bytes,
) -> ApiResult {
    match params.command.as_deref() {
        Some("subscribe") => subscribe(&server, &headers, &params, "/login"),
        Some(other) => Err(SignalError::BadRequest(format!("unknown command {other:?}"))),
        None => {
            let who = caller(&server, &headers, &params).ok_or(SignalError::Unauthorized)?;
            register(&server, Some(&who), &who, &body)
        }
    }
}

fn register(server: &SignalingServer, who: Option<&str>, aor: &str, body: &Bytes) -> ApiResult {
    let req: RegisterRequest = parse_body(body)?;
    let reg = server.register_contact(who, aor, req)?;
    Ok(created(reg.contact_path.clone(), serde_json::to_value(reg).expect("serializable")))
}

fn subscribe(server: &SignalingServer, headers: &HeaderMap, params: &Params, path: &str) -> ApiResult {
    let who = caller(server, headers, params);
    let (sub_id, rx) = server.subscribe(who.as_deref(), path)?;
    Ok(stream_response(sub_id, rx))
}

fn notify(
    server: &SignalingServer,
    headers: &HeaderMap,
    params: &Params,
    path: &str,
    body: &Bytes,
) -> ApiResult {
    let who = caller(server, headers, params);
    let payload: Value = parse_body(body)?;
    let delivered = server.notify(who.as_deref(), path, payload)?;
    Ok(Json(json!({ "delivered": delivered })).into_response())
}

async fn get_login(
    State(server): Shared,
    headers: HeaderMap,
    Path(aor): Path<String>,
    Query(params): Query<Params>,
) -> ApiResult {
    if params.command.as_deref() == Some("subscribe") {
        return subscribe(&server, &headers, &params, &format!("/login/{aor}"));
    }
    let contacts = server.get_login(&aor)?;
    Ok(Json(json!({ "aor": aor, "contacts": contacts })).into_response())
}

async fn post_login(
    State(server): Shared,
    headers: HeaderMap,
    Path(aor): Path<String>,
    Query(params): Query<Params>,
    body: Bytes,
) -> ApiResult {
    let path = format!("/login/{aor}");
    match params.command.as_deref() {
        None => {
            let who = caller(&server, &headers, &params);
            register(&server, who.as_deref(), &aor, &body)
        }
        Some("subscribe") => subscribe(&server, &headers, &params, &path),
        Some("notify") => notify(&server, &headers, &params, &path, &body),
        Some(other) => Err(SignalError::BadRequest(format!("unknown command {other:?}"))),
    }
}

async fn get_contact(State(server): Shared, Path((aor, cid)): Path<(String, String)>) -> ApiResult {
    Ok(Json(server.get_contact(&aor, &cid)?).into_response())
}

async fn update_contact(
    State(server): Shared,
    headers: HeaderMap,
    Path((aor, cid)): Path<(String, String)>,
    Query(params): Query<Params>,
    body: Bytes,
) -> ApiResult {
    let who = caller(&server, &headers, &params);
    let req: RegisterRequest = parse_body(&body)?;
    Ok(Json(server.update_contact(who.as_deref(), &aor, &cid, req)?).into_response())
}

async fn unregister_contact(
    State(server): Shared,
    headers: HeaderMap,
    Path((aor, cid)): Path<(String, String)>,
    Query(params): Query<Params>,
) -> ApiResult {
    let who = caller(&server, &headers, &params);
    server.unregister_contact(who.as_deref(), &aor, &cid)?;
    Ok(Json(json!({ "removed": format!("/login/{aor}/{cid}") })).into_response())
}

async fn list_calls(State(server): Shared, Query(params): Query<Params>) -> ApiResult {
    Ok(Json(server.list_calls(params.offset, params.limit)?).into_response())
}

async fn create_call(State(server): Shared, headers: HeaderMap, Query(params): Query<Params>) -> ApiResult {
    let who = caller(&server, &headers, &params);
    let call_id = server.create_call(who.as_deref())?;
    let path = format!("/call/{call_id}");
    Ok(created(path.clone(), json!({ "call_id": call_id, "call_path": path })))
}

async fn get_call(
    State(server): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(params): Query<Params>,
) -> ApiResult {
    if params.command.as_deref() == Some("subscribe") {
        return subscribe(&server, &headers, &params, &format!("/call/{id}"));
    }
    Ok(Json(server.get_call(&id)?).into_response())
}

async fn post_call(
    State(server): Shared,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(params): Query<Params>,
    body: Bytes,
) -> ApiResult {
    let path = format!("/call/{id}");
    match params.command.as_deref() {
        None => {
            let who = caller(&server, &headers, &params);
            let session: SessionDescriptor = parse_body(&body)?;
            let entry = server.join_call(who.as_deref(), &id, session)?;
            let location = format!("{path}/{}", entry.participant_id);
            Ok(created(
                location.clone(),
                json!({ "participant_id": entry.participant_id, "participant_path": location }),
            ))
        }
        Some("subscribe") => subscribe(&server, &headers, &params, &path),
        Some("notify") => notify(&server, &headers, &params, &path, &body),
        Some(other) => Err(SignalError::BadRequest(format!("unknown command {other:?}"))),
    }
}

async fn get_participant(State(server): Shared, Path((id, pid)): Path<(String, String)>) -> ApiResult {
    Ok(Json(server.get_participant(&id, &pid)?).into_response())
}

async fn leave_call(
    State(server): Shared,
    headers: HeaderMap,
    Path((id, pid)): Path<(String, String)>,
    Query(params): Query<Params>,
) -> ApiResult {
    let who = caller(&server, &headers, &params);
    server.leave_call(who.as_deref(), &id, &pid)?;
    Ok(Json(json!({ "removed": format!("/call/{id}/{pid}") })).into_response())
}
