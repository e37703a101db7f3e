//! REST face of the gateway: `POST /login/{aor}` registers a REST user with
//! the SIP registrar, `DELETE /login/{aor}` removes it.

use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use webvoice_core::ErrorBody;

use crate::gateway::{Gateway, GatewayError};

#[derive(Debug, Deserialize)]
struct LoginBody {
    secret: String,
    #[serde(default)]
    expires_seconds: Option<u64>,
}

const DEFAULT_EXPIRES: u64 = 3600;

fn error(e: GatewayError) -> Response {
    let code = e.http_status();
    let status = StatusCode::from_u16(code).unwrap_or(StatusCode::BAD_GATEWAY);
    (status, Json(ErrorBody::new(code, e.to_string()))).into_response()
}

async fn login(
    State(gw): State<Arc<Gateway>>,
    Path(aor): Path<String>,
    Json(body): Json<LoginBody>,
) -> Response {
    let expires = body.expires_seconds.unwrap_or(DEFAULT_EXPIRES);
    match gw.register(&aor, &body.secret, expires).await {
        Ok(b) => Json(json!({ "aor": b.aor, "contact": b.contact, "expires": b.expires })).into_response(),
        Err(e) => error(e),
    }
}

async fn logout(
    State(gw): State<Arc<Gateway>>,
    Path(aor): Path<String>,
    Json(body): Json<LoginBody>,
) -> Response {
    match gw.unregister(&aor, &body.secret).await {
        Ok(()) => StatusCode::NO_CONTENT.into_response(),
        Err(e) => error(e),
    }
}

async fn bindings(State(gw): State<Arc<Gateway>>) -> Response {
    Json(json!({ "bindings": gw.bindings() })).into_response()
}

async fn log(State(gw): State<Arc<Gateway>>) -> Response {
    Json(json!({ "messages": gw.log() })).into_response()
}

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new()
        .route("/login/{aor}", post(login).delete(logout))
        .route("/bindings", get(bindings))
        .route("/log", get(log))
        .with_state(gateway)
}
