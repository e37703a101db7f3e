//! HTTP-shaped transport used by the typed clients. Requests are plain
//! (method, path, token, JSON body) tuples so the same client code can run
//! against a live server, an in-process router or a recording wrapper.

use std::sync::{Arc, Mutex};

use axum::body::{Body, Bytes};
use axum::Router;
use futures::future::BoxFuture;
use futures::{FutureExt, StreamExt};
use http::{header, Method, Request};
use http_body_util::BodyExt;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::mpsc;
use tower::ServiceExt;
use webvoice_core::{EventFrame, NdjsonDecoder};

use crate::error::SdkError;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiRequest {
    pub method: Method,
    /// Path plus query string, e.g. `/login/a@b?command=subscribe`.
    pub path: String,
    pub token: Option<String>,
    pub body: Option<Value>,
}

impl ApiRequest {
    pub fn new(method: Method, path: impl Into<String>) -> Self {
        Self {
            method,
            path: path.into(),
            token: None,
            body: None,
        }
    }

    pub fn token(mut self, token: Option<&str>) -> Self {
        self.token = token.map(str::to_string);
        self
    }

    pub fn json(mut self, body: Value) -> Self {
        self.body = Some(body);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: Value,
    pub location: Option<String>,
}

impl ApiResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Converts a non-2xx response into [`SdkError::Api`].
    pub fn ok(self) -> Result<Self, SdkError> {
        if self.is_success() {
            return Ok(self);
        }
        let message = self.body["error"]["message"]
            .as_str()
            .map(str::to_string)
            .unwrap_or_else(|| self.body.to_string());
        Err(SdkError::Api {
            status: self.status,
            message,
        })
    }
}

/// Live NDJSON event stream. Ends when the server closes it.
#[derive(Debug)]
pub struct EventStream {
    pub subscription_id: Option<String>,
    rx: mpsc::UnboundedReceiver<EventFrame>,
}

impl EventStream {
    pub fn new(subscription_id: Option<String>, rx: mpsc::UnboundedReceiver<EventFrame>) -> Self {
        Self { subscription_id, rx }
    }

    pub async fn next(&mut self) -> Option<EventFrame> {
        self.rx.recv().await
    }

    pub fn try_next(&mut self) -> Option<EventFrame> {
        self.rx.try_recv().ok()
    }
}

pub trait HttpLike: Send + Sync {
    fn send(&self, req: ApiRequest) -> BoxFuture<'_, Result<ApiResponse, SdkError>>;
    /// Opens a long-lived stream. A non-2xx answer comes back as `Err(response)`.
    fn stream(&self, req: ApiRequest) -> BoxFuture<'_, Result<Result<EventStream, ApiResponse>, SdkError>>;
}

fn parse_json(bytes: &[u8]) -> Value {
    if bytes.is_empty() {
        return Value::Null;
    }
    serde_json::from_slice(bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(bytes).into_owned()))
}

fn spawn_decoder<S, E>(mut chunks: S) -> mpsc::UnboundedReceiver<EventFrame>
where
    S: futures::Stream<Item = Result<Bytes, E>> + Send + Unpin + 'static,
    E: Send + 'static,
{
    let (tx, rx) = mpsc::unbounded_channel();
    tokio::spawn(async move {
        let mut decoder = NdjsonDecoder::new();
        while let Some(Ok(chunk)) = chunks.next().await {
            for frame in decoder.push(&chunk).into_iter().flatten() {
                if tx.send(frame).is_err() {
                    return;
                }
            }
        }
    });
    rx
}

/// Dispatches requests straight into an axum router in the same process.
#[derive(Clone)]
pub struct RouterClient {
    router: Router,
}

impl RouterClient {
    pub fn new(router: Router) -> Self {
        Self { router }
    }

    fn build(req: &ApiRequest) -> Request<Body> {
        let mut builder = Request::builder().method(req.method.clone()).uri(&req.path);
        if let Some(t) = &req.token {
            builder = builder.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let body = match &req.body {
            Some(v) => {
                builder = builder.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        builder.body(body).expect("valid request")
    }
}

impl HttpLike for RouterClient {
    fn send(&self, req: ApiRequest) -> BoxFuture<'_, Result<ApiResponse, SdkError>> {
        async move {
            let resp = self
                .router
                .clone()
                .oneshot(Self::build(&req))
                .await
                .map_err(|e| SdkError::Transport(e.to_string()))?;
            let status = resp.status().as_u16();
            let location = resp
                .headers()
                .get(header::LOCATION)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let bytes = resp
                .into_body()
                .collect()
                .await
                .map_err(|e| SdkError::Transport(e.to_string()))?
                .to_bytes();
            Ok(ApiResponse {
                status,
                body: parse_json(&bytes),
                location,
            })
        }
        .boxed()
    }

    fn stream(&self, req: ApiRequest) -> BoxFuture<'_, Result<Result<EventStream, ApiResponse>, SdkError>> {
        async move {
            let resp = self
                .router
                .clone()
                .oneshot(Self::build(&req))
                .await
                .map_err(|e| SdkError::Transport(e.to_string()))?;
            let status = resp.status().as_u16();
            if !resp.status().is_success() {
                let bytes = resp
                    .into_body()
                    .collect()
                    .await
                    .map_err(|e| SdkError::Transport(e.to_string()))?
                    .to_bytes();
                return Ok(Err(ApiResponse {
                    status,
                    body: parse_json(&bytes),
                    location: None,
                }));
            }
            let sub = resp
                .headers()
                .get("x-subscription-id")
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let rx = spawn_decoder(resp.into_body().into_data_stream());
            Ok(Ok(EventStream::new(sub, rx)))
        }
        .boxed()
    }
}

/// Talks to a server over the network.
#[derive(Clone)]
pub struct ReqwestClient {
    client: reqwest::Client,
    base: String,
}

impl ReqwestClient {
    /// `base` is the scheme and authority, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            client: reqwest::Client::new(),
            base: base.into().trim_end_matches('/').to_string(),
        }
    }

    fn build(&self, req: &ApiRequest) -> reqwest::RequestBuilder {
        let mut b = self.client.request(req.method.clone(), format!("{}{}", self.base, req.path));
        if let Some(t) = &req.token {
            b = b.bearer_auth(t);
        }
        if let Some(body) = &req.body {
            b = b.json(body);
        }
        b
    }
}

fn transport(e: reqwest::Error) -> SdkError {
    SdkError::Transport(e.to_string())
}

impl HttpLike for ReqwestClient {
    fn send(&self, req: ApiRequest) -> BoxFuture<'_, Result<ApiResponse, SdkError>> {
        async move {
            let resp = self.build(&req).send().await.map_err(transport)?;
            let status = resp.status().as_u16();
            let location = resp
                .headers()
                .get(header::LOCATION)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let bytes = resp.bytes().await.map_err(transport)?;
            Ok(ApiResponse {
                status,
                body: parse_json(&bytes),
                location,
            })
        }
        .boxed()
    }

    fn stream(&self, req: ApiRequest) -> BoxFuture<'_, Result<Result<EventStream, ApiResponse>, SdkError>> {
        async move {
            let mut resp = self.build(&req).send().await.map_err(transport)?;
            let status = resp.status().as_u16();
            if !resp.status().is_success() {
                let bytes = resp.bytes().await.map_err(transport)?;
                return Ok(Err(ApiResponse {
                    status,
                    body: parse_json(&bytes),
                    location: None,
                }));
            }
            let sub = resp
                .headers()
                .get("x-subscription-id")
                .and_then(|v| v.to_str().ok())
                .map(str::to_string);
            let (tx, rx) = mpsc::unbounded_channel();
            tokio::spawn(async move {
                let mut decoder = NdjsonDecoder::new();
                while let Ok(Some(chunk)) = resp.chunk().await {
                    for frame in decoder.push(&chunk).into_iter().flatten() {
                        if tx.send(frame).is_err() {
                            return;
                        }
                    }
                }
            });
            Ok(Ok(EventStream::new(sub, rx)))
        }
        .boxed()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "lowercase")]
pub enum TraceEntry {
    Request {
        actor: String,
        method: String,
        path: String,
        status: u16,
    },
    Event {
        actor: String,
        #[serde(rename = "type")]
        kind: String,
        resource: String,
        seq: u64,
    },
}

/// Shared, append-only log of requests and received events.
#[derive(Clone, Default)]
pub struct TraceLog(Arc<Mutex<Vec<TraceEntry>>>);

impl TraceLog {
    pub fn push(&self, entry: TraceEntry) {
        self.0.lock().unwrap().push(entry);
    }

    pub fn entries(&self) -> Vec<TraceEntry> {
        self.0.lock().unwrap().clone()
    }
}

/// Wraps a transport and records every exchange under an actor name.
pub struct Recorder {
    inner: Arc<dyn HttpLike>,
    actor: String,
    log: TraceLog,
}

impl Recorder {
    pub fn new(inner: Arc<dyn HttpLike>, actor: impl Into<String>, log: TraceLog) -> Self {
        Self {
            inner,
            actor: actor.into(),
            log,
        }
    }

    fn record(&self, req: &ApiRequest, status: u16) {
        self.log.push(TraceEntry::Request {
            actor: self.actor.clone(),
            method: req.method.to_string(),
            path: req.path.clone(),
            status,
        });
    }
}

impl HttpLike for Recorder {
    fn send(&self, req: ApiRequest) -> BoxFuture<'_, Result<ApiResponse, SdkError>> {
        async move {
            let resp = self.inner.send(req.clone()).await?;
            self.record(&req, resp.status);
            Ok(resp)
        }
        .boxed()
    }

    fn stream(&self, req: ApiRequest) -> BoxFuture<'_, Result<Result<EventStream, ApiResponse>, SdkError>> {
        async move {
            let opened = self.inner.stream(req.clone()).await?;
            let mut upstream = match opened {
                Ok(s) => {
                    self.record(&req, 200);
                    s
                }
                Err(resp) => {
                    self.record(&req, resp.status);
                    return Ok(Err(resp));
                }
            };
            let (tx, rx) = mpsc::unbounded_channel();
            let log = self.log.clone();
            let actor = self.actor.clone();
            let sub = upstream.subscription_id.clone();
            tokio::spawn(async move {
                while let Some(frame) = upstream.next().await {
                    log.push(TraceEntry::Event {
                        actor: actor.clone(),
                        kind: frame.kind.clone(),
                        resource: frame.resource.clone(),
                        seq: frame.seq,
                    });
                    if tx.send(frame).is_err() {
                        return;
                    }
                }
            });
            Ok(Ok(EventStream::new(sub, rx)))
        }
        .boxed()
    }
}
