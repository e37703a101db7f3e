use std::sync::Arc;

use http::Method;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::SdkError;
use crate::http::{ApiRequest, EventStream, HttpLike};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Grant {
    pub token: String,
    pub expires_at: Option<u64>,
    pub permanent: bool,
}

/// Typed client for the adaptor's loopback API.
#[derive(Clone)]
pub struct AdaptorClient {
    http: Arc<dyn HttpLike>,
    token: Option<String>,
}

impl AdaptorClient {
    pub fn new(http: Arc<dyn HttpLike>) -> Self {
        Self { http, token: None }
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    async fn call(&self, req: ApiRequest) -> Result<Value, SdkError> {
        Ok(self.http.send(req).await?.ok()?.body)
    }

    pub async fn authenticate(&mut self, app_id: &str) -> Result<Grant, SdkError> {
        let mut body = json!({ "app_id": app_id });
        if let Some(t) = &self.token {
            body["token"] = json!(t);
        }
        let grant: Grant = serde_json::from_value(self.call(ApiRequest::new(Method::POST, "/auth").json(body)).await?)
            .map_err(|e| SdkError::Protocol(e.to_string()))?;
        self.token = Some(grant.token.clone());
        Ok(grant)
    }

    /// Creates an object and returns its description (`object_id`, `class`, `state`).
    pub async fn create(&self, class: &str, params: Value) -> Result<Value, SdkError> {
        let req = ApiRequest::new(Method::POST, "/objects")
            .token(self.token.as_deref())
            .json(json!({ "class": class, "params": params }));
        self.call(req).await
    }

    pub async fn create_id(&self, class: &str, params: Value) -> Result<String, SdkError> {
        let v = self.create(class, params).await?;
        v["object_id"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| SdkError::Protocol("create without object_id".into()))
    }

    pub async fn invoke(&self, id: &str, method: &str, args: Value) -> Result<Value, SdkError> {
        let req = ApiRequest::new(Method::POST, format!("/objects/{id}/{method}"))
            .token(self.token.as_deref())
            .json(args);
        self.call(req).await
    }

    pub async fn close(&self, id: &str) -> Result<(), SdkError> {
        let req = ApiRequest::new(Method::DELETE, format!("/objects/{id}")).token(self.token.as_deref());
        self.call(req).await.map(drop)
    }

    pub async fn objects(&self) -> Result<Vec<Value>, SdkError> {
        let req = ApiRequest::new(Method::GET, "/objects").token(self.token.as_deref());
        let body = self.call(req).await?;
        Ok(body["objects"].as_array().cloned().unwrap_or_default())
    }

    pub async fn events(&self) -> Result<EventStream, SdkError> {
        let req = ApiRequest::new(Method::GET, "/events").token(self.token.as_deref());
        match self.http.stream(req).await? {
            Ok(s) => Ok(s),
            Err(resp) => Err(resp.ok().expect_err("non-2xx")),
        }
    }
}
