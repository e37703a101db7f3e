use std::sync::Arc;

use http::Method;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use webvoice_core::{SessionDescriptor, TransportCandidate};

use crate::error::SdkError;
use crate::http::{ApiRequest, EventStream, HttpLike};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    pub aor: String,
    pub contact_id: String,
    pub candidates: Vec<TransportCandidate>,
    pub expires_at: u64,
    #[serde(default)]
    pub presence: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub contact_id: String,
    pub contact_path: String,
    pub expires_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginPage {
    pub total: usize,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub participant_id: String,
    pub aor: String,
    pub session: SessionDescriptor,
    pub joined_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conference {
    pub call_id: String,
    pub participants: Vec<Participant>,
    pub created_at: u64,
}

fn decode<T: serde::de::DeserializeOwned>(v: Value) -> Result<T, SdkError> {
    serde_json::from_value(v).map_err(|e| SdkError::Protocol(e.to_string()))
}

/// Typed client for the REST signaling server.
#[derive(Clone)]
pub struct SignalingClient {
    http: Arc<dyn HttpLike>,
    token: Option<String>,
}

impl SignalingClient {
    pub fn new(http: Arc<dyn HttpLike>) -> Self {
        Self { http, token: None }
    }

    pub fn token(&self) -> Option<&str> {
        self.token.as_deref()
    }

    fn req(&self, method: Method, path: impl Into<String>) -> ApiRequest {
        ApiRequest::new(method, path).token(self.token.as_deref())
    }

    async fn call(&self, req: ApiRequest) -> Result<Value, SdkError> {
        Ok(self.http.send(req).await?.ok()?.body)
    }

    pub async fn authenticate(&mut self, aor: &str, secret: &str) -> Result<String, SdkError> {
        let body = self
            .call(ApiRequest::new(Method::POST, "/auth").json(json!({ "aor": aor, "secret": secret })))
            .await?;
        let token = body["token"]
            .as_str()
            .ok_or_else(|| SdkError::Protocol("auth response without token".into()))?
            .to_string();
        self.token = Some(token.clone());
        Ok(token)
    }

    pub async fn register(
        &self,
        aor: &str,
        candidates: &[TransportCandidate],
        expires_seconds: Option<u64>,
    ) -> Result<Registration, SdkError> {
        let mut body = json!({ "candidates": candidates });
        if let Some(e) = expires_seconds {
            body["expires_seconds"] = json!(e);
        }
        decode(self.call(self.req(Method::POST, format!("/login/{aor}")).json(body)).await?)
    }

    pub async fn update_contact(
        &self,
        aor: &str,
        contact_id: &str,
        candidates: &[TransportCandidate],
    ) -> Result<Contact, SdkError> {
        let req = self
            .req(Method::PUT, format!("/login/{aor}/{contact_id}"))
            .json(json!({ "candidates": candidates }));
        decode(self.call(req).await?)
    }

    pub async fn unregister(&self, aor: &str, contact_id: &str) -> Result<(), SdkError> {
        self.call(self.req(Method::DELETE, format!("/login/{aor}/{contact_id}")))
            .await
            .map(drop)
    }

    /// Live contacts of `aor`; 404 when it has none.
    pub async fn contacts(&self, aor: &str) -> Result<Vec<Contact>, SdkError> {
        let body = self.call(self.req(Method::GET, format!("/login/{aor}"))).await?;
        decode(body["contacts"].clone())
    }

    pub async fn logins(&self, offset: usize, limit: usize) -> Result<LoginPage, SdkError> {
        decode(
            self.call(self.req(Method::GET, format!("/login?offset={offset}&limit={limit}")))
                .await?,
        )
    }

    pub async fn create_call(&self) -> Result<String, SdkError> {
        let body = self.call(self.req(Method::POST, "/call")).await?;
        body["call_id"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| SdkError::Protocol("create call without call_id".into()))
    }

    pub async fn join(&self, call_id: &str, session: &SessionDescriptor) -> Result<String, SdkError> {
        let req = self
            .req(Method::POST, format!("/call/{call_id}"))
            .json(serde_json::to_value(session).expect("serializable"));
        let body = self.call(req).await?;
        body["participant_id"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| SdkError::Protocol("join without participant_id".into()))
    }

    pub async fn leave(&self, call_id: &str, participant_id: &str) -> Result<(), SdkError> {
        self.call(self.req(Method::DELETE, format!("/call/{call_id}/{participant_id}")))
            .await
            .map(drop)
    }

    pub async fn conference(&self, call_id: &str) -> Result<Conference, SdkError> {
        decode(self.call(self.req(Method::GET, format!("/call/{call_id}"))).await?)
    }

    pub async fn subscribe(&self, path: &str) -> Result<EventStream, SdkError> {
        let req = self.req(Method::POST, format!("{path}?command=subscribe"));
        match self.http.stream(req).await? {
            Ok(stream) => Ok(stream),
            Err(resp) => Err(resp.ok().expect_err("non-2xx")),
        }
    }

    pub async fn notify(&self, path: &str, payload: Value) -> Result<u64, SdkError> {
        let body = self
            .call(self.req(Method::POST, format!("{path}?command=notify")).json(payload))
            .await?;
        Ok(body["delivered"].as_u64().unwrap_or(0))
    }
}
