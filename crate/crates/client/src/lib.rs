//! Typed async client for the draftsman HTTP service.

use draftsman_core::assembly::{CheckResult, EditOutcome, RenderFormat, Rendered, Session};
use draftsman_core::model::{DocumentInstance, GenericDocument, ValidationReport};
use draftsman_core::store::{GenericSummary, InstanceSummary, IntegrityReport};
use draftsman_core::{Edit, ErrorBody, QueryFilter};
use reqwest::{Method, RequestBuilder, Url};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    /// The service answered with an error body.
    #[error("{} [{}]", body.message, body.code)]
    Api { status: u16, body: Box<ErrorBody> },
    #[error("cannot reach {url}: {source}")]
    Transport {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("unexpected response from {url}: {message}")]
    Decode { url: String, message: String },
    #[error("invalid server address '{0}'")]
    BadBase(String),
}

impl ClientError {
    /// HTTP status when the service answered, `None` otherwise.
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NewSession<'a> {
    doc_type: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    prefix: Option<&'a str>,
}

#[derive(Debug, Clone)]
pub struct Client {
    base: Url,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the service root, e.g. `http://127.0.0.1:7878`.
    pub fn new(base: &str) -> Result<Client> {
        let base = Url::parse(base).map_err(|_| ClientError::BadBase(base.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(ClientError::BadBase(base.to_string()));
        }
        Ok(Client {
            base,
            http: reqwest::Client::new(),
        })
    }

    pub fn base(&self) -> &Url {
        &self.base
    }

    fn url(&self, segments: &[&str]) -> Url {
        let mut u = self.base.clone();
        u.path_segments_mut()
            .expect("checked in new")
            .pop_if_empty()
            .push("api")
            .extend(segments);
        u
    }

    fn request(&self, method: Method, segments: &[&str]) -> (String, RequestBuilder) {
        let url = self.url(segments);
        (url.to_string(), self.http.request(method, url))
    }

    async fn send<T: DeserializeOwned>(&self, url: String, req: RequestBuilder) -> Result<T> {
        let resp = req.send().await.map_err(|source| ClientError::Transport {
            url: url.clone(),
            source,
        })?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(|source| ClientError::Transport {
            url: url.clone(),
            source,
        })?;
        if status.is_success() {
            return serde_json::from_slice(&bytes).map_err(|e| ClientError::Decode {
                url,
                message: e.to_string(),
            });
        }
        let body = serde_json::from_slice::<ErrorBody>(&bytes).unwrap_or_else(|_| {
            ErrorBody::new("http_error", String::from_utf8_lossy(&bytes).trim().to_string())
        });
        Err(ClientError::Api {
            status: status.as_u16(),
            body: Box::new(body),
        })
    }

    async fn get<T: DeserializeOwned>(&self, segments: &[&str]) -> Result<T> {
        let (url, req) = self.request(Method::GET, segments);
        self.send(url, req).await
    }

    async fn post<B: Serialize + ?Sized, T: DeserializeOwned>(&self, segments: &[&str], body: Option<&B>) -> Result<T> {
        let (url, mut req) = self.request(Method::POST, segments);
        if let Some(b) = body {
            req = req.json(b);
        }
        self.send(url, req).await
    }

    pub async fn health(&self) -> Result<serde_json::Value> {
        self.get(&["health"]).await
    }

    pub async fn list_generics(&self) -> Result<Vec<GenericSummary>> {
        self.get(&["generics"]).await
    }

    pub async fn get_generic(&self, doc_type: &str) -> Result<GenericDocument> {
        self.get(&["generics", doc_type]).await
    }

    pub async fn import_generic(&self, g: &GenericDocument) -> Result<ValidationReport> {
        self.post(&["generics"], Some(g)).await
    }

    pub async fn validate_generic(&self, g: &GenericDocument) -> Result<ValidationReport> {
        self.post(&["generics", "validate"], Some(g)).await
    }

    pub async fn start_session(&self, doc_type: &str, prefix: Option<&str>) -> Result<Session> {
        self.post(&["sessions"], Some(&NewSession { doc_type, prefix })).await
    }

    pub async fn list_sessions(&self) -> Result<Vec<String>> {
        self.get(&["sessions"]).await
    }

    pub async fn get_session(&self, id: &str) -> Result<Session> {
        self.get(&["sessions", id]).await
    }

    pub async fn apply_edit(&self, id: &str, edit: &Edit) -> Result<EditOutcome> {
        self.post(&["sessions", id, "edits"], Some(edit)).await
    }

    pub async fn check(&self, id: &str) -> Result<CheckResult> {
        self.post::<(), _>(&["sessions", id, "check"], None).await
    }

    pub async fn finalize(&self, id: &str) -> Result<DocumentInstance> {
        self.post::<(), _>(&["sessions", id, "finalize"], None).await
    }

    pub async fn query(&self, filter: &QueryFilter) -> Result<Vec<InstanceSummary>> {
        let (url, req) = self.request(Method::GET, &["instances"]);
        self.send(url, req.query(&filter.to_params())).await
    }

    pub async fn get_instance(&self, id: &str) -> Result<DocumentInstance> {
        self.get(&["instances", id]).await
    }

    pub async fn render(&self, id: &str, format: RenderFormat) -> Result<Rendered> {
        let format = match format {
            RenderFormat::Text => "text",
            RenderFormat::Markup => "markup",
        };
        let (url, req) = self.request(Method::GET, &["instances", id, "render"]);
        self.send(url, req.query(&[("format", format)])).await
    }

    pub async fn fsck(&self) -> Result<IntegrityReport> {
        self.get(&["fsck"]).await
    }
}
