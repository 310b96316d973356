//! HTTP JSON providers.
//!
//! Embeddings: `POST {"texts": [...]}` → `{"embeddings": [[...], ...]}`.
//! Generation: `POST {"prompt": "..."}` → `{"text": "..."}`.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingProvider;
use crate::provider::{ProviderError, RetryPolicy, TextGenerator};

const REQUEST_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Clone)]
struct Endpoint {
    client: Client,
    url: String,
    token: Option<String>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Endpoint")
            .field("url", &self.url)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

/// Reads a bearer token from the environment variable `name`, if one is named.
pub fn token_from_env(name: Option<&str>) -> Result<Option<String>, ProviderError> {
    match name {
        None => Ok(None),
        Some(var) => std::env::var(var)
            .map(Some)
            .map_err(|_| ProviderError::Config(format!("environment variable {var} is not set"))),
    }
}

impl Endpoint {
    fn new(url: &str, token: Option<String>, retry: RetryPolicy) -> Result<Self, ProviderError> {
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(ProviderError::Config(format!("endpoint {url:?} is not an http(s) URL")));
        }
        let client = Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| ProviderError::Config(e.to_string()))?;
        Ok(Endpoint {
            client,
            url: url.to_string(),
            token,
            retry,
        })
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(&self, body: &Req) -> Result<Resp, ProviderError> {
        self.retry.run(|| {
            let mut request = self.client.post(&self.url).json(body);
            if let Some(token) = &self.token {
                request = request.bearer_auth(token);
            }
            let response = request
                .send()
                .map_err(|e| ProviderError::Transport(e.to_string()))?;
            let status = response.status();
            if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
                return Err(ProviderError::Transport(format!("{} returned {status}", self.url)));
            }
            if !status.is_success() {
                return Err(ProviderError::BadResponse(format!("{} returned {status}", self.url)));
            }
            let text = response
                .text()
                .map_err(|e| ProviderError::Transport(e.to_string()))?;
            serde_json::from_str(&text)
                .map_err(|e| ProviderError::BadResponse(format!("malformed response body: {e}")))
        })
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

#[derive(Debug, Clone)]
pub struct RemoteEmbeddingProvider {
    endpoint: Endpoint,
    dimension: usize,
    batch_size: usize,
}

impl RemoteEmbeddingProvider {
    pub fn new(
        url: &str,
        token: Option<String>,
        dimension: usize,
        batch_size: usize,
        retry: RetryPolicy,
    ) -> Result<Self, ProviderError> {
        Ok(RemoteEmbeddingProvider {
            endpoint: Endpoint::new(url, token, retry)?,
            dimension,
            batch_size: batch_size.max(1),
        })
    }
}

impl EmbeddingProvider for RemoteEmbeddingProvider {
    fn identity(&self) -> String {
        format!("remote:{}/{}", self.endpoint.url, self.dimension)
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn batch_size(&self) -> usize {
        self.batch_size
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        let response: EmbedResponse = self.endpoint.post(&EmbedRequest { texts })?;
        Ok(response.embeddings)
    }
}

#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    endpoint: Endpoint,
}

impl RemoteGenerator {
    pub fn new(url: &str, token: Option<String>, retry: RetryPolicy) -> Result<Self, ProviderError> {
        Ok(RemoteGenerator {
            endpoint: Endpoint::new(url, token, retry)?,
        })
    }
}

impl TextGenerator for RemoteGenerator {
    fn identity(&self) -> String {
        format!("remote:{}", self.endpoint.url)
    }

    fn generate(&self, prompt: &str) -> Result<String, ProviderError> {
        let response: GenerateResponse = self.endpoint.post(&GenerateRequest { prompt })?;
        Ok(response.text)
    }
}
