#![allow(dead_code)]

use std::path::PathBuf;

use axum::body::Body;
use axum::http::{HeaderMap, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use histoscope_core::config::{PipelineConfig, ServerConfig};
use histoscope_core::corpus::Corpus;
use histoscope_core::fixtures::medical_corpus;
use histoscope_core::pipeline::{analyze, Providers};
use histoscope_core::store::AnalysisArtifact;
use histoscope_server::service::{router, AppState, Session};

pub fn fixture_artifact() -> (Corpus, AnalysisArtifact) {
    let corpus = medical_corpus();
    let (artifact, _) = analyze(&corpus, &PipelineConfig::default(), &Providers::stub()).unwrap();
    (corpus, artifact)
}

pub fn app_with(
    corpus: Corpus,
    artifact: AnalysisArtifact,
    providers: Providers,
    config: ServerConfig,
    path: Option<PathBuf>,
) -> Router {
    let session = Session::new(artifact, corpus, providers, config.clone(), path).unwrap();
    router(AppState::loaded(session), &config)
}

pub fn fixture_app(path: Option<PathBuf>) -> (AnalysisArtifact, Router) {
    let (corpus, artifact) = fixture_artifact();
    let app = app_with(corpus, artifact.clone(), Providers::stub(), ServerConfig::default(), path);
    (artifact, app)
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap_or_else(|e| panic!("not JSON ({e}): {:?}", String::from_utf8_lossy(&self.bytes)))
    }
}

pub async fn send(app: &Router, request: Request<Body>) -> Reply {
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let headers = response.headers().clone();
    let bytes = response.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, headers, bytes }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    post_raw(app, uri, body.to_string()).await
}

pub async fn post_raw(app: &Router, uri: &str, body: String) -> Reply {
    send(
        app,
        Request::post(uri)
            .header("content-type", "application/json")
            .body(Body::from(body))
            .unwrap(),
    )
    .await
}
