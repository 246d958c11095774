//! JSON-over-HTTP interface. Layout requests are independent of each other;
//! the prior store and the hyper-relation service are the only shared state.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use layoutforge::hyper::{Executor, HyperKey, HyperParams, HyperResponse, HyperService};
use layoutforge::layout::{layout_scene, LayoutRequest, LayoutResponse};
use layoutforge::scene::{Catalog, Scene, SceneDoc};
use layoutforge::store::PriorStore;
use serde::{Deserialize, Serialize};
use serde_json::json;

pub struct AppState {
    pub store: Arc<PriorStore>,
    pub hyper: HyperService,
    pub scenes: BTreeMap<String, Scene>,
    /// Instances of the whole corpus, used for manual hyper-relation keys.
    pub catalog: Catalog,
}

impl AppState {
    pub fn new(store: Arc<PriorStore>, corpus: Vec<Scene>, executor: Arc<dyn Executor>) -> Self {
        let catalog = Catalog::from_scenes(&corpus);
        Self {
            hyper: HyperService::new(Arc::clone(&store), executor, HyperParams::default()),
            store,
            scenes: corpus.into_iter().map(|s| (s.id.clone(), s)).collect(),
            catalog,
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(r.status(), r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/scenes", get(list_scenes))
        .route("/scenes/{id}", get(get_scene))
        .route("/layout", post(post_layout))
        .route("/priors/keys", get(prior_keys))
        .route("/hyper", post(post_hyper))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn list_scenes(State(st): State<Arc<AppState>>) -> Json<Vec<String>> {
    Json(st.scenes.keys().cloned().collect())
}

async fn get_scene(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SceneDoc>> {
    st.scenes
        .get(&id)
        .map(|s| Json(SceneDoc::from_scene(s)))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no scene `{id}`")))
}

async fn post_layout(
    State(st): State<Arc<AppState>>,
    body: Result<Json<LayoutRequest>, JsonRejection>,
) -> ApiResult<Json<LayoutResponse>> {
    let Json(req) = body?;
    let scene = req.scene.into_scene();
    scene
        .validate(false)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    let config = req.config.resolve();
    let seed = req.seed;
    let out = tokio::task::spawn_blocking(move || {
        layout_scene(&scene, &st.store, Some(&st.hyper), seed, &config).map(|o| LayoutResponse::from_outcome(&o))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(out))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PriorKeys {
    pub pairwise: Vec<[String; 2]>,
    pub hyper: Vec<String>,
}

async fn prior_keys(State(st): State<Arc<AppState>>) -> ApiResult<Json<PriorKeys>> {
    let internal = |e: layoutforge::Error| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    Ok(Json(PriorKeys {
        pairwise: st.store.pairwise_keys().map_err(internal)?.into_iter().map(|(a, b)| [a, b]).collect(),
        hyper: st.store.hyper_keys().map_err(internal)?,
    }))
}

/// Either a canonical key string or a dominant plus a list of secondaries
/// (repeats allowed).
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum HyperRequest {
    Key { key: String },
    Lists { dominant: String, secondaries: Vec<String> },
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct HyperStatusDoc {
    pub key: String,
    pub status: String,
    pub priors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

async fn post_hyper(
    State(st): State<Arc<AppState>>,
    body: Result<Json<HyperRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<HyperStatusDoc>)> {
    let Json(req) = body?;
    let bad = |e: layoutforge::Error| ApiError::new(StatusCode::BAD_REQUEST, e.to_string());
    let key = match req {
        HyperRequest::Key { key } => key.parse::<HyperKey>().map_err(bad)?,
        HyperRequest::Lists { dominant, secondaries } => HyperKey::from_instances(&dominant, &secondaries).map_err(bad)?,
    };
    for id in std::iter::once(&key.dominant_id).chain(key.secondaries.iter().map(|(s, _)| s)) {
        if st.catalog.get(id).is_none() {
            return Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown instance `{id}`")));
        }
    }
    let resp = tokio::task::spawn_blocking(move || {
        let r = st.hyper.request(&key, &st.catalog);
        (key, r)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let (key, r) = resp;
    let (code, priors, reason) = match &r {
        HyperResponse::Complete(rel) => (StatusCode::OK, rel.priors.len(), None),
        HyperResponse::Pending => (StatusCode::ACCEPTED, 0, None),
        HyperResponse::Failed(why) => (StatusCode::OK, 0, Some(why.clone())),
    };
    Ok((
        code,
        Json(HyperStatusDoc {
            key: key.to_string(),
            status: r.status().as_str().to_string(),
            priors,
            reason,
        }),
    ))
}
