use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use prefpareto_core::benchmark::ConfigSpace;
use prefpareto_core::hpo::optimize_observed;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::ApiError;
use crate::session::{
    base_id, CreateRequest, NextPair, OptimizeRequest, Phase, PreferenceAck, PreferenceRequest, Session, SessionResult,
    Status, TrainRequest, TrainResponse,
};
use crate::store::{Shared, Store};

#[derive(Debug, Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    /// Set to abandon running jobs without persisting further progress,
    /// the way a killed process would.
    pub cancel: Arc<AtomicBool>,
}

impl AppState {
    pub fn new(store: Store) -> AppState {
        AppState { store: Arc::new(store), cancel: Arc::new(AtomicBool::new(false)) }
    }

    /// Restarts every optimization that was interrupted. Runs are seeded, so
    /// starting over reproduces the trials already on disk.
    pub fn resume_jobs(&self) -> Vec<String> {
        let mut resumed = Vec::new();
        for id in self.store.ids() {
            let Ok(shared) = self.store.get(&id) else { continue };
            let running = shared.lock().expect("session lock").phase == Phase::Optimizing;
            if running {
                log::info!("resuming optimization for session {id}");
                self.spawn_job(shared);
                resumed.push(id);
            }
        }
        resumed
    }

    fn spawn_job(&self, shared: Shared) {
        let store = self.store.clone();
        let cancel = self.cancel.clone();
        std::thread::spawn(move || run_job(&store, &shared, &cancel));
    }
}

fn run_job(store: &Store, shared: &Shared, cancel: &AtomicBool) {
    let prepared = {
        let mut s = shared.lock().expect("session lock");
        s.trajectory = Some(Default::default());
        let job = s.job.clone().ok_or_else(|| "optimizing without a job".to_string());
        let objective = s.objective().map_err(|e| e.to_string());
        let priors = match &job {
            Ok(j) if j.warm_start => s.priors().map_err(|e| e.to_string()),
            _ => Ok(Vec::new()),
        };
        job.and_then(|j| Ok((j, objective?, priors?)))
    };
    let outcome = prepared.and_then(|(job, mut objective, priors)| {
        let mut checked = |cfg: &_| {
            if cancel.load(Ordering::SeqCst) {
                return Err("cancelled".to_string());
            }
            objective(cfg)
        };
        let mut on_trial = |t: &_| {
            if cancel.load(Ordering::SeqCst) {
                return;
            }
            let mut s = shared.lock().expect("session lock");
            s.record_trial(t);
            if let Err(e) = store.persist(&s) {
                log::error!("{e}");
            }
        };
        optimize_observed(&mut checked, &ConfigSpace::lcbench(), &job.optimizer, &priors, &mut on_trial)
            .map_err(|e| e.to_string())
    });
    if cancel.load(Ordering::SeqCst) {
        return;
    }
    let mut s = shared.lock().expect("session lock");
    s.finish_optimize(outcome);
    if let Err(e) = store.persist(&s) {
        log::error!("{e}");
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/pairs/next", get(next_pair))
        .route("/sessions/{id}/preferences", post(preferences))
        .route("/sessions/{id}/train", post(train))
        .route("/sessions/{id}/optimize", post(optimize))
        .route("/sessions/{id}/status", get(status))
        .route("/sessions/{id}/result", get(result))
        .with_state(state)
}

/// Parses a JSON body; an empty body means the type's default.
fn parse_or_default<T: DeserializeOwned + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    parse(body)
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::invalid(format!("malformed request body: {e}")))
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Serialize)]
struct Created {
    session_id: String,
    phase: Phase,
    n_fronts: usize,
    n_pairs: usize,
}

async fn create(State(st): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateRequest = parse(&body)?;
    let base = base_id(&req);
    let store = st.store.clone();
    let shared = tokio::task::spawn_blocking(move || store.insert_new(&base, |id| Session::create(id, req)))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let s = shared.lock().expect("session lock");
    let created = Created {
        session_id: s.id.clone(),
        phase: s.phase,
        n_fronts: s.sampled_fronts.len(),
        n_pairs: s.pair_queue.len(),
    };
    Ok((StatusCode::CREATED, Json(created)))
}

#[derive(Debug, Serialize)]
struct Summary {
    session_id: String,
    phase: Phase,
    profile_id: u64,
    seed: u64,
    n_fronts: usize,
    n_pairs: usize,
    answered: usize,
    n_preferences: usize,
    has_model: bool,
    cv_tau_estimate: Option<f64>,
    created_at: u64,
    updated_at: u64,
}

async fn session_summary(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Summary> {
    let shared = st.store.get(&id)?;
    let s = shared.lock().expect("session lock");
    Ok(Json(Summary {
        session_id: s.id.clone(),
        phase: s.phase,
        profile_id: s.profile_id,
        seed: s.seed,
        n_fronts: s.sampled_fronts.len(),
        n_pairs: s.pair_queue.len(),
        answered: s.cursor,
        n_preferences: s.preferences.len(),
        has_model: s.model.is_some(),
        cv_tau_estimate: s.cv_tau_estimate,
        created_at: s.created_at,
        updated_at: s.updated_at,
    }))
}

async fn next_pair(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<NextPair> {
    let shared = st.store.get(&id)?;
    let s = shared.lock().expect("session lock");
    Ok(Json(s.next_pair()?))
}

async fn preferences(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<PreferenceAck> {
    let req: PreferenceRequest = parse(&body)?;
    let shared = st.store.get(&id)?;
    let mut s = shared.lock().expect("session lock");
    let ack = s.submit(req)?;
    st.store.persist(&s)?;
    Ok(Json(ack))
}

async fn train(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<TrainResponse> {
    let req: TrainRequest = parse_or_default(&body)?;
    let shared = st.store.get(&id)?;
    let store = st.store.clone();
    let resp = tokio::task::spawn_blocking(move || {
        let mut s = shared.lock().expect("session lock");
        let resp = s.train(req)?;
        store.persist(&s)?;
        Ok::<_, ApiError>(resp)
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(resp))
}

async fn optimize(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<Status>), ApiError> {
    let req: OptimizeRequest = parse_or_default(&body)?;
    let shared = st.store.get(&id)?;
    let status = {
        let mut s = shared.lock().expect("session lock");
        s.cost_spec()?;
        s.begin_optimize(req)?;
        st.store.persist(&s)?;
        s.status()
    };
    st.spawn_job(shared);
    Ok((StatusCode::ACCEPTED, Json(status)))
}

async fn status(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Status> {
    let shared = st.store.get(&id)?;
    let s = shared.lock().expect("session lock");
    Ok(Json(s.status()))
}

async fn result(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<SessionResult> {
    let shared = st.store.get(&id)?;
    let s = shared.lock().expect("session lock");
    Ok(Json(s.result()?))
}
