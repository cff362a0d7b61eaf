//! HTTP + JSON service behind the exhibit.
//!
//! A session holds the current wheel setting, the toss history and the tube
//! counts. Every session draws from its own ChaCha8 stream seeded at creation,
//! so replaying the same requests replays the same balls.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use epr_core::actualization::{self, ActOutcome, ActPointer, PointerMode};
use epr_core::bell::{self, CountTable};
use epr_core::geometry;
use epr_core::partition::{self, Geometry, GridSpec, Partition};
use epr_core::probability::{self, Model};
use epr_core::{AngleSetting, Klass, OutcomePair, PartitionKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DEFAULT_SPACING: f64 = 0.05;
pub const DEFAULT_GRID_RESOLUTION: u32 = probability::DEFAULT_GRID_RESOLUTION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    /// Balls land uniformly on the disk.
    #[default]
    ExternalAct,
    /// Balls land on a uniformly chosen world.
    InternalCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    #[default]
    Diamonds,
    Grid,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: SessionMode,
    #[serde(default)]
    pub surface: SurfaceKind,
    pub spacing: Option<f64>,
    #[serde(rename = "grid_M")]
    pub grid_big_m: Option<u32>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SettingView {
    pub a: i32,
    pub b: i32,
    pub d: u32,
    pub delta: f64,
}

impl From<&AngleSetting> for SettingView {
    fn from(s: &AngleSetting) -> Self {
        Self {
            a: s.a,
            b: s.b,
            d: s.d,
            delta: s.delta,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Toss {
    pub index: usize,
    pub setting: SettingView,
    pub pointer: ActPointer,
    pub outcome: ActOutcome,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tube {
    pub equal: u64,
    pub unequal: u64,
    pub miss: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub schema: u32,
    pub id: u64,
    pub seed: u64,
    pub mode: SessionMode,
    pub surface: SurfaceKind,
    pub spacing: f64,
    #[serde(rename = "grid_M")]
    pub grid_big_m: u32,
    pub setting: Option<SettingView>,
    pub tubes: BTreeMap<u32, Tube>,
    pub history: Vec<Toss>,
}

struct Session {
    view: SessionView,
    setting: Option<AngleSetting>,
    rng: ChaCha8Rng,
    partitions: HashMap<(i32, i32), Arc<Partition>>,
}

impl Session {
    fn new(id: u64, req: CreateSession) -> Result<Self, ApiError> {
        let spacing = req.spacing.unwrap_or(DEFAULT_SPACING);
        if !(spacing > 0.0 && spacing <= 1.0) {
            return Err(ApiError::bad(format!("invalid spacing {spacing}")));
        }
        let grid_big_m = req.grid_big_m.unwrap_or(DEFAULT_GRID_RESOLUTION);
        if grid_big_m == 0 {
            return Err(ApiError::bad("grid_M must be positive"));
        }
        let seed = req.seed.unwrap_or(id);
        Ok(Self {
            view: SessionView {
                schema: 1,
                id,
                seed,
                mode: req.mode,
                surface: req.surface,
                spacing,
                grid_big_m,
                setting: None,
                tubes: BTreeMap::new(),
                history: Vec::new(),
            },
            setting: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            partitions: HashMap::new(),
        })
    }

    fn reset(&mut self) {
        self.view.setting = None;
        self.view.tubes.clear();
        self.view.history.clear();
        self.setting = None;
        self.rng = ChaCha8Rng::seed_from_u64(self.view.seed);
    }

    fn current(&self) -> Result<AngleSetting, ApiError> {
        self.setting.ok_or_else(|| ApiError::conflict("angles not set"))
    }

    fn partition(&mut self, s: &AngleSetting) -> Result<Arc<Partition>, ApiError> {
        if let Some(p) = self.partitions.get(&(s.a, s.b)) {
            return Ok(p.clone());
        }
        let p = match self.view.surface {
            SurfaceKind::Diamonds => partition::diamond_partition(s.delta, self.view.spacing),
            SurfaceKind::Grid => GridSpec::for_delta(self.view.grid_big_m, s.delta).and_then(partition::grid_partition),
        }
        .map_err(|e| ApiError::bad(e.to_string()))?;
        let p = Arc::new(p);
        self.partitions.insert((s.a, s.b), p.clone());
        Ok(p)
    }

    fn toss(&mut self) -> Result<Toss, ApiError> {
        let s = self.current()?;
        let p = self.partition(&s)?;
        let (pointer, outcome) = match self.view.mode {
            SessionMode::ExternalAct => {
                let pointer = actualization::sample_act(PointerMode::Point, &mut self.rng);
                let outcome = actualization::act_outcome(&p, &pointer).map_err(|e| ApiError::bad(e.to_string()))?;
                (pointer, outcome)
            }
            SessionMode::InternalCount => {
                let counted: Vec<usize> = (0..p.regions.len()).filter(|&i| p.regions[i].counted).collect();
                if counted.is_empty() {
                    return Err(ApiError::conflict("partition has no counted worlds"));
                }
                let i = counted[self.rng.gen_range(0..counted.len())];
                let region = &p.regions[i];
                let c = match &region.geometry {
                    Geometry::Polygon { vertices } => geometry::centroid(vertices),
                    Geometry::Arc { .. } => [0.0, 0.0],
                };
                (
                    ActPointer::Point { x: c[0], y: c[1] },
                    ActOutcome::Hit {
                        label: region.label,
                        region: i,
                    },
                )
            }
        };
        let toss = Toss {
            index: self.view.history.len(),
            setting: (&s).into(),
            pointer,
            outcome,
        };
        add_to_tubes(&mut self.view.tubes, &toss);
        self.view.history.push(toss.clone());
        Ok(toss)
    }
}

fn add_to_tubes(tubes: &mut BTreeMap<u32, Tube>, toss: &Toss) {
    let tube = tubes.entry(toss.setting.d).or_default();
    match toss.outcome.label().map(OutcomePair::klass) {
        Some(Klass::Equal) => tube.equal += 1,
        Some(Klass::Unequal) => tube.unequal += 1,
        None => tube.miss += 1,
    }
}

fn fold_history(history: &[Toss]) -> (BTreeMap<u32, Tube>, CountTable) {
    let mut tubes = BTreeMap::new();
    let mut counts = CountTable::new();
    for t in history {
        add_to_tubes(&mut tubes, t);
        if let Some(label) = t.outcome.label() {
            counts.entry(t.setting.d).or_default().add(label, 1);
        }
    }
    (tubes, counts)
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<Mutex<HashMap<u64, Arc<Mutex<Session>>>>>,
    next_id: Arc<AtomicU64>,
    snapshot_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(snapshot_dir: Option<PathBuf>) -> Self {
        Self {
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
            snapshot_dir,
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let id: u64 = id
            .parse()
            .map_err(|_| ApiError::bad(format!("invalid session id '{id}'")))?;
        self.sessions
            .lock()
            .expect("session table")
            .get(&id)
            .cloned()
            .ok_or_else(|| ApiError::bad(format!("unknown session id {id}")))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::CONFLICT,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "schema": 1, "error": self.message }))).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok(v: Value) -> ApiResult {
    Ok(Json(v).into_response())
}

fn parse_body<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad(format!("invalid body: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/reset", post(reset_session))
        .route("/sessions/{id}/angles", post(set_angles))
        .route("/sessions/{id}/toss", post(toss))
        .route("/sessions/{id}/partition", get(get_partition))
        .route("/sessions/{id}/internal", get(internal_summary))
        .route("/sessions/{id}/bell", get(bell_status))
        .route("/sessions/{id}/audit", get(audit))
        .route("/sessions/{id}/snapshot", get(get_snapshot).post(write_snapshot))
        .with_state(state)
}

async fn create_session(State(st): State<AppState>, body: Bytes) -> ApiResult {
    let req: CreateSession = parse_body(&body)?;
    let id = st.next_id.fetch_add(1, Ordering::Relaxed);
    let session = Session::new(id, req)?;
    let view = serde_json::to_value(&session.view).expect("session serializes");
    st.sessions
        .lock()
        .expect("session table")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().expect("session");
    ok(serde_json::to_value(&s.view).expect("session serializes"))
}

async fn reset_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let mut s = s.lock().expect("session");
    s.reset();
    ok(serde_json::to_value(&s.view).expect("session serializes"))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Coins {
    coin_alice: Value,
    coin_bob: Value,
}

fn coin_bit(v: &Value, name: &str) -> Result<bool, ApiError> {
    match v {
        Value::Number(n) if n.as_u64() == Some(0) => Ok(false),
        Value::Number(n) if n.as_u64() == Some(1) => Ok(true),
        Value::Bool(b) => Ok(*b),
        _ => Err(ApiError::bad(format!("{name} must be 0 or 1"))),
    }
}

async fn set_angles(State(st): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let s = st.session(&id)?;
    let coins: Coins = serde_json::from_slice(&body).map_err(|e| ApiError::bad(format!("invalid body: {e}")))?;
    let setting = AngleSetting::from_coins(
        coin_bit(&coins.coin_alice, "coin_alice")?,
        coin_bit(&coins.coin_bob, "coin_bob")?,
    );
    let mut s = s.lock().expect("session");
    s.setting = Some(setting);
    s.view.setting = Some((&setting).into());
    ok(json!({ "schema": 1, "setting": SettingView::from(&setting), "alpha": setting.alpha, "beta": setting.beta }))
}

async fn toss(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let mut s = s.lock().expect("session");
    let t = s.toss()?;
    ok(json!({ "schema": 1, "toss": t, "tubes": s.view.tubes }))
}

async fn get_partition(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let mut s = s.lock().expect("session");
    let setting = s.current()?;
    let p = s.partition(&setting)?;
    ok(serde_json::to_value(&*p).expect("partition serializes"))
}

#[derive(Debug, Deserialize)]
struct InternalQuery {
    #[serde(rename = "grid_M")]
    grid_big_m: Option<u32>,
    grid_m: Option<u32>,
}

async fn internal_summary(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<InternalQuery>,
) -> ApiResult {
    let s = st.session(&id)?;
    let mut s = s.lock().expect("session");
    let (kind, delta, counts, spec) = match q.grid_m {
        Some(m) => {
            let spec = GridSpec::new(q.grid_big_m.unwrap_or(s.view.grid_big_m), m)
                .map_err(|e| ApiError::bad(e.to_string()))?;
            let (ne, nu) = spec.counts();
            let n = [ne / 2, nu / 2, nu / 2, ne / 2];
            (PartitionKind::Grid, spec.delta(), n, Some(spec))
        }
        None => {
            let setting = s.current()?;
            let p = s.partition(&setting)?;
            (p.kind, p.delta, p.world_counts().per_pair, p.grid)
        }
    };
    let ne = counts[OutcomePair::P00.index()] + counts[OutcomePair::P11.index()];
    let nu = counts[OutcomePair::P01.index()] + counts[OutcomePair::P10.index()];
    let pr = probability::prob_internal(ne as f64, nu as f64).map_err(|e| ApiError::conflict(e.to_string()))?;
    let exact = spec.map(|sp| {
        let r = probability::grid_equal_exact(sp);
        format!("{}/{}", r.numer(), r.denom())
    });
    ok(json!({
        "schema": 1,
        "kind": kind,
        "delta": delta,
        "grid": spec,
        "counts": OutcomePair::ALL.iter().map(|p| (p.as_str(), counts[p.index()])).collect::<BTreeMap<_, _>>(),
        "equal": ne,
        "unequal": nu,
        "pr_equal": pr,
        "pr_unequal": 1.0 - pr,
        "pr_equal_exact": exact,
        "classical_equal": 2.0 * delta.abs() / std::f64::consts::PI,
    }))
}

async fn bell_status(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().expect("session");
    let (_, counts) = fold_history(&s.view.history);
    let (report, missing) = match bell::bell_counts(&counts, bell::DEFAULT_SIGMAS) {
        Ok(mut r) => {
            r.source = format!("session {}", s.view.id);
            (Some(r), Vec::new())
        }
        Err(_) => (
            None,
            [1, 2, 3]
                .into_iter()
                .filter(|d| counts.get(d).is_none_or(|c| c.total() == 0))
                .collect(),
        ),
    };
    ok(json!({
        "schema": 1,
        "report": report,
        "missing_bins": missing,
        "bound": bell::bell_terms(&Model::Classical),
    }))
}

async fn audit(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?;
    let s = s.lock().expect("session");
    let (folded, counts) = fold_history(&s.view.history);
    ok(json!({
        "schema": 1,
        "tosses": s.view.history.len(),
        "tubes": s.view.tubes,
        "folded": folded,
        "counts": counts,
        "consistent": folded == s.view.tubes,
    }))
}

async fn get_snapshot(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    get_session(State(st), Path(id)).await
}

async fn write_snapshot(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let dir = st
        .snapshot_dir
        .clone()
        .ok_or_else(|| ApiError::conflict("service started without a snapshot directory"))?;
    let s = st.session(&id)?;
    let text = {
        let s = s.lock().expect("session");
        serde_json::to_string_pretty(&s.view).expect("session serializes")
    };
    let path = dir.join(format!("session-{id}.json"));
    tokio::fs::write(&path, text + "\n").await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })?;
    ok(json!({ "schema": 1, "path": path }))
}
