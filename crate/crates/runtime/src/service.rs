//! In-memory session store and the `/v1` HTTP API for playing Devil against
//! an automatic Angel.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use num_complex::Complex64;
use qefg::angelgame::{
    AngelError, AngelPlayer, AngelStrategySpec, DevilAction, DevilView, MatchConfig, MatchEvent, MatchState, MatchStatus,
};
use qefg::qsim::RandomSource;
use qefg::walker::{Boundary, WalkerConfig};
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

/// Board used when a creation request carries no config.
pub fn default_config() -> MatchConfig {
    let mut cfg = MatchConfig::new(WalkerConfig::localized(1, 21, Boundary::Wall, 10).expect("valid walker"));
    cfg.horizon = 30;
    cfg
}

pub struct Session {
    pub state: MatchState,
    pub angel_spec: AngelStrategySpec,
    angel: AngelPlayer,
    rng: RandomSource,
    pub debug: bool,
    pub created_at: SystemTime,
}

impl Session {
    pub fn new(config: MatchConfig, angel_spec: AngelStrategySpec, debug: bool) -> Result<Self, AngelError> {
        let angel = angel_spec.build(&config)?;
        let rng = RandomSource::new(config.seed);
        Ok(Self { state: MatchState::new(config)?, angel_spec, angel, rng, debug, created_at: SystemTime::now() })
    }

    pub fn act(&mut self, action: DevilAction) -> Result<(), AngelError> {
        self.state.play_round(action, &mut self.angel, &mut self.rng)
    }
}

struct Slot {
    session: RwLock<Session>,
    last_active: Mutex<Instant>,
}

impl Slot {
    fn touch(&self) {
        *self.last_active.lock().expect("clock lock") = Instant::now();
    }

    fn idle_since(&self, now: Instant) -> Duration {
        now.saturating_duration_since(*self.last_active.lock().expect("clock lock"))
    }
}

/// Sessions keyed by random v4 UUIDs. Each session sits behind its own
/// read-write lock: actions take it exclusively, views share it.
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    idle_timeout: Duration,
}

impl SessionStore {
    pub fn new(idle_timeout: Duration) -> Self {
        Self { sessions: RwLock::new(HashMap::new()), idle_timeout }
    }

    pub fn idle_timeout(&self) -> Duration {
        self.idle_timeout
    }

    pub async fn insert(&self, session: Session) -> String {
        let id = uuid::Uuid::new_v4().to_string();
        let slot = Arc::new(Slot { session: RwLock::new(session), last_active: Mutex::new(Instant::now()) });
        self.sessions.write().await.insert(id.clone(), slot);
        id
    }

    async fn get(&self, id: &str) -> Option<Arc<Slot>> {
        let slot = self.sessions.read().await.get(id).cloned()?;
        if slot.idle_since(Instant::now()) > self.idle_timeout {
            self.sessions.write().await.remove(id);
            return None;
        }
        slot.touch();
        Some(slot)
    }

    pub async fn remove(&self, id: &str) -> bool {
        self.sessions.write().await.remove(id).is_some()
    }

    pub async fn len(&self) -> usize {
        self.sessions.read().await.len()
    }

    pub async fn is_empty(&self) -> bool {
        self.len().await == 0
    }

    /// Drops every session idle for longer than the timeout at `now`.
    pub async fn sweep(&self, now: Instant) -> usize {
        let mut sessions = self.sessions.write().await;
        let before = sessions.len();
        sessions.retain(|_, slot| slot.idle_since(now) <= self.idle_timeout);
        before - sessions.len()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateGame {
    #[serde(default)]
    pub config: Option<MatchConfig>,
    #[serde(default)]
    pub angel: Option<AngelStrategySpec>,
    #[serde(default)]
    pub debug: bool,
}

#[derive(Debug, Serialize)]
pub struct Created {
    pub id: String,
    pub view: DevilDocument,
}

#[derive(Debug, Serialize)]
pub struct DevilDocument {
    pub id: String,
    #[serde(flatten)]
    pub view: DevilView,
}

#[derive(Debug, Serialize)]
struct WireComplex {
    re: f64,
    im: f64,
}

impl From<Complex64> for WireComplex {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Serialize)]
struct SiteDocument {
    site: usize,
    blocked: bool,
    alpha: WireComplex,
    beta: WireComplex,
}

#[derive(Debug, Serialize)]
struct SpectatorDocument {
    id: String,
    debug: bool,
    created_at_ms: u128,
    round: usize,
    status: MatchStatus,
    config: MatchConfig,
    angel: AngelStrategySpec,
    events: Vec<MatchEvent>,
    sites: Vec<SiteDocument>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitudes: Option<Vec<WireComplex>>,
}

fn spectator(id: &str, s: &Session) -> SpectatorDocument {
    let board = s.state.board();
    SpectatorDocument {
        id: id.to_string(),
        debug: s.debug,
        created_at_ms: s.created_at.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
        round: s.state.round(),
        status: s.state.status(),
        config: s.state.config().clone(),
        angel: s.angel_spec.clone(),
        events: s.state.history().to_vec(),
        sites: (0..board.len())
            .map(|x| {
                let q = board.site(x);
                SiteDocument { site: x, blocked: q.is_blocked(), alpha: q.alpha.into(), beta: q.beta.into() }
            })
            .collect(),
        mu: s.debug.then(|| s.state.mu()),
        amplitudes: s.debug.then(|| s.state.angel().amplitudes().iter().map(|&z| z.into()).collect()),
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("no game {id}"))
    }
}

impl From<AngelError> for ApiError {
    fn from(e: AngelError) -> Self {
        let status = match e {
            AngelError::NotOngoing(_) => StatusCode::CONFLICT,
            AngelError::InvalidConfig(_)
            | AngelError::SiteOutOfRange { .. }
            | AngelError::CoinRejected { .. }
            | AngelError::Walker(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed body: {e}")))
}

async fn create_game(State(store): State<Arc<SessionStore>>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let req: CreateGame = if body.is_empty() { CreateGame::default() } else { parse_body(&body)? };
    let config = req.config.unwrap_or_else(default_config);
    let angel = req.angel.unwrap_or(AngelStrategySpec::GreedySpread);
    let session = Session::new(config, angel, req.debug)?;
    let view = session.state.devil_view();
    let id = store.insert(session).await;
    tracing::info!(%id, "game created");
    Ok((StatusCode::CREATED, Json(Created { id: id.clone(), view: DevilDocument { id, view } })))
}

#[derive(Debug, Deserialize)]
struct ViewQuery {
    view: Option<String>,
}

async fn get_game(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    Query(q): Query<ViewQuery>,
) -> Result<Response, ApiError> {
    let slot = store.get(&id).await.ok_or_else(|| ApiError::not_found(&id))?;
    let session = slot.session.read().await;
    match q.view.as_deref().unwrap_or("devil") {
        "devil" => Ok(Json(DevilDocument { id, view: session.state.devil_view() }).into_response()),
        "spectator" => Ok(Json(spectator(&id, &session)).into_response()),
        other => Err(ApiError::new(StatusCode::BAD_REQUEST, format!("unknown view {other:?}"))),
    }
}

async fn post_action(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<DevilDocument>, ApiError> {
    let action: DevilAction = parse_body(&body)?;
    let slot = store.get(&id).await.ok_or_else(|| ApiError::not_found(&id))?;
    let mut session = slot.session.write().await;
    session.act(action)?;
    Ok(Json(DevilDocument { id, view: session.state.devil_view() }))
}

async fn delete_game(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if store.remove(&id).await {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&id))
    }
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/v1/games", post(create_game))
        .route("/v1/games/{id}", get(get_game).delete(delete_game))
        .route("/v1/games/{id}/action", post(post_action))
        .with_state(store)
}

/// Serves the API on `port` until the process ends, sweeping idle sessions.
pub async fn serve(port: u16, idle_timeout: Duration) -> anyhow::Result<()> {
    let store = Arc::new(SessionStore::new(idle_timeout));
    let sweeper = store.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(30).min(idle_timeout.max(Duration::from_secs(1))));
        loop {
            tick.tick().await;
            let dropped = sweeper.sweep(Instant::now()).await;
            if dropped > 0 {
                tracing::info!(dropped, "expired idle sessions");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(store)).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[tokio::test]
    async fn sweep_drops_idle_sessions() {
        let store = SessionStore::new(Duration::from_millis(50));
        let id = store.insert(Session::new(default_config(), AngelStrategySpec::GreedySpread, false).unwrap()).await;
        assert_eq!(store.sweep(Instant::now()).await, 0);
        assert_eq!(store.sweep(Instant::now() + Duration::from_secs(1)).await, 1);
        assert!(store.get(&id).await.is_none());
    }

    #[tokio::test]
    async fn lookup_expires_lazily() {
        let store = SessionStore::new(Duration::from_millis(20));
        let id = store.insert(Session::new(default_config(), AngelStrategySpec::GreedySpread, false).unwrap()).await;
        assert!(store.get(&id).await.is_some());
        tokio::time::sleep(Duration::from_millis(40)).await;
        assert!(store.get(&id).await.is_none());
        assert!(store.is_empty().await);
    }

    #[test]
    fn error_statuses() {
        let e: ApiError = AngelError::NotOngoing(MatchStatus::AngelCaught).into();
        assert_eq!(e.status, StatusCode::CONFLICT);
        let e: ApiError = AngelError::SiteOutOfRange { site: 9, length: 3 }.into();
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
    }
}
