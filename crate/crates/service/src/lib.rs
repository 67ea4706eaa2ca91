//! Session-oriented HTTP API over the modelling pipeline.
//!
//! Each session holds one chain of artifacts (dataset, column selection,
//! row filter, tree, staging, priors, staged tree, CEG) plus an optional
//! area map. Every mutation bumps the session revision and clears the
//! artifacts downstream of the one it touched. Writers may send the
//! revision they last saw in `If-Match`; a mismatch is rejected.

pub mod error;
pub mod projection;
mod routes;
pub mod session;

use std::collections::BTreeMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use axum::http::HeaderMap;
use axum::Router;

pub use error::{ApiError, ApiResult};
pub use session::{Archive, Session};

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_MAX_UPLOAD: usize = 32 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub bind: IpAddr,
    pub port: u16,
    /// Largest accepted request body, in bytes.
    pub max_upload: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            max_upload: DEFAULT_MAX_UPLOAD,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{var}: {message}")]
pub struct ConfigError {
    pub var: &'static str,
    pub message: String,
}

impl Config {
    /// Reads `CEGFORGE_BIND`, `CEGFORGE_PORT` and `CEGFORGE_MAX_UPLOAD`,
    /// falling back to the defaults for unset variables.
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        fn parse<T: std::str::FromStr>(var: &'static str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            v.trim().parse().map_err(|e: T::Err| ConfigError { var, message: e.to_string() })
        }
        let mut c = Config::default();
        if let Some(v) = get("CEGFORGE_BIND") {
            c.bind = parse("CEGFORGE_BIND", &v)?;
        }
        if let Some(v) = get("CEGFORGE_PORT") {
            c.port = parse("CEGFORGE_PORT", &v)?;
        }
        if let Some(v) = get("CEGFORGE_MAX_UPLOAD") {
            c.max_upload = parse("CEGFORGE_MAX_UPLOAD", &v)?;
        }
        Ok(c)
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

struct Slot {
    /// Serialises writers. Readers never take it.
    write: tokio::sync::Mutex<()>,
    current: RwLock<Arc<Session>>,
}

#[derive(Default)]
struct Registry {
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    next_id: AtomicU64,
}

/// Shared server state: the in-memory session registry.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Registry>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a session under a fresh id. Ids are handed out in
    /// sequence so replays against a fresh server see the same ids.
    pub fn insert(&self, session: Session) -> String {
        let n = self.inner.next_id.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("session-{n}");
        let slot = Slot {
            write: tokio::sync::Mutex::new(()),
            current: RwLock::new(Arc::new(session)),
        };
        self.inner
            .sessions
            .write()
            .expect("registry lock")
            .insert(id.clone(), Arc::new(slot));
        id
    }

    pub fn ids(&self) -> Vec<String> {
        self.inner.sessions.read().expect("registry lock").keys().cloned().collect()
    }

    pub fn remove(&self, id: &str) {
        self.inner.sessions.write().expect("registry lock").remove(id);
    }

    fn slot(&self, id: &str) -> ApiResult<Arc<Slot>> {
        self.inner
            .sessions
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    /// Current state of a session.
    pub fn snapshot(&self, id: &str) -> ApiResult<Arc<Session>> {
        Ok(self.slot(id)?.current.read().expect("session lock").clone())
    }

    /// Applies `f` to a copy of the session and publishes it with the next
    /// revision. Nothing is published when `f` fails.
    pub async fn mutate(
        &self,
        id: &str,
        headers: &HeaderMap,
        f: impl FnOnce(&mut Session) -> ApiResult<()>,
    ) -> ApiResult<Arc<Session>> {
        let slot = self.slot(id)?;
        let _guard = slot.write.lock().await;
        let current = slot.current.read().expect("session lock").clone();
        check_revision(headers, current.revision)?;
        let mut next = (*current).clone();
        f(&mut next)?;
        next.revision = current.revision + 1;
        let next = Arc::new(next);
        *slot.current.write().expect("session lock") = next.clone();
        Ok(next)
    }
}

fn check_revision(headers: &HeaderMap, current: u64) -> ApiResult<()> {
    let Some(value) = headers.get(axum::http::header::IF_MATCH) else {
        return Ok(());
    };
    let text = value
        .to_str()
        .map_err(|_| ApiError::BadRequest("If-Match is not text".into()))?
        .trim()
        .trim_start_matches("W/")
        .trim_matches('"');
    if text == "*" {
        return Ok(());
    }
    let given: u64 = text
        .parse()
        .map_err(|_| ApiError::BadRequest(format!("If-Match `{text}` is not a revision number")))?;
    if given != current {
        return Err(ApiError::Stale { given, current });
    }
    Ok(())
}

/// The full API, with the upload limit applied.
pub fn router(state: AppState, config: &Config) -> Router {
    routes::routes(config.max_upload).with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.addr()).await?;
    axum::serve(listener, router(AppState::new(), &config)).await
}
