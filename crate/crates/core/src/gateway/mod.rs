//! Sessions, message routing, timers and transcript replay.
//!
//! [`Engine`] is transport-agnostic: it takes a decoded [`Frame`] plus the
//! current time and returns the frames to push back. Timers (tip expiry,
//! offer expiry, ReAct step pacing) fire from [`Engine::tick`] or before
//! the next inbound message of the same session, so under a fake clock the
//! whole engine is a deterministic transducer.

mod replay;
mod server;
mod session;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex, MutexGuard};

use thiserror::Error;

use crate::backend::LlmBackend;
use crate::model::Millis;
use crate::protocol::{Frame, Message};
use crate::sandbox::{DashboardModel, SandboxError};
use crate::store::{Knowledge, StoreError};

pub use replay::{replay, replay_file, replay_lines, ReplayError, ReplayOutput};
pub use server::{serve, Server};
pub use session::Session;

/// Display window of a tip before it expires untouched.
pub const TIP_DISPLAY_MS: Millis = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub ring_capacity: usize,
    /// Events handed to detectors and planners.
    pub context_window: usize,
    pub tip_display: Millis,
    /// Pause between ReAct iterations of an accepted offer.
    pub step_interval: Millis,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { ring_capacity: 200, context_window: 20, tip_display: TIP_DISPLAY_MS, step_interval: 1000 }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown knowledge profile {0}")]
    UnknownProfile(String),
    #[error("unknown dataset {0}")]
    UnknownDataset(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("profile {profile} names view {view} missing from dataset {dataset}")]
    Mismatch { profile: String, dataset: String, view: String },
    #[error(transparent)]
    Knowledge(#[from] StoreError),
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
    #[error("io: {0}")]
    Io(String),
}

impl GatewayError {
    pub fn code(&self) -> &'static str {
        match self {
            GatewayError::UnknownProfile(_) => "unknown_profile",
            GatewayError::UnknownDataset(_) => "unknown_dataset",
            GatewayError::UnknownSession(_) => "unknown_session",
            GatewayError::Mismatch { .. } => "profile_mismatch",
            GatewayError::Knowledge(_) => "knowledge",
            GatewayError::Sandbox(_) => "sandbox",
            GatewayError::Io(_) => "io",
        }
    }
}

/// Named knowledge profiles and dashboards a client may open.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    profiles: BTreeMap<String, Arc<Knowledge>>,
    datasets: BTreeMap<String, Arc<DashboardModel>>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_profile(mut self, name: impl Into<String>, knowledge: Knowledge) -> Self {
        self.profiles.insert(name.into(), Arc::new(knowledge));
        self
    }

    pub fn with_dataset(mut self, name: impl Into<String>, model: DashboardModel) -> Self {
        self.datasets.insert(name.into(), Arc::new(model));
        self
    }

    /// Loads a profile file and a dataset/layout pair under the given names.
    pub fn load(
        mut self,
        profile: &str,
        knowledge: &Path,
        dataset: &str,
        csv: &Path,
        layout: &Path,
    ) -> Result<Self, GatewayError> {
        self.profiles.insert(profile.to_string(), Arc::new(Knowledge::load(knowledge)?));
        self.datasets.insert(dataset.to_string(), Arc::new(DashboardModel::load(csv, layout)?));
        Ok(self)
    }

    pub fn profile(&self, name: &str) -> Result<Arc<Knowledge>, GatewayError> {
        self.profiles.get(name).cloned().ok_or_else(|| GatewayError::UnknownProfile(name.to_string()))
    }

    pub fn dataset(&self, name: &str) -> Result<Arc<DashboardModel>, GatewayError> {
        self.datasets.get(name).cloned().ok_or_else(|| GatewayError::UnknownDataset(name.to_string()))
    }
}

/// Session registry plus the shared backend.
pub struct Engine {
    catalog: Catalog,
    backend: Arc<dyn LlmBackend + Send + Sync>,
    cfg: EngineConfig,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Session>>>>,
    opened: Mutex<u64>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Engine {
    pub fn new(catalog: Catalog, backend: Arc<dyn LlmBackend + Send + Sync>) -> Self {
        Engine::with_config(catalog, backend, EngineConfig::default())
    }

    pub fn with_config(catalog: Catalog, backend: Arc<dyn LlmBackend + Send + Sync>, cfg: EngineConfig) -> Self {
        Engine { catalog, backend, cfg, sessions: Mutex::new(BTreeMap::new()), opened: Mutex::new(0) }
    }

    pub fn backend(&self) -> &dyn LlmBackend {
        &*self.backend
    }

    /// Creates a session with default proactivity settings.
    pub fn open_session(&self, profile: &str, dataset: &str) -> Result<String, GatewayError> {
        let knowledge = self.catalog.profile(profile)?;
        let model = self.catalog.dataset(dataset)?;
        let views = model.view_ids();
        if let Some(v) = knowledge.workflow.iter().find(|v| !views.contains(v)) {
            return Err(GatewayError::Mismatch { profile: profile.into(), dataset: dataset.into(), view: v.clone() });
        }
        let id = {
            let mut n = lock(&self.opened);
            *n += 1;
            format!("s{n}")
        };
        let session = Session::new(id.clone(), self.cfg, knowledge, model);
        lock(&self.sessions).insert(id.clone(), Arc::new(Mutex::new(session)));
        tracing::info!(session = %id, profile, dataset, "session opened");
        Ok(id)
    }

    pub fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, GatewayError> {
        lock(&self.sessions).get(id).cloned().ok_or_else(|| GatewayError::UnknownSession(id.to_string()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        lock(&self.sessions).keys().cloned().collect()
    }

    /// Runs `f` with the locked session.
    pub fn with_session<R>(&self, id: &str, f: impl FnOnce(&Session) -> R) -> Result<R, GatewayError> {
        let s = self.session(id)?;
        let guard = lock(&s);
        Ok(f(&guard))
    }

    /// Processes one inbound frame at `now`. Errors come back in-band.
    pub fn handle(&self, frame: Frame, now: Millis) -> Vec<Frame> {
        if let Message::Open { profile, dataset } = &frame.message {
            return match self.open_session(profile, dataset) {
                Ok(id) => {
                    let config = self.with_session(&id, |s| s.config().clone()).ok();
                    vec![Frame::new(id, now, Message::Ack { of: "open".into(), config })]
                }
                Err(e) => vec![Frame::new(frame.session, now, Message::error(e.code(), e.to_string()))],
            };
        }
        let session = match self.session(&frame.session) {
            Ok(s) => s,
            Err(e) => return vec![Frame::new(frame.session, now, Message::error(e.code(), e.to_string()))],
        };
        let mut s = lock(&session);
        let mut out = s.advance_to(now, self.backend());
        out.extend(s.handle(frame.message, now, self.backend()));
        out
    }

    /// Fires due timers of every session.
    pub fn tick(&self, now: Millis) -> Vec<Frame> {
        let sessions: Vec<_> = lock(&self.sessions).values().cloned().collect();
        let mut out = Vec::new();
        for s in sessions {
            out.extend(lock(&s).advance_to(now, self.backend()));
        }
        out
    }

    /// Fires every remaining timer in global deadline order.
    pub fn drain(&self) -> Vec<Frame> {
        let mut out = Vec::new();
        while let Some(t) = self.next_deadline() {
            out.extend(self.tick(t));
        }
        out
    }

    /// Earliest timer across sessions.
    pub fn next_deadline(&self) -> Option<Millis> {
        let sessions: Vec<_> = lock(&self.sessions).values().cloned().collect();
        sessions.iter().filter_map(|s| lock(s).next_deadline()).min()
    }
}
