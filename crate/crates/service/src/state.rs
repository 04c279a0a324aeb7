use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock, RwLock};
use std::time::{Duration, Instant, SystemTime};

use cinema3d_core::camera::Intrinsics;
use cinema3d_core::grid::{ColorImage, DepthMap, FlowField};
use cinema3d_core::scene::{build_scene, Scene, SceneConfig};
use sha2::{Digest, Sha256};

use crate::error::ApiError;

pub const DEFAULT_MAX_UPLOAD: usize = 32 * 1024 * 1024;
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Largest accepted request body, in bytes.
    pub max_upload: usize,
    /// Idle time after which a session and its jobs are dropped.
    pub session_ttl: Duration,
    /// Directory that path-valued hint masks resolve against. Without one,
    /// masks must be inlined as `data:` URLs.
    pub assets_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            max_upload: DEFAULT_MAX_UPLOAD,
            session_ttl: DEFAULT_SESSION_TTL,
            assets_dir: None,
        }
    }
}

/// The motion-independent scene plus what the camera presets need from it.
pub struct BuiltScene {
    pub scene: Scene,
    pub median_depth: f64,
}

#[derive(Clone)]
pub struct Motion {
    pub flow: Arc<FlowField>,
    /// Bumped on every accepted hints document.
    pub revision: u64,
}

pub struct Session {
    pub id: String,
    pub color: ColorImage,
    pub depth: DepthMap,
    pub intrinsics: Intrinsics,
    pub created: SystemTime,
    scene: OnceLock<Result<Arc<BuiltScene>, ApiError>>,
    scene_builds: AtomicUsize,
    motion: Mutex<Option<Motion>>,
    revisions: AtomicU64,
    last_access: Mutex<Instant>,
}

impl Session {
    pub fn new(id: String, color: ColorImage, depth: DepthMap, intrinsics: Intrinsics) -> Self {
        Self {
            id,
            color,
            depth,
            intrinsics,
            created: SystemTime::now(),
            scene: OnceLock::new(),
            scene_builds: AtomicUsize::new(0),
            motion: Mutex::new(None),
            revisions: AtomicU64::new(0),
            last_access: Mutex::new(Instant::now()),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.color.dims()
    }

    /// Builds the layered scene on first use. Concurrent callers wait for
    /// the one build instead of starting their own.
    pub fn scene(&self) -> Result<Arc<BuiltScene>, ApiError> {
        self.scene
            .get_or_init(|| {
                self.scene_builds.fetch_add(1, Ordering::SeqCst);
                let scene = build_scene(&self.color, &self.depth, self.intrinsics, &SceneConfig::default())?;
                let median_depth = scene.median_depth();
                Ok(Arc::new(BuiltScene { scene, median_depth }))
            })
            .clone()
    }

    pub fn scene_builds(&self) -> usize {
        self.scene_builds.load(Ordering::SeqCst)
    }

    pub fn motion(&self) -> Option<Motion> {
        self.motion.lock().unwrap().clone()
    }

    pub fn set_motion(&self, flow: FlowField) -> u64 {
        let revision = self.revisions.fetch_add(1, Ordering::SeqCst) + 1;
        *self.motion.lock().unwrap() = Some(Motion {
            flow: Arc::new(flow),
            revision,
        });
        revision
    }

    fn touch(&self) {
        *self.last_access.lock().unwrap() = Instant::now();
    }

    fn idle_for(&self) -> Duration {
        self.last_access.lock().unwrap().elapsed()
    }
}

pub struct Job {
    pub id: String,
    pub session: String,
    pub total: usize,
    frames: Mutex<Vec<Arc<Vec<u8>>>>,
    outcome: Mutex<Option<Result<(), String>>>,
    finished_at: Mutex<Option<Instant>>,
}

impl Job {
    pub fn new(id: String, session: String, total: usize) -> Self {
        Self {
            id,
            session,
            total,
            frames: Mutex::new(Vec::with_capacity(total)),
            outcome: Mutex::new(None),
            finished_at: Mutex::new(None),
        }
    }

    pub fn push_frame(&self, png: Vec<u8>) {
        self.frames.lock().unwrap().push(Arc::new(png));
    }

    pub fn finish(&self, result: Result<(), String>) {
        *self.outcome.lock().unwrap() = Some(result);
        *self.finished_at.lock().unwrap() = Some(Instant::now());
    }

    pub fn frame(&self, k: usize) -> Option<Arc<Vec<u8>>> {
        self.frames.lock().unwrap().get(k).cloned()
    }

    pub fn frames_ready(&self) -> usize {
        self.frames.lock().unwrap().len()
    }

    /// `None` while running.
    pub fn outcome(&self) -> Option<Result<(), String>> {
        self.outcome.lock().unwrap().clone()
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    jobs: RwLock<HashMap<String, Arc<Job>>>,
    counter: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config,
            sessions: RwLock::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(0),
        }
    }

    /// Opaque, unguessable-enough token for a local authoring tool.
    pub fn fresh_id(&self, prefix: &str) -> String {
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let nanos = SystemTime::now()
            .duration_since(SystemTime::UNIX_EPOCH)
            .map_or(0, |d| d.as_nanos());
        let digest = Sha256::new()
            .chain_update(n.to_le_bytes())
            .chain_update(nanos.to_le_bytes())
            .chain_update(std::process::id().to_le_bytes())
            .finalize();
        format!("{prefix}{}", hex(&digest[..12]))
    }

    pub fn insert_session(&self, session: Session) -> Arc<Session> {
        let session = Arc::new(session);
        self.sessions
            .write()
            .unwrap()
            .insert(session.id.clone(), session.clone());
        session
    }

    pub fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.purge_expired();
        let session = self
            .sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_session(id))?;
        session.touch();
        Ok(session)
    }

    pub fn insert_job(&self, job: Job) -> Arc<Job> {
        let job = Arc::new(job);
        self.jobs.write().unwrap().insert(job.id.clone(), job.clone());
        job
    }

    pub fn job(&self, id: &str) -> Result<Arc<Job>, ApiError> {
        self.purge_expired();
        self.jobs
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::unknown_job(id))
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    /// Drops idle sessions, and finished jobs of sessions that are gone or
    /// that finished longer than a TTL ago.
    pub fn purge_expired(&self) {
        let ttl = self.config.session_ttl;
        let mut sessions = self.sessions.write().unwrap();
        sessions.retain(|_, s| s.idle_for() < ttl);
        let mut jobs = self.jobs.write().unwrap();
        jobs.retain(|_, j| {
            let finished = *j.finished_at.lock().unwrap();
            match finished {
                None => true,
                Some(at) => sessions.contains_key(&j.session) && at.elapsed() < ttl,
            }
        });
    }
}

pub fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}
