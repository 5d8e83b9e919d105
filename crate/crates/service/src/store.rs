//! Sessions in memory, mirrored to one JSON file each when a data directory
//! is configured.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use crate::error::ApiError;
use crate::session::Session;

pub type Shared = Arc<Mutex<Session>>;

#[derive(Debug, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    sessions: RwLock<HashMap<String, Shared>>,
}

impl Store {
    pub fn in_memory() -> Store {
        Store::default()
    }

    /// Opens `dir`, creating it if needed, and loads every session file.
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Store> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path)?;
            match serde_json::from_str::<Session>(&text) {
                Ok(s) => {
                    sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
                }
                Err(e) => log::warn!("skipping unreadable session file {}: {e}", path.display()),
            }
        }
        Ok(Store { dir: Some(dir), sessions: RwLock::new(sessions) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, id: &str) -> Result<Shared, ApiError> {
        self.sessions
            .read()
            .expect("store lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(format!("no session `{id}`")))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.sessions.read().expect("store lock").contains_key(id)
    }

    /// Registers a new session under a free id derived from `base`.
    pub fn insert_new(
        &self,
        base: &str,
        make: impl FnOnce(String) -> Result<Session, ApiError>,
    ) -> Result<Shared, ApiError> {
        let mut map = self.sessions.write().expect("store lock");
        let id = (0..)
            .map(|i| if i == 0 { base.to_string() } else { format!("{base}-{i}") })
            .find(|id| !map.contains_key(id))
            .expect("unbounded");
        let session = make(id.clone())?;
        self.persist(&session)?;
        let shared = Arc::new(Mutex::new(session));
        map.insert(id, shared.clone());
        Ok(shared)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("store lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Writes the session file atomically (temp file, then rename).
    pub fn persist(&self, session: &Session) -> Result<(), ApiError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(format!("{}.json", session.id));
        let tmp = dir.join(format!(".{}.json.tmp", session.id));
        let text = serde_json::to_string(session).map_err(|e| ApiError::internal(e.to_string()))?;
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| ApiError::internal(format!("writing {}: {e}", path.display())))
    }
}
