use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use cpc_core::{parse_cpc_json, to_cpc_json, Dataset, EditSession, IngestError};
use parking_lot::{Mutex, RwLock};

#[derive(Debug)]
pub struct SessionEntry {
    pub dataset_id: String,
    pub session: EditSession,
}

/// In-memory datasets and edit sessions.
///
/// Datasets sit behind one reader/writer lock. Each edit session has its own
/// mutex so actions on one session serialize without blocking others.
#[derive(Debug, Default)]
pub struct SessionStore {
    datasets: RwLock<BTreeMap<u64, Arc<Dataset>>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<SessionEntry>>>>,
    next_dataset: AtomicU64,
    next_session: AtomicU64,
}

fn dataset_key(id: &str) -> Option<u64> {
    id.strip_prefix("ds-")?.parse().ok()
}

#[derive(Debug)]
pub enum LoadError {
    Io(PathBuf, std::io::Error),
    Parse(PathBuf, IngestError),
}

impl std::fmt::Display for LoadError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Io(p, e) => write!(f, "{}: {e}", p.display()),
            Self::Parse(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl std::error::Error for LoadError {}

impl SessionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, dataset: Dataset) -> String {
        let n = self.next_dataset.fetch_add(1, Ordering::Relaxed) + 1;
        self.datasets.write().insert(n, Arc::new(dataset));
        format!("ds-{n}")
    }

    pub fn dataset(&self, id: &str) -> Option<Arc<Dataset>> {
        self.datasets.read().get(&dataset_key(id)?).cloned()
    }

    pub fn list(&self) -> Vec<(String, Arc<Dataset>)> {
        self.datasets
            .read()
            .iter()
            .map(|(n, ds)| (format!("ds-{n}"), Arc::clone(ds)))
            .collect()
    }

    /// Runs `f` on the current dataset under the write lock and stores its
    /// result, so concurrent updates to one dataset never interleave.
    pub fn update<T, E>(&self, id: &str, f: impl FnOnce(&Dataset) -> Result<(Dataset, T), E>) -> Option<Result<T, E>> {
        let key = dataset_key(id)?;
        let mut guard = self.datasets.write();
        let current = guard.get(&key)?;
        Some(f(current).map(|(next, out)| {
            guard.insert(key, Arc::new(next));
            out
        }))
    }

    pub fn open_session(&self, dataset_id: &str, session: EditSession) -> String {
        let n = self.next_session.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("es-{n}");
        let entry = SessionEntry {
            dataset_id: dataset_id.to_owned(),
            session,
        };
        self.sessions.lock().insert(id.clone(), Arc::new(Mutex::new(entry)));
        id
    }

    pub fn session(&self, id: &str) -> Option<Arc<Mutex<SessionEntry>>> {
        self.sessions.lock().get(id).cloned()
    }

    /// Loads every `*.json` file in `dir` (sorted by name) as CPC-JSON.
    pub fn load_dir(&self, dir: &Path) -> Result<Vec<(PathBuf, String)>, LoadError> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| LoadError::Io(dir.to_owned(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut loaded = Vec::new();
        for path in files {
            let bytes = std::fs::read(&path).map_err(|e| LoadError::Io(path.clone(), e))?;
            let ds = parse_cpc_json(&bytes).map_err(|e| LoadError::Parse(path.clone(), e))?;
            let id = self.insert(ds);
            loaded.push((path, id));
        }
        Ok(loaded)
    }

    /// Writes each dataset to `dir/<id>.json`.
    pub fn snapshot(&self, dir: &Path) -> std::io::Result<usize> {
        std::fs::create_dir_all(dir)?;
        let all = self.list();
        for (id, ds) in &all {
            std::fs::write(dir.join(format!("{id}.json")), to_cpc_json(ds))?;
        }
        Ok(all.len())
    }
}
