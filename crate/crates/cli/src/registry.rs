//! Fit-job bookkeeping persisted as `status.json` in each model directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use goodwill::{store, Error, Result};
use serde::{Deserialize, Serialize};

use crate::api_error::ErrorBody;
use crate::ops::FitRequest;

pub const STATUS_FILE: &str = "status.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl FitStatus {
    fn can_become(self, next: FitStatus) -> bool {
        matches!(
            (self, next),
            (FitStatus::Queued, FitStatus::Running) | (FitStatus::Running, FitStatus::Done | FitStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    /// `None` for models fitted by the command line straight into the store.
    pub dataset_id: Option<String>,
    pub request: Option<FitRequest>,
    pub status: FitStatus,
    pub seed: Option<u64>,
    pub created: Option<DateTime<Utc>>,
    pub started: Option<DateTime<Utc>>,
    pub completed: Option<DateTime<Utc>>,
    pub converged: Option<bool>,
    pub error: Option<ErrorBody>,
}

impl ModelEntry {
    pub fn queued(id: &str, dataset_id: &str, request: FitRequest) -> Self {
        Self {
            id: id.into(),
            dataset_id: Some(dataset_id.into()),
            seed: Some(request.config.mcmc.seed),
            request: Some(request),
            status: FitStatus::Queued,
            created: Some(Utc::now()),
            started: None,
            completed: None,
            converged: None,
            error: None,
        }
    }

    fn external(id: &str) -> Self {
        Self {
            id: id.into(),
            dataset_id: None,
            request: None,
            status: FitStatus::Done,
            seed: None,
            created: None,
            started: None,
            completed: None,
            converged: None,
            error: None,
        }
    }
}

/// In-memory view of every model under one store root.
pub struct Registry {
    root: PathBuf,
    entries: Mutex<BTreeMap<String, ModelEntry>>,
}

impl Registry {
    /// Load `status.json` files under `root`. Jobs left running by a previous
    /// process are marked failed; queued ones are returned for resubmission.
    pub fn open(root: &Path) -> Result<(Self, Vec<String>)> {
        std::fs::create_dir_all(root)?;
        let mut entries = BTreeMap::new();
        let mut requeue = Vec::new();
        for e in std::fs::read_dir(root)?.filter_map(|e| e.ok()) {
            let dir = e.path();
            if !dir.join(STATUS_FILE).is_file() {
                continue;
            }
            let mut entry: ModelEntry = store::read_json(&dir, STATUS_FILE)?;
            match entry.status {
                FitStatus::Running => {
                    entry.status = FitStatus::Failed;
                    entry.completed = Some(Utc::now());
                    entry.error = Some(ErrorBody {
                        code: "interrupted".into(),
                        message: "the service stopped while this fit was running".into(),
                        detail: serde_json::Value::Null,
                    });
                    store::write_json(&dir, STATUS_FILE, &entry)?;
                }
                FitStatus::Queued => requeue.push(entry.id.clone()),
                _ => {}
            }
            entries.insert(entry.id.clone(), entry);
        }
        requeue.sort();
        Ok((
            Self {
                root: root.to_path_buf(),
                entries: Mutex::new(entries),
            },
            requeue,
        ))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, id: &str) -> Result<PathBuf> {
        store::model_dir(&self.root, id)
    }

    /// Entry for `id`, treating a bare model directory as a finished fit.
    pub fn get(&self, id: &str) -> Result<ModelEntry> {
        if let Some(e) = self.entries.lock().expect("registry lock").get(id) {
            return Ok(e.clone());
        }
        if self.dir(id)?.join("manifest.json").is_file() {
            return Ok(ModelEntry::external(id));
        }
        Err(Error::NotFound(format!("no model `{id}`")))
    }

    pub fn list(&self) -> Result<Vec<ModelEntry>> {
        let mut out: BTreeMap<String, ModelEntry> = self.entries.lock().expect("registry lock").clone();
        for id in store::list_models(&self.root)? {
            out.entry(id.clone()).or_insert_with(|| ModelEntry::external(&id));
        }
        Ok(out.into_values().collect())
    }

    /// Insert a new queued entry; an existing entry with the same id is returned instead.
    pub fn insert(&self, entry: ModelEntry) -> Result<(ModelEntry, bool)> {
        let mut map = self.entries.lock().expect("registry lock");
        if let Some(e) = map.get(&entry.id) {
            return Ok((e.clone(), false));
        }
        store::write_json(&self.dir(&entry.id)?, STATUS_FILE, &entry)?;
        map.insert(entry.id.clone(), entry.clone());
        Ok((entry, true))
    }

    /// Move `id` to `next`, applying `edit` and persisting before the change is visible.
    pub fn transition(&self, id: &str, next: FitStatus, edit: impl FnOnce(&mut ModelEntry)) -> Result<ModelEntry> {
        let mut map = self.entries.lock().expect("registry lock");
        let entry = map.get_mut(id).ok_or_else(|| Error::NotFound(format!("no model `{id}`")))?;
        if !entry.status.can_become(next) {
            return Err(Error::Input(format!("model `{id}` cannot go from {:?} to {next:?}", entry.status)));
        }
        let mut updated = entry.clone();
        updated.status = next;
        edit(&mut updated);
        store::write_json(&self.dir(id)?, STATUS_FILE, &updated)?;
        *entry = updated.clone();
        Ok(updated)
    }
}
