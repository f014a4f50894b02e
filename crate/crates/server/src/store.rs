//! In-memory scenario handles with optional JSON snapshots.
//!
//! A snapshot holds the scenario file and the operator choices of every
//! accepted step, so a handle is rebuilt by replaying its steps.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rgt_core::{Alternative, ScenarioFile, ScenarioRun, SubjectId};
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};

use crate::error::ApiError;

/// Operator choices as written on the wire: subject name to set notation.
pub type ChoiceSpec = BTreeMap<String, String>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Snapshot {
    format_version: String,
    id: String,
    version: u64,
    scenario: ScenarioFile,
    steps: Vec<Option<ChoiceSpec>>,
}

#[derive(Debug)]
pub struct Handle {
    pub id: String,
    pub version: u64,
    pub run: ScenarioRun,
    file: ScenarioFile,
    steps: Vec<Option<ChoiceSpec>>,
}

impl Handle {
    fn snapshot(&self) -> Snapshot {
        Snapshot {
            format_version: rgt_core::schema::FORMAT_VERSION.to_owned(),
            id: self.id.clone(),
            version: self.version,
            scenario: self.file.clone(),
            steps: self.steps.clone(),
        }
    }

    pub fn view(&self) -> serde_json::Value {
        serde_json::json!({
            "id": self.id,
            "version": self.version,
            "cursor": self.run.cursor(),
            "steps_total": self.run.scenario().steps().len(),
            "next_stages": self.run.next_step().map(|r| r.collect::<Vec<_>>()),
            "finished": self.run.is_finished(),
            "state": self.run.state(),
        })
    }
}

pub fn parse_choices(
    run: &ScenarioRun,
    choices: &ChoiceSpec,
) -> rgt_core::Result<BTreeMap<SubjectId, Alternative>> {
    let universe = run.scenario().universe();
    choices
        .iter()
        .map(|(s, v)| Ok((SubjectId::new(s.as_str())?, universe.parse_alternative(v)?)))
        .collect()
}

#[derive(Debug, Default)]
pub struct Store {
    handles: RwLock<HashMap<String, Arc<Mutex<Handle>>>>,
    snapshot_dir: Option<PathBuf>,
}

impl Store {
    /// Opens a store, reloading every snapshot found in `snapshot_dir`.
    pub async fn open(snapshot_dir: Option<PathBuf>) -> std::io::Result<Self> {
        let store = Self {
            handles: RwLock::default(),
            snapshot_dir,
        };
        if let Some(dir) = &store.snapshot_dir {
            tokio::fs::create_dir_all(dir).await?;
            let mut entries = tokio::fs::read_dir(dir).await?;
            let mut handles = store.handles.write().await;
            while let Some(entry) = entries.next_entry().await? {
                let path = entry.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                match load_snapshot(&path).await {
                    Ok(handle) => {
                        handles.insert(handle.id.clone(), Arc::new(Mutex::new(handle)));
                    }
                    Err(err) => tracing::warn!("skipping snapshot {}: {err}", path.display()),
                }
            }
        }
        Ok(store)
    }

    pub async fn create(&self, file: ScenarioFile) -> Result<serde_json::Value, ApiError> {
        let scenario = file.resolve()?;
        let handle = Handle {
            id: uuid::Uuid::new_v4().to_string(),
            version: 1,
            run: ScenarioRun::new(scenario),
            file,
            steps: Vec::new(),
        };
        self.persist(&handle).await?;
        let view = handle.view();
        self.handles
            .write()
            .await
            .insert(handle.id.clone(), Arc::new(Mutex::new(handle)));
        Ok(view)
    }

    pub async fn get(&self, id: &str) -> Result<Arc<Mutex<Handle>>, ApiError> {
        self.handles
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(id))
    }

    /// Advances one step. Nothing changes unless the step and its snapshot
    /// both succeed.
    pub async fn step(
        &self,
        id: &str,
        expected_version: u64,
        choices: Option<ChoiceSpec>,
    ) -> Result<serde_json::Value, ApiError> {
        let handle = self.get(id).await?;
        let mut handle = handle.lock().await;
        if handle.version != expected_version {
            return Err(ApiError::version_conflict(expected_version, handle.version));
        }
        let mut run = handle.run.clone();
        let parsed = choices
            .as_ref()
            .map(|c| parse_choices(&run, c))
            .transpose()?;
        run.step(parsed.as_ref())?;

        let mut steps = handle.steps.clone();
        steps.push(choices);
        let next = Handle {
            id: handle.id.clone(),
            version: handle.version + 1,
            run,
            file: handle.file.clone(),
            steps,
        };
        self.persist(&next).await?;
        *handle = next;
        Ok(handle.view())
    }

    async fn persist(&self, handle: &Handle) -> Result<(), ApiError> {
        let Some(dir) = &self.snapshot_dir else {
            return Ok(());
        };
        let body = serde_json::to_vec_pretty(&handle.snapshot())
            .map_err(|e| ApiError::internal(e.to_string()))?;
        let path = dir.join(format!("{}.json", handle.id));
        let tmp = dir.join(format!("{}.json.tmp", handle.id));
        let write = async {
            tokio::fs::write(&tmp, body).await?;
            tokio::fs::rename(&tmp, &path).await
        };
        write
            .await
            .map_err(|e| ApiError::internal(format!("writing snapshot {}: {e}", path.display())))
    }
}

async fn load_snapshot(path: &Path) -> Result<Handle, String> {
    let text = tokio::fs::read_to_string(path)
        .await
        .map_err(|e| e.to_string())?;
    let snapshot: Snapshot = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let scenario = snapshot.scenario.resolve().map_err(|e| e.to_string())?;
    let mut run = ScenarioRun::new(scenario);
    for choices in &snapshot.steps {
        let parsed = choices
            .as_ref()
            .map(|c| parse_choices(&run, c))
            .transpose()
            .map_err(|e| e.to_string())?;
        run.step(parsed.as_ref()).map_err(|e| e.to_string())?;
    }
    if snapshot.version != snapshot.steps.len() as u64 + 1 {
        return Err(format!(
            "version {} does not match {} recorded steps",
            snapshot.version,
            snapshot.steps.len()
        ));
    }
    Ok(Handle {
        id: snapshot.id,
        version: snapshot.version,
        run,
        file: snapshot.scenario,
        steps: snapshot.steps,
    })
}
