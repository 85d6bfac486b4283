use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Catalog, CatalogError, Family, Level, Task};
use crate::source::sha256_hex;

pub const GENERATOR_VERSION: &str = "iosynth-bench/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub family: Family,
    pub level: Level,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator_version: String,
    pub tasks: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    /// Hash of the manifest file bytes; identifies a whole benchmark.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CatalogError + '_ {
    move |source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn task_json(task: &Task) -> String {
    let mut text = serde_json::to_string_pretty(task).expect("tasks serialize");
    text.push('\n');
    text
}

/// Writes `tasks/<id>.json` for every task plus `manifest.json`.
pub fn export_benchmark(catalog: &Catalog, dir: &Path) -> Result<Manifest, CatalogError> {
    let tasks_dir = dir.join("tasks");
    fs::create_dir_all(&tasks_dir).map_err(io_err(&tasks_dir))?;
    let mut entries = Vec::with_capacity(catalog.tasks.len());
    for task in &catalog.tasks {
        let text = task_json(task);
        let path = tasks_dir.join(format!("{}.json", task.id));
        fs::write(&path, &text).map_err(io_err(&path))?;
        entries.push(ManifestEntry {
            id: task.id.clone(),
            family: task.family,
            level: task.level,
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    let manifest = Manifest {
        generator_version: GENERATOR_VERSION.to_string(),
        tasks: entries,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json()).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn load_task(path: &Path) -> Result<Task, CatalogError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CatalogError::Malformed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Loads an exported benchmark, checking every file against the manifest.
pub fn load_benchmark(dir: &Path) -> Result<Catalog, CatalogError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CatalogError::Malformed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for entry in &manifest.tasks {
        let path = dir.join("tasks").join(format!("{}.json", entry.id));
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(CatalogError::Malformed {
                path: path.display().to_string(),
                detail: "content hash does not match the manifest".into(),
            });
        }
        tasks.push(load_task(&path)?);
    }
    Ok(Catalog { tasks })
}
