//! Suite directory layout: `manifest.json`, `tasks/<id>.json`, `truth/<id>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use rvbench_core::schema::{bundle_from_documents, check_version, TaskDocument, TruthDocument};
use rvbench_core::{Suite, TaskBundle};

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Pretty JSON with a trailing newline; parent directories are created.
pub fn write<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// JSON files named on the command line, with directories expanded (sorted).
pub fn json_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            entries.retain(|e| e.extension().is_some_and(|x| x == "json"));
            entries.sort();
            out.extend(entries);
        } else if p.exists() {
            out.push(p.clone());
        } else {
            bail!("{} does not exist", p.display());
        }
    }
    Ok(out)
}

pub fn write_task_pair(dir: &Path, bundle: &TaskBundle) -> Result<()> {
    write(&dir.join("tasks").join(format!("{}.json", bundle.task_id)), &TaskDocument::from_bundle(bundle))?;
    write(&dir.join("truth").join(format!("{}.json", bundle.task_id)), &TruthDocument::from_bundle(bundle))
}

pub fn write_suite(dir: &Path, suite: &Suite) -> Result<()> {
    write(&dir.join("manifest.json"), &suite.manifest)?;
    for t in &suite.tasks {
        write_task_pair(dir, t)?;
    }
    Ok(())
}

pub fn read_task(path: &Path) -> Result<TaskDocument> {
    let doc: TaskDocument = read(path)?;
    check_version(doc.schema_version).with_context(|| format!("in {}", path.display()))?;
    doc.dataset().validate().with_context(|| format!("in {}", path.display()))?;
    Ok(doc)
}

pub fn read_bundle(task: &Path, truth: &Path) -> Result<TaskBundle> {
    let doc = read_task(task)?;
    let truth: TruthDocument = read(truth)?;
    bundle_from_documents(&doc, &truth).with_context(|| format!("combining {} with its truth", task.display()))
}

/// Task documents of a suite directory, paired with their truth when present.
pub fn read_suite(dir: &Path) -> Result<Vec<(TaskDocument, Option<TaskBundle>)>> {
    let tasks_dir = dir.join("tasks");
    if !tasks_dir.is_dir() {
        bail!("{} has no tasks/ directory", dir.display());
    }
    json_files(&[tasks_dir])?
        .into_iter()
        .map(|path| {
            let doc = read_task(&path)?;
            let truth = dir.join("truth").join(path.file_name().expect("file name"));
            let bundle = if truth.exists() { Some(read_bundle(&path, &truth)?) } else { None };
            Ok((doc, bundle))
        })
        .collect()
}
