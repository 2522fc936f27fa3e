//! On-disk documents: agent-visible task files and the separate truth files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::task::{DifficultyBreakdown, RvDataset, TaskBundle, Tier, TruthPlanet};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observations {
    pub times_days: Vec<f64>,
    pub rvs_ms: Vec<f64>,
    pub sigmas_ms: Vec<f64>,
    pub labels: Vec<String>,
}

/// Everything an agent may see about a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDocument {
    pub schema_version: u32,
    pub task_id: String,
    pub tier: Tier,
    pub difficulty: DifficultyBreakdown,
    pub observations: Observations,
    pub star_mass_sun: f64,
    pub t_ref_days: f64,
}

impl TaskDocument {
    pub fn from_bundle(bundle: &TaskBundle) -> Self {
        let ds = &bundle.dataset;
        Self {
            schema_version: SCHEMA_VERSION,
            task_id: bundle.task_id.clone(),
            tier: bundle.tier,
            difficulty: bundle.difficulty,
            observations: Observations {
                times_days: ds.times_days.clone(),
                rvs_ms: ds.rvs_ms.clone(),
                sigmas_ms: ds.sigmas_ms.clone(),
                labels: ds.labels.clone(),
            },
            star_mass_sun: ds.star_mass_sun,
            t_ref_days: ds.t_ref_days,
        }
    }

    pub fn dataset(&self) -> RvDataset {
        RvDataset {
            times_days: self.observations.times_days.clone(),
            rvs_ms: self.observations.rvs_ms.clone(),
            sigmas_ms: self.observations.sigmas_ms.clone(),
            labels: self.observations.labels.clone(),
            star_mass_sun: self.star_mass_sun,
            t_ref_days: self.t_ref_days,
        }
    }
}

/// Hidden ground truth of a task; never shown to agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDocument {
    pub schema_version: u32,
    pub task_id: String,
    pub planets: Vec<TruthPlanet>,
    pub offsets: BTreeMap<String, f64>,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl TruthDocument {
    pub fn from_bundle(bundle: &TaskBundle) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            task_id: bundle.task_id.clone(),
            planets: bundle.truth_planets.clone(),
            offsets: bundle.truth_offsets.clone(),
            noise: bundle.noise,
            seed: bundle.seed,
        }
    }
}

/// Reassembles a bundle from its two documents.
pub fn bundle_from_documents(task: &TaskDocument, truth: &TruthDocument) -> Result<TaskBundle> {
    check_version(task.schema_version)?;
    check_version(truth.schema_version)?;
    if task.task_id != truth.task_id {
        return Err(Error::InvalidArgument(format!(
            "task id `{}` does not match truth id `{}`",
            task.task_id, truth.task_id
        )));
    }
    let dataset = task.dataset();
    dataset.validate()?;
    Ok(TaskBundle {
        task_id: task.task_id.clone(),
        seed: truth.seed,
        dataset,
        truth_planets: truth.planets.clone(),
        truth_offsets: truth.offsets.clone(),
        noise: truth.noise,
        difficulty: task.difficulty,
        tier: task.tier,
    })
}

pub fn check_version(v: u32) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
        )))
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
