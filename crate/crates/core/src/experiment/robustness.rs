use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_io::{load_dataset, read_manifest, Dataset};
use crate::error::{Error, Result};
use crate::experiment::store::write_atomic;
use crate::graph::TopologySpec;
use crate::models::{Checkpoint, Model};
use crate::training::{attach_topology, evaluate};

/// A trained checkpoint plus the topology its graphs were built with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub topology: Option<TopologySpec>,
    pub checkpoint: Checkpoint<f64>,
}

impl SavedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let saved: Self = serde_json::from_slice(&fs::read(path)?)?;
        if saved.checkpoint.config.arch.is_graph() != saved.topology.is_some() {
            return Err(Error::Config(format!(
                "{}: {} checkpoint with topology {:?}",
                path.display(),
                saved.checkpoint.config.arch,
                saved.topology
            )));
        }
        Ok(saved)
    }

    /// Test-split metrics on one loaded dataset.
    pub fn evaluate_test(&self, dataset: &Dataset<f64>) -> Result<crate::training::Evaluation> {
        let model = Model::from_checkpoint(&self.checkpoint)?;
        let graphs = attach_topology(&dataset.test, self.topology.as_ref())?;
        evaluate(&model, &graphs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    pub level: f64,
    pub auroc: f64,
    pub accuracy: f64,
}

/// Evaluates a frozen model on the test split at each perturbation level,
/// in the order given. Every level is checked before any evaluation runs.
pub fn robustness_eval(saved: &SavedModel, manifest: &Path, levels: &[f64]) -> Result<Vec<RobustnessPoint>> {
    let m = read_manifest(manifest)?;
    if let Some(&missing) = levels.iter().find(|&&l| !m.has_level(l)) {
        return Err(Error::MissingLevel(missing));
    }
    levels
        .iter()
        .map(|&level| {
            let dataset = load_dataset::<f64>(manifest, level)?;
            let e = saved.evaluate_test(&dataset)?;
            log::info!("level {level}: auroc {:.4} acc {:.4}", e.auroc, e.accuracy);
            Ok(RobustnessPoint {
                level,
                auroc: e.auroc,
                accuracy: e.accuracy,
            })
        })
        .collect()
}
