use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Metric, SliceTopology, TopologySpec, FEATURE_DIM};
use crate::models::{Arch, ModelConfig};
use crate::training::TrainConfig;

/// Hidden width per head; the rest of each [`ModelConfig`] comes from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadWidths {
    pub sage_hidden: usize,
    pub gat_hidden: usize,
    pub cond_mlp_hidden: usize,
    pub gat_negative_slope: f64,
}

impl Default for HeadWidths {
    fn default() -> Self {
        let d = |arch| ModelConfig::default_for(arch, 2);
        Self {
            sage_hidden: d(Arch::Sage).hidden_dim,
            gat_hidden: d(Arch::Gat).hidden_dim,
            cond_mlp_hidden: d(Arch::CondMlp).hidden_dim,
            gat_negative_slope: d(Arch::Gat).gat_negative_slope,
        }
    }
}

impl HeadWidths {
    pub fn model_config(&self, arch: Arch, num_classes: usize) -> ModelConfig {
        let mut cfg = ModelConfig::default_for(arch, num_classes);
        cfg.in_dim = FEATURE_DIM;
        cfg.hidden_dim = match arch {
            Arch::Sage => self.sage_hidden,
            Arch::Gat => self.gat_hidden,
            Arch::CondMlp => self.cond_mlp_hidden,
        };
        cfg.gat_negative_slope = self.gat_negative_slope;
        cfg
    }
}

/// Topologies and convolutions crossed by a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub convs: Vec<Arch>,
    pub slice: Vec<SliceTopology>,
    pub metrics: Vec<Metric>,
    pub ks: Vec<usize>,
    /// Also train the conditional MLP once as the non-graph baseline.
    pub baseline: bool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            convs: vec![Arch::Sage, Arch::Gat],
            slice: SliceTopology::ALL.to_vec(),
            metrics: Metric::ALL.to_vec(),
            ks: vec![3, 5, 7, 9],
            baseline: true,
        }
    }
}

impl SweepGrid {
    pub fn topologies(&self) -> Vec<TopologySpec> {
        let mut out: Vec<TopologySpec> = self.slice.iter().map(|&k| TopologySpec::slice(k)).collect();
        for &m in &self.metrics {
            out.extend(self.ks.iter().map(|&k| TopologySpec::knn(m, k)));
        }
        out
    }

    /// Graph cells in grid order, convolution-major. The baseline is not a cell.
    pub fn cells(&self) -> Vec<Cell> {
        let topologies = self.topologies();
        self.convs
            .iter()
            .flat_map(|&arch| topologies.iter().map(move |&t| Cell::graph(arch, t)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.convs.iter().find(|a| !a.is_graph()) {
            return Err(Error::Config(format!("{a} is not a graph convolution")));
        }
        if !self.metrics.is_empty() && self.ks.is_empty() {
            return Err(Error::Config("encoding-based metrics given without any k".into()));
        }
        for t in self.topologies() {
            t.validate()?;
        }
        if self.cells().is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        Ok(())
    }
}

/// One (head, topology) combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub arch: Arch,
    /// `None` only for the conditional MLP.
    pub topology: Option<TopologySpec>,
}

impl Cell {
    pub fn graph(arch: Arch, topology: TopologySpec) -> Self {
        Self {
            arch,
            topology: Some(topology),
        }
    }

    pub fn baseline() -> Self {
        Self {
            arch: Arch::CondMlp,
            topology: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.arch.is_graph(), &self.topology) {
            (true, Some(t)) => t.validate(),
            (false, None) => Ok(()),
            (true, None) => Err(Error::Config(format!("{} needs a topology", self.arch))),
            (false, Some(_)) => Err(Error::Config(format!("{} takes no topology", self.arch))),
        }
    }

    /// `conv / topology / k`, with `n/a` for k of slice-based topologies.
    pub fn label(&self) -> String {
        match &self.topology {
            None => self.arch.label().to_string(),
            Some(t) => {
                let k = t.k().map_or_else(|| "n/a".to_string(), |k| k.to_string());
                format!("{} / {} / {}", self.arch.label(), t.name(), k)
            }
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Everything a run or sweep needs; loaded from TOML by the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Report name; defaults to the manifest's parent directory name.
    pub dataset: Option<String>,
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Perturbation level used for training.
    pub level: f64,
    pub workers: usize,
    /// Head and topology of a single `train` invocation.
    pub arch: Arch,
    pub topology: Option<TopologySpec>,
    pub model: HeadWidths,
    pub train: TrainConfig,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            manifest: PathBuf::new(),
            out_dir: PathBuf::from("out"),
            level: 0.0,
            workers: 1,
            arch: Arch::Sage,
            topology: Some(TopologySpec::slice(SliceTopology::Custom)),
            model: HeadWidths::default(),
            train: TrainConfig::default(),
            sweep: SweepGrid::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn dataset_name(&self) -> String {
        if let Some(d) = &self.dataset {
            return d.clone();
        }
        self.manifest
            .parent()
            .and_then(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .filter(|n| !n.is_empty())
            .unwrap_or_else(|| "dataset".to_string())
    }

    /// The cell a single `train` invocation runs.
    pub fn single_cell(&self) -> Cell {
        Cell {
            arch: self.arch,
            topology: if self.arch.is_graph() { self.topology } else { None },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.manifest.as_os_str().is_empty() {
            return Err(Error::Config("no manifest path given".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.level >= 0.0 && self.level.is_finite()) {
            return Err(Error::Config(format!("level {} must be finite and ≥ 0", self.level)));
        }
        self.train.validate()
    }
}
