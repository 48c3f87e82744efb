use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_io::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::experiment::robustness::SavedModel;
use crate::experiment::store::{write_atomic, FailureRecord};
use crate::experiment::{dataset_digest, run_id, Cell, ExperimentConfig, HeadWidths, RunRecord, RunStore};
use crate::training::{summarize, train, RunSummary, Splits, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub seed: u64,
    pub error: String,
}

/// Aggregated seeds of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub label: String,
    /// Over the seeds that finished; `None` when none did.
    pub summary: Option<RunSummary>,
    pub run_ids: Vec<String>,
    pub failures: Vec<CellFailure>,
}

impl CellSummary {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty() && self.summary.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub dataset: String,
    pub cells: Vec<CellSummary>,
    pub baseline: Option<CellSummary>,
    pub best: Option<Cell>,
}

impl SweepResult {
    pub fn best_cell(&self) -> Option<&CellSummary> {
        let best = self.best?;
        self.cells.iter().find(|c| c.cell == best)
    }
}

/// Highest mean AUROC, then higher mean ACC, then the lexicographically
/// smaller label. Cells with failed seeds are not eligible.
fn compare_cells(a: &CellSummary, b: &CellSummary) -> Ordering {
    let (sa, sb) = (a.summary.as_ref().unwrap(), b.summary.as_ref().unwrap());
    sa.auroc
        .mean
        .total_cmp(&sb.auroc.mean)
        .then(sa.acc.mean.total_cmp(&sb.acc.mean))
        .then_with(|| b.label.cmp(&a.label))
}

pub fn assemble_sweep(dataset: String, cells: Vec<CellSummary>, baseline: Option<CellSummary>) -> SweepResult {
    let best = cells
        .iter()
        .filter(|c| c.is_complete())
        .max_by(|a, b| compare_cells(a, b))
        .map(|c| c.cell);
    SweepResult {
        dataset,
        cells,
        baseline,
        best,
    }
}

struct Context<'a> {
    dataset: &'a Dataset<f64>,
    name: String,
    digest: String,
    widths: &'a HeadWidths,
    train: &'a TrainConfig,
    store: &'a RunStore,
}

impl Context<'_> {
    fn record(&self, cell: Cell, seed: u64, result: crate::training::RunResult) -> RunRecord {
        let model = self.widths.model_config(cell.arch, self.dataset.num_classes);
        RunRecord {
            id: run_id(&self.digest, &cell, seed, &model, self.train),
            dataset: self.name.clone(),
            dataset_digest: self.digest.clone(),
            level: self.dataset.level,
            cell,
            model,
            train: TrainConfig {
                seeds: vec![seed],
                ..self.train.clone()
            },
            result,
        }
    }

    fn run_cell(&self, cell: Cell) -> CellSummary {
        let model = self.widths.model_config(cell.arch, self.dataset.num_classes);
        let ids: Vec<(u64, String)> = self
            .train
            .seeds
            .iter()
            .map(|&s| (s, run_id(&self.digest, &cell, s, &model, self.train)))
            .collect();
        let mut results = Vec::new();
        let mut failures = Vec::new();
        let mut splits: Option<Result<Splits<f64>>> = None;

        for (seed, id) in &ids {
            match self.store.load(id) {
                Ok(Some(rec)) => {
                    log::info!("{} seed {seed}: reusing {id}", cell.label());
                    results.push(rec.result);
                    continue;
                }
                Ok(None) => {}
                Err(e) => log::warn!("{} seed {seed}: unreadable record {id} ({e}), retraining", cell.label()),
            }
            let built = splits.get_or_insert_with(|| {
                cell.validate()?;
                Splits::from_dataset(self.dataset, cell.topology.as_ref())
            });
            let outcome = match built {
                Err(e) => Err(e.to_string()),
                Ok(s) => train(&model, self.train, *seed, s, |_| {})
                    .map_err(|abort| abort.to_string())
                    .and_then(|run| {
                        let rec = self.record(cell, *seed, run.result.clone());
                        self.store.save(&rec, &run.history).map_err(|e| e.to_string())?;
                        Ok(run.result)
                    }),
            };
            match outcome {
                Ok(r) => {
                    log::info!("{} seed {seed}: test auroc {:.4}", cell.label(), r.test_auroc);
                    results.push(r);
                }
                Err(error) => {
                    log::error!("{} seed {seed} failed: {error}", cell.label());
                    let failure = FailureRecord {
                        id: id.clone(),
                        dataset: self.name.clone(),
                        cell,
                        seed: *seed,
                        error: error.clone(),
                    };
                    if let Err(e) = self.store.save_failure(&failure) {
                        log::error!("could not record failure {id}: {e}");
                    }
                    failures.push(CellFailure { seed: *seed, error });
                }
            }
        }
        CellSummary {
            cell,
            label: cell.label(),
            summary: summarize(results).ok(),
            run_ids: ids.into_iter().map(|(_, id)| id).collect(),
            failures,
        }
    }
}

fn load_training_set(config: &ExperimentConfig) -> Result<(Dataset<f64>, String)> {
    config.validate()?;
    let dataset: Dataset<f64> = load_dataset(&config.manifest, config.level)?;
    if dataset.is_empty() {
        return Err(Error::MissingLevel(config.level));
    }
    let digest = dataset_digest(&config.manifest, config.level)?;
    Ok((dataset, digest))
}

/// Runs every grid cell (and the baseline) for every seed. Completed runs
/// found under `out_dir` are reused; failed runs are recorded and skipped.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.sweep.validate()?;
    let (dataset, digest) = load_training_set(config)?;
    let store = RunStore::new(&config.out_dir);
    let ctx = Context {
        dataset: &dataset,
        name: config.dataset_name(),
        digest,
        widths: &config.model,
        train: &config.train,
        store: &store,
    };
    let mut jobs = config.sweep.cells();
    if config.sweep.baseline {
        jobs.push(Cell::baseline());
    }
    log::info!(
        "sweep over {} cells × {} seeds with {} workers",
        jobs.len(),
        config.train.seeds.len(),
        config.workers
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let mut done: Vec<CellSummary> = pool.install(|| jobs.par_iter().map(|&c| ctx.run_cell(c)).collect());
    let baseline = if config.sweep.baseline { done.pop() } else { None };
    let result = assemble_sweep(ctx.name.clone(), done, baseline);
    write_atomic(
        &config.out_dir.join(format!("sweep-{}.json", ctx.name)),
        &serde_json::to_vec_pretty(&result)?,
    )?;
    Ok(result)
}

/// Trains the configured single cell for every seed, persisting run
/// records, histories and the selected checkpoints.
pub fn train_single(config: &ExperimentConfig) -> Result<(CellSummary, Vec<SavedModel>)> {
    let cell = config.single_cell();
    cell.validate()?;
    let (dataset, digest) = load_training_set(config)?;
    let store = RunStore::new(&config.out_dir);
    let ctx = Context {
        dataset: &dataset,
        name: config.dataset_name(),
        digest,
        widths: &config.model,
        train: &config.train,
        store: &store,
    };
    let model = config.model.model_config(cell.arch, dataset.num_classes);
    let splits = Splits::from_dataset(&dataset, cell.topology.as_ref())?;
    let mut results = Vec::new();
    let mut saved = Vec::new();
    let mut ids = Vec::new();
    for &seed in &config.train.seeds {
        let run = match train(&model, &config.train, seed, &splits, |e| {
            log::info!("seed {seed} epoch {}: loss {:.5} val auroc {:.4}", e.epoch, e.train_loss, e.val_auroc)
        }) {
            Ok(run) => run,
            Err(abort) => {
                if let Some(cp) = abort.last_good.clone() {
                    let id = run_id(&ctx.digest, &cell, seed, &model, &config.train);
                    let path = checkpoint_path(&config.out_dir, &format!("{id}.last_good"));
                    SavedModel { topology: cell.topology, checkpoint: cp }.save(&path)?;
                    log::error!("last good checkpoint written to {}", path.display());
                }
                return Err(abort.error);
            }
        };
        let rec = ctx.record(cell, seed, run.result.clone());
        store.save(&rec, &run.history)?;
        let model = SavedModel {
            topology: cell.topology,
            checkpoint: run.model.checkpoint(),
        };
        model.save(&checkpoint_path(&config.out_dir, &rec.id))?;
        ids.push(rec.id);
        results.push(run.result);
        saved.push(model);
    }
    let summary = CellSummary {
        cell,
        label: cell.label(),
        summary: Some(summarize(results)?),
        run_ids: ids,
        failures: Vec::new(),
    };
    write_atomic(&config.out_dir.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    Ok((summary, saved))
}

pub fn checkpoint_path(out_dir: &Path, id: &str) -> std::path::PathBuf {
    out_dir.join("checkpoints").join(format!("{id}.json"))
}

/// Rebuilds sweep results from the run and failure records under `out_dir`,
/// so every reported number comes from a persisted run.
pub fn collect_sweeps(out_dir: &Path) -> Result<Vec<SweepResult>> {
    let store = RunStore::new(out_dir);
    type Group = (Vec<RunRecord>, Vec<FailureRecord>);
    let mut groups: BTreeMap<(String, Cell), Group> = BTreeMap::new();
    for r in store.records()? {
        groups.entry((r.dataset.clone(), r.cell)).or_default().0.push(r);
    }
    for f in store.failures()? {
        groups.entry((f.dataset.clone(), f.cell)).or_default().1.push(f);
    }
    let mut per_dataset: BTreeMap<String, (Vec<CellSummary>, Option<CellSummary>)> = BTreeMap::new();
    for ((dataset, cell), (mut runs, fails)) in groups {
        runs.sort_by_key(|r| r.result.seed);
        if let Some(first) = runs.first() {
            let key = hyper_key(first);
            if let Some(other) = runs.iter().find(|r| hyper_key(r) != key) {
                return Err(Error::Data(format!(
                    "{dataset} / {cell}: runs {} and {} use different settings; keep one configuration per output directory",
                    first.id, other.id
                )));
            }
        }
        let summary = CellSummary {
            cell,
            label: cell.label(),
            run_ids: runs.iter().map(|r| r.id.clone()).collect(),
            summary: summarize(runs.into_iter().map(|r| r.result).collect()).ok(),
            failures: fails
                .into_iter()
                .map(|f| CellFailure {
                    seed: f.seed,
                    error: f.error,
                })
                .collect(),
        };
        let slot = per_dataset.entry(dataset).or_default();
        if cell.arch.is_graph() {
            slot.0.push(summary);
        } else {
            slot.1 = Some(summary);
        }
    }
    Ok(per_dataset
        .into_iter()
        .map(|(name, (cells, baseline))| assemble_sweep(name, cells, baseline))
        .collect())
}

fn hyper_key(r: &RunRecord) -> (String, String) {
    let train = TrainConfig {
        seeds: Vec::new(),
        ..r.train.clone()
    };
    (
        r.dataset_digest.clone(),
        serde_json::to_string(&(&r.model, train)).unwrap_or_default(),
    )
}
