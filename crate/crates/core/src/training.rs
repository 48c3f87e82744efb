//! Mini-batch SGD with per-epoch validation-AUROC model selection.

use std::collections::HashSet;
use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_io::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::graph::{EdgeSet, SubjectGraph, TopologySpec};
use crate::metrics::{accuracy, macro_auroc, EvalBatch};
use crate::models::{Checkpoint, Model, ModelConfig};
use crate::numerics::{cross_entropy, sgd_step, softmax_rows, LrSchedule, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub weight_decay: f64,
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            epochs: 300,
            initial_lr: 1e-3,
            lr_decay: 0.995,
            weight_decay: 0.1,
            seeds: vec![0, 1, 2],
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> Result<LrSchedule> {
        LrSchedule::new(self.initial_lr, self.lr_decay)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight decay {} invalid", self.weight_decay)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        self.schedule().map(|_| ())
    }
}

/// Train/validation/test graphs of one dataset.
#[derive(Clone, Debug)]
pub struct Splits<T = f64> {
    pub train: Vec<SubjectGraph<T>>,
    pub val: Vec<SubjectGraph<T>>,
    pub test: Vec<SubjectGraph<T>>,
    pub num_classes: usize,
}

/// Attaches edges to each record; `None` yields edgeless graphs for the MLP.
pub fn attach_topology<T: Scalar>(
    records: &[SubjectRecord<T>],
    topology: Option<&TopologySpec>,
) -> Result<Vec<SubjectGraph<T>>> {
    records
        .iter()
        .map(|r| {
            let edges = match topology {
                Some(t) => t.build(&r.features)?,
                None => EdgeSet::empty(r.features.rows()),
            };
            Ok(SubjectGraph {
                subject_id: r.subject_id.clone(),
                features: r.features.clone(),
                edges,
                label: r.label,
            })
        })
        .collect()
}

impl<T: Scalar> Splits<T> {
    pub fn from_dataset(dataset: &Dataset<T>, topology: Option<&TopologySpec>) -> Result<Self> {
        if let Some(t) = topology {
            t.validate()?;
        }
        Ok(Self {
            train: attach_topology(&dataset.train, topology)?,
            val: attach_topology(&dataset.val, topology)?,
            test: attach_topology(&dataset.test, topology)?,
            num_classes: dataset.num_classes,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() || self.val.is_empty() || self.test.is_empty() {
            return Err(Error::Data(format!(
                "empty split (train {}, val {}, test {})",
                self.train.len(),
                self.val.len(),
                self.test.len()
            )));
        }
        let mut owner: std::collections::HashMap<&str, &str> = Default::default();
        for (name, split) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            let mut local = HashSet::new();
            for g in split {
                if g.label >= self.num_classes {
                    return Err(Error::Data(format!(
                        "subject {} has label {} with {} classes",
                        g.subject_id, g.label, self.num_classes
                    )));
                }
                if !local.insert(g.subject_id.as_str()) {
                    continue;
                }
                if let Some(prev) = owner.insert(&g.subject_id, name) {
                    return Err(Error::Data(format!(
                        "subject {} is in both {prev} and {name}",
                        g.subject_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Shuffled partition of `0..len` into batches of at most `batch_size`,
/// keyed by `(run_seed, epoch)`. The last batch may be short.
pub fn batch_iter(len: usize, batch_size: usize, run_seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(epoch as u64 + 1);
    order.shuffle(&mut rng);
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_auroc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub val_auroc_at_best: f64,
    pub test_auroc: f64,
    pub test_acc: f64,
    pub wall_clock_minutes: f64,
}

/// A finished run: metrics, epoch history, and the selected parameters.
#[derive(Clone, Debug)]
pub struct TrainedRun<T = f64> {
    pub result: RunResult,
    pub history: Vec<EpochRecord>,
    pub model: Model<T>,
}

/// A run that stopped early, with the best parameters seen before the failure.
#[derive(Debug)]
pub struct TrainAbort<T = f64> {
    pub error: Error,
    pub last_good: Option<Checkpoint<T>>,
    pub history: Vec<EpochRecord>,
}

impl<T> fmt::Display for TrainAbort<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "training aborted: {}", self.error)?;
        match self.history.last() {
            Some(e) => write!(f, " (after epoch {}, last train loss {})", e.epoch, e.train_loss),
            None => write!(f, " (before the first epoch completed)"),
        }
    }
}

impl<T: fmt::Debug> std::error::Error for TrainAbort<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl<T> From<Error> for TrainAbort<T> {
    fn from(error: Error) -> Self {
        Self {
            error,
            last_good: None,
            history: Vec::new(),
        }
    }
}

/// AUROC and accuracy on one split.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub auroc: f64,
    pub accuracy: f64,
}

pub fn predict_probs<T: Scalar>(model: &Model<T>, graphs: &[SubjectGraph<T>]) -> Result<EvalBatch<T>> {
    let c = model.config().num_classes;
    let mut logits = Matrix::zeros(graphs.len(), c);
    for (i, g) in graphs.iter().enumerate() {
        logits.row_mut(i).copy_from_slice(&model.forward(g)?.logits);
    }
    EvalBatch::new(softmax_rows(&logits), graphs.iter().map(|g| g.label).collect())
}

pub fn evaluate<T: Scalar>(model: &Model<T>, graphs: &[SubjectGraph<T>]) -> Result<Evaluation> {
    let batch = predict_probs(model, graphs)?;
    Ok(Evaluation {
        auroc: macro_auroc(&batch)?,
        accuracy: accuracy(&batch)?,
    })
}

/// One forward/backward/update over a batch; returns the mean batch loss.
fn train_batch<T: Scalar>(
    model: &mut Model<T>,
    graphs: &[&SubjectGraph<T>],
    lr: T,
    weight_decay: T,
) -> Result<T> {
    // Each graph is differentiated right after its forward pass so its
    // features are still cache-resident; the sum of per-graph gradients
    // scaled by 1/b equals the gradient of the batch-mean loss.
    let inv_b = T::one() / T::from_usize(graphs.len()).unwrap();
    let mut total = T::zero();
    for g in graphs {
        let (out, trace) = model.forward_train(g)?;
        let logits = Matrix::row_vector(&out.logits);
        let mut loss = cross_entropy(&logits, &[g.label])?;
        if !loss.value.is_finite() {
            return Err(Error::NonFinite(format!("loss {} for {}", loss.value, g.subject_id)));
        }
        total += loss.value;
        loss.grad.scale(inv_b);
        model.backward(g, &trace, loss.grad.row(0))?;
    }
    sgd_step(model.params_mut(), lr, weight_decay)?;
    Ok(total * inv_b)
}

/// Trains one seed. `on_epoch` observes each finished epoch record.
#[allow(clippy::result_large_err)]
pub fn train<T: Scalar>(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
    splits: &Splits<T>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainedRun<T>, TrainAbort<T>> {
    let started = Instant::now();
    train_cfg.validate()?;
    splits.validate()?;
    if model_cfg.num_classes != splits.num_classes {
        return Err(Error::Config(format!(
            "model has {} classes, dataset {}",
            model_cfg.num_classes, splits.num_classes
        ))
        .into());
    }
    let schedule = train_cfg.schedule()?;
    let weight_decay = T::lit(train_cfg.weight_decay);
    let mut model = Model::<T>::new(model_cfg.clone(), seed)?;

    let mut history: Vec<EpochRecord> = Vec::with_capacity(train_cfg.epochs);
    let mut best: Option<(usize, f64, Model<T>)> = None;

    for epoch in 0..train_cfg.epochs {
        let lr = schedule.lr_at_epoch(epoch);
        let mut loss_sum = 0.0;
        for (bi, batch) in batch_iter(splits.train.len(), train_cfg.batch_size, seed, epoch)
            .into_iter()
            .enumerate()
        {
            let graphs: Vec<&SubjectGraph<T>> = batch.iter().map(|&i| &splits.train[i]).collect();
            match train_batch(&mut model, &graphs, T::lit(lr), weight_decay) {
                Ok(loss) => loss_sum += loss.to_f64().unwrap() * graphs.len() as f64,
                Err(e) => {
                    let error = match e {
                        Error::NonFinite(msg) => {
                            Error::NonFinite(format!("{msg} at epoch {epoch}, batch {bi}"))
                        }
                        other => other,
                    };
                    return Err(TrainAbort {
                        error,
                        last_good: best.map(|(_, _, m)| m.checkpoint()),
                        history,
                    });
                }
            }
        }
        let val_auroc = match evaluate(&model, &splits.val) {
            Ok(e) => e.auroc,
            Err(error) => {
                return Err(TrainAbort {
                    error,
                    last_good: best.map(|(_, _, m)| m.checkpoint()),
                    history,
                })
            }
        };
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / splits.train.len() as f64,
            val_auroc,
        };
        log::debug!(
            "seed {seed} epoch {epoch}: lr {lr:.3e} loss {:.5} val auroc {val_auroc:.4}",
            record.train_loss
        );
        on_epoch(&record);
        history.push(record);
        if best.as_ref().is_none_or(|(_, v, _)| val_auroc > *v) {
            best = Some((epoch, val_auroc, model.clone()));
        }
    }

    let (best_epoch, val_auroc_at_best, model) = best.expect("at least one epoch");
    let test = evaluate(&model, &splits.test)?;
    Ok(TrainedRun {
        result: RunResult {
            seed,
            best_epoch,
            val_auroc_at_best,
            test_auroc: test.auroc,
            test_acc: test.accuracy,
            wall_clock_minutes: started.elapsed().as_secs_f64() / 60.0,
        },
        history,
        model,
    })
}

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Sample (n - 1) standard deviation; a single value has std 0.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd { mean: f64::NAN, std: f64::NAN };
    }
    // Welford's update keeps identical inputs at exactly zero spread.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let std = if n > 1 { (m2 / (n - 1) as f64).sqrt() } else { 0.0 };
    MeanStd { mean, std }
}

/// Aggregate over seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub auroc: MeanStd,
    pub acc: MeanStd,
    pub runtime_minutes: f64,
    /// Set when only one seed contributed, so `std` carries no information.
    pub single_run: bool,
    pub runs: Vec<RunResult>,
}

pub fn summarize(runs: Vec<RunResult>) -> Result<RunSummary> {
    if runs.is_empty() {
        return Err(Error::Config("no runs to summarize".into()));
    }
    let auroc: Vec<f64> = runs.iter().map(|r| r.test_auroc).collect();
    let acc: Vec<f64> = runs.iter().map(|r| r.test_acc).collect();
    let runtime = runs.iter().map(|r| r.wall_clock_minutes).sum::<f64>() / runs.len() as f64;
    Ok(RunSummary {
        auroc: mean_std(&auroc),
        acc: mean_std(&acc),
        runtime_minutes: runtime,
        single_run: runs.len() == 1,
        runs,
    })
}

/// Trains once per configured seed and aggregates test metrics.
#[allow(clippy::result_large_err)]
pub fn repeat_runs<T: Scalar>(
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    splits: &Splits<T>,
) -> Result<RunSummary, TrainAbort<T>> {
    train_cfg.validate()?;
    let mut runs = Vec::with_capacity(train_cfg.seeds.len());
    for &seed in &train_cfg.seeds {
        runs.push(train(model_cfg, train_cfg, seed, splits, |_| {})?.result);
    }
    Ok(summarize(runs)?)
}
