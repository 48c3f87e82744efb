//! Classification heads mapping a subject graph to class logits.
//!
//! Every head is two layers deep with a ReLU in between. The graph heads
//! (SAGE, GAT) convolve twice and mean-pool node logits; the conditional MLP
//! scores each slice independently and averages the slice logits.

mod gat;
mod init;
mod mlp;
mod sage;

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use gat::{gat_layer_forward, GatCache, GatLayer};
pub use mlp::{slice_positions, CondMlp, MlpCache};
pub use sage::{mean_aggregate, mean_aggregate_adjoint, sage_layer_forward, SageCache, SageLayer};

use crate::error::{Error, Result};
use crate::graph::{SubjectGraph, FEATURE_DIM};
use crate::numerics::{rectify, rectify_backward, Mask, Matrix, ParamTensor};
use crate::scalar::Scalar;

/// Head architecture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    Sage,
    Gat,
    CondMlp,
}

impl Arch {
    pub fn is_graph(self) -> bool {
        !matches!(self, Arch::CondMlp)
    }

    /// Name in the style of the reported configuration column.
    pub fn label(self) -> &'static str {
        match self {
            Arch::Sage => "SAGEConv",
            Arch::Gat => "GATConv",
            Arch::CondMlp => "MLP",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Sage => "sage",
            Arch::Gat => "gat",
            Arch::CondMlp => "cond_mlp",
        })
    }
}

/// Lower and upper bounds of the trainable-parameter budget.
pub const PARAM_BUDGET: (usize, usize) = (250_000, 350_000);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    /// Node feature width, not counting the conditional MLP's position column.
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    #[serde(default = "default_slope")]
    pub gat_negative_slope: f64,
    #[serde(default = "default_heads")]
    pub gat_heads: usize,
}

fn default_slope() -> f64 {
    0.2
}

fn default_heads() -> usize {
    1
}

impl ModelConfig {
    /// Default widths: each head lands near 295k parameters for two classes.
    pub fn default_for(arch: Arch, num_classes: usize) -> Self {
        let hidden_dim = match arch {
            Arch::Sage => 128,
            Arch::Gat | Arch::CondMlp => 256,
        };
        Self {
            arch,
            in_dim: FEATURE_DIM,
            hidden_dim,
            num_classes,
            gat_negative_slope: default_slope(),
            gat_heads: default_heads(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config(format!(
                "{} classes; at least 2 required",
                self.num_classes
            )));
        }
        if self.gat_heads != 1 {
            return Err(Error::Config(format!(
                "{} attention heads requested; only single-head attention is supported",
                self.gat_heads
            )));
        }
        if !(self.gat_negative_slope >= 0.0 && self.gat_negative_slope.is_finite()) {
            return Err(Error::Config("negative slope must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Errors unless [`count_parameters`] lies inside [`PARAM_BUDGET`].
    pub fn check_budget(&self) -> Result<()> {
        let n = count_parameters(self);
        if (PARAM_BUDGET.0..=PARAM_BUDGET.1).contains(&n) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{} head has {n} trainable parameters, outside {}..={}",
                self.arch, PARAM_BUDGET.0, PARAM_BUDGET.1
            )))
        }
    }
}

/// Exact number of trainable scalars of the configured head.
pub fn count_parameters(config: &ModelConfig) -> usize {
    let (d, h, c) = (config.in_dim, config.hidden_dim, config.num_classes);
    match config.arch {
        Arch::Sage => SageLayer::<f64>::num_parameters(d, h) + SageLayer::<f64>::num_parameters(h, c),
        Arch::Gat => GatLayer::<f64>::num_parameters(d, h) + GatLayer::<f64>::num_parameters(h, c),
        Arch::CondMlp => CondMlp::<f64>::num_parameters(d, h, c),
    }
}

/// Column-wise mean over nodes. Each column is summed in ascending value
/// order, which makes the result independent of row order bit-for-bit.
pub fn global_mean_pool<T: Scalar>(h: &Matrix<T>) -> Result<Vec<T>> {
    let n = h.rows();
    if n == 0 {
        return Err(Error::Data("mean pooling over an empty node set".into()));
    }
    let inv = T::one() / T::from_usize(n).unwrap();
    let mut column = Vec::with_capacity(n);
    Ok((0..h.cols())
        .map(|j| {
            column.clear();
            column.extend((0..n).map(|i| h[(i, j)]));
            column.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            column.iter().fold(T::zero(), |s, &v| s + v) * inv
        })
        .collect())
}

/// Gradient of [`global_mean_pool`] for `n` rows.
pub fn global_mean_pool_backward<T: Scalar>(n: usize, dpooled: &[T]) -> Matrix<T> {
    let inv = T::one() / T::from_usize(n.max(1)).unwrap();
    let mut out = Matrix::zeros(n, dpooled.len());
    for i in 0..n {
        for (o, &g) in out.row_mut(i).iter_mut().zip(dpooled) {
            *o = g * inv;
        }
    }
    out
}

/// Graph-level representation and the logits read from it.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphLevelOutput<T> {
    pub logits: Vec<T>,
    /// Pooled representation; pooling happens after the last layer, so this
    /// coincides with the logits.
    pub pooled: Vec<T>,
}

impl<T: Scalar> GraphLevelOutput<T> {
    fn from_logits(logits: Vec<T>) -> Self {
        Self {
            pooled: logits.clone(),
            logits,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SageHead<T> {
    pub layer1: SageLayer<T>,
    pub layer2: SageLayer<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GatHead<T> {
    pub layer1: GatLayer<T>,
    pub layer2: GatLayer<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Head<T> {
    Sage(SageHead<T>),
    Gat(GatHead<T>),
    CondMlp(CondMlp<T>),
}

/// Intermediate activations kept for the backward pass.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Trace<T> {
    Sage {
        nbrs: Vec<Vec<usize>>,
        c1: SageCache<T>,
        z1: Matrix<T>,
        a1: Matrix<T>,
        c2: SageCache<T>,
    },
    Gat {
        mask: Mask,
        c1: GatCache<T>,
        z1: Matrix<T>,
        a1: Matrix<T>,
        c2: GatCache<T>,
    },
    CondMlp(MlpCache<T>),
}

/// A configured head with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T = f64> {
    config: ModelConfig,
    head: Head<T>,
}

/// Serializable parameter snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T = f64> {
    pub config: ModelConfig,
    pub params: Vec<Matrix<T>>,
}

impl<T: Scalar> Model<T> {
    /// Initializes parameters from a seeded stream.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        Self::with_rng(config, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(config: ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let (d, h, c) = (config.in_dim, config.hidden_dim, config.num_classes);
        let head = match config.arch {
            Arch::Sage => Head::Sage(SageHead {
                layer1: SageLayer::new(d, h, rng),
                layer2: SageLayer::new(h, c, rng),
            }),
            Arch::Gat => Head::Gat(GatHead {
                layer1: GatLayer::new(d, h, rng),
                layer2: GatLayer::new(h, c, rng),
            }),
            Arch::CondMlp => Head::CondMlp(CondMlp::new(d, h, c, rng)),
        };
        Ok(Self { config, head })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn head(&self) -> &Head<T> {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Head<T> {
        &mut self.head
    }

    pub fn params(&self) -> Vec<&ParamTensor<T>> {
        match &self.head {
            Head::Sage(s) => s.layer1.params().into_iter().chain(s.layer2.params()).collect(),
            Head::Gat(g) => g.layer1.params().into_iter().chain(g.layer2.params()).collect(),
            Head::CondMlp(m) => m.params().into_iter().collect(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor<T>> {
        match &mut self.head {
            Head::Sage(s) => s
                .layer1
                .params_mut()
                .into_iter()
                .chain(s.layer2.params_mut())
                .collect(),
            Head::Gat(g) => g
                .layer1
                .params_mut()
                .into_iter()
                .chain(g.layer2.params_mut())
                .collect(),
            Head::CondMlp(m) => m.params_mut().into_iter().collect(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(ParamTensor::zero_grad);
    }

    fn check_input(&self, graph: &SubjectGraph<T>) -> Result<()> {
        let (n, d) = graph.features.shape();
        if d != self.config.in_dim {
            return Err(crate::error::shape_err(
                "model forward",
                format!("feature width {d}, model expects {}", self.config.in_dim),
            ));
        }
        if self.config.arch.is_graph() && graph.edges.num_nodes() != n {
            return Err(Error::Graph(format!(
                "edge set over {} nodes for {n} feature rows",
                graph.edges.num_nodes()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, graph: &SubjectGraph<T>) -> Result<GraphLevelOutput<T>> {
        Ok(self.forward_train(graph)?.0)
    }

    /// Forward pass that also returns what [`Model::backward`] needs.
    pub fn forward_train(&self, graph: &SubjectGraph<T>) -> Result<(GraphLevelOutput<T>, Trace<T>)> {
        self.check_input(graph)?;
        let x = &graph.features;
        match &self.head {
            Head::Sage(s) => {
                let nbrs = graph.edges.neighborhoods();
                let (z1, c1) = s.layer1.forward(&nbrs, x)?;
                let a1 = rectify(&z1, T::zero());
                let (z2, c2) = s.layer2.forward(&nbrs, &a1)?;
                let logits = global_mean_pool(&z2)?;
                Ok((
                    GraphLevelOutput::from_logits(logits),
                    Trace::Sage { nbrs, c1, z1, a1, c2 },
                ))
            }
            Head::Gat(g) => {
                let slope = T::lit(self.config.gat_negative_slope);
                let mask = graph.edges.closed_mask();
                let (z1, c1) = g.layer1.forward(&mask, x, slope)?;
                let a1 = rectify(&z1, T::zero());
                let (z2, c2) = g.layer2.forward(&mask, &a1, slope)?;
                let logits = global_mean_pool(&z2)?;
                Ok((
                    GraphLevelOutput::from_logits(logits),
                    Trace::Gat { mask, c1, z1, a1, c2 },
                ))
            }
            Head::CondMlp(m) => {
                let (logits, cache) = m.forward(x)?;
                Ok((GraphLevelOutput::from_logits(logits), Trace::CondMlp(cache)))
            }
        }
    }

    /// Accumulates parameter gradients for `dL/dlogits`.
    pub fn backward(&mut self, graph: &SubjectGraph<T>, trace: &Trace<T>, dlogits: &[T]) -> Result<()> {
        if dlogits.len() != self.config.num_classes {
            return Err(crate::error::shape_err(
                "model backward",
                format!("{} logit gradients for {} classes", dlogits.len(), self.config.num_classes),
            ));
        }
        let x = &graph.features;
        let slope = T::lit(self.config.gat_negative_slope);
        match (&mut self.head, trace) {
            (Head::Sage(s), Trace::Sage { nbrs, c1, z1, a1, c2 }) => {
                let dz2 = global_mean_pool_backward(a1.rows(), dlogits);
                let da1 = s.layer2.backward(nbrs, a1, c2, &dz2, true)?.expect("requested");
                let dz1 = rectify_backward(z1, &da1, T::zero())?;
                s.layer1.backward(nbrs, x, c1, &dz1, false)?;
            }
            (Head::Gat(g), Trace::Gat { mask, c1, z1, a1, c2 }) => {
                let dz2 = global_mean_pool_backward(a1.rows(), dlogits);
                let da1 = g.layer2.backward(mask, a1, c2, &dz2, slope, true)?.expect("requested");
                let dz1 = rectify_backward(z1, &da1, T::zero())?;
                g.layer1.backward(mask, x, c1, &dz1, slope, false)?;
            }
            (Head::CondMlp(m), Trace::CondMlp(cache)) => m.backward(cache, dlogits)?,
            _ => return Err(Error::Config("trace does not belong to this head".into())),
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint<T> {
        Checkpoint {
            config: self.config.clone(),
            params: self.params().iter().map(|p| p.value.clone()).collect(),
        }
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint<T>) -> Result<Self> {
        let mut model = Self::new(checkpoint.config.clone(), 0)?;
        let slots = model.params_mut();
        if slots.len() != checkpoint.params.len() {
            return Err(Error::Data(format!(
                "checkpoint holds {} tensors, head expects {}",
                checkpoint.params.len(),
                slots.len()
            )));
        }
        for (i, (slot, value)) in slots.into_iter().zip(&checkpoint.params).enumerate() {
            if slot.value.shape() != value.shape() {
                return Err(Error::Data(format!(
                    "checkpoint tensor {i} has shape {:?}, expected {:?}",
                    value.shape(),
                    slot.value.shape()
                )));
            }
            *slot = ParamTensor::new(value.clone());
        }
        Ok(model)
    }
}

/// Forward pass of a SAGE or GAT head.
pub fn gnn_head_forward<T: Scalar>(graph: &SubjectGraph<T>, model: &Model<T>) -> Result<GraphLevelOutput<T>> {
    if !model.config().arch.is_graph() {
        return Err(Error::Config(format!("{} is not a graph head", model.config().arch)));
    }
    model.forward(graph)
}

/// Forward pass of the conditional MLP on one feature stack.
pub fn cond_mlp_forward<T: Scalar>(features: &Matrix<T>, model: &Model<T>) -> Result<GraphLevelOutput<T>> {
    match model.head() {
        Head::CondMlp(m) => Ok(GraphLevelOutput::from_logits(m.forward(features)?.0)),
        _ => Err(Error::Config(format!("{} is not the conditional MLP", model.config().arch))),
    }
}
