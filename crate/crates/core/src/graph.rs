//! Subject-level graph construction from slice ordering or node-feature similarity.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Mask, Matrix};
use crate::scalar::Scalar;

/// Slices per volume and node count of every subject graph.
pub const NUM_SLICES: usize = 64;
/// Width of one concatenated tri-view slice embedding.
pub const FEATURE_DIM: usize = 1152;

/// Topologies derived from slice ordering alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceTopology {
    FullyConnected,
    Star,
    Line,
    /// Star plus consecutive-slice edges.
    Custom,
}

impl SliceTopology {
    pub const ALL: [SliceTopology; 4] = [
        SliceTopology::FullyConnected,
        SliceTopology::Star,
        SliceTopology::Line,
        SliceTopology::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SliceTopology::FullyConnected => "fully_connected",
            SliceTopology::Star => "star",
            SliceTopology::Line => "line",
            SliceTopology::Custom => "custom",
        }
    }
}

/// Node-feature dissimilarity; smaller always means nearer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Manhattan.
    #[serde(alias = "manhattan")]
    L1,
    /// Euclidean.
    #[serde(alias = "euclidean")]
    L2,
    /// Chebyshev.
    #[serde(alias = "chebyshev")]
    Linf,
    /// `1 - cos(u, v)`.
    Cosine,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::L1, Metric::L2, Metric::Linf, Metric::Cosine];

    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "manhattan",
            Metric::L2 => "euclidean",
            Metric::Linf => "chebyshev",
            Metric::Cosine => "cosine",
        }
    }
}

/// Which construction strategy produces a subject's edge set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TopologySpec {
    SliceBased { kind: SliceTopology },
    EncodingBased { metric: Metric, k: usize },
}

impl TopologySpec {
    pub fn slice(kind: SliceTopology) -> Self {
        TopologySpec::SliceBased { kind }
    }

    pub fn knn(metric: Metric, k: usize) -> Self {
        TopologySpec::EncodingBased { metric, k }
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            TopologySpec::SliceBased { .. } => None,
            TopologySpec::EncodingBased { k, .. } => Some(*k),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TopologySpec::SliceBased { kind } => kind.name(),
            TopologySpec::EncodingBased { metric, .. } => metric.name(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TopologySpec::SliceBased { .. } => Ok(()),
            TopologySpec::EncodingBased { k, .. } if (1..NUM_SLICES).contains(&k) => Ok(()),
            TopologySpec::EncodingBased { k, .. } => Err(Error::Config(format!(
                "k = {k} outside 1..={}",
                NUM_SLICES - 1
            ))),
        }
    }

    /// Builds the edge set for one subject's node features.
    pub fn build<T: Scalar>(&self, features: &Matrix<T>) -> Result<EdgeSet> {
        match *self {
            TopologySpec::SliceBased { kind } => build_slice_topology(kind, features.rows()),
            TopologySpec::EncodingBased { metric, k } => build_knn_topology(features, metric, k),
        }
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.k() {
            Some(k) => write!(f, "{} k={k}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

/// Undirected edges stored once as `(low, high)` pairs, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSet {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl EdgeSet {
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            edges: Vec::new(),
        }
    }

    /// Canonicalizes and deduplicates `pairs`, rejecting self-loops and
    /// out-of-range endpoints.
    pub fn from_pairs(num_nodes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in pairs {
            if u == v {
                return Err(Error::Graph(format!("self-loop on node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        Ok(Self {
            num_nodes,
            edges: set.into_iter().collect(),
        })
    }

    /// Stores `pairs` verbatim. Only for ingesting externally produced edge
    /// lists; run [`validate_graph`] on the result.
    pub fn from_raw_pairs(num_nodes: usize, pairs: Vec<(usize, usize)>) -> Self {
        Self {
            num_nodes,
            edges: pairs,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }

    /// Sorted neighbor list for every node.
    pub fn neighborhoods(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_nodes];
        for &(u, v) in &self.edges {
            out[u].push(v);
            out[v].push(u);
        }
        for n in &mut out {
            n.sort_unstable();
        }
        out
    }

    /// Symmetric 0/1 adjacency matrix.
    pub fn adjacency<T: Scalar>(&self) -> Matrix<T> {
        let mut a = Matrix::zeros(self.num_nodes, self.num_nodes);
        for &(u, v) in &self.edges {
            a[(u, v)] = T::one();
            a[(v, u)] = T::one();
        }
        a
    }

    /// Adjacency mask with every self-loop switched on.
    pub fn closed_mask(&self) -> Mask {
        let mut m = Mask::new(self.num_nodes);
        for i in 0..self.num_nodes {
            m.set(i, i, true);
        }
        for &(u, v) in &self.edges {
            m.set(u, v, true);
            m.set(v, u, true);
        }
        m
    }

    /// Renames node `i` to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::Graph(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.num_nodes
            )));
        }
        Self::from_pairs(self.num_nodes, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }
}

/// A subject's node features, edges and class label.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectGraph<T = f64> {
    pub subject_id: String,
    pub features: Matrix<T>,
    pub edges: EdgeSet,
    pub label: usize,
}

impl<T: Scalar> SubjectGraph<T> {
    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}

pub fn build_slice_topology(kind: SliceTopology, n: usize) -> Result<EdgeSet> {
    if n < 3 {
        return Err(Error::Config(format!("slice topology needs at least 3 nodes, got {n}")));
    }
    let center = (n - 1) / 2;
    let line = || (0..n - 1).map(|i| (i, i + 1));
    let star = move || (0..n).filter(move |&j| j != center).map(move |j| (center, j));
    match kind {
        SliceTopology::FullyConnected => {
            EdgeSet::from_pairs(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
        }
        SliceTopology::Line => EdgeSet::from_pairs(n, line()),
        SliceTopology::Star => EdgeSet::from_pairs(n, star()),
        SliceTopology::Custom => EdgeSet::from_pairs(n, star().chain(line())),
    }
}

pub fn pairwise_distance<T: Scalar>(metric: Metric, u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::Data(format!(
            "distance between vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    let pairs = u.iter().zip(v);
    Ok(match metric {
        Metric::L1 => pairs.map(|(&a, &b)| (a - b).abs()).sum(),
        Metric::L2 => pairs.map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt(),
        Metric::Linf => pairs.fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())),
        Metric::Cosine => {
            let dot: T = pairs.map(|(&a, &b)| a * b).sum();
            let uu: T = u.iter().map(|&a| a * a).sum();
            let vv: T = v.iter().map(|&a| a * a).sum();
            if uu == T::zero() || vv == T::zero() {
                return Err(Error::Data("cosine distance of a zero vector".into()));
            }
            T::one() - dot / (uu * vv).sqrt()
        }
    })
}

/// Strictly increasing in [`pairwise_distance`] but computed with fewer
/// roundings: squared L2, and `-dot·|dot| / (uu·vv)` for cosine. Ratios that
/// are equal in exact arithmetic therefore compare equal, so exact ties
/// reach the index tie-break.
fn ranking_key<T: Scalar>(metric: Metric, u: &[T], v: &[T]) -> Result<T> {
    match metric {
        Metric::L1 | Metric::Linf => pairwise_distance(metric, u, v),
        Metric::L2 => Ok(u.iter().zip(v).map(|(&a, &b)| (a - b) * (a - b)).sum()),
        Metric::Cosine => {
            let dot: T = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
            let uu: T = u.iter().map(|&a| a * a).sum();
            let vv: T = v.iter().map(|&a| a * a).sum();
            if uu == T::zero() || vv == T::zero() {
                return Err(Error::Data("cosine distance of a zero vector".into()));
            }
            Ok(-(dot * dot.abs()) / (uu * vv))
        }
    }
}

/// Union-symmetrized k-nearest-neighbor graph. Each node selects its `k`
/// nearest other nodes, equal distances resolved toward the lower index.
pub fn build_knn_topology<T: Scalar>(features: &Matrix<T>, metric: Metric, k: usize) -> Result<EdgeSet> {
    let n = features.rows();
    if k == 0 || k >= n {
        return Err(Error::Config(format!("k = {k} invalid for {n} nodes")));
    }
    if !features.all_finite() {
        return Err(Error::Data("non-finite feature in kNN input".into()));
    }
    let mut dist = Matrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = ranking_key(metric, features.row(i), features.row(j))?;
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    let mut picks = Vec::with_capacity(n * k);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        let row = dist.row(i);
        order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).expect("finite keys").then(a.cmp(&b)));
        picks.extend(order[..k].iter().map(|&j| (i, j)));
    }
    EdgeSet::from_pairs(n, picks)
}

/// A structural problem found at an ingestion boundary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NodeCount { expected: usize, found: usize },
    FeatureWidth { expected: usize, found: usize },
    NonFiniteFeature { row: usize, col: usize },
    EdgeOutOfRange { u: usize, v: usize },
    SelfLoop { node: usize },
    EdgeNodeCount { features: usize, edges: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NodeCount { expected, found } => {
                write!(f, "node count: expected {expected}, found {found}")
            }
            Violation::FeatureWidth { expected, found } => {
                write!(f, "feature width: expected {expected}, found {found}")
            }
            Violation::NonFiniteFeature { row, col } => {
                write!(f, "non-finite feature at ({row}, {col})")
            }
            Violation::EdgeOutOfRange { u, v } => write!(f, "edge ({u}, {v}) out of range"),
            Violation::SelfLoop { node } => write!(f, "self-loop on node {node}"),
            Violation::EdgeNodeCount { features, edges } => {
                write!(f, "edge set covers {edges} nodes but features have {features} rows")
            }
        }
    }
}

/// Checks a graph against the standard 64 x 1152 layout.
pub fn validate_graph<T: Scalar>(graph: &SubjectGraph<T>) -> Result<(), Vec<Violation>> {
    validate_graph_shape(graph, NUM_SLICES, FEATURE_DIM)
}

pub fn validate_graph_shape<T: Scalar>(
    graph: &SubjectGraph<T>,
    nodes: usize,
    feat_dim: usize,
) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let (rows, cols) = graph.features.shape();
    if rows != nodes {
        out.push(Violation::NodeCount {
            expected: nodes,
            found: rows,
        });
    }
    if cols != feat_dim {
        out.push(Violation::FeatureWidth {
            expected: feat_dim,
            found: cols,
        });
    }
    if graph.edges.num_nodes() != rows {
        out.push(Violation::EdgeNodeCount {
            features: rows,
            edges: graph.edges.num_nodes(),
        });
    }
    if let Some(pos) = graph.features.as_slice().iter().position(|v| !v.is_finite()) {
        out.push(Violation::NonFiniteFeature {
            row: pos / cols.max(1),
            col: pos % cols.max(1),
        });
    }
    for (u, v) in graph.edges.iter() {
        if u == v {
            out.push(Violation::SelfLoop { node: u });
        } else if u >= rows || v >= rows {
            out.push(Violation::EdgeOutOfRange { u, v });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
