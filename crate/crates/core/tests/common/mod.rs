//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use latgraph::data_io::{generate_synth, Dataset, Split, SynthSpec};
use latgraph::models::{Arch, Model, ModelConfig};
use latgraph::numerics::cross_entropy;
use latgraph::{EdgeSet, Matrix, Metric, SubjectGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Fraction of (positive, negative) pairs ordered correctly, ties half.
pub fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1;
                twice += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Integer-valued features, so every metric is compared exactly.
pub fn integer_features(rng: &mut impl Rng, n: usize, d: usize, alphabet: i64) -> Vec<Vec<i64>> {
    (0..n)
        .map(|_| loop {
            let row: Vec<i64> = (0..d).map(|_| rng.random_range(0..alphabet)).collect();
            if row.iter().any(|&x| x != 0) {
                break row;
            }
        })
        .collect()
}

pub fn to_matrix(rows: &[Vec<i64>]) -> Matrix<f64> {
    let d = rows[0].len();
    Matrix::from_vec(rows.len(), d, rows.iter().flatten().map(|&x| x as f64).collect()).unwrap()
}

/// Exact distance key: `a < b` iff the first pair is strictly nearer.
#[derive(Clone, Copy, Debug)]
enum Key {
    Int(i64),
    /// Cosine similarity `dot / sqrt(q)`.
    Cos { dot: i64, q: i64 },
}

fn nearer(a: Key, b: Key) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a, b) {
        (Key::Int(x), Key::Int(y)) => x.cmp(&y),
        (Key::Cos { dot: d1, q: q1 }, Key::Cos { dot: d2, q: q2 }) => {
            // Higher similarity is nearer; compare d1/sqrt(q1) with d2/sqrt(q2).
            let s1 = d1.signum();
            let s2 = d2.signum();
            let sim = if s1 != s2 {
                s1.cmp(&s2)
            } else {
                let lhs = (d1 as i128) * (d1 as i128) * (q2 as i128);
                let rhs = (d2 as i128) * (d2 as i128) * (q1 as i128);
                if s1 >= 0 {
                    lhs.cmp(&rhs)
                } else {
                    rhs.cmp(&lhs)
                }
            };
            match sim {
                Greater => Less,
                Less => Greater,
                Equal => Equal,
            }
        }
        _ => unreachable!(),
    }
}

fn key(metric: Metric, u: &[i64], v: &[i64]) -> Key {
    let diffs = u.iter().zip(v).map(|(a, b)| (a - b).abs());
    match metric {
        Metric::L1 => Key::Int(diffs.sum()),
        Metric::L2 => Key::Int(diffs.map(|x| x * x).sum()),
        Metric::Linf => Key::Int(diffs.max().unwrap_or(0)),
        Metric::Cosine => {
            let dot = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let uu: i64 = u.iter().map(|a| a * a).sum();
            let vv: i64 = v.iter().map(|a| a * a).sum();
            Key::Cos { dot, q: uu * vv }
        }
    }
}

/// Union of each node's k nearest others, ties to the lower index.
pub fn brute_knn(rows: &[Vec<i64>], metric: Metric, k: usize) -> BTreeSet<(usize, usize)> {
    let n = rows.len();
    let mut edges = BTreeSet::new();
    for v in 0..n {
        let mut cand: Vec<usize> = (0..n).filter(|&u| u != v).collect();
        // Stable sort keeps ascending index among exact ties.
        cand.sort_by(|&a, &b| nearer(key(metric, &rows[v], &rows[a]), key(metric, &rows[v], &rows[b])));
        for &u in cand.iter().take(k) {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    edges
}

pub fn edge_set(e: &EdgeSet) -> BTreeSet<(usize, usize)> {
    e.iter().collect()
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect()).unwrap()
}

/// Erdős–Rényi edges with probability `p`.
pub fn random_edges(rng: &mut impl Rng, n: usize, p: f64) -> EdgeSet {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                pairs.push((u, v));
            }
        }
    }
    EdgeSet::from_pairs(n, pairs).unwrap()
}

pub fn random_graph(rng: &mut impl Rng, n: usize, d: usize, classes: usize) -> SubjectGraph<f64> {
    SubjectGraph {
        subject_id: "g".into(),
        features: gaussian_matrix(rng, n, d),
        edges: random_edges(rng, n, 0.4),
        label: rng.random_range(0..classes),
    }
}

pub fn small_config(arch: Arch, d: usize, hidden: usize, classes: usize) -> ModelConfig {
    ModelConfig {
        in_dim: d,
        hidden_dim: hidden,
        ..ModelConfig::default_for(arch, classes)
    }
}

fn loss(model: &Model<f64>, g: &SubjectGraph<f64>) -> f64 {
    let logits = model.forward(g).unwrap().logits;
    cross_entropy(&Matrix::row_vector(&logits), &[g.label]).unwrap().value
}

/// Largest relative error between analytic and central-difference gradients
/// over every parameter entry. The denominator is floored at `floor` so
/// entries whose true gradient is zero are judged on absolute error.
pub fn max_grad_rel_err(model: &mut Model<f64>, g: &SubjectGraph<f64>, h: f64, floor: f64) -> f64 {
    model.zero_grad();
    let (out, trace) = model.forward_train(g).unwrap();
    let l = cross_entropy(&Matrix::row_vector(&out.logits), &[g.label]).unwrap();
    model.backward(g, &trace, l.grad.row(0)).unwrap();
    let analytic: Vec<Vec<f64>> = model.params().iter().map(|p| p.grad.as_slice().to_vec()).collect();

    let mut worst = 0.0f64;
    for (pi, grads) in analytic.iter().enumerate() {
        for (ei, &a) in grads.iter().enumerate() {
            let orig = model.params()[pi].value.as_slice()[ei];
            model.params_mut()[pi].value.as_mut_slice()[ei] = orig + h;
            let up = loss(model, g);
            model.params_mut()[pi].value.as_mut_slice()[ei] = orig - h;
            let down = loss(model, g);
            model.params_mut()[pi].value.as_mut_slice()[ei] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}

/// In-memory synthetic dataset, identical in content to `synth_dataset`.
pub fn synth_in_memory(spec: &SynthSpec) -> Dataset<f64> {
    let mut ds = Dataset {
        train: vec![],
        val: vec![],
        test: vec![],
        num_classes: spec.num_classes,
        level: 0.0,
        warnings: vec![],
    };
    for s in generate_synth::<f64>(spec).unwrap() {
        if s.level != 0.0 {
            continue;
        }
        match s.split {
            Split::Train => ds.train.push(s.record),
            Split::Val => ds.val.push(s.record),
            Split::Test => ds.test.push(s.record),
        }
    }
    ds
}

/// Node permutation applied to features and edges; `perm[old] = new`.
pub fn permute_graph(g: &SubjectGraph<f64>, perm: &[usize]) -> SubjectGraph<f64> {
    let n = g.num_nodes();
    let mut rows = vec![Vec::new(); n];
    for (old, &new) in perm.iter().enumerate() {
        rows[new] = g.features.row(old).to_vec();
    }
    SubjectGraph {
        subject_id: g.subject_id.clone(),
        features: Matrix::from_vec(n, g.features.cols(), rows.concat()).unwrap(),
        edges: g.edges.relabel(perm).unwrap(),
        label: g.label,
    }
}
