//! AUROC (Mann–Whitney) and accuracy.

use std::cmp::Ordering;

use crate::error::{shape_err, Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from mid-ranks in `O(m log m)`.
pub fn binary_auroc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(shape_err(
            "binary_auroc",
            format!("{} scores for {} labels", scores.len(), labels.len()),
        ));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs both positive and negative samples".into(),
        ));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score passed to AUROC".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Twice the rank sum of positives keeps mid-ranks integral.
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end share the mid-rank (start+1+end)/2.
        let twice_mid = (start + 1 + end) as u64;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i]).count() as u64;
        twice_rank_sum += twice_mid * pos_in_group;
        start = end;
    }
    let p = positives as u64;
    // 2U = 2R - P(P+1)
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2 * p * negatives as u64) as f64)
}

/// Softmax outputs and integer labels for one evaluation split.
#[derive(Clone, Debug)]
pub struct EvalBatch<T = f64> {
    pub probs: Matrix<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> EvalBatch<T> {
    pub fn new(probs: Matrix<T>, labels: Vec<usize>) -> Result<Self> {
        if probs.rows() != labels.len() {
            return Err(shape_err(
                "EvalBatch",
                format!("{} probability rows for {} labels", probs.rows(), labels.len()),
            ));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= probs.cols()) {
            return Err(Error::Data(format!("label {l} out of range for {} classes", probs.cols())));
        }
        Ok(Self { probs, labels })
    }

    fn column(&self, c: usize) -> Vec<T> {
        (0..self.probs.rows()).map(|i| self.probs[(i, c)]).collect()
    }
}

/// Unweighted one-vs-rest mean AUROC over the classes present in the labels.
/// Two classes reduce to [`binary_auroc`] on the class-1 column.
pub fn macro_auroc<T: Scalar>(batch: &EvalBatch<T>) -> Result<f64> {
    let classes = batch.probs.cols();
    let present: Vec<usize> = (0..classes)
        .filter(|&c| batch.labels.contains(&c))
        .collect();
    if present.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "{} distinct label(s); AUROC needs at least 2",
            present.len()
        )));
    }
    if classes == 2 {
        let labels: Vec<bool> = batch.labels.iter().map(|&l| l == 1).collect();
        return binary_auroc(&batch.column(1), &labels);
    }
    let skipped = classes - present.len();
    if skipped > 0 {
        log::warn!("macro AUROC skips {skipped} class(es) absent from the labels");
    }
    let mut total = 0.0;
    for &c in &present {
        let labels: Vec<bool> = batch.labels.iter().map(|&l| l == c).collect();
        total += binary_auroc(&batch.column(c), &labels)?;
    }
    Ok(total / present.len() as f64)
}

/// Index of the largest entry, ties resolved to the lowest index.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy<T: Scalar>(batch: &EvalBatch<T>) -> Result<f64> {
    let m = batch.labels.len();
    if m == 0 {
        return Err(Error::UndefinedMetric("accuracy of an empty batch".into()));
    }
    let correct = batch
        .labels
        .iter()
        .enumerate()
        .filter(|&(i, &l)| argmax(batch.probs.row(i)) == l)
        .count();
    Ok(correct as f64 / m as f64)
}
