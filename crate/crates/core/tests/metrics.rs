mod common;

use common::brute_auroc;
use latgraph::metrics::argmax;
use latgraph::{accuracy, binary_auroc, macro_auroc, EvalBatch, Matrix};
use proptest::prelude::*;

/// Every label vector with both classes and every score vector over a
/// three-value alphabet, for m ≤ `max_m`.
fn exhaustive(max_m: usize, mut visit: impl FnMut(&[f64], &[bool])) {
    let alphabet = [0.1, 0.5, 0.9];
    for m in 2..=max_m {
        for lbits in 1..(1u32 << m) - 1 {
            let labels: Vec<bool> = (0..m).map(|i| lbits >> i & 1 == 1).collect();
            let mut code = vec![0usize; m];
            loop {
                let scores: Vec<f64> = code.iter().map(|&c| alphabet[c]).collect();
                visit(&scores, &labels);
                let mut i = 0;
                while i < m && code[i] == 2 {
                    code[i] = 0;
                    i += 1;
                }
                if i == m {
                    break;
                }
                code[i] += 1;
            }
        }
    }
}

#[test]
fn binary_auroc_equals_pair_counting_exhaustively() {
    // m ≤ 8 keeps this under a second in debug builds; the acceptance
    // target covers m ≤ 10.
    let mut cases = 0u64;
    exhaustive(8, |s, l| {
        assert_eq!(binary_auroc(s, l).unwrap(), brute_auroc(s, l), "{s:?} {l:?}");
        cases += 1;
    });
    assert!(cases > 1_000_000);
}

#[test]
fn single_class_is_undefined() {
    assert!(binary_auroc(&[0.2, 0.4], &[true, true]).is_err());
    let b = EvalBatch::new(Matrix::from_rows(&[&[0.6, 0.4], &[0.7, 0.3]]).unwrap(), vec![0, 0]).unwrap();
    assert!(macro_auroc(&b).is_err());
}

fn three_class_example() -> EvalBatch<f64> {
    let probs = Matrix::from_rows(&[
        &[0.7, 0.2, 0.1],
        &[0.3, 0.4, 0.3],
        &[0.2, 0.5, 0.3],
        &[0.4, 0.4, 0.2],
        &[0.1, 0.3, 0.6],
        &[0.3, 0.3, 0.4],
    ])
    .unwrap();
    EvalBatch::new(probs, vec![0, 0, 1, 1, 2, 2]).unwrap()
}

#[test]
fn macro_auroc_on_three_class_example() {
    let b = three_class_example();
    let oracle: f64 = (0..3)
        .map(|c| {
            let s: Vec<f64> = (0..6).map(|i| b.probs[(i, c)]).collect();
            let l: Vec<bool> = b.labels.iter().map(|&y| y == c).collect();
            brute_auroc(&s, &l)
        })
        .sum::<f64>()
        / 3.0;
    // By hand: class 0 → 6.5/8, class 1 → 7.5/8, class 2 → 8/8.
    assert!((oracle - (6.5 + 7.5 + 8.0) / 24.0).abs() < 1e-15);
    assert!((macro_auroc(&b).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn two_class_macro_is_binary_on_class_one() {
    let probs = Matrix::from_rows(&[&[0.2, 0.8], &[0.6, 0.4], &[0.45, 0.55], &[0.9, 0.1]]).unwrap();
    let b = EvalBatch::new(probs, vec![1, 0, 0, 1]).unwrap();
    let direct = binary_auroc(&[0.8, 0.4, 0.55, 0.1], &[true, false, false, true]).unwrap();
    assert_eq!(macro_auroc(&b).unwrap(), direct);
}

#[test]
fn accuracy_examples() {
    let uniform = Matrix::filled(4, 3, 1.0 / 3.0);
    assert_eq!(accuracy(&EvalBatch::new(uniform, vec![0; 4]).unwrap()).unwrap(), 1.0);
    let p = Matrix::from_rows(&[&[0.9, 0.1], &[0.2, 0.8], &[0.3, 0.7], &[0.6, 0.4]]).unwrap();
    assert_eq!(accuracy(&EvalBatch::new(p, vec![0, 1, 1, 1]).unwrap()).unwrap(), 0.75);
    assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
}

fn scored(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..max).prop_flat_map(|m| {
        (
            proptest::collection::vec(-50i32..50, m).prop_map(|v| v.into_iter().map(f64::from).collect()),
            proptest::collection::vec(any::<bool>(), m)
                .prop_filter("both classes", |l| l.iter().any(|&x| x) && l.iter().any(|&x| !x)),
        )
    })
}

proptest! {
    #[test]
    fn auroc_invariant_to_increasing_transforms((s, l) in scored(40)) {
        let base = binary_auroc(&s, &l).unwrap();
        let cubed: Vec<f64> = s.iter().map(|x| x * x * x + 3.0 * x).collect();
        let shifted: Vec<f64> = s.iter().map(|x| 2.0 * x + 7.0).collect();
        let squashed: Vec<f64> = s.iter().map(|x| (x / 10.0).exp()).collect();
        prop_assert_eq!(binary_auroc(&cubed, &l).unwrap(), base);
        prop_assert_eq!(binary_auroc(&shifted, &l).unwrap(), base);
        prop_assert_eq!(binary_auroc(&squashed, &l).unwrap(), base);
    }

    #[test]
    fn flipped_labels_complement_without_ties(
        m in 2usize..30,
        seed in any::<u64>(),
        l in proptest::collection::vec(any::<bool>(), 30),
    ) {
        let l = &l[..m];
        prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
        let s: Vec<f64> = (0..m).map(|i| ((i as u64).wrapping_mul(2654435761) ^ seed) as f64 + i as f64 * 1e-3).collect();
        let mut distinct = s.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        prop_assume!(distinct.len() == m);
        let flipped: Vec<bool> = l.iter().map(|&x| !x).collect();
        let sum = binary_auroc(&s, l).unwrap() + binary_auroc(&s, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auroc_matches_brute_force_up_to_twelve((s, l) in scored(13)) {
        prop_assert_eq!(binary_auroc(&s, &l).unwrap(), brute_auroc(&s, &l));
    }

    #[test]
    fn accuracy_invariant_to_sample_order(
        rows in proptest::collection::vec((0u8..5, 0u8..5, 0usize..2), 1..30),
        rot in 0usize..30,
    ) {
        let mk = |rows: &[(u8, u8, usize)]| {
            let probs: Vec<f64> = rows.iter().flat_map(|&(a, b, _)| {
                let (a, b) = (f64::from(a) + 1.0, f64::from(b) + 1.0);
                [a / (a + b), b / (a + b)]
            }).collect();
            let b = EvalBatch::new(Matrix::from_vec(rows.len(), 2, probs).unwrap(), rows.iter().map(|r| r.2).collect()).unwrap();
            accuracy(&b).unwrap()
        };
        let mut rotated = rows.clone();
        rotated.rotate_left(rot % rows.len());
        prop_assert_eq!(mk(&rows), mk(&rotated));
    }
}
