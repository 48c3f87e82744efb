mod common;

use common::{brute_knn, edge_set, integer_features, rng, to_matrix};
use latgraph::{build_knn_topology, build_slice_topology, validate_graph, Matrix, Metric, SliceTopology, SubjectGraph, TopologySpec};
use proptest::prelude::*;

#[test]
fn slice_topology_edge_counts() {
    let count = |k| build_slice_topology(k, 64).unwrap().len();
    assert_eq!(count(SliceTopology::FullyConnected), 64 * 63 / 2);
    assert_eq!(count(SliceTopology::Star), 63);
    assert_eq!(count(SliceTopology::Line), 63);
    // star ∪ line, minus the two line edges touching the center
    assert_eq!(count(SliceTopology::Custom), 63 + 63 - 2);
}

#[test]
fn knn_matches_brute_force_on_integer_features() {
    let mut r = rng(2024);
    for trial in 0..50 {
        let rows = integer_features(&mut r, 64, 16, 3);
        let x = to_matrix(&rows);
        for metric in Metric::ALL {
            for k in [1, 3, 7] {
                let got = edge_set(&build_knn_topology(&x, metric, k).unwrap());
                assert_eq!(got, brute_knn(&rows, metric, k), "trial {trial} {metric:?} k={k}");
            }
        }
    }
}

#[test]
fn knn_ties_go_to_lower_index() {
    // Node 0 is equidistant from nodes 1 and 2, which each have a nearer
    // partner of their own; with k=1 node 0 must pick node 1.
    let x = Matrix::from_rows(&[&[0.0], &[2.0], &[-2.0], &[2.5], &[-2.5]]).unwrap();
    let e = build_knn_topology(&x, Metric::L1, 1).unwrap();
    assert!(e.contains(0, 1));
    assert!(!e.contains(0, 2));
}

#[test]
fn every_topology_yields_a_valid_graph() {
    let mut r = rng(5);
    let rows = integer_features(&mut r, 64, latgraph::FEATURE_DIM, 3);
    let x = to_matrix(&rows);
    let mut specs: Vec<TopologySpec> = SliceTopology::ALL.iter().map(|&k| TopologySpec::slice(k)).collect();
    specs.extend(Metric::ALL.iter().map(|&m| TopologySpec::knn(m, 5)));
    for spec in specs {
        let g = SubjectGraph { subject_id: "s".into(), features: x.clone(), edges: spec.build(&x).unwrap(), label: 0 };
        assert_eq!(validate_graph(&g), Ok(()), "{spec}");
        let a = g.edges.adjacency::<f64>();
        assert_eq!(a, a.transpose());
    }
}

fn int_matrix(max_rows: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (3..max_rows, 1usize..6).prop_flat_map(|(n, d)| {
        proptest::collection::vec(
            proptest::collection::vec(-3i64..4, d).prop_filter("non-zero row", |r| r.iter().any(|&x| x != 0)),
            n,
        )
    })
}

proptest! {
    #[test]
    fn knn_invariant_to_common_positive_scaling(
        rows in int_matrix(14),
        k in 1usize..4,
        scale in prop::sample::select(vec![0.25, 0.5, 2.0, 8.0, 1024.0]),
    ) {
        let k = k.min(rows.len() - 1);
        let x = to_matrix(&rows);
        let scaled = x.map(|v| v * scale);
        for metric in Metric::ALL {
            prop_assert_eq!(
                build_knn_topology(&x, metric, k).unwrap(),
                build_knn_topology(&scaled, metric, k).unwrap()
            );
        }
    }

    #[test]
    fn cosine_knn_invariant_to_per_vector_scaling(
        rows in int_matrix(14),
        k in 1usize..4,
        scales in proptest::collection::vec(prop::sample::select(vec![0.5, 1.0, 2.0, 4.0, 16.0]), 14),
    ) {
        let k = k.min(rows.len() - 1);
        let x = to_matrix(&rows);
        let mut scaled = x.clone();
        for (i, &s) in scales.iter().take(x.rows()).enumerate() {
            scaled.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        prop_assert_eq!(
            build_knn_topology(&x, Metric::Cosine, k).unwrap(),
            build_knn_topology(&scaled, Metric::Cosine, k).unwrap()
        );
    }

    #[test]
    fn knn_is_deterministic_and_has_min_degree_k(rows in int_matrix(14), k in 1usize..4) {
        let k = k.min(rows.len() - 1);
        let x = to_matrix(&rows);
        for metric in Metric::ALL {
            let a = build_knn_topology(&x, metric, k).unwrap();
            prop_assert_eq!(&a, &build_knn_topology(&x, metric, k).unwrap());
            prop_assert!(a.neighborhoods().iter().all(|n| n.len() >= k));
        }
    }
}
