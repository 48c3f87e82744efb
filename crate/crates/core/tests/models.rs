mod common;

use common::{gaussian_matrix, random_edges, random_graph, rng, small_config};
use latgraph::models::{
    cond_mlp_forward, count_parameters, gat_layer_forward, sage_layer_forward, slice_positions, Arch, Head, Model,
    ModelConfig, PARAM_BUDGET,
};
use latgraph::{build_slice_topology, Matrix, SliceTopology, SubjectGraph};

#[test]
fn default_heads_fit_the_parameter_budget() {
    for arch in [Arch::Sage, Arch::Gat, Arch::CondMlp] {
        for classes in [2, 3, 11] {
            let cfg = ModelConfig::default_for(arch, classes);
            let n = count_parameters(&cfg);
            assert!((PARAM_BUDGET.0..=PARAM_BUDGET.1).contains(&n), "{arch} C={classes}: {n}");
            assert_eq!(Model::<f64>::new(cfg, 0).unwrap().num_parameters(), n);
        }
    }
}

#[test]
fn sage_on_complete_graph_with_identical_rows() {
    let mut r = rng(1);
    let x = gaussian_matrix(&mut r, 1, 5);
    let h = Matrix::from_vec(6, 5, x.row(0).repeat(6)).unwrap();
    let edges = build_slice_topology(SliceTopology::FullyConnected, 6).unwrap();
    let (w_root, w_neigh, b) = (gaussian_matrix(&mut r, 5, 3), gaussian_matrix(&mut r, 5, 3), gaussian_matrix(&mut r, 1, 3));
    let out = sage_layer_forward(&edges, &h, &w_root, &w_neigh, &b).unwrap();
    let mut w_sum = w_root.clone();
    w_sum.axpy(1.0, &w_neigh).unwrap();
    let mut expected = x.matmul(&w_sum).unwrap();
    expected.add_row_broadcast(&b).unwrap();
    for v in 0..6 {
        for (a, e) in out.row(v).iter().zip(expected.row(0)) {
            assert!((a - e).abs() < 1e-12);
        }
    }
}

#[test]
fn gat_with_zero_attention_vectors_averages_closed_neighborhoods() {
    let mut r = rng(2);
    let edges = random_edges(&mut r, 7, 0.4);
    let h = gaussian_matrix(&mut r, 7, 4);
    let w = gaussian_matrix(&mut r, 4, 3);
    let zero = Matrix::zeros(1, 3);
    let out = gat_layer_forward(&edges, &h, &w, &zero, &zero, &zero, 0.2).unwrap();
    let z = h.matmul(&w).unwrap();
    for (v, nbrs) in edges.neighborhoods().iter().enumerate() {
        let closed: Vec<usize> = nbrs.iter().copied().chain([v]).collect();
        for c in 0..3 {
            let mean = closed.iter().map(|&u| z[(u, c)]).sum::<f64>() / closed.len() as f64;
            assert!((out[(v, c)] - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn gat_attention_rows_sum_to_one() {
    let mut r = rng(3);
    let g = random_graph(&mut r, 9, 6, 2);
    let model = Model::new(small_config(Arch::Gat, 6, 5, 2), 3).unwrap();
    let Head::Gat(head) = model.head() else { unreachable!() };
    let mask = g.edges.closed_mask();
    let (_, cache) = head.layer1.forward(&mask, &g.features, 0.2).unwrap();
    let alpha = cache.attention();
    for i in 0..9 {
        let s: f64 = alpha.row(i).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        for j in 0..9 {
            if !mask.get(i, j) {
                assert_eq!(alpha[(i, j)], 0.0);
            }
        }
    }
}

fn mlp(seed: u64) -> Model<f64> {
    Model::new(small_config(Arch::CondMlp, 6, 7, 3), seed).unwrap()
}

#[test]
fn cond_mlp_with_zero_weights_outputs_the_output_bias() {
    let mut m = mlp(4);
    let Head::CondMlp(h) = m.head_mut() else { unreachable!() };
    h.w1.value.fill(0.0);
    h.w2.value.fill(0.0);
    let b2 = h.b2.value.row(0).to_vec();
    let x = gaussian_matrix(&mut rng(4), 64, 6);
    let logits = cond_mlp_forward(&x, &m).unwrap().logits;
    for (a, b) in logits.iter().zip(&b2) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn cond_mlp_identical_slices_without_position_weights() {
    let mut m = mlp(5);
    let Head::CondMlp(h) = m.head_mut() else { unreachable!() };
    // The last input row of w1 multiplies the slice position.
    let last = h.w1.value.rows() - 1;
    h.w1.value.row_mut(last).fill(0.0);
    let row = gaussian_matrix(&mut rng(5), 1, 6);
    let x = Matrix::from_vec(64, 6, row.row(0).repeat(64)).unwrap();
    let single = cond_mlp_forward(&Matrix::from_vec(1, 6, row.row(0).to_vec()).unwrap(), &m).unwrap();
    let full = cond_mlp_forward(&x, &m).unwrap();
    for (a, b) in full.logits.iter().zip(&single.logits) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn cond_mlp_reorder_invariance_depends_on_position_feature() {
    let m = mlp(6);
    let Head::CondMlp(h) = m.head() else { unreachable!() };
    let x = gaussian_matrix(&mut rng(6), 64, 6);
    let pos = slice_positions::<f64>(64);
    let perm: Vec<usize> = (0..64).map(|i| (i * 37 + 11) % 64).collect();
    let mut xp = Matrix::zeros(64, 6);
    let mut pos_p = vec![0.0; 64];
    for (i, &p) in perm.iter().enumerate() {
        xp.row_mut(i).copy_from_slice(x.row(p));
        pos_p[i] = pos[p];
    }
    let base = h.forward_with_positions(&x, &pos).unwrap().0;
    // Rows moved together with their positions: same subject logits.
    let moved = h.forward_with_positions(&xp, &pos_p).unwrap().0;
    // Rows moved while positions stay in slice order: different logits.
    let fixed = h.forward_with_positions(&xp, &pos).unwrap().0;
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff(&base, &moved) < 1e-12);
    assert!(diff(&base, &fixed) > 1e-6);
}

#[test]
fn forward_passes_are_deterministic() {
    let mut r = rng(7);
    let g: SubjectGraph<f64> = random_graph(&mut r, 10, 8, 3);
    for arch in [Arch::Sage, Arch::Gat, Arch::CondMlp] {
        let a = Model::new(small_config(arch, 8, 6, 3), 9).unwrap();
        let b = Model::new(small_config(arch, 8, 6, 3), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.forward(&g).unwrap(), b.forward(&g).unwrap());
    }
}

#[test]
fn checkpoints_round_trip_through_json() {
    let m = Model::<f64>::new(small_config(Arch::Gat, 8, 6, 3), 1).unwrap();
    let json = serde_json::to_string(&m.checkpoint()).unwrap();
    let back = Model::from_checkpoint(&serde_json::from_str(&json).unwrap()).unwrap();
    assert_eq!(back, m);
}
