mod common;

use std::fs;
use std::path::Path;

use common::{brute_auroc, gaussian_matrix, rng, synth_in_memory};
use latgraph::data_io::{
    encode_features, load_dataset, read_feature_file, read_manifest, synth_dataset, write_feature_file,
    write_manifest, Dataset, ManifestRecord, Split, SynthSpec, HEADER_LEN,
};
use latgraph::training::attach_topology;
use latgraph::{validate_graph, Error, Matrix, Metric, SliceTopology, TopologySpec, FEATURE_DIM, NUM_SLICES};
use proptest::prelude::*;

fn full_matrix(seed: u64) -> Matrix<f64> {
    // f32-representable values, so the on-disk width loses nothing.
    gaussian_matrix(&mut rng(seed), NUM_SLICES, FEATURE_DIM).map(|v| v as f32 as f64)
}

#[test]
fn zero_file_has_expected_size_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.lgf");
    write_feature_file(&path, &Matrix::<f64>::zeros(NUM_SLICES, FEATURE_DIM)).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(bytes.len(), 14 + 64 * 1152 * 4);
    assert_eq!(bytes.len(), 294_926);
    assert_eq!(&bytes[..4], b"LGF1");
    assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
    assert_eq!(&bytes[6..10], &64u32.to_le_bytes());
    assert_eq!(&bytes[10..14], &1152u32.to_le_bytes());
    assert!(bytes[HEADER_LEN..].iter().all(|&b| b == 0));
}

#[test]
fn round_trip_is_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    let x = full_matrix(1);
    let path = dir.path().join("x.lgf");
    write_feature_file(&path, &x).unwrap();
    let back: Matrix<f64> = read_feature_file(&path).unwrap();
    assert!(back.as_slice().iter().zip(x.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let again = dir.path().join("y.lgf");
    write_feature_file(&again, &back).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    // payload is row-major f32 LE, slice 0 first
    let bytes = fs::read(&path).unwrap();
    let second = f32::from_le_bytes(bytes[HEADER_LEN + 4..HEADER_LEN + 8].try_into().unwrap());
    assert_eq!(second as f64, x[(0, 1)]);
}

#[test]
fn malformed_files_are_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = encode_features(&full_matrix(2)).unwrap();
    let cases: Vec<(&str, Vec<u8>, u64)> = vec![
        ("truncated", good[..good.len() - 3].to_vec(), (good.len() - 3) as u64),
        ("short-header", good[..9].to_vec(), 9),
        ("magic", [b"LGF2".as_slice(), &good[4..]].concat(), 0),
        ("version", [&good[..4], &2u16.to_le_bytes()[..], &good[6..]].concat(), 4),
        ("slices", [&good[..6], &63u32.to_le_bytes()[..], &good[10..]].concat(), 6),
    ];
    for (name, bytes, offset) in cases {
        let path = dir.path().join(format!("{name}.lgf"));
        fs::write(&path, bytes).unwrap();
        match read_feature_file::<f64>(&path) {
            Err(Error::Format { path: p, offset: o, .. }) => {
                assert_eq!(p, path, "{name}");
                assert_eq!(o, offset, "{name}");
            }
            other => panic!("{name}: {other:?}"),
        }
    }
}

#[test]
fn non_finite_features_are_rejected() {
    let mut x = full_matrix(3);
    x[(5, 7)] = f64::NAN;
    assert!(encode_features(&x).is_err());
}

fn write_subject(dir: &Path, id: &str, split: Split, label: usize, level: f64, seed: u64) -> ManifestRecord {
    let rel = Path::new("f").join(format!("{id}-{level}.lgf"));
    write_feature_file(dir.join(&rel), &full_matrix(seed)).unwrap();
    ManifestRecord {
        subject_id: id.into(),
        split,
        label,
        num_classes: 2,
        feature_path: rel,
        perturbation_level: level,
    }
}

#[test]
fn loads_records_at_the_requested_level() {
    let dir = tempfile::tempdir().unwrap();
    let recs = vec![
        write_subject(dir.path(), "a", Split::Train, 0, 0.0, 1),
        write_subject(dir.path(), "b", Split::Test, 1, 0.0, 2),
    ];
    let m = dir.path().join("manifest.jsonl");
    write_manifest(&m, &recs).unwrap();
    let ds: Dataset<f64> = load_dataset(&m, 0.0).unwrap();
    assert_eq!(ds.train.len() + ds.val.len() + ds.test.len(), 2);
    assert_eq!(ds.test[0].subject_id, "b");
    assert_eq!(ds.test[0].features, full_matrix(2));

    let empty: Dataset<f64> = load_dataset(&m, 0.2).unwrap();
    assert!(empty.is_empty());
    assert_eq!(empty.warnings.len(), 1);
    assert!(read_manifest(&m).unwrap().has_level(0.0));
}

#[test]
fn corrupt_file_is_named_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<ManifestRecord> = ["a", "b", "c"]
        .iter()
        .enumerate()
        .map(|(i, id)| write_subject(dir.path(), id, Split::Train, i % 2, 0.0, i as u64))
        .collect();
    let bad = dir.path().join(&recs[1].feature_path);
    let bytes = fs::read(&bad).unwrap();
    fs::write(&bad, &bytes[..100]).unwrap();
    let m = dir.path().join("manifest.jsonl");
    write_manifest(&m, &recs).unwrap();
    match load_dataset::<f64>(&m, 0.0) {
        Err(Error::Load { offenders }) => {
            assert_eq!(offenders.len(), 1, "{offenders:?}");
            assert!(offenders[0].contains("b-0.lgf"));
            assert!(!offenders[0].contains("a-0.lgf") && !offenders[0].contains("c-0.lgf"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn all_offenders_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let mut recs = vec![
        write_subject(dir.path(), "a", Split::Train, 0, 0.0, 1),
        write_subject(dir.path(), "a", Split::Train, 1, 0.0, 2),
        write_subject(dir.path(), "b", Split::Val, 5, 0.0, 3),
    ];
    recs.push(ManifestRecord {
        feature_path: "f/missing.lgf".into(),
        subject_id: "m".into(),
        ..recs[0].clone()
    });
    let m = dir.path().join("manifest.jsonl");
    write_manifest(&m, &recs).unwrap();
    let Err(Error::Load { offenders }) = load_dataset::<f64>(&m, 0.0) else { panic!() };
    let text = offenders.join("\n");
    assert!(text.contains("duplicate subject a"), "{text}");
    assert!(text.contains("label 5"), "{text}");
    assert!(text.contains("missing.lgf"), "{text}");
}

fn small_spec(signal: f64, seed: u64) -> SynthSpec {
    SynthSpec {
        train: 6,
        val: 4,
        test: 4,
        signal,
        seed,
        levels: vec![0.0, 0.5],
        ..SynthSpec::default()
    }
}

#[test]
fn synth_is_byte_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = synth_dataset(&small_spec(5.0, 9), a.path()).unwrap();
    let mb = synth_dataset(&small_spec(5.0, 9), b.path()).unwrap();
    assert_eq!(fs::read(&ma).unwrap(), fs::read(&mb).unwrap());
    let manifest = read_manifest(&ma).unwrap();
    assert_eq!(manifest.records.len(), 2 * 14);
    for r in &manifest.records {
        assert_eq!(fs::read(a.path().join(&r.feature_path)).unwrap(), fs::read(b.path().join(&r.feature_path)).unwrap());
    }
    // the in-memory generator and the files agree
    let on_disk: Dataset<f64> = load_dataset(&ma, 0.0).unwrap();
    let memory = synth_in_memory(&small_spec(5.0, 9));
    assert_eq!(on_disk.test, memory.test);
    assert_eq!(manifest.levels(), vec![0.0, 0.5]);
}

#[test]
fn synth_subjects_pass_validation_under_every_topology() {
    let ds = synth_in_memory(&small_spec(5.0, 3));
    let mut specs: Vec<TopologySpec> = SliceTopology::ALL.iter().map(|&k| TopologySpec::slice(k)).collect();
    specs.extend(Metric::ALL.iter().map(|&m| TopologySpec::knn(m, 7)));
    for spec in specs {
        for g in attach_topology(&ds.train, Some(&spec)).unwrap() {
            assert_eq!(validate_graph(&g), Ok(()), "{spec}");
        }
    }
}

/// Slice-mean of each test subject projected on the difference of the
/// class means, which by construction is `signal/2 · (p1 − p0)`.
fn lda_test_auroc(signal: f64, data_seed: u64, test: usize) -> f64 {
    let spec = SynthSpec { train: 2, val: 2, test, signal, seed: data_seed, ..SynthSpec::default() };
    let reference = SynthSpec { signal: 10.0, ..spec.clone() };
    let p = reference.patterns();
    let w: Vec<f64> = p[1].iter().zip(&p[0]).map(|(a, b)| a - b).collect();
    let ds = synth_in_memory(&spec);
    let scores: Vec<f64> = ds
        .test
        .iter()
        .map(|s| {
            (0..NUM_SLICES)
                .map(|r| s.features.row(r).iter().zip(&w).map(|(x, y)| x * y).sum::<f64>())
                .sum::<f64>()
                / NUM_SLICES as f64
        })
        .collect();
    let labels: Vec<bool> = ds.test.iter().map(|s| s.label == 1).collect();
    brute_auroc(&scores, &labels)
}

#[test]
fn strong_signal_is_linearly_separable() {
    let auroc = lda_test_auroc(10.0, 0, 100);
    assert!(auroc >= 0.99, "{auroc}");
}

#[test]
fn zero_signal_gives_chance_auroc() {
    let auroc = lda_test_auroc(0.0, 0, 200);
    assert!((auroc - 0.5).abs() <= 0.1, "{auroc}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn any_f32_matrix_round_trips(values in proptest::collection::vec(-1e30f32..1e30, 64 * 1152)) {
        let x = Matrix::from_vec(NUM_SLICES, FEATURE_DIM, values.iter().map(|&v| v as f64).collect()).unwrap();
        let bytes = encode_features(&x).unwrap();
        let back: Matrix<f64> = latgraph::data_io::decode_features(&bytes, Path::new("mem")).unwrap();
        prop_assert_eq!(back, x);
    }
}
