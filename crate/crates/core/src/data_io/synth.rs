//! Synthetic datasets whose class signal is known by construction.
//!
//! Subject features are `noise · ε + signal · pattern_c` on the rows of a
//! class-specific contiguous band of slices, with `pattern_c` a fixed unit
//! vector per class. Perturbed copies of each subject add
//! `level · noise · ε'` with independent `ε'`.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data_io::{write_feature_file, write_manifest, ManifestRecord, Split, SubjectRecord};
use crate::error::{Error, Result};
use crate::graph::{FEATURE_DIM, NUM_SLICES};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub num_classes: usize,
    pub signal: f64,
    pub noise: f64,
    pub seed: u64,
    /// Perturbation levels to emit; `0` is the clean copy.
    #[serde(default = "default_levels")]
    pub levels: Vec<f64>,
}

fn default_levels() -> Vec<f64> {
    vec![0.0]
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            train: 200,
            val: 50,
            test: 100,
            num_classes: 2,
            signal: 5.0,
            noise: 1.0,
            seed: 0,
            levels: default_levels(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.num_classes > NUM_SLICES {
            return Err(Error::Config(format!("{} classes not supported", self.num_classes)));
        }
        if self.train == 0 || self.val == 0 || self.test == 0 {
            return Err(Error::Config("every split needs at least one subject".into()));
        }
        if !(self.signal >= 0.0 && self.noise >= 0.0) || !self.signal.is_finite() || !self.noise.is_finite() {
            return Err(Error::Config("signal and noise must be finite and non-negative".into()));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Config("levels must be a non-empty list of non-negative reals".into()));
        }
        Ok(())
    }

    /// Slice rows carrying class `c`'s pattern.
    pub fn signal_rows(&self, class: usize) -> std::ops::Range<usize> {
        let c = self.num_classes;
        (class * NUM_SLICES / c)..((class + 1) * NUM_SLICES / c)
    }

    /// The unit-norm per-class pattern vectors.
    pub fn patterns(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.num_classes)
            .map(|_| {
                let v: Vec<f64> = (0..FEATURE_DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect()
    }
}

/// One generated subject at one level.
#[derive(Clone, Debug)]
pub struct SynthSubject<T> {
    pub split: Split,
    pub level: f64,
    pub record: SubjectRecord<T>,
}

fn splits(spec: &SynthSpec) -> impl Iterator<Item = (Split, usize)> + '_ {
    [(Split::Train, spec.train), (Split::Val, spec.val), (Split::Test, spec.test)]
        .into_iter()
        .flat_map(|(s, n)| (0..n).map(move |i| (s, i)))
}

/// Generates every subject at every level in memory. Values are rounded
/// through `f32`, so they equal what a disk round-trip would yield.
pub fn generate_synth<T: Scalar>(spec: &SynthSpec) -> Result<Vec<SynthSubject<T>>> {
    spec.validate()?;
    let patterns = spec.patterns();
    let mut out = Vec::new();
    for (global, (split, idx)) in splits(spec).enumerate() {
        let label = idx % spec.num_classes;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1 + global as u64);
        let mut clean = vec![0f64; NUM_SLICES * FEATURE_DIM];
        for v in clean.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v = spec.noise * e;
        }
        for r in spec.signal_rows(label) {
            for (v, p) in clean[r * FEATURE_DIM..(r + 1) * FEATURE_DIM].iter_mut().zip(&patterns[label]) {
                *v += spec.signal * p;
            }
        }
        for (li, &level) in spec.levels.iter().enumerate() {
            let values: Vec<T> = if level == 0.0 {
                clean.iter().map(|&v| T::from_f32(v as f32).unwrap()).collect()
            } else {
                let mut prng = ChaCha8Rng::seed_from_u64(spec.seed);
                prng.set_stream(((li as u64 + 1) << 32) | global as u64);
                clean
                    .iter()
                    .map(|&v| {
                        let e: f64 = StandardNormal.sample(&mut prng);
                        T::from_f32((v + level * spec.noise * e) as f32).unwrap()
                    })
                    .collect()
            };
            out.push(SynthSubject {
                split,
                level,
                record: SubjectRecord {
                    subject_id: format!("synth-{split}-{idx:05}"),
                    features: Matrix::from_vec(NUM_SLICES, FEATURE_DIM, values)?,
                    label,
                },
            });
        }
    }
    Ok(out)
}

/// Writes feature files and `manifest.jsonl` under `out_dir`; returns the
/// manifest path.
pub fn synth_dataset(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let out_dir = out_dir.as_ref();
    let subjects = generate_synth::<f32>(spec)?;
    let mut records = Vec::with_capacity(subjects.len());
    for s in &subjects {
        let li = spec.levels.iter().position(|&l| l == s.level).unwrap();
        let rel = PathBuf::from("features").join(format!("{}-l{li}.lgf", s.record.subject_id));
        write_feature_file(out_dir.join(&rel), &s.record.features)?;
        records.push(ManifestRecord {
            subject_id: s.record.subject_id.clone(),
            split: s.split,
            label: s.record.label,
            num_classes: spec.num_classes,
            feature_path: rel,
            perturbation_level: s.level,
        });
    }
    let manifest = out_dir.join("manifest.jsonl");
    write_manifest(&manifest, &records)?;
    Ok(manifest)
}
