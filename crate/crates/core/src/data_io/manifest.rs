use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data_io::read_feature_file;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// One line of a manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub subject_id: String,
    pub split: Split,
    pub label: usize,
    pub num_classes: usize,
    /// Relative to the manifest's directory.
    pub feature_path: PathBuf,
    #[serde(default)]
    pub perturbation_level: f64,
}

/// Parsed manifest plus the directory its relative paths resolve against.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    /// Distinct perturbation levels in ascending order.
    pub fn levels(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.records {
            if !out.iter().any(|&l| same_level(l, r.perturbation_level)) {
                out.push(r.perturbation_level);
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out
    }

    pub fn has_level(&self, level: f64) -> bool {
        self.records.iter().any(|r| same_level(r.perturbation_level, level))
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        self.base_dir.join(&record.feature_path)
    }
}

pub(crate) fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

/// Reads a line-delimited JSON manifest; blank lines are ignored.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::Data(format!("manifest {}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        records.push(rec);
    }
    Ok(Manifest {
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        records,
    })
}

pub fn write_manifest(path: impl AsRef<Path>, records: &[ManifestRecord]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Features and label of one subject, before any topology is attached.
#[derive(Clone, Debug, PartialEq)]
pub struct SubjectRecord<T = f64> {
    pub subject_id: String,
    pub features: Matrix<T>,
    pub label: usize,
}

/// All subjects of one perturbation level, grouped by split.
#[derive(Clone, Debug)]
pub struct Dataset<T = f64> {
    pub train: Vec<SubjectRecord<T>>,
    pub val: Vec<SubjectRecord<T>>,
    pub test: Vec<SubjectRecord<T>>,
    pub num_classes: usize,
    pub level: f64,
    pub warnings: Vec<String>,
}

impl<T> Dataset<T> {
    pub fn is_empty(&self) -> bool {
        self.train.is_empty() && self.val.is_empty() && self.test.is_empty()
    }

    pub fn split(&self, split: Split) -> &[SubjectRecord<T>] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Loads and validates every record at `level`. All offending records are
/// reported together.
pub fn load_dataset<T: Scalar>(manifest_path: impl AsRef<Path>, level: f64) -> Result<Dataset<T>> {
    let manifest = read_manifest(manifest_path.as_ref())?;
    let selected: Vec<&ManifestRecord> = manifest
        .records
        .iter()
        .filter(|r| same_level(r.perturbation_level, level))
        .collect();

    let mut dataset = Dataset {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        num_classes: 0,
        level,
        warnings: Vec::new(),
    };
    if selected.is_empty() {
        let msg = format!(
            "no records at perturbation level {level} in {} (available: {:?})",
            manifest_path.as_ref().display(),
            manifest.levels()
        );
        log::warn!("{msg}");
        dataset.warnings.push(msg);
        return Ok(dataset);
    }

    let mut offenders = Vec::new();
    let mut class_counts: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &selected {
        *class_counts.entry(r.num_classes).or_default() += 1;
    }
    if class_counts.len() > 1 {
        offenders.push(format!("inconsistent num_classes across records: {class_counts:?}"));
    }
    let num_classes = *class_counts.keys().next_back().unwrap();

    let mut seen: HashMap<(Split, &str), usize> = HashMap::new();
    let mut split_of: HashMap<&str, Split> = HashMap::new();
    for r in &selected {
        let id = r.subject_id.as_str();
        *seen.entry((r.split, id)).or_default() += 1;
        match split_of.get(id) {
            Some(&s) if s != r.split => offenders.push(format!(
                "subject {id} appears in both {s} and {} splits",
                r.split
            )),
            _ => {
                split_of.insert(id, r.split);
            }
        }
    }
    let mut dups: Vec<_> = seen.iter().filter(|(_, &n)| n > 1).map(|((s, id), n)| (*s, *id, *n)).collect();
    dups.sort();
    for (s, id, n) in dups {
        offenders.push(format!("duplicate subject {id} ({n} records) in {s} split"));
    }

    for r in &selected {
        if r.label >= r.num_classes {
            offenders.push(format!(
                "subject {}: label {} out of range for {} classes",
                r.subject_id, r.label, r.num_classes
            ));
        }
        let path = manifest.resolve(r);
        match read_feature_file::<T>(&path) {
            Ok(features) => {
                let rec = SubjectRecord {
                    subject_id: r.subject_id.clone(),
                    features,
                    label: r.label,
                };
                match r.split {
                    Split::Train => dataset.train.push(rec),
                    Split::Val => dataset.val.push(rec),
                    Split::Test => dataset.test.push(rec),
                }
            }
            Err(Error::Io(e)) => offenders.push(format!("{}: {e}", path.display())),
            Err(e) => offenders.push(e.to_string()),
        }
    }
    if !offenders.is_empty() {
        return Err(Error::Load { offenders });
    }
    dataset.num_classes = num_classes;
    Ok(dataset)
}
