//! Cohort manifests: a JSON index of subjects, labels and per-modality
//! connectivity matrices stored as CSV files next to it.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix_io::{read_matrix, write_matrix};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor4};

/// Loaded slices whose asymmetry exceeds this are rejected; smaller
/// asymmetry is averaged away.
pub const SYMMETRY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub name: String,
    pub n_nodes: usize,
    pub modalities: Vec<String>,
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    /// Kept signed so out-of-range labels are reported rather than rejected
    /// by the JSON decoder.
    pub label: i64,
    pub matrices: Vec<MatrixRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRef {
    pub modality: String,
    pub path: PathBuf,
}

/// Subjects x modalities of square connectivity matrices with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub name: String,
    pub modalities: Vec<String>,
    pub subject_ids: Vec<String>,
    pub labels: Vec<usize>,
    /// `N x N x M x S`.
    pub tensor: Tensor4,
}

impl Cohort {
    pub fn new(
        name: impl Into<String>,
        modalities: Vec<String>,
        subject_ids: Vec<String>,
        labels: Vec<usize>,
        tensor: Tensor4,
    ) -> Result<Self> {
        let [n0, n1, m, s] = tensor.dims();
        if n0 != n1 {
            return Err(Error::shape(format!("connectivity slices must be square, got {n0}x{n1}")));
        }
        if modalities.len() != m || subject_ids.len() != s || labels.len() != s {
            return Err(Error::shape(format!(
                "{} modality names, {} ids and {} labels for tensor {:?}",
                modalities.len(),
                subject_ids.len(),
                labels.len(),
                tensor.dims()
            )));
        }
        if let Some(&y) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::data(format!("label {y} outside {{0, 1}}")));
        }
        Ok(Self {
            name: name.into(),
            modalities,
            subject_ids,
            labels,
            tensor,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.tensor.dims()[0]
    }

    pub fn subject_count(&self) -> usize {
        self.labels.len()
    }

    pub fn modality_count(&self) -> usize {
        self.modalities.len()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|&&y| y == 1).count();
        [self.labels.len() - pos, pos]
    }

    /// Same subjects, only the listed modalities.
    pub fn with_modalities(&self, keep: &[usize]) -> Result<Cohort> {
        let tensor = self.tensor.select_modalities(keep)?;
        Ok(Cohort {
            name: self.name.clone(),
            modalities: keep.iter().map(|&m| self.modalities[m].clone()).collect(),
            subject_ids: self.subject_ids.clone(),
            labels: self.labels.clone(),
            tensor,
        })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn read_manifest(path: &Path) -> Result<CohortManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}

/// Loads every matrix referenced by a manifest into a cohort tensor, in
/// manifest order.
pub fn load_cohort(manifest_path: &Path) -> Result<Cohort> {
    let manifest = read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let n = manifest.n_nodes;
    let m = manifest.modalities.len();
    let s = manifest.subjects.len();
    if n == 0 || m == 0 || s == 0 {
        return Err(Error::data(format!(
            "{}: manifest needs nodes, modalities and subjects (got N={n}, M={m}, S={s})",
            manifest_path.display()
        )));
    }
    let mut seen = HashSet::new();
    for name in &manifest.modalities {
        if !seen.insert(name) {
            return Err(Error::data(format!("modality {name:?} listed twice")));
        }
    }

    let mut tensor = Tensor4::zeros([n, n, m, s])?;
    let mut labels = Vec::with_capacity(s);
    let mut ids = Vec::with_capacity(s);
    for (si, subject) in manifest.subjects.iter().enumerate() {
        let who = format!("subject {:?}", subject.id);
        let label = match subject.label {
            0 => 0,
            1 => 1,
            other => return Err(Error::data(format!("{who}: label {other} outside {{0, 1}}"))),
        };
        for (mi, modality) in manifest.modalities.iter().enumerate() {
            let refs: Vec<&MatrixRef> =
                subject.matrices.iter().filter(|r| &r.modality == modality).collect();
            let entry = match refs.as_slice() {
                [one] => *one,
                [] => return Err(Error::data(format!("{who}: missing modality {modality:?}"))),
                _ => return Err(Error::data(format!("{who}: modality {modality:?} listed more than once"))),
            };
            let file = resolve(base, &entry.path);
            let mut mat = read_matrix(&file).map_err(|e| match e {
                Error::Io { path, source } => Error::Data(format!(
                    "{who}, modality {modality:?}: cannot read {}: {source}",
                    path.display()
                )),
                other => Error::Data(format!("{who}, modality {modality:?}: {other}")),
            })?;
            if mat.shape() != (n, n) {
                return Err(Error::data(format!(
                    "{who}, modality {modality:?}: {} is {}x{}, expected {n}x{n}",
                    file.display(),
                    mat.rows(),
                    mat.cols()
                )));
            }
            let asym = mat.asymmetry();
            if asym > SYMMETRY_TOL {
                return Err(Error::data(format!(
                    "{who}, modality {modality:?}: {} is not symmetric (max asymmetry {asym:e})",
                    file.display()
                )));
            }
            mat.symmetrize();
            tensor.set_slice(mi, si, &mat)?;
        }
        if let Some(extra) = subject
            .matrices
            .iter()
            .find(|r| !manifest.modalities.contains(&r.modality))
        {
            return Err(Error::data(format!(
                "{who}: unknown modality {:?}",
                extra.modality
            )));
        }
        labels.push(label);
        ids.push(subject.id.clone());
    }
    let cohort = Cohort::new(manifest.name, manifest.modalities, ids, labels, tensor)?;
    if cohort.class_counts().contains(&0) {
        return Err(Error::data("cohort needs at least one subject of each class"));
    }
    Ok(cohort)
}

/// Writes one CSV per subject and modality plus `manifest.json` into `dir`;
/// returns the manifest path.
pub fn save_cohort(cohort: &Cohort, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut subjects = Vec::with_capacity(cohort.subject_count());
    for (s, id) in cohort.subject_ids.iter().enumerate() {
        let mut matrices = Vec::with_capacity(cohort.modality_count());
        for (m, modality) in cohort.modalities.iter().enumerate() {
            let file = PathBuf::from(format!("{id}_{modality}.csv"));
            write_matrix(&dir.join(&file), &cohort.tensor.slice(m, s))?;
            matrices.push(MatrixRef {
                modality: modality.clone(),
                path: file,
            });
        }
        subjects.push(SubjectEntry {
            id: id.clone(),
            label: cohort.labels[s] as i64,
            matrices,
        });
    }
    let manifest = CohortManifest {
        name: cohort.name.clone(),
        n_nodes: cohort.n_nodes(),
        modalities: cohort.modalities.clone(),
        subjects,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Convenience for building a cohort slice by slice in tests and tools.
pub fn cohort_from_matrices(
    name: &str,
    modalities: &[&str],
    subjects: &[(String, usize, Vec<Matrix>)],
) -> Result<Cohort> {
    let s = subjects.len();
    let m = modalities.len();
    let n = subjects
        .first()
        .and_then(|(_, _, mats)| mats.first())
        .map_or(0, Matrix::rows);
    let mut tensor = Tensor4::zeros([n, n, m, s])?;
    for (si, (_, _, mats)) in subjects.iter().enumerate() {
        if mats.len() != m {
            return Err(Error::shape(format!("subject {si} has {} matrices for {m} modalities", mats.len())));
        }
        for (mi, mat) in mats.iter().enumerate() {
            tensor.set_slice(mi, si, mat)?;
        }
    }
    Cohort::new(
        name,
        modalities.iter().map(|s| s.to_string()).collect(),
        subjects.iter().map(|(id, _, _)| id.clone()).collect(),
        subjects.iter().map(|(_, y, _)| *y).collect(),
        tensor,
    )
}
