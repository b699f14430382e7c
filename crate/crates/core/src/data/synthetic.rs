//! Planted-community cohorts for testing the pipeline without clinical data.
//!
//! Nodes split into two blocks. Each modality's expected edge weight is
//! `signal_strength[m]` times a block pattern: `within_density` inside a
//! block and `inter_density[label]` across blocks. Symmetric Gaussian noise
//! with standard deviation `noise_std` is added on top; the diagonal is zero.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::cohort::Cohort;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, Stream};
use crate::tensor::{Matrix, Tensor4};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub n_nodes: usize,
    pub modalities: Vec<String>,
    pub per_class: usize,
    /// One entry per modality; 0 makes that modality pure noise.
    pub signal_strength: Vec<f64>,
    pub noise_std: f64,
    pub within_density: f64,
    /// Cross-block density for class 0 and class 1.
    pub inter_density: [f64; 2],
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            name: "synthetic".into(),
            n_nodes: 32,
            modalities: vec!["m0".into(), "m1".into()],
            per_class: 50,
            signal_strength: vec![0.0, 5.0],
            noise_std: 1.0,
            within_density: 0.7,
            inter_density: [0.2, 0.4],
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 4 {
            return Err(Error::invalid(format!("need at least 4 nodes, got {}", self.n_nodes)));
        }
        if self.per_class < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 subjects per class, got {}",
                self.per_class
            )));
        }
        if self.modalities.is_empty() {
            return Err(Error::invalid("need at least one modality"));
        }
        if self.signal_strength.len() != self.modalities.len() {
            return Err(Error::invalid(format!(
                "{} signal strengths for {} modalities",
                self.signal_strength.len(),
                self.modalities.len()
            )));
        }
        if let Some(s) = self.signal_strength.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::invalid(format!("signal strength must be >= 0, got {s}")));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid(format!("noise std must be >= 0, got {}", self.noise_std)));
        }
        for d in [self.within_density, self.inter_density[0], self.inter_density[1]] {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::invalid(format!("density {d} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn subject_count(&self) -> usize {
        2 * self.per_class
    }

    fn block(&self, i: usize) -> usize {
        usize::from(i >= self.n_nodes / 2)
    }
}

/// One subject's matrices. Noise depends only on the seed and subject index,
/// never on the label, so two labels at the same index differ only through
/// the planted pattern.
pub fn synthetic_subject(spec: &SyntheticSpec, index: usize, label: usize) -> Result<Vec<Matrix>> {
    spec.validate()?;
    if label > 1 {
        return Err(Error::invalid(format!("label {label} outside {{0, 1}}")));
    }
    let n = spec.n_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, Stream::Synthetic, index as u64));
    let normal = Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = Vec::with_capacity(spec.modalities.len());
    for &strength in &spec.signal_strength {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let density = if spec.block(i) == spec.block(j) {
                    spec.within_density
                } else {
                    spec.inter_density[label]
                };
                let v = strength * density + normal.sample(&mut rng);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// Labels alternate 0, 1, 0, 1, ... so every prefix is close to balanced.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Cohort> {
    spec.validate()?;
    let n = spec.n_nodes;
    let m = spec.modalities.len();
    let s = spec.subject_count();
    let mut tensor = Tensor4::zeros([n, n, m, s])?;
    let mut labels = Vec::with_capacity(s);
    let mut ids = Vec::with_capacity(s);
    for si in 0..s {
        let label = si % 2;
        for (mi, mat) in synthetic_subject(spec, si, label)?.iter().enumerate() {
            tensor.set_slice(mi, si, mat)?;
        }
        labels.push(label);
        ids.push(format!("sub{si:04}"));
    }
    Cohort::new(spec.name.clone(), spec.modalities.clone(), ids, labels, tensor)
}
