//! Cross-modality projection factors obtained by HOSVD of the cohort tensor.
//!
//! `U1` and `U2` are the leading eigenvectors of the mode-0 and mode-1 Gram
//! matrices. Their product with each slice, `C_ms = U1^T X_ms U2`, minimizes
//! `Σ ||X_ms - U1 C_ms U2^T||_F^2` under orthonormality. Truncation of `U1` is
//! decided by the fraction of squared singular-value mass retained.

use crate::error::{Error, Result};
use crate::tensor::{sym_eig, Matrix, Tensor4};

/// Default fraction of spectral energy kept when truncating `U1`.
pub const DEFAULT_ENERGY_THRESHOLD: f64 = 0.95;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
const ZERO_EIGENVALUE_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    pub u1: Matrix,
    pub u2: Matrix,
    /// Mode-0 singular values, non-increasing.
    pub singular_values: Vec<f64>,
    pub trunc_rank: usize,
    pub energy_threshold: f64,
}

/// Computes the orthonormal factors of a cohort tensor.
pub fn solve_projections(x: &Tensor4, energy_threshold: f64) -> Result<ProjectionPair> {
    validate_threshold(energy_threshold)?;
    let [n0, n1, _, _] = x.dims();
    if n0 != n1 {
        return Err(Error::shape(format!(
            "connectivity slices must be square, got {n0}x{n1}"
        )));
    }
    if x.data().iter().all(|&v| v == 0.0) {
        return Err(Error::data(
            "cohort tensor is identically zero; projection is undefined",
        ));
    }

    let mode0 = sym_eig(&x.unfold(0)?.gram())?;
    let mode1 = sym_eig(&x.unfold(1)?.gram())?;

    let largest = mode0.values[0].max(0.0);
    let singular_values: Vec<f64> = mode0
        .values
        .iter()
        .map(|&l| {
            if l <= ZERO_EIGENVALUE_RATIO * largest {
                0.0
            } else {
                l.sqrt()
            }
        })
        .collect();
    let trunc_rank = energy_rank(&singular_values, energy_threshold)?;

    Ok(ProjectionPair {
        u1: mode0.vectors,
        u2: mode1.vectors,
        singular_values,
        trunc_rank,
        energy_threshold,
    })
}

fn validate_threshold(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid(format!(
            "energy threshold must lie in (0, 1], got {tau}"
        )));
    }
    Ok(())
}

/// Smallest `k` with `Σ_{i<k} σ_i² / Σ σ_i² >= tau`.
pub fn energy_rank(singular_values: &[f64], tau: f64) -> Result<usize> {
    validate_threshold(tau)?;
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return Err(Error::data("all singular values are zero"));
    }
    let mut acc = 0.0;
    for (k, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc / total >= tau {
            return Ok(k + 1);
        }
    }
    // Only reachable through rounding when tau == 1.
    Ok(singular_values.len())
}

fn check_conforms(x: &Tensor4, p: &ProjectionPair) -> Result<()> {
    let [n0, n1, _, _] = x.dims();
    if p.u1.rows() != n0 || p.u2.rows() != n1 {
        return Err(Error::shape(format!(
            "projection factors ({}x{}, {}x{}) do not conform to tensor {:?}",
            p.u1.rows(),
            p.u1.cols(),
            p.u2.rows(),
            p.u2.cols(),
            x.dims()
        )));
    }
    Ok(())
}

/// Coefficient tensor `C = X ×0 U1^T ×1 U2^T`, i.e. `C_ms = U1^T X_ms U2`.
pub fn project(x: &Tensor4, p: &ProjectionPair) -> Result<Tensor4> {
    check_conforms(x, p)?;
    x.mode_n_product(&p.u1.transpose(), 0)?
        .mode_n_product(&p.u2.transpose(), 1)
}

/// Node-side projection `U1^T X_ms` only; `U2` is absorbed by the first
/// layer's weights, so this is the model input.
pub fn project_nodes(x: &Tensor4, p: &ProjectionPair) -> Result<Tensor4> {
    check_conforms(x, p)?;
    x.mode_n_product(&p.u1.transpose(), 0)
}

/// `C ×0 U1 ×1 U2`.
pub fn reconstruct(c: &Tensor4, p: &ProjectionPair) -> Result<Tensor4> {
    c.mode_n_product(&p.u1, 0)?.mode_n_product(&p.u2, 1)
}

/// Leading `trunc_rank` columns of `U1`; row `i` describes node `i`.
pub fn truncated_u1(p: &ProjectionPair) -> Matrix {
    p.u1
        .leading_columns(p.trunc_rank)
        .expect("trunc_rank is within 1..=N by construction")
}
