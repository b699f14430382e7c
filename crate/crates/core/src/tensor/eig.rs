//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use super::Matrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
/// Converged once the off-diagonal mass falls below this fraction of `||G||_F`.
const OFF_DIAGONAL_TOL: f64 = 1e-15;
/// Relative asymmetry accepted on input.
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix: values descending, vectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Eigendecomposition `G = V diag(λ) V^T` of a symmetric matrix.
///
/// Eigenvalues are returned in descending order (stable with respect to the
/// rotation order for exact ties). Each eigenvector column is negated when its
/// largest-magnitude entry is negative, the first such entry winning ties, so
/// identical input yields identical output.
pub fn sym_eig(g: &Matrix) -> Result<SymEigen> {
    if !g.is_square() {
        return Err(Error::shape(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            g.rows(),
            g.cols()
        )));
    }
    let n = g.rows();
    let scale = g.max_abs();
    if g.asymmetry() > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (max asymmetry {:e})",
            g.asymmetry()
        )));
    }

    let mut a = g.clone();
    a.symmetrize();
    let mut v = Matrix::identity(n);
    let frob = a.frobenius_norm();

    let mut converged = frob == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged || off_diagonal_norm(&a) <= OFF_DIAGONAL_TOL * frob {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        let off = off_diagonal_norm(&a);
        // Roundoff can stall just above the target; anything this small still
        // meets the reconstruction contract.
        if off > 1e-12 * frob {
            return Err(Error::Numerical(format!(
                "Jacobi iteration did not converge (off-diagonal {off:e}, norm {frob:e})"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)));

    let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src);
        fix_sign(&mut col);
        for (i, x) in col.into_iter().enumerate() {
            vectors.set(i, dst, x);
        }
    }
    Ok(SymEigen { values, vectors })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a.get(i, j) * a.get(i, j);
            }
        }
    }
    sum.sqrt()
}

/// One Jacobi rotation annihilating `a[p][q]`; `A <- J^T A J`, `V <- V J`.
fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    if apq == 0.0 {
        return;
    }
    let app = a.get(p, p);
    let aqq = a.get(q, q);
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    if t == 0.0 {
        return;
    }
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();

    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);

    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

fn fix_sign(col: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in col.iter().enumerate() {
        if x.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        m.symmetrize();
        m
    }

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        assert_eq!(e.vectors, Matrix::identity(3));
    }

    #[test]
    fn diagonal_case() {
        let e = sym_eig(&Matrix::from_diag(&[1.0, 4.0])).unwrap();
        assert_eq!(e.values, vec![4.0, 1.0]);
        assert_eq!(e.vectors.column(0), vec![0.0, 1.0]);
        assert_eq!(e.vectors.column(1), vec![1.0, 0.0]);
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        for seed in 0..10 {
            let g = random_symmetric(8, seed);
            let e = sym_eig(&g).unwrap();
            let recon = e
                .vectors
                .matmul(&Matrix::from_diag(&e.values))
                .unwrap()
                .matmul(&e.vectors.transpose())
                .unwrap();
            let err = recon.max_abs_diff(&g);
            let rel = Matrix::from_fn(8, 8, |i, j| recon.get(i, j) - g.get(i, j)).frobenius_norm()
                / g.frobenius_norm();
            assert!(rel < 1e-8, "seed {seed}: rel {rel} abs {err}");

            let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
            assert!(vtv.max_abs_diff(&Matrix::identity(8)) < 1e-10);

            // G V = V diag(λ)
            let gv = g.matmul(&e.vectors).unwrap();
            let vl = e.vectors.matmul(&Matrix::from_diag(&e.values)).unwrap();
            assert!(gv.max_abs_diff(&vl) < 1e-8 * g.frobenius_norm());

            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn largest_entry_of_each_vector_is_positive() {
        let e = sym_eig(&random_symmetric(12, 99)).unwrap();
        for j in 0..12 {
            let col = e.vectors.column(j);
            let big = col.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn rejects_asymmetric_and_non_square() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&m), Err(Error::InvalidArgument(_))));
        assert!(matches!(sym_eig(&Matrix::zeros(2, 3)), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_matrix() {
        let e = sym_eig(&Matrix::zeros(4, 4)).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn larger_matrix_converges() {
        let g = random_symmetric(64, 3);
        let e = sym_eig(&g).unwrap();
        let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
        assert!(vtv.max_abs_diff(&Matrix::identity(64)) < 1e-10);
    }
}
