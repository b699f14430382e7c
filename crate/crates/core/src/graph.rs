//! Population graph shared by every GCN layer: a KNN graph over node
//! descriptors weighted by a Gaussian kernel, and its renormalized form.

use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGraph {
    /// `A`: symmetric, zero diagonal, weights in `[0, 1]`.
    pub adjacency: Matrix,
    /// `Â = D̃^{-1/2} (A + I) D̃^{-1/2}`.
    pub normalized: Matrix,
    pub k_neighbors: usize,
    pub kernel_width: f64,
}

impl PopulationGraph {
    pub fn build(descriptors: &Matrix, k: usize, width: Option<f64>) -> Result<Self> {
        let (adjacency, kernel_width) = knn_adjacency_with_width(descriptors, k, width)?;
        let normalized = normalize(&adjacency)?;
        Ok(Self {
            adjacency,
            normalized,
            k_neighbors: k,
            kernel_width,
        })
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.rows()
    }
}

/// Squared Euclidean distances between all rows.
fn pairwise_sq_distances(u: &Matrix) -> Matrix {
    let n = u.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = u
                .row(i)
                .iter()
                .zip(u.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

/// Median of the `N(N-1)/2` pairwise Euclidean distances.
pub fn median_distance(u: &Matrix) -> f64 {
    let n = u.rows();
    let d = pairwise_sq_distances(u);
    let mut all: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| d.get(i, j).sqrt())
        .collect();
    if all.is_empty() {
        return 0.0;
    }
    all.sort_by(f64::total_cmp);
    let mid = all.len() / 2;
    if all.len() % 2 == 1 {
        all[mid]
    } else {
        0.5 * (all[mid - 1] + all[mid])
    }
}

/// Gaussian-kernel KNN adjacency over the rows of `u`.
///
/// Nodes `i` and `j` are connected when either is among the other's `k`
/// nearest neighbours (distance ties go to the lower index); the weight is
/// `exp(-||u_i - u_j||² / 2σ²)`. Without an explicit `σ` the median pairwise
/// distance is used.
pub fn knn_adjacency(u: &Matrix, k: usize, width: Option<f64>) -> Result<Matrix> {
    knn_adjacency_with_width(u, k, width).map(|(a, _)| a)
}

fn knn_adjacency_with_width(u: &Matrix, k: usize, width: Option<f64>) -> Result<(Matrix, f64)> {
    let n = u.rows();
    if n < 2 {
        return Err(Error::invalid("KNN graph needs at least two nodes"));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::invalid(format!(
            "K = {k} out of range 1..={} for {n} nodes",
            n - 1
        )));
    }
    let sigma = match width {
        Some(s) if s.is_finite() && s > 0.0 => s,
        Some(s) => {
            return Err(Error::invalid(format!(
                "kernel width must be positive and finite, got {s}"
            )))
        }
        None => {
            let med = median_distance(u);
            if med <= 0.0 {
                return Err(Error::data(
                    "all node descriptors coincide; median kernel width is zero \
                     (pass an explicit sigma)",
                ));
            }
            med
        }
    };

    let d2 = pairwise_sq_distances(u);
    let mut linked = vec![false; n * n];
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| d2.get(i, a).total_cmp(&d2.get(i, b)).then(a.cmp(&b)));
        for &j in &order[..k] {
            linked[i * n + j] = true;
            linked[j * n + i] = true;
        }
    }

    let mut a = Matrix::zeros(n, n);
    let denom = 2.0 * sigma * sigma;
    for i in 0..n {
        for j in (i + 1)..n {
            if linked[i * n + j] {
                let w = (-d2.get(i, j) / denom).exp();
                a.set(i, j, w);
                a.set(j, i, w);
            }
        }
    }
    Ok((a, sigma))
}

/// Symmetric renormalization with self-loops.
pub fn normalize(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "adjacency must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let scale = a.max_abs().max(1.0);
    if a.asymmetry() > 1e-12 * scale {
        return Err(Error::invalid(format!(
            "adjacency is not symmetric (max asymmetry {:e})",
            a.asymmetry()
        )));
    }
    if a.data().iter().any(|&v| v < 0.0) {
        return Err(Error::invalid("adjacency has negative weights"));
    }
    let n = a.rows();
    let degree: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum::<f64>() + 1.0).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let tilde = a.get(i, j) + if i == j { 1.0 } else { 0.0 };
            let v = tilde / (degree[i] * degree[j]).sqrt();
            out.set(i, j, v);
            out.set(j, i, v);
        }
    }
    Ok(out)
}
