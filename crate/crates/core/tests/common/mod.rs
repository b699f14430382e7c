#![allow(dead_code)]

use mgnet::graph;
use mgnet::model::{forward, ModelParams, ModelShape, Mode};
use mgnet::training::{backward, loss, LossKind};
use mgnet::{Matrix, Tensor4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(dims: [usize; 4], seed: u64) -> Tensor4 {
    let mut r = rng(seed);
    let len = dims.iter().product();
    Tensor4::new(dims, (0..len).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn random_symmetric_tensor(dims: [usize; 4], seed: u64) -> Tensor4 {
    let mut r = rng(seed);
    Tensor4::from_slices(dims, |_, _| {
        let mut m = Matrix::from_fn(dims[0], dims[1], |_, _| r.random_range(-1.0..1.0));
        m.symmetrize();
        m
    })
    .unwrap()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

pub fn random_a_hat(n: usize, seed: u64) -> Matrix {
    let u = random_matrix(n, 3, seed);
    graph::normalize(&graph::knn_adjacency(&u, (n - 1).min(3), None).unwrap()).unwrap()
}

pub struct GradProblem {
    pub input: Tensor4,
    pub a_hat: Matrix,
    pub params: ModelParams,
    pub labels: Vec<usize>,
    pub kind: LossKind,
}

impl GradProblem {
    pub fn new(n: usize, m: usize, s: usize, layers: usize, d_out: usize, seed: u64) -> Self {
        let input = random_tensor([n, n, m, s], seed);
        let a_hat = random_a_hat(n, seed ^ 0x11);
        let mut params =
            ModelParams::init(ModelShape::new(n, m, layers, d_out), 0.0, seed ^ 0x22).unwrap();
        let mut r = rng(seed ^ 0x33);
        params.alpha = (0..m).map(|_| r.random_range(0.2..1.0)).collect();
        params.fcn_bias = vec![r.random_range(-0.5..0.5), r.random_range(-0.5..0.5)];
        let labels = (0..s).map(|i| i % 2).collect();
        Self {
            input,
            a_hat,
            params,
            labels,
            kind: LossKind::CrossEntropy,
        }
    }

    /// First problem from `seed` upward whose pre-activations all clear
    /// `margin`, so central differences never straddle a ReLU kink.
    pub fn away_from_kinks(
        n: usize,
        m: usize,
        s: usize,
        layers: usize,
        d_out: usize,
        seed: u64,
        margin: f64,
    ) -> Self {
        (seed..)
            .map(|k| Self::new(n, m, s, layers, d_out, k))
            .find(|p| p.min_abs_pre_activation() > margin)
            .unwrap()
    }

    pub fn loss_at(&self, params: &ModelParams) -> f64 {
        let t = forward(&self.input, &self.a_hat, params, Mode::Eval, 0).unwrap();
        loss(&t.probabilities, &self.labels, self.kind).unwrap()
    }

    /// Smallest |pre-activation| across layers; FD is unreliable near kinks.
    pub fn min_abs_pre_activation(&self) -> f64 {
        let t = forward(&self.input, &self.a_hat, &self.params, Mode::Eval, 0).unwrap();
        t.layers
            .iter()
            .flat_map(|l| l.pre_activation.data().iter().map(|v| v.abs()))
            .fold(f64::INFINITY, f64::min)
    }
}

pub struct GradCheck {
    pub group: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheck {
    pub fn passes(&self, rel_tol: f64, abs_tol: f64) -> bool {
        let diff = (self.analytic - self.numeric).abs();
        let scale = self.analytic.abs().max(self.numeric.abs());
        diff < abs_tol || diff / scale < rel_tol
    }
}

/// Central differences for `per_group` random entries of every parameter
/// group (all entries for small groups).
pub fn check_gradients(p: &GradProblem, per_group: usize, step: f64, seed: u64) -> Vec<GradCheck> {
    let trace = forward(&p.input, &p.a_hat, &p.params, Mode::Train, 0).unwrap();
    let grads = backward(&trace, &p.params, &p.a_hat, &p.labels, p.kind).unwrap();
    let analytic: Vec<(String, Vec<f64>)> =
        grads.groups().into_iter().map(|(n, g)| (n, g.to_vec())).collect();
    let mut r = rng(seed);
    let mut out = Vec::new();
    for (gi, (name, g)) in analytic.iter().enumerate() {
        let indices: Vec<usize> = if g.len() <= per_group {
            (0..g.len()).collect()
        } else {
            (0..per_group).map(|_| r.random_range(0..g.len())).collect()
        };
        for idx in indices {
            let eval = |delta: f64| {
                let mut q = p.params.clone();
                q.groups_mut()[gi].1[idx] += delta;
                p.loss_at(&q)
            };
            let numeric = (eval(step) - eval(-step)) / (2.0 * step);
            out.push(GradCheck {
                group: name.clone(),
                index: idx,
                analytic: g[idx],
                numeric,
            });
        }
    }
    out
}
