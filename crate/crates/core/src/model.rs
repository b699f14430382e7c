//! Multiplex GCN: tensorized propagation over a shared population graph,
//! learnable modality pooling and a softmax classification head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3, Tensor4};

pub const NUM_CLASSES: usize = 2;
pub const MAX_DROPOUT: f64 = 0.5;

/// Architecture of a model: `N` nodes, `M` modalities, `L` layers of widths
/// `N -> d_out -> ... -> d_out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub nodes: usize,
    pub input_features: usize,
    pub modalities: usize,
    pub layer_count: usize,
    pub d_out: usize,
    pub classes: usize,
}

impl ModelShape {
    pub fn new(nodes: usize, modalities: usize, layer_count: usize, d_out: usize) -> Self {
        Self {
            nodes,
            input_features: nodes,
            modalities,
            layer_count,
            d_out,
            classes: NUM_CLASSES,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_features];
        w.extend(std::iter::repeat_n(self.d_out, self.layer_count));
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// `W^(l)`, each `D_l x D_{l+1}`.
    pub layers: Vec<Matrix>,
    /// Modality importance weights, one per modality.
    pub alpha: Vec<f64>,
    /// `classes x (N * D_out)`; row `k` is the class weight vector.
    pub fcn_weights: Matrix,
    pub fcn_bias: Vec<f64>,
    pub dropout_rate: f64,
    /// When false `alpha` is held fixed (average pooling).
    pub train_alpha: bool,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..limit))
}

impl ModelParams {
    /// Glorot-uniform weights, zero bias, `alpha = 1/M`.
    pub fn init(shape: ModelShape, dropout_rate: f64, seed: u64) -> Result<Self> {
        if shape.nodes == 0 || shape.modalities == 0 || shape.d_out == 0 || shape.input_features == 0 {
            return Err(Error::invalid(format!("degenerate model shape {shape:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = shape.widths();
        let layers = widths
            .windows(2)
            .map(|w| glorot(w[0], w[1], &mut rng))
            .collect();
        let fcn_weights = glorot(shape.classes, shape.nodes * shape.d_out, &mut rng);
        let params = Self {
            layers,
            alpha: vec![1.0 / shape.modalities as f64; shape.modalities],
            fcn_weights,
            fcn_bias: vec![0.0; shape.classes],
            dropout_rate,
            train_alpha: true,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn d_out(&self) -> usize {
        self.layers.last().map_or(0, Matrix::cols)
    }

    pub fn shape(&self) -> ModelShape {
        let input_features = self.layers.first().map_or(0, Matrix::rows);
        let d_out = self.d_out();
        ModelShape {
            nodes: self.fcn_weights.cols() / d_out.max(1),
            input_features,
            modalities: self.alpha.len(),
            layer_count: self.layers.len(),
            d_out,
            classes: self.fcn_weights.rows(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.layers.len()) {
            return Err(Error::invalid(format!(
                "layer count must be 1, 2 or 3, got {}",
                self.layers.len()
            )));
        }
        for (l, pair) in self.layers.windows(2).enumerate() {
            if pair[0].cols() != pair[1].rows() {
                return Err(Error::shape(format!(
                    "layer {l} outputs {} features but layer {} expects {}",
                    pair[0].cols(),
                    l + 1,
                    pair[1].rows()
                )));
            }
        }
        if self.alpha.is_empty() {
            return Err(Error::invalid("alpha must have one entry per modality"));
        }
        if !(0.0..=MAX_DROPOUT).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout rate must lie in [0, {MAX_DROPOUT}], got {}",
                self.dropout_rate
            )));
        }
        if self.fcn_bias.len() != self.fcn_weights.rows() {
            return Err(Error::shape(format!(
                "FCN bias has {} entries for {} classes",
                self.fcn_bias.len(),
                self.fcn_weights.rows()
            )));
        }
        if !self.fcn_weights.cols().is_multiple_of(self.d_out()) {
            return Err(Error::shape(format!(
                "FCN input width {} is not a multiple of d_out {}",
                self.fcn_weights.cols(),
                self.d_out()
            )));
        }
        let finite = self.layers.iter().all(|w| w.data().iter().all(|v| v.is_finite()))
            && self.alpha.iter().all(|v| v.is_finite())
            && self.fcn_weights.data().iter().all(|v| v.is_finite())
            && self.fcn_bias.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numerical("model parameters contain non-finite values".into()));
        }
        Ok(())
    }

    /// Named flat views of every parameter group, in a fixed order.
    pub fn groups(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, w)| (format!("layer{l}"), w.data()))
            .collect();
        out.push(("alpha".into(), &self.alpha));
        out.push(("fcn_weights".into(), self.fcn_weights.data()));
        out.push(("fcn_bias".into(), &self.fcn_bias));
        out
    }

    pub fn groups_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = self
            .layers
            .iter_mut()
            .enumerate()
            .map(|(l, w)| (format!("layer{l}"), w.data_mut()))
            .collect();
        out.push(("alpha".into(), &mut self.alpha));
        out.push(("fcn_weights".into(), self.fcn_weights.data_mut()));
        out.push(("fcn_bias".into(), &mut self.fcn_bias));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Intermediates of one layer: `P = Â^T H`, `Z = P W`, `H' = ReLU(Z)`.
#[derive(Debug, Clone)]
pub struct LayerTrace {
    pub propagated: Tensor4,
    pub pre_activation: Tensor4,
    pub activation: Tensor4,
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub layers: Vec<LayerTrace>,
    /// Pooled embeddings `F`, `N x D_out x S`, before dropout.
    pub pooled: Tensor3,
    /// Inverted-dropout multipliers, `S x (N * D_out)`; `None` when no
    /// dropout was applied.
    pub dropout_mask: Option<Matrix>,
    /// Flattened FCN inputs `f_s` after dropout, `S x (N * D_out)`.
    pub features: Matrix,
    pub logits: Matrix,
    pub probabilities: Matrix,
}

impl ForwardTrace {
    pub fn subjects(&self) -> usize {
        self.probabilities.rows()
    }

    pub fn output(&self) -> &Tensor4 {
        &self.layers.last().expect("at least one layer").activation
    }

    /// Probability of class 1 per subject.
    pub fn positive_scores(&self) -> Vec<f64> {
        self.probabilities.column(1)
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn check_a_hat(h: &Tensor4, a_hat: &Matrix) -> Result<()> {
    let n = h.dims()[0];
    if a_hat.shape() != (n, n) {
        return Err(Error::shape(format!(
            "normalized adjacency is {}x{}, features have {n} nodes",
            a_hat.rows(),
            a_hat.cols()
        )));
    }
    Ok(())
}

fn propagate(h: &Tensor4, a_hat: &Matrix, w: &Matrix) -> Result<LayerTrace> {
    check_a_hat(h, a_hat)?;
    if w.rows() != h.dims()[1] {
        return Err(Error::shape(format!(
            "weight matrix is {}x{} but features have width {}",
            w.rows(),
            w.cols(),
            h.dims()[1]
        )));
    }
    let propagated = h.mode_n_product(&a_hat.transpose(), 0)?;
    let pre_activation = propagated.mode_n_product(&w.transpose(), 1)?;
    let activation = pre_activation.map(relu);
    Ok(LayerTrace {
        propagated,
        pre_activation,
        activation,
    })
}

/// One tensorized GCN layer, `ReLU(H ×0 Â^T ×1 W^T)`, applied to every
/// modality and subject at once.
pub fn gcn_layer(h: &Tensor4, a_hat: &Matrix, w: &Matrix) -> Result<Tensor4> {
    propagate(h, a_hat, w).map(|t| t.activation)
}

/// `F(:, :, s) = Σ_m α_m H(:, :, m, s)`.
pub fn modality_pool(h_last: &Tensor4, alpha: &[f64]) -> Result<Tensor3> {
    let m = h_last.dims()[2];
    if alpha.len() != m {
        return Err(Error::shape(format!(
            "alpha has {} entries for {m} modalities",
            alpha.len()
        )));
    }
    let row = Matrix::new(1, m, alpha.to_vec())?;
    h_last.mode_n_product(&row, 2)?.squeeze_modality()
}

/// `weights * f + bias`.
pub fn fcn_logits(f: &[f64], weights: &Matrix, bias: &[f64]) -> Result<Vec<f64>> {
    if f.len() != weights.cols() || bias.len() != weights.rows() {
        return Err(Error::shape(format!(
            "FCN expects {} inputs and {} biases, got {} and {}",
            weights.cols(),
            weights.rows(),
            f.len(),
            bias.len()
        )));
    }
    Ok((0..weights.rows())
        .map(|k| weights.row(k).iter().zip(f).map(|(w, x)| w * x).sum::<f64>() + bias[k])
        .collect())
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Class probabilities for one flattened embedding.
pub fn fcn_softmax(f: &[f64], weights: &Matrix, bias: &[f64]) -> Result<Vec<f64>> {
    fcn_logits(f, weights, bias).map(|z| softmax(&z))
}

/// Full forward pass on an already projected input `H^(0) = U1^T X`.
///
/// In [`Mode::Train`] with a positive dropout rate the pooled embedding is
/// masked with inverted dropout drawn from `rng_seed`; eval mode ignores the
/// seed.
pub fn forward(
    input: &Tensor4,
    a_hat: &Matrix,
    params: &ModelParams,
    mode: Mode,
    rng_seed: u64,
) -> Result<ForwardTrace> {
    params.validate()?;
    let [n, _, m, s] = input.dims();
    if params.alpha.len() != m {
        return Err(Error::shape(format!(
            "input has {m} modalities, model expects {}",
            params.alpha.len()
        )));
    }
    if params.fcn_weights.cols() != n * params.d_out() {
        return Err(Error::shape(format!(
            "FCN expects {} inputs but {n} nodes x {} features were produced",
            params.fcn_weights.cols(),
            params.d_out()
        )));
    }

    let mut layers: Vec<LayerTrace> = Vec::with_capacity(params.layers.len());
    for (l, w) in params.layers.iter().enumerate() {
        let h = layers.last().map_or(input, |t| &t.activation);
        let trace = propagate(h, a_hat, w)
            .map_err(|e| Error::shape(format!("layer {l}: {e}")))?;
        layers.push(trace);
    }
    let pooled = modality_pool(&layers.last().expect("validated").activation, &params.alpha)?;

    let width = n * params.d_out();
    let mut features = Matrix::zeros(s, width);
    for subject in 0..s {
        let v = pooled.subject_vector(subject);
        features.data_mut()[subject * width..(subject + 1) * width].copy_from_slice(&v);
    }

    let dropout_mask = if mode == Mode::Train && params.dropout_rate > 0.0 {
        let keep = 1.0 - params.dropout_rate;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mask = Matrix::from_fn(s, width, |_, _| {
            if rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        for (f, k) in features.data_mut().iter_mut().zip(mask.data()) {
            *f *= k;
        }
        Some(mask)
    } else {
        None
    };

    let classes = params.fcn_weights.rows();
    let mut logits = Matrix::zeros(s, classes);
    let mut probabilities = Matrix::zeros(s, classes);
    for subject in 0..s {
        let z = fcn_logits(features.row(subject), &params.fcn_weights, &params.fcn_bias)?;
        let p = softmax(&z);
        for k in 0..classes {
            logits.set(subject, k, z[k]);
            probabilities.set(subject, k, p[k]);
        }
    }

    Ok(ForwardTrace {
        layers,
        pooled,
        dropout_mask,
        features,
        logits,
        probabilities,
    })
}
