//! Reverse-mode gradients of the mean loss through FCN, dropout, modality
//! pooling and every GCN layer.

use super::loss::{check_labels, huber_grad, LossKind};
use crate::error::{Error, Result};
use crate::model::{ForwardTrace, ModelParams};
use crate::tensor::{Matrix, Tensor4};

/// Gradients laid out exactly like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Matrix>,
    pub alpha: Vec<f64>,
    pub fcn_weights: Matrix,
    pub fcn_bias: Vec<f64>,
}

impl Gradients {
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
}

/// Gradient of the loss with respect to the logits, `S x C`.
fn logit_gradient(probs: &Matrix, labels: &[usize], kind: LossKind) -> Matrix {
    let (s, c) = probs.shape();
    let inv_s = 1.0 / s as f64;
    let mut dz = Matrix::zeros(s, c);
    for (i, &y) in labels.iter().enumerate() {
        for k in 0..c {
            let target = if k == y { 1.0 } else { 0.0 };
            dz.set(i, k, (probs.get(i, k) - target) * inv_s);
        }
        if let LossKind::CrossEntropyPlusSmoothL1 { weight } = kind {
            // dL/dp_k, then through the softmax Jacobian.
            let dp: Vec<f64> = (0..c)
                .map(|k| {
                    let target = if k == y { 1.0 } else { 0.0 };
                    -weight * inv_s * huber_grad(target - probs.get(i, k))
                })
                .collect();
            let dot: f64 = (0..c).map(|k| dp[k] * probs.get(i, k)).sum();
            for k in 0..c {
                let v = dz.get(i, k) + probs.get(i, k) * (dp[k] - dot);
                dz.set(i, k, v);
            }
        }
    }
    dz
}

pub fn backward(
    trace: &ForwardTrace,
    params: &ModelParams,
    a_hat: &Matrix,
    labels: &[usize],
    kind: LossKind,
) -> Result<Gradients> {
    check_labels(&trace.probabilities, labels)?;
    if trace.layers.len() != params.layers.len() {
        return Err(Error::shape(format!(
            "trace has {} layers, parameters have {}",
            trace.layers.len(),
            params.layers.len()
        )));
    }
    let dz = logit_gradient(&trace.probabilities, labels, kind);
    let (s, c) = dz.shape();

    // FCN: z_s = W f_s + b
    let fcn_weights = Matrix::from_fn(c, trace.features.cols(), |k, j| {
        (0..s).map(|i| dz.get(i, k) * trace.features.get(i, j)).sum()
    });
    let fcn_bias: Vec<f64> = (0..c).map(|k| (0..s).map(|i| dz.get(i, k)).sum()).collect();
    let mut df = dz.matmul(&params.fcn_weights)?;
    if let Some(mask) = &trace.dropout_mask {
        for (g, k) in df.data_mut().iter_mut().zip(mask.data()) {
            *g *= k;
        }
    }

    // Pooling: F[i, d, s] = Σ_m α_m H[i, d, m, s]
    let h_last = trace.output();
    let [n, d, m, _] = h_last.dims();
    let mut alpha = vec![0.0; m];
    let mut dh = Tensor4::zeros(h_last.dims())?;
    for i in 0..n {
        for k in 0..d {
            for subject in 0..s {
                let g = df.get(subject, i * d + k);
                for (mi, a) in params.alpha.iter().enumerate() {
                    alpha[mi] += g * h_last.get(i, k, mi, subject);
                    dh.set(i, k, mi, subject, a * g);
                }
            }
        }
    }
    if !params.train_alpha {
        alpha.iter_mut().for_each(|g| *g = 0.0);
    }

    // GCN layers: Z = (Â^T H) W, H' = ReLU(Z)
    let mut layers = vec![Matrix::zeros(1, 1); params.layers.len()];
    for l in (0..params.layers.len()).rev() {
        let t = &trace.layers[l];
        let mut dz = dh;
        for (g, &z) in dz.data_mut().iter_mut().zip(t.pre_activation.data()) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        layers[l] = t.propagated.unfold(1)?.matmul_t(&dz.unfold(1)?)?;
        if l == 0 {
            break;
        }
        dh = dz
            .mode_n_product(&params.layers[l], 1)?
            .mode_n_product(a_hat, 0)?;
    }

    let grads = Gradients {
        layers,
        alpha,
        fcn_weights,
        fcn_bias,
    };
    for (name, g) in grads.groups() {
        if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient in {name}[{pos}]"
            )));
        }
    }
    Ok(grads)
}
