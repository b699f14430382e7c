use super::backward::Gradients;
use crate::error::{Error, Result};
use crate::model::ModelParams;

pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// Adam moment estimates, one buffer per parameter group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.groups().iter().map(|(_, g)| vec![0.0; g.len()]).collect();
        Self {
            lr,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }
}

/// Bias-corrected Adam update of one flat buffer at step `t` (1-based).
#[allow(clippy::too_many_arguments)]
pub(crate) fn adam_update(
    theta: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    let c1 = 1.0 - beta1.powi(t as i32);
    let c2 = 1.0 - beta2.powi(t as i32);
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One Adam step over every parameter group. A non-finite gradient aborts
/// the step before anything is modified. A frozen `alpha` is left untouched.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    let grad_groups = grads.groups();
    {
        let param_groups = params.groups();
        if param_groups.len() != grad_groups.len() || param_groups.len() != state.first.len() {
            return Err(Error::shape("gradient groups do not mirror parameters"));
        }
        for ((pname, p), ((_, g), m)) in param_groups.iter().zip(grad_groups.iter().zip(&state.first)) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::shape(format!(
                    "{pname}: {} parameters, {} gradients, {} moments",
                    p.len(),
                    g.len(),
                    m.len()
                )));
            }
        }
    }
    for (name, g) in &grad_groups {
        if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient for {name}[{pos}]; step aborted"
            )));
        }
    }

    state.step += 1;
    let t = state.step;
    let train_alpha = params.train_alpha;
    let (lr, b1, b2, eps) = (state.lr, state.beta1, state.beta2, state.eps);
    for (((name, theta), (_, g)), (m, v)) in params
        .groups_mut()
        .into_iter()
        .zip(grad_groups)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        if name == "alpha" && !train_alpha {
            continue;
        }
        adam_update(theta, g, m, v, t, lr, b1, b2, eps);
    }
    Ok(())
}
