use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState, DEFAULT_LR};
use super::backward::backward;
use super::loss::{loss, LossKind};
use crate::error::{Error, Result};
use crate::evaluation::metrics::accuracy;
use crate::model::{forward, ForwardTrace, ModelParams, ModelShape, Mode, MAX_DROPOUT};
use crate::seed::{derive_seed, Stream};
use crate::tensor::{Matrix, Tensor4};

pub const DEFAULT_EPOCHS: usize = 50;
pub const DEFAULT_BATCH_SIZE: usize = 8;
pub const DEFAULT_D_OUT: usize = 20;
pub const DEFAULT_LAYERS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub layer_count: usize,
    pub d_out: usize,
    pub loss: LossKind,
    pub seed: u64,
    /// False freezes modality weights at `1/M` (average pooling).
    pub train_alpha: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            dropout_rate: 0.0,
            layer_count: DEFAULT_LAYERS,
            d_out: DEFAULT_D_OUT,
            loss: LossKind::CrossEntropy,
            seed: 0,
            train_alpha: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(0.0..=MAX_DROPOUT).contains(&self.dropout_rate) {
            return Err(Error::invalid(format!(
                "dropout must lie in [0, {MAX_DROPOUT}], got {}",
                self.dropout_rate
            )));
        }
        if !(1..=3).contains(&self.layer_count) {
            return Err(Error::invalid(format!(
                "layer count must be 1, 2 or 3, got {}",
                self.layer_count
            )));
        }
        if self.d_out == 0 {
            return Err(Error::invalid("d_out must be at least 1"));
        }
        if let LossKind::CrossEntropyPlusSmoothL1 { weight } = self.loss {
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(Error::invalid(format!("smooth-L1 weight must be >= 0, got {weight}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy.
    pub params: ModelParams,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best_record(&self) -> &EpochRecord {
        &self.log[self.best_epoch - 1]
    }
}

/// Model input shared by every subject: `H^(0)`, labels and `Â`.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub input: &'a Tensor4,
    pub labels: &'a [usize],
    pub a_hat: &'a Matrix,
}

impl TrainData<'_> {
    fn check(&self) -> Result<()> {
        let s = self.input.dims()[3];
        if self.labels.len() != s {
            return Err(Error::shape(format!(
                "{} labels for {s} subjects",
                self.labels.len()
            )));
        }
        Ok(())
    }

    fn subset(&self, idx: &[usize]) -> Result<(Tensor4, Vec<usize>)> {
        let x = self.input.select_subjects(idx)?;
        let y = idx.iter().map(|&i| self.labels[i]).collect();
        Ok((x, y))
    }
}

/// Eval-mode forward over selected subjects.
pub fn predict(data: TrainData<'_>, params: &ModelParams, idx: &[usize]) -> Result<ForwardTrace> {
    data.check()?;
    let (x, _) = data.subset(idx)?;
    forward(&x, data.a_hat, params, Mode::Eval, 0)
}

fn evaluate(data: TrainData<'_>, params: &ModelParams, idx: &[usize], kind: LossKind) -> Result<(f64, f64)> {
    let (x, y) = data.subset(idx)?;
    let trace = forward(&x, data.a_hat, params, Mode::Eval, 0)?;
    Ok((loss(&trace.probabilities, &y, kind)?, accuracy(&trace.probabilities, &y)?))
}

/// Mini-batch Adam training; returns the best-validation-accuracy epoch's
/// parameters (earliest epoch on ties).
pub fn train(
    data: TrainData<'_>,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    data.check()?;
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::invalid("training and validation splits must be non-empty"));
    }
    let [n, d0, m, _] = data.input.dims();
    let mut shape = ModelShape::new(n, m, config.layer_count, config.d_out);
    shape.input_features = d0;
    let mut params = ModelParams::init(shape, config.dropout_rate, derive_seed(config.seed, Stream::Init, 0))?;
    // With one modality pooling is the identity; a trainable scalar would
    // only duplicate the scale already carried by the weights.
    params.train_alpha = config.train_alpha && m > 1;
    let mut state = AdamState::new(&params, config.lr);

    let batch_size = if config.batch_size > train_idx.len() {
        log::warn!(
            "batch size {} exceeds {} training subjects; clamping",
            config.batch_size,
            train_idx.len()
        );
        train_idx.len()
    } else {
        config.batch_size
    };

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, Stream::Shuffle, 0));
    let mut order = train_idx.to_vec();
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, ModelParams)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        for (b, batch) in order.chunks(batch_size).enumerate() {
            let (x, y) = data.subset(batch)?;
            let dropout_seed = derive_seed(config.seed, Stream::Dropout, ((epoch as u64) << 32) | b as u64);
            let trace = forward(&x, data.a_hat, &params, Mode::Train, dropout_seed)?;
            let grads = backward(&trace, &params, data.a_hat, &y, config.loss)?;
            adam_step(&mut params, &grads, &mut state)
                .map_err(|e| match e {
                    Error::Numerical(msg) => Error::Numerical(format!("epoch {epoch}, batch {b}: {msg}")),
                    other => other,
                })?;
        }
        let (train_loss, train_acc) = evaluate(data, &params, train_idx, config.loss)?;
        let (val_loss, val_acc) = evaluate(data, &params, val_idx, config.loss)?;
        if !(train_loss.is_finite() && val_loss.is_finite()) {
            return Err(Error::Numerical(format!("loss diverged at epoch {epoch}")));
        }
        log.push(EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
        });
        if best.as_ref().is_none_or(|(acc, _, _)| val_acc > *acc) {
            best = Some((val_acc, epoch, params.clone()));
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        log,
        best_epoch,
    })
}
