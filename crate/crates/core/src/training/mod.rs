//! Loss functions, hand-derived gradients, Adam and the training loop.

mod adam;
mod backward;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, DEFAULT_LR};
pub use backward::{backward, Gradients};
pub use loss::{loss, LossKind, DEFAULT_SMOOTH_L1_WEIGHT, PROB_FLOOR};
pub use trainer::{
    predict, train, EpochRecord, TrainConfig, TrainData, TrainOutcome, DEFAULT_BATCH_SIZE,
    DEFAULT_D_OUT, DEFAULT_EPOCHS, DEFAULT_LAYERS,
};
