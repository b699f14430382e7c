//! Metrics, cross-validation, grid search and ablations.

pub mod cv;
pub mod folds;
pub mod grid;
pub mod metrics;

pub use cv::{ablation, cross_validate, prepare, Ablation, EvalReport, FoldResult, PipelineConfig, Summary, DEFAULT_K};
pub use folds::{FoldPlan, Split, DEFAULT_FOLDS};
pub use grid::{grid_search, GridPoint, GridResult, GridSpec};
pub use metrics::{accuracy, auc, predicted_class};
