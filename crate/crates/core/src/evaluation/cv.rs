use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{FoldPlan, DEFAULT_FOLDS};
use super::metrics::auc;
use crate::data::Cohort;
use crate::error::{Error, Result};
use crate::graph::PopulationGraph;
use crate::projection::{project_nodes, solve_projections, truncated_u1, ProjectionPair, DEFAULT_ENERGY_THRESHOLD};
use crate::seed::{derive_seed, Stream};
use crate::tensor::{Matrix, Tensor4};
use crate::training::{predict, train, TrainConfig, TrainData};

pub const DEFAULT_K: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ablation {
    /// Keep only modality `modality`.
    SingleModality { modality: usize },
    /// Freeze α at `1/M`.
    AvgPooling,
    /// Feed `X` directly and build the graph from the mean connectivity.
    NoU1,
}

/// Everything that determines a cross-validation run besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub k_neighbors: usize,
    pub energy_threshold: f64,
    /// Gaussian kernel width; `None` uses the median pairwise distance.
    pub kernel_width: Option<f64>,
    pub folds: usize,
    /// Fit projection and graph on all subjects, test fold included.
    pub transductive: bool,
    pub ablation: Option<Ablation>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            k_neighbors: DEFAULT_K,
            energy_threshold: DEFAULT_ENERGY_THRESHOLD,
            kernel_width: None,
            folds: DEFAULT_FOLDS,
            transductive: false,
            ablation: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.k_neighbors == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.energy_threshold > 0.0 && self.energy_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "energy threshold must lie in (0, 1], got {}",
                self.energy_threshold
            )));
        }
        if let Some(w) = self.kernel_width {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!("kernel width must be > 0, got {w}")));
            }
        }
        if self.folds < 3 {
            return Err(Error::invalid(format!("need at least 3 folds, got {}", self.folds)));
        }
        Ok(())
    }

    /// Cohort view after a modality restriction, if any.
    pub fn view(&self, cohort: &Cohort) -> Result<Cohort> {
        match self.ablation {
            Some(Ablation::SingleModality { modality }) => {
                if modality >= cohort.modality_count() {
                    return Err(Error::invalid(format!(
                        "modality {modality} out of range for {} modalities",
                        cohort.modality_count()
                    )));
                }
                cohort.with_modalities(&[modality])
            }
            _ => Ok(cohort.clone()),
        }
    }

    /// The fold plan every command uses for this seed.
    pub fn fold_plan(&self, labels: &[usize]) -> Result<FoldPlan> {
        FoldPlan::stratified(labels, self.folds, derive_seed(self.train.seed, Stream::Folds, 0))
    }

    pub fn train_config(&self, fold: usize) -> TrainConfig {
        let mut t = self.train.clone();
        t.seed = derive_seed(self.train.seed, Stream::Fold, fold as u64);
        if self.ablation == Some(Ablation::AvgPooling) {
            t.train_alpha = false;
        }
        t
    }
}

/// Model input and population graph fitted on a subset of subjects.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// `H^(0)` for every subject in the tensor.
    pub input: Tensor4,
    pub graph: PopulationGraph,
    /// Node-side projection applied to the input (identity for `NoU1`).
    pub u1: Matrix,
    pub projection: Option<ProjectionPair>,
}

/// Fits the projection and graph on `fit_idx`, then projects all subjects.
pub fn prepare(x: &Tensor4, fit_idx: &[usize], config: &PipelineConfig) -> Result<Prepared> {
    let fit = x.select_subjects(fit_idx)?;
    if config.ablation == Some(Ablation::NoU1) {
        let [n, _, m, s] = fit.dims();
        let mut mean = Matrix::zeros(n, n);
        for si in 0..s {
            for mi in 0..m {
                let slice = fit.slice(mi, si);
                for (acc, v) in mean.data_mut().iter_mut().zip(slice.data()) {
                    *acc += v;
                }
            }
        }
        let mean = mean.scale(1.0 / (m * s) as f64);
        let graph = PopulationGraph::build(&mean, config.k_neighbors, config.kernel_width)?;
        return Ok(Prepared {
            input: x.clone(),
            graph,
            u1: Matrix::identity(n),
            projection: None,
        });
    }
    let pair = solve_projections(&fit, config.energy_threshold)?;
    let graph = PopulationGraph::build(&truncated_u1(&pair), config.k_neighbors, config.kernel_width)?;
    Ok(Prepared {
        input: project_nodes(x, &pair)?,
        graph,
        u1: pair.u1.clone(),
        projection: Some(pair),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_accuracy: f64,
    pub test_auc: f64,
    pub val_accuracy: f64,
    pub best_epoch: usize,
    pub alpha: Vec<f64>,
    /// Columns of `U1` kept for the graph (0 when the projection is skipped).
    pub trunc_rank: usize,
    pub kernel_width: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator).
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cohort: String,
    pub modalities: Vec<String>,
    pub subjects: usize,
    pub config: PipelineConfig,
    pub folds: Vec<FoldResult>,
    pub accuracy: Summary,
    pub auc: Summary,
    pub val_accuracy: Summary,
}

impl EvalReport {
    fn from_folds(cohort: &Cohort, config: &PipelineConfig, folds: Vec<FoldResult>) -> Self {
        let pick = |f: fn(&FoldResult) -> f64| Summary::of(&folds.iter().map(f).collect::<Vec<_>>());
        Self {
            cohort: cohort.name.clone(),
            modalities: cohort.modalities.clone(),
            subjects: cohort.subject_count(),
            config: config.clone(),
            accuracy: pick(|f| f.test_accuracy),
            auc: pick(|f| f.test_auc),
            val_accuracy: pick(|f| f.val_accuracy),
            folds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per fold, then `mean` and `std` rows.
    pub fn to_csv(&self) -> String {
        let m = self.folds.first().map_or(0, |f| f.alpha.len());
        let mut out = String::from("fold,test_accuracy,test_auc,val_accuracy,best_epoch,trunc_rank");
        for i in 0..m {
            write!(out, ",alpha_{i}").unwrap();
        }
        out.push('\n');
        for f in &self.folds {
            write!(
                out,
                "{},{},{},{},{},{}",
                f.fold, f.test_accuracy, f.test_auc, f.val_accuracy, f.best_epoch, f.trunc_rank
            )
            .unwrap();
            for a in &f.alpha {
                write!(out, ",{a}").unwrap();
            }
            out.push('\n');
        }
        let blanks = ",".repeat(2 + m);
        writeln!(out, "mean,{},{},{}{blanks}", self.accuracy.mean, self.auc.mean, self.val_accuracy.mean).unwrap();
        writeln!(out, "std,{},{},{}{blanks}", self.accuracy.std, self.auc.std, self.val_accuracy.std).unwrap();
        out
    }
}

/// Runs `op` on a pool of `jobs` threads (`jobs <= 1` runs inline).
pub(crate) fn with_jobs<T: Send>(jobs: usize, op: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs <= 1 {
        return Ok(op());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(op))
}

pub fn run_fold(cohort: &Cohort, config: &PipelineConfig, plan: &FoldPlan, fold: usize) -> Result<FoldResult> {
    let split = plan.split(fold);
    let fit_idx = if config.transductive {
        (0..cohort.subject_count()).collect()
    } else {
        split.fit()
    };
    let prepared = prepare(&cohort.tensor, &fit_idx, config).map_err(|e| in_fold(fold, e))?;
    let data = TrainData {
        input: &prepared.input,
        labels: &cohort.labels,
        a_hat: &prepared.graph.normalized,
    };
    let outcome = train(data, &split.train, &split.val, &config.train_config(fold)).map_err(|e| in_fold(fold, e))?;
    let trace = predict(data, &outcome.params, &split.test)?;
    let test_labels: Vec<usize> = split.test.iter().map(|&i| cohort.labels[i]).collect();
    Ok(FoldResult {
        fold,
        test_accuracy: super::metrics::accuracy(&trace.probabilities, &test_labels)?,
        test_auc: auc(&trace.positive_scores(), &test_labels).map_err(|e| in_fold(fold, e))?,
        val_accuracy: outcome.best_record().val_acc,
        best_epoch: outcome.best_epoch,
        alpha: outcome.params.alpha.clone(),
        trunc_rank: prepared.projection.as_ref().map_or(0, |p| p.trunc_rank),
        kernel_width: prepared.graph.kernel_width,
        n_train: split.train.len(),
        n_val: split.val.len(),
        n_test: split.test.len(),
    })
}

fn in_fold(fold: usize, e: Error) -> Error {
    match e {
        Error::Numerical(msg) => Error::Numerical(format!("fold {fold}: {msg}")),
        Error::Data(msg) => Error::Data(format!("fold {fold}: {msg}")),
        other => other,
    }
}

/// Stratified K-fold cross-validation. Folds run concurrently on `jobs`
/// threads; results are ordered by fold index.
pub fn cross_validate(cohort: &Cohort, config: &PipelineConfig, jobs: usize) -> Result<EvalReport> {
    config.validate()?;
    let view = config.view(cohort)?;
    let plan = config.fold_plan(&view.labels)?;
    let folds = with_jobs(jobs, || {
        (0..config.folds)
            .into_par_iter()
            .map(|f| run_fold(&view, config, &plan, f))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(EvalReport::from_folds(&view, config, folds))
}

/// Cross-validation with one component removed or simplified.
pub fn ablation(cohort: &Cohort, config: &PipelineConfig, kind: Ablation, jobs: usize) -> Result<EvalReport> {
    let mut cfg = config.clone();
    cfg.ablation = Some(kind);
    cross_validate(cohort, &cfg, jobs)
}
