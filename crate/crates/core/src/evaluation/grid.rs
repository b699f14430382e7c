use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, with_jobs, EvalReport, PipelineConfig};
use crate::data::Cohort;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub k: Vec<usize>,
    pub batch: Vec<usize>,
    pub d_out: Vec<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            k: (2..=12).step_by(2).collect(),
            batch: (2..=12).step_by(2).collect(),
            d_out: (20..=120).step_by(20).collect(),
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.k.len() * self.batch.len() * self.d_out.len());
        for &k in &self.k {
            for &batch in &self.batch {
                for &d_out in &self.d_out {
                    out.push(GridPoint { k, batch, d_out });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: usize,
    pub batch: usize,
    pub d_out: usize,
}

impl GridPoint {
    pub fn apply(&self, base: &PipelineConfig) -> PipelineConfig {
        let mut cfg = base.clone();
        cfg.k_neighbors = self.k;
        cfg.train.batch_size = self.batch;
        cfg.train.d_out = self.d_out;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub point: GridPoint,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: usize,
    pub rows: Vec<GridRow>,
}

impl GridResult {
    pub fn best_row(&self) -> &GridRow {
        &self.rows[self.best]
    }

    pub fn best_config(&self) -> &PipelineConfig {
        &self.best_row().report.config
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "k,batch,d_out,val_accuracy_mean,test_accuracy_mean,test_accuracy_std,test_auc_mean,test_auc_std,selected\n",
        );
        for (i, row) in self.rows.iter().enumerate() {
            let r = &row.report;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.point.k,
                row.point.batch,
                row.point.d_out,
                r.val_accuracy.mean,
                r.accuracy.mean,
                r.accuracy.std,
                r.auc.mean,
                r.auc.std,
                u8::from(i == self.best)
            )
            .unwrap();
        }
        out
    }
}

/// Higher mean validation accuracy wins; ties prefer smaller `D_out`, then
/// smaller `K`, then smaller batch.
fn better(a: &GridRow, b: &GridRow) -> bool {
    match a.report.val_accuracy.mean.total_cmp(&b.report.val_accuracy.mean) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => {
            let key = |r: &GridRow| (r.point.d_out, r.point.k, r.point.batch);
            key(a) < key(b)
        }
    }
}

/// Exhaustive sweep; every grid point gets a full cross-validation with the
/// same seed and fold plan.
pub fn grid_search(cohort: &Cohort, base: &PipelineConfig, grid: &GridSpec, jobs: usize) -> Result<GridResult> {
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::invalid("every grid must list at least one value"));
    }
    base.validate()?;
    for p in &points {
        p.apply(base).validate()?;
    }
    let rows = with_jobs(jobs, || {
        points
            .par_iter()
            .map(|p| {
                let report = cross_validate(cohort, &p.apply(base), 1)?;
                Ok(GridRow { point: *p, report })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut best = 0;
    for i in 1..rows.len() {
        if better(&rows[i], &rows[best]) {
            best = i;
        }
    }
    Ok(GridResult { best, rows })
}
