//! Iterated conditional-mean imputation.
//!
//! Missing mechanical targets start at their training means. Each sweep
//! visits the targets in a fixed order; for target `j` the predictor is
//! conditioned on every other column (index properties plus the current
//! estimates of the remaining targets) and the posterior mean replaces the
//! missing cells of `j`. Observed cells never change. Updates are visible to
//! later targets within the same sweep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnRole, DataTable};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::predictor::{build_context_with, DiscretePosterior, PredictorContext, PredictorHyper};

pub const DEFAULT_ITERATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationConfig {
    pub iterations: usize,
    /// Names of the mechanical-target columns in update order; `None` uses
    /// schema order.
    pub target_order: Option<Vec<String>>,
    pub bins: usize,
    pub hyper: PredictorHyper,
    /// Stop early once the largest change in a sweep is below this.
    pub early_stop_tol: Option<f64>,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            target_order: None,
            bins: crate::predictor::DEFAULT_BINS,
            hyper: PredictorHyper::default(),
            early_stop_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPosterior {
    pub row: usize,
    pub column: String,
    pub posterior: DiscretePosterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationRun {
    pub columns: Vec<String>,
    pub target_order: Vec<String>,
    /// Test-matrix snapshots; index 0 is the initialization, index `k` the
    /// state after sweep `k`.
    pub estimates: Vec<Vec<Vec<f64>>>,
    pub final_posteriors: Vec<CellPosterior>,
    /// Per target, RMSE of each snapshot over the originally missing cells.
    /// `None` when the target has no missing cells. Absent without truth.
    pub rmse_by_iteration: Option<BTreeMap<String, Option<Vec<f64>>>>,
    /// True where the test cell was missing.
    pub missing_mask: Vec<Vec<bool>>,
}

impl ImputationRun {
    pub fn iterations(&self) -> usize {
        self.estimates.len() - 1
    }

    pub fn final_estimates(&self) -> &[Vec<f64>] {
        self.estimates.last().expect("at least the initial snapshot")
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn posterior(&self, row: usize, column: &str) -> Option<&DiscretePosterior> {
        self.final_posteriors
            .iter()
            .find(|p| p.row == row && p.column == column)
            .map(|p| &p.posterior)
    }

    /// Predictor inputs for `target` at the final iteration: every other
    /// non-class column of the final snapshot.
    pub fn feature_rows(&self, target: &str) -> Result<Vec<Vec<f64>>> {
        let t = self
            .column_index(target)
            .ok_or_else(|| Error::InvalidInput(format!("unknown target '{target}'")))?;
        Ok(self
            .final_estimates()
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(c, _)| c != t)
                    .map(|(_, &v)| v)
                    .collect()
            })
            .collect())
    }
}

fn resolve_targets(train: &DataTable, config: &ImputationConfig) -> Result<Vec<usize>> {
    let targets = train.columns_with_role(ColumnRole::MechanicalTarget);
    let order: Vec<usize> = match &config.target_order {
        None => targets.clone(),
        Some(names) => names
            .iter()
            .map(|n| {
                train
                    .column_index(n)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown target '{n}'")))
            })
            .collect::<Result<_>>()?,
    };
    let mut sorted = order.clone();
    sorted.sort_unstable();
    if sorted != targets {
        return Err(Error::InvalidInput(
            "target order must be a permutation of the mechanical-target columns".into(),
        ));
    }
    Ok(order)
}

fn check_inputs(train: &DataTable, test: &DataTable, config: &ImputationConfig) -> Result<()> {
    if config.iterations == 0 {
        return Err(Error::InvalidInput("iterations must be >= 1".into()));
    }
    if train.schema() != test.schema() {
        return Err(Error::Schema("train and test schemas differ".into()));
    }
    if !train.columns_with_role(ColumnRole::ClassLabel).is_empty() {
        return Err(Error::Schema("imputation tables must not carry class-label columns".into()));
    }
    if train.columns_with_role(ColumnRole::IndexFeature).is_empty() {
        return Err(Error::Schema("at least one index feature column is required".into()));
    }
    if train.n_rows() == 0 {
        return Err(Error::InvalidInput("training table is empty".into()));
    }
    let all: Vec<usize> = (0..train.n_cols()).collect();
    if !train.is_fully_observed(&all) {
        return Err(Error::InvalidInput("training rows must be fully observed".into()));
    }
    let index = test.columns_with_role(ColumnRole::IndexFeature);
    for r in 0..test.n_rows() {
        if let Some(&c) = index.iter().find(|&&c| test.is_missing(r, c)) {
            return Err(Error::InvalidInput(format!(
                "test row {r} is missing index feature '{}'",
                test.schema()[c].name
            )));
        }
    }
    Ok(())
}

/// Observed cells keep their measured values; missing targets take the
/// training column mean.
pub fn initialize(
    train: &DataTable,
    test: &DataTable,
    config: &ImputationConfig,
) -> Result<Vec<Vec<f64>>> {
    check_inputs(train, test, config)?;
    resolve_targets(train, config)?;
    let means: Vec<f64> = (0..train.n_cols())
        .map(|c| train.column(c).iter().sum::<f64>() / train.n_rows() as f64)
        .collect();
    Ok((0..test.n_rows())
        .map(|r| {
            (0..test.n_cols())
                .map(|c| test.value(r, c).unwrap_or(means[c]))
                .collect()
        })
        .collect())
}

/// Context used to update `target`: train conditioned on all other columns.
pub fn target_context(
    train: &DataTable,
    target: &str,
    config: &ImputationConfig,
    exec: Exec,
) -> Result<PredictorContext> {
    build_context_with(train, target, &config.hyper, exec)
}

pub fn run_icm(
    train: &DataTable,
    test: &DataTable,
    config: &ImputationConfig,
    truth: Option<&[Vec<f64>]>,
) -> Result<ImputationRun> {
    run_icm_with(train, test, config, truth, Exec::default())
}

pub fn run_icm_with(
    train: &DataTable,
    test: &DataTable,
    config: &ImputationConfig,
    truth: Option<&[Vec<f64>]>,
    exec: Exec,
) -> Result<ImputationRun> {
    let init = initialize(train, test, config)?;
    let order = resolve_targets(train, config)?;
    let names: Vec<String> = test.column_names().iter().map(|s| s.to_string()).collect();
    let mask = test.missing_mask();
    if let Some(t) = truth {
        if t.len() != test.n_rows() || t.iter().any(|r| r.len() != test.n_cols()) {
            return Err(Error::InvalidInput("truth matrix shape does not match test".into()));
        }
    }

    // contexts depend on the training table only, so they are built once
    let contexts: Vec<PredictorContext> = order
        .iter()
        .map(|&j| target_context(train, &names[j], config, exec))
        .collect::<Result<_>>()?;

    let mut est = init.clone();
    let mut snapshots = vec![init];
    let mut posteriors: Vec<Option<Vec<(usize, DiscretePosterior)>>> = vec![None; order.len()];

    for _ in 0..config.iterations {
        let mut max_delta: f64 = 0.0;
        for (slot, (&j, ctx)) in order.iter().zip(&contexts).enumerate() {
            let rows: Vec<usize> = (0..test.n_rows()).filter(|&r| mask[r][j]).collect();
            let inputs: Vec<Vec<f64>> = rows
                .iter()
                .map(|&r| {
                    est[r]
                        .iter()
                        .enumerate()
                        .filter(|&(c, _)| c != j)
                        .map(|(_, &v)| v)
                        .collect()
                })
                .collect();
            let post = ctx.predict_posterior_batch(&inputs, config.bins, exec)?;
            for (&r, p) in rows.iter().zip(&post) {
                let m = p.mean();
                max_delta = max_delta.max((m - est[r][j]).abs());
                est[r][j] = m;
            }
            posteriors[slot] = Some(rows.into_iter().zip(post).collect());
        }
        snapshots.push(est.clone());
        if config.early_stop_tol.is_some_and(|tol| max_delta < tol) {
            break;
        }
    }

    let mut final_posteriors = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        for (row, posterior) in posteriors[slot].take().unwrap_or_default() {
            final_posteriors.push(CellPosterior {
                row,
                column: names[j].clone(),
                posterior,
            });
        }
    }
    final_posteriors.sort_by(|a, b| a.row.cmp(&b.row).then_with(|| {
        let ia = names.iter().position(|n| n == &a.column);
        let ib = names.iter().position(|n| n == &b.column);
        ia.cmp(&ib)
    }));

    let rmse_by_iteration = truth.map(|t| {
        order
            .iter()
            .map(|&j| {
                let series: Option<Vec<f64>> = snapshots
                    .iter()
                    .map(|s| rmse(s, t, &mask, j))
                    .collect();
                (names[j].clone(), series)
            })
            .collect()
    });

    Ok(ImputationRun {
        columns: names,
        target_order: order.iter().map(|&j| test.schema()[j].name.clone()).collect(),
        estimates: snapshots,
        final_posteriors,
        rmse_by_iteration,
        missing_mask: mask,
    })
}

/// RMSE of column `col` over the cells flagged in `mask`; `None` when no
/// cell is flagged.
pub fn rmse(estimates: &[Vec<f64>], truth: &[Vec<f64>], mask: &[Vec<bool>], col: usize) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for ((e, t), m) in estimates.iter().zip(truth).zip(mask) {
        if m[col] {
            sum += (e[col] - t[col]).powi(2);
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Per target, RMSE at sweeps `1..=K` divided by RMSE at sweep 1. `None`
/// for targets without missing cells or with a zero baseline.
pub fn normalized_trend(run: &ImputationRun) -> Result<BTreeMap<String, Option<Vec<f64>>>> {
    let table = run
        .rmse_by_iteration
        .as_ref()
        .ok_or_else(|| Error::Usage("run was made without truth".into()))?;
    Ok(table
        .iter()
        .map(|(name, series)| {
            let trend = series.as_ref().and_then(|s| {
                let base = s[1];
                (base > 0.0).then(|| s[1..].iter().map(|v| v / base).collect())
            });
            (name.clone(), trend)
        })
        .collect())
}
