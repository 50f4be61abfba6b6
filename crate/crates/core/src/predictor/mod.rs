//! Fit-free kernel predictor.
//!
//! A [`PredictorContext`] stores its training rows and answers every query
//! by looking at them directly; there are no learned parameters. Features
//! are standardized with training statistics and then whitened with the
//! Cholesky factor of their correlation matrix, so distances are
//! Mahalanobis distances in the training distribution. Predictions are
//! Gaussian-kernel weighted over the `k` nearest context rows.

mod grid;
mod posterior;

pub use grid::{decision_grid, DecisionGrid};
pub use posterior::{posterior_mean, posterior_quantile, DiscretePosterior};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnRole, DataTable, StandardizationStats};
use crate::error::{Error, Result};
use crate::exec::Exec;

pub const DEFAULT_K: usize = 16;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BINS: usize = 128;
pub const MIN_BINS: usize = 8;

/// Ridge added to the feature correlation matrix before whitening.
const WHITEN_RIDGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Scott's rule for class targets, leave-one-out search for real targets.
    #[default]
    Auto,
    /// `h = n^(-1/(d+4))` in whitened units.
    Scott,
    /// Median pairwise whitened distance.
    Median,
    /// Leave-one-out squared error over multiples `2^(i/2)`, `i = -2..=6`,
    /// of the Scott bandwidth. Real targets only.
    LeaveOneOut,
}

/// Optional overrides; `None` fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorHyper {
    pub bandwidth: Option<f64>,
    pub bandwidth_rule: BandwidthRule,
    pub k_neighbors: Option<usize>,
    pub alpha: f64,
    pub bins: usize,
}

impl Default for PredictorHyper {
    fn default() -> Self {
        Self {
            bandwidth: None,
            bandwidth_rule: BandwidthRule::Auto,
            k_neighbors: None,
            alpha: DEFAULT_ALPHA,
            bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContextTarget {
    Classes { labels: Vec<usize>, names: Vec<String> },
    Real(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityVector {
    pub classes: Vec<String>,
    pub probs: Vec<f64>,
}

impl ProbabilityVector {
    pub fn get(&self, class: &str) -> Option<f64> {
        self.classes.iter().position(|c| c == class).map(|i| self.probs[i])
    }

    /// Most probable class; exact ties go to the lower registry index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Unit-norm vector of kernel affinities to every context row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinityEmbedding(pub Vec<f64>);

impl AffinityEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct PredictorContext {
    feature_names: Vec<String>,
    d: usize,
    /// whitened rows, row-major n × d
    points: Vec<f64>,
    stats: StandardizationStats,
    /// lower-triangular `L^{-1}` where `L L^T` is the standardized correlation
    whitener: DMatrix<f64>,
    target: ContextTarget,
    bandwidth: f64,
    k: usize,
    alpha: f64,
    bins: usize,
}

/// Builds a context from a table. Every column other than the target and
/// any class-label column is a feature.
pub fn build_context(
    train: &DataTable,
    target_column: &str,
    hyper: &PredictorHyper,
) -> Result<PredictorContext> {
    build_context_with(train, target_column, hyper, Exec::default())
}

pub fn build_context_with(
    train: &DataTable,
    target_column: &str,
    hyper: &PredictorHyper,
    exec: Exec,
) -> Result<PredictorContext> {
    if train.n_rows() == 0 {
        return Err(Error::InvalidInput("training table is empty".into()));
    }
    let t = train
        .column_index(target_column)
        .ok_or_else(|| Error::InvalidInput(format!("unknown target column '{target_column}'")))?;
    let features: Vec<usize> = (0..train.n_cols())
        .filter(|&c| c != t && train.schema()[c].role != ColumnRole::ClassLabel)
        .collect();
    let mut used = features.clone();
    used.push(t);
    if !train.is_fully_observed(&used) {
        return Err(Error::InvalidInput(
            "context rows must be fully observed in feature and target columns".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = (0..train.n_rows())
        .map(|r| features.iter().map(|&c| train.get(r, c)).collect())
        .collect();
    let names = features
        .iter()
        .map(|&c| train.schema()[c].name.clone())
        .collect();
    let target = if train.schema()[t].role == ColumnRole::ClassLabel {
        ContextTarget::Classes {
            labels: (0..train.n_rows()).map(|r| train.get(r, t) as usize).collect(),
            names: train.classes().to_vec(),
        }
    } else {
        ContextTarget::Real(train.column(t))
    };
    PredictorContext::from_rows(names, &rows, target, hyper, exec)
}

impl PredictorContext {
    pub fn from_rows(
        feature_names: Vec<String>,
        rows: &[Vec<f64>],
        target: ContextTarget,
        hyper: &PredictorHyper,
        exec: Exec,
    ) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("context is empty".into()));
        }
        if n < 2 {
            return Err(Error::InvalidInput(
                "context needs at least two rows to set a bandwidth".into(),
            ));
        }
        let d = feature_names.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("feature rows do not match feature names".into()));
        }
        match &target {
            ContextTarget::Real(y) if y.len() != n => {
                return Err(Error::InvalidInput("target length differs from row count".into()))
            }
            ContextTarget::Real(y) if y.iter().any(|v| !v.is_finite()) => {
                return Err(Error::InvalidInput("non-finite target value".into()))
            }
            ContextTarget::Classes { labels, names }
                if labels.len() != n || labels.iter().any(|&l| l >= names.len()) =>
            {
                return Err(Error::InvalidInput("class labels do not match rows".into()))
            }
            _ => {}
        }
        if hyper.bins < MIN_BINS {
            return Err(Error::InvalidInput(format!("bins must be >= {MIN_BINS}")));
        }
        if !(hyper.alpha >= 0.0 && hyper.alpha.is_finite()) {
            return Err(Error::InvalidInput("alpha must be finite and >= 0".into()));
        }
        let k = hyper.k_neighbors.unwrap_or(DEFAULT_K.min(n));
        if k == 0 || k > n {
            return Err(Error::InvalidInput(format!("k_neighbors must lie in 1..={n}, got {k}")));
        }

        let stats = StandardizationStats::from_rows(rows)?;
        let std_rows: Vec<Vec<f64>> = rows.iter().map(|r| stats.transform(r)).collect();
        let corr = DMatrix::from_fn(d, d, |i, j| {
            let c = std_rows.iter().map(|r| r[i] * r[j]).sum::<f64>() / n as f64;
            if i == j {
                c + WHITEN_RIDGE
            } else {
                c
            }
        });
        let chol = corr
            .cholesky()
            .ok_or_else(|| Error::Internal("feature correlation is not positive definite".into()))?;
        let whitener = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Internal("whitening factor is singular".into()))?;
        let mut points = Vec::with_capacity(n * d);
        for r in &std_rows {
            points.extend(apply_lower(&whitener, r));
        }

        let mut ctx = Self {
            feature_names,
            d,
            points,
            stats,
            whitener,
            target,
            bandwidth: 1.0,
            k,
            alpha: hyper.alpha,
            bins: hyper.bins,
        };
        ctx.bandwidth = match hyper.bandwidth {
            Some(h) if h > 0.0 && h.is_finite() => h,
            Some(h) => return Err(Error::InvalidInput(format!("bandwidth must be > 0, got {h}"))),
            None => ctx.select_bandwidth(hyper.bandwidth_rule, exec)?,
        };
        Ok(ctx)
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn k_neighbors(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn stats(&self) -> &StandardizationStats {
        &self.stats
    }

    pub fn target(&self) -> &ContextTarget {
        &self.target
    }

    pub fn class_names(&self) -> Option<&[String]> {
        match &self.target {
            ContextTarget::Classes { names, .. } => Some(names),
            ContextTarget::Real(_) => None,
        }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    fn whiten(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::InvalidInput(format!(
                "query has {} features, context has {}",
                x.len(),
                self.d
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("query contains non-finite values".into()));
        }
        Ok(apply_lower(&self.whitener, &self.stats.transform(x)))
    }

    fn sq_dist_to(&self, z: &[f64], i: usize) -> f64 {
        self.point(i).iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `k` nearest context rows as (index, squared distance), nearest first;
    /// equal distances are ordered by row index.
    fn nearest(&self, z: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..self.n())
            .filter(|&i| Some(i) != exclude)
            .map(|i| (i, self.sq_dist_to(z, i)))
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        let k = k.min(all.len());
        if k < all.len() {
            all.select_nth_unstable_by(k, cmp);
            all.truncate(k);
        }
        all.sort_by(cmp);
        all
    }

    /// Normalized kernel weights over the neighbour set, falling back to
    /// uniform weights when every kernel value underflows.
    fn kernel_weights(neigh: &[(usize, f64)], h: f64) -> (Vec<f64>, f64) {
        let raw: Vec<f64> = neigh.iter().map(|&(_, d2)| (-d2 / (2.0 * h * h)).exp()).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 && total.is_finite() {
            (raw, total)
        } else {
            (vec![1.0; neigh.len()], neigh.len() as f64)
        }
    }

    fn select_bandwidth(&self, rule: BandwidthRule, exec: Exec) -> Result<f64> {
        let scott = (self.n() as f64).powf(-1.0 / (self.d as f64 + 4.0));
        let real = matches!(self.target, ContextTarget::Real(_));
        match rule {
            BandwidthRule::Scott => Ok(scott),
            BandwidthRule::Auto if !real => Ok(scott),
            BandwidthRule::Median => {
                let mut dists: Vec<f64> = (0..self.n())
                    .flat_map(|i| ((i + 1)..self.n()).map(move |j| (i, j)))
                    .map(|(i, j)| self.sq_dist_to(self.point(i), j).sqrt())
                    .collect();
                let mid = dists.len() / 2;
                let (_, m, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
                let m = *m;
                Ok(if m > 0.0 { m } else { 1.0 })
            }
            BandwidthRule::Auto | BandwidthRule::LeaveOneOut => {
                let ContextTarget::Real(y) = &self.target else {
                    return Err(Error::InvalidInput(
                        "leave-one-out bandwidth needs a real-valued target".into(),
                    ));
                };
                Ok(self.loo_bandwidth(y, scott, exec))
            }
        }
    }

    fn loo_bandwidth(&self, y: &[f64], base: f64, exec: Exec) -> f64 {
        let candidates: Vec<f64> = (-2..=6).map(|i| base * 2f64.powf(i as f64 / 2.0)).collect();
        let k = self.k.min(self.n() - 1);
        // neighbour sets do not depend on h
        let sq_err: Vec<Vec<f64>> = exec.map(self.n(), |i| {
            let neigh = self.nearest(self.point(i), k, Some(i));
            candidates
                .iter()
                .map(|&h| {
                    let (w, total) = Self::kernel_weights(&neigh, h);
                    let pred: f64 =
                        neigh.iter().zip(&w).map(|(&(j, _), wj)| wj * y[j]).sum::<f64>() / total;
                    (pred - y[i]).powi(2)
                })
                .collect()
        });
        let mut best = (f64::INFINITY, candidates[0]);
        for (c, &h) in candidates.iter().enumerate() {
            let mse: f64 = sq_err.iter().map(|e| e[c]).sum();
            if mse < best.0 {
                best = (mse, h);
            }
        }
        best.1
    }

    /// Laplace-smoothed kernel class probabilities:
    /// `P(c) = (W_c + alpha) / (W + alpha * C)`.
    pub fn predict_class_proba(&self, x: &[f64]) -> Result<ProbabilityVector> {
        let ContextTarget::Classes { labels, names } = &self.target else {
            return Err(Error::InvalidInput("context target is not categorical".into()));
        };
        let z = self.whiten(x)?;
        let neigh = self.nearest(&z, self.k, None);
        let (w, total) = Self::kernel_weights(&neigh, self.bandwidth);
        let mut per_class = vec![0.0; names.len()];
        for (&(i, _), wi) in neigh.iter().zip(&w) {
            per_class[labels[i]] += wi;
        }
        let denom = total + self.alpha * names.len() as f64;
        let probs = per_class.iter().map(|wc| (wc + self.alpha) / denom).collect();
        Ok(ProbabilityVector {
            classes: names.clone(),
            probs,
        })
    }

    /// Target grid shared by every posterior from this context: the context
    /// target range extended by half of it on each side.
    pub fn posterior_edges(&self, bins: usize) -> Result<Vec<f64>> {
        let ContextTarget::Real(y) = &self.target else {
            return Err(Error::InvalidInput("context target is not real-valued".into()));
        };
        if bins < MIN_BINS {
            return Err(Error::InvalidInput(format!("bins must be >= {MIN_BINS}, got {bins}")));
        }
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (a, b) = if hi > lo {
            let r = hi - lo;
            (lo - 0.5 * r, hi + 0.5 * r)
        } else {
            let half = lo.abs().max(1.0);
            (lo - half, lo + half)
        };
        let w = (b - a) / bins as f64;
        let mut edges: Vec<f64> = (0..=bins).map(|i| a + w * i as f64).collect();
        edges[bins] = b;
        Ok(edges)
    }

    /// Kernel-weighted mixture of Gaussians centred on the neighbour
    /// targets, integrated over each bin and renormalized to the grid.
    pub fn predict_posterior(&self, x: &[f64], bins: usize) -> Result<DiscretePosterior> {
        let edges = self.posterior_edges(bins)?;
        let ContextTarget::Real(y) = &self.target else {
            unreachable!("posterior_edges checked the target kind");
        };
        let z = self.whiten(x)?;
        let neigh = self.nearest(&z, self.k, None);
        let (w, total) = Self::kernel_weights(&neigh, self.bandwidth);
        let centers: Vec<f64> = neigh.iter().map(|&(i, _)| y[i]).collect();
        let bin_w = edges[1] - edges[0];
        let s = silverman(&centers);
        let sigma = if s == 0.0 { 0.0 } else { s.max(bin_w) };

        let mut probs = vec![0.0; bins];
        for (c, wi) in centers.iter().zip(&w) {
            let wi = wi / total;
            if sigma == 0.0 {
                let b = (((c - edges[0]) / bin_w).floor() as isize).clamp(0, bins as isize - 1);
                probs[b as usize] += wi;
                continue;
            }
            let mut prev = normal_cdf((edges[0] - c) / sigma);
            for b in 0..bins {
                let next = normal_cdf((edges[b + 1] - c) / sigma);
                probs[b] += wi * (next - prev);
                prev = next;
            }
        }
        let mass: f64 = probs.iter().sum();
        if mass > 0.0 {
            for p in &mut probs {
                *p /= mass;
            }
        } else {
            // all centres far outside the grid; cannot happen for context targets
            return Err(Error::Internal("posterior has no mass on its grid".into()));
        }
        DiscretePosterior::new(edges, probs)
    }

    pub fn predict_posterior_batch(
        &self,
        xs: &[Vec<f64>],
        bins: usize,
        exec: Exec,
    ) -> Result<Vec<DiscretePosterior>> {
        exec.try_map(xs.len(), |i| self.predict_posterior(&xs[i], bins))
    }

    /// Posterior mean of [`predict_posterior`](Self::predict_posterior) with
    /// the context's default bin count.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_posterior(x, self.bins)?.mean())
    }

    /// Kernel affinities to every context row, L2-normalized. The kernel is
    /// shifted by the nearest squared distance before exponentiation; the
    /// common factor cancels in the normalization and keeps far queries
    /// from underflowing to zero.
    pub fn embed(&self, x: &[f64]) -> Result<AffinityEmbedding> {
        let z = self.whiten(x)?;
        let d2: Vec<f64> = (0..self.n()).map(|i| self.sq_dist_to(&z, i)).collect();
        let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let h2 = 2.0 * self.bandwidth * self.bandwidth;
        let w: Vec<f64> = d2.iter().map(|v| (-(v - dmin) / h2).exp()).collect();
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(AffinityEmbedding(w.into_iter().map(|v| v / norm).collect()))
    }
}

fn apply_lower(l: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| (0..=i).map(|j| l[(i, j)] * x[j]).sum())
        .collect()
}

/// Silverman's rule of thumb `0.9 min(sd, IQR/1.34) n^(-1/5)`; uses `sd`
/// alone when the IQR vanishes.
fn silverman(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1.0);
        let (i, f) = (pos.floor() as usize, pos.fract());
        if i + 1 < s.len() {
            s[i] * (1.0 - f) + s[i + 1] * f
        } else {
            s[i]
        }
    };
    let iqr = (q(0.75) - q(0.25)) / 1.34;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
