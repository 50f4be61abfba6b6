//! Linear-Gaussian benchmark with a known joint distribution.
//!
//! Eleven columns (six index properties, five mechanical targets) are drawn
//! from a fixed multivariate normal, so the exact conditional mean of any
//! masked target given the observed coordinates of its row is available in
//! closed form. Imputation runs are scored against it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ColumnRole, ColumnSchema, DataTable};
use crate::error::{Error, Result};

/// (name, units, mean, std)
pub const INDEX_PROPERTIES: [(&str, &str, f64, f64); 6] = [
    ("Sr", "%", 95.0, 5.0),
    ("gamma_t", "kN/m3", 16.0, 1.0),
    ("e", "-", 1.5, 0.4),
    ("LL", "%", 70.0, 15.0),
    ("PL", "%", 35.0, 8.0),
    ("w", "%", 60.0, 12.0),
];

/// (name, units, mean, std)
pub const MECHANICAL_TARGETS: [(&str, &str, f64, f64); 5] = [
    ("su", "kN/m2", 60.0, 15.0),
    ("Eu", "kN/m2", 8000.0, 2500.0),
    ("sigma_p", "kN/m2", 150.0, 40.0),
    ("Cc", "-", 0.8, 0.2),
    ("Cv", "m2/s", 100.0, 40.0),
];

// Correlation-space factor model. Each target is
//   t_j = a_j * x_{f_j} + b_j * Z + c_j * eps_j,   a^2 + b^2 + c^2 = 1,
// with Z a latent shared factor that no index property observes. The first
// four targets load heavily on Z (pairwise correlations 0.42..0.60); Cv
// barely does, so other targets carry almost no information about it.
const TARGET_FEATURE: [usize; 5] = [0, 1, 2, 3, 5];
const FEATURE_LOADING: [f64; 5] = [0.5, 0.4, 0.5, 0.6, 0.3];
const LATENT_LOADING: [f64; 5] = [0.75, 0.8, 0.7, 0.6, 0.05];
// LL-PL, LL-w, PL-w
const INDEX_CORRELATIONS: [(usize, usize, f64); 3] = [(3, 4, 0.5), (3, 5, 0.4), (4, 5, 0.3)];

pub fn oracle_schema() -> Vec<ColumnSchema> {
    INDEX_PROPERTIES
        .iter()
        .map(|(n, u, ..)| ColumnSchema::new(*n, ColumnRole::IndexFeature, *u))
        .chain(
            MECHANICAL_TARGETS
                .iter()
                .map(|(n, u, ..)| ColumnSchema::new(*n, ColumnRole::MechanicalTarget, *u)),
        )
        .collect()
}

/// Mean vector and covariance of the 11-dimensional benchmark distribution.
pub fn oracle_joint_distribution() -> (DVector<f64>, DMatrix<f64>) {
    let mut index_corr = DMatrix::<f64>::identity(6, 6);
    for &(i, j, r) in &INDEX_CORRELATIONS {
        index_corr[(i, j)] = r;
        index_corr[(j, i)] = r;
    }
    let lx = index_corr.cholesky().expect("index correlation is PD").l();

    // loadings on [6 index innovations | Z | 5 target noises]
    let mut load = DMatrix::<f64>::zeros(11, 12);
    load.view_mut((0, 0), (6, 6)).copy_from(&lx);
    for j in 0..5 {
        let (a, b) = (FEATURE_LOADING[j], LATENT_LOADING[j]);
        for k in 0..6 {
            load[(6 + j, k)] = a * lx[(TARGET_FEATURE[j], k)];
        }
        load[(6 + j, 6)] = b;
        load[(6 + j, 7 + j)] = (1.0 - a * a - b * b).sqrt();
    }
    let corr = &load * load.transpose();

    let scale: Vec<f64> = INDEX_PROPERTIES
        .iter()
        .map(|p| p.3)
        .chain(MECHANICAL_TARGETS.iter().map(|p| p.3))
        .collect();
    let mean = DVector::from_iterator(
        11,
        INDEX_PROPERTIES
            .iter()
            .map(|p| p.2)
            .chain(MECHANICAL_TARGETS.iter().map(|p| p.2)),
    );
    let cov = DMatrix::from_fn(11, 11, |i, j| corr[(i, j)] * scale[i] * scale[j]);
    (mean, cov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBenchmark {
    pub schema: Vec<ColumnSchema>,
    pub train: DataTable,
    pub test: DataTable,
    pub truth: Vec<Vec<f64>>,
    pub joint_mean: Vec<f64>,
    pub joint_cov: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Samples a benchmark. Training rows are fully observed; each test target
/// cell is masked independently with probability `missing_rate` (rows with
/// every target masked are allowed).
pub fn generate_oracle_benchmark(
    seed: u64,
    n_train: usize,
    n_test: usize,
    missing_rate: f64,
) -> Result<OracleBenchmark> {
    if n_train < 50 {
        return Err(Error::InvalidInput(format!("n_train must be >= 50, got {n_train}")));
    }
    if n_test == 0 {
        return Err(Error::InvalidInput("n_test must be positive".into()));
    }
    if !(missing_rate > 0.0 && missing_rate < 1.0) {
        return Err(Error::InvalidInput(format!(
            "missing_rate must lie in (0, 1), got {missing_rate}"
        )));
    }
    let (mean, cov) = oracle_joint_distribution();
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Internal("oracle covariance is not positive definite".into()))?;
    let l = chol.l();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let z = DVector::from_iterator(11, (0..11).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&mean + &l * z).iter().copied().collect()
    };
    let train_rows: Vec<Vec<f64>> = (0..n_train).map(|_| draw(&mut rng)).collect();
    let truth: Vec<Vec<f64>> = (0..n_test).map(|_| draw(&mut rng)).collect();

    let mask: Vec<Vec<bool>> = (0..n_test)
        .map(|_| (0..11).map(|c| c >= 6 && rng.random::<f64>() < missing_rate).collect())
        .collect();

    let schema = oracle_schema();
    let train = DataTable::from_matrix(schema.clone(), &train_rows)?;
    let test = DataTable::from_matrix(schema.clone(), &truth)?.with_missing(&mask)?;

    Ok(OracleBenchmark {
        schema,
        train,
        test,
        truth,
        joint_mean: mean.iter().copied().collect(),
        joint_cov: (0..11).map(|i| cov.row(i).iter().copied().collect()).collect(),
        seed,
    })
}

impl OracleBenchmark {
    pub fn cov_matrix(&self) -> DMatrix<f64> {
        let d = self.joint_mean.len();
        DMatrix::from_fn(d, d, |i, j| self.joint_cov[i][j])
    }

    /// Exact conditional mean of a masked test cell given every observed
    /// coordinate of its row.
    pub fn analytic_conditional_mean(&self, row: usize, target: usize) -> Result<f64> {
        if row >= self.test.n_rows() || target >= self.test.n_cols() {
            return Err(Error::Usage(format!("cell ({row}, {target}) out of range")));
        }
        if !self.test.is_missing(row, target) {
            return Err(Error::Usage(format!(
                "cell ({row}, {target}) is observed; conditional mean is only defined for masked cells"
            )));
        }
        let observed: Vec<(usize, f64)> = (0..self.test.n_cols())
            .filter_map(|c| self.test.value(row, c).map(|v| (c, v)))
            .collect();
        gaussian_conditional_mean(&self.joint_mean, &self.cov_matrix(), &observed, target)
    }
}

/// `mu_t + S_to S_oo^{-1} (x_o - mu_o)` via a Cholesky solve.
pub fn gaussian_conditional_mean(
    mean: &[f64],
    cov: &DMatrix<f64>,
    observed: &[(usize, f64)],
    target: usize,
) -> Result<f64> {
    if observed.is_empty() {
        return Ok(mean[target]);
    }
    let k = observed.len();
    let s_oo = DMatrix::from_fn(k, k, |i, j| cov[(observed[i].0, observed[j].0)]);
    let s_to = DVector::from_fn(k, |i, _| cov[(target, observed[i].0)]);
    let resid = DVector::from_fn(k, |i, _| observed[i].1 - mean[observed[i].0]);
    let chol = s_oo
        .cholesky()
        .ok_or_else(|| Error::Internal("observed covariance block is not PD".into()))?;
    let w = chol.solve(&resid);
    Ok(mean[target] + s_to.dot(&w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_is_spd_with_designed_correlations() {
        let (_, cov) = oracle_joint_distribution();
        assert!((&cov - cov.transpose()).abs().max() < 1e-9);
        let eig = cov.clone().symmetric_eigen().eigenvalues;
        assert!(eig.min() > 0.0);
        let corr = |i: usize, j: usize| cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
        for i in 6..10 {
            for j in (i + 1)..10 {
                let r = corr(i, j);
                assert!((0.4..=0.8).contains(&r), "corr({i},{j}) = {r}");
            }
            assert!(corr(i, 10).abs() < 0.15);
        }
        // su couples to Sr only among index properties
        for k in 1..6 {
            assert!(corr(6, k).abs() < 1e-12);
        }
        assert!(corr(6, 0) > 0.4);
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_oracle_benchmark(7, 60, 10, 0.4).unwrap();
        let b = generate_oracle_benchmark(7, 60, 10, 0.4).unwrap();
        assert_eq!(a, b);
        let c = generate_oracle_benchmark(8, 60, 10, 0.4).unwrap();
        assert_ne!(a.truth, c.truth);
    }

    #[test]
    fn near_zero_rate_masks_nothing() {
        let b = generate_oracle_benchmark(3, 50, 20, 1e-9).unwrap();
        assert!(b.test.missing_count() <= 1);
    }

    #[test]
    fn only_targets_are_masked_and_truth_retained() {
        let b = generate_oracle_benchmark(11, 50, 30, 0.5).unwrap();
        for r in 0..30 {
            for c in 0..11 {
                if c < 6 {
                    assert!(!b.test.is_missing(r, c));
                }
                if let Some(v) = b.test.value(r, c) {
                    assert_eq!(v, b.truth[r][c]);
                }
            }
        }
        assert_eq!(b.train.missing_count(), 0);
    }

    #[test]
    fn invalid_parameters() {
        assert!(generate_oracle_benchmark(1, 49, 10, 0.5).is_err());
        assert!(generate_oracle_benchmark(1, 50, 10, 0.0).is_err());
        assert!(generate_oracle_benchmark(1, 50, 10, 1.0).is_err());
    }

    #[test]
    fn observed_cell_is_usage_error() {
        let b = generate_oracle_benchmark(1, 50, 10, 0.5).unwrap();
        assert!(matches!(b.analytic_conditional_mean(0, 0), Err(Error::Usage(_))));
    }

    #[test]
    fn bivariate_closed_form() {
        let rho = 0.6;
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let m = gaussian_conditional_mean(&[0.0, 0.0], &cov, &[(1, 1.7)], 0).unwrap();
        assert!((m - rho * 1.7).abs() < 1e-12);
    }

    #[test]
    fn independent_target_returns_its_mean() {
        let cov = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, 1.0, 0.3, 0.0, 0.3, 1.0]);
        let m = gaussian_conditional_mean(&[5.0, 1.0, 2.0], &cov, &[(1, 4.0), (2, -3.0)], 0)
            .unwrap();
        assert_eq!(m, 5.0);
    }

    #[test]
    fn masked_cell_mean_ignores_hidden_truth() {
        let mut b = generate_oracle_benchmark(5, 50, 10, 0.5).unwrap();
        let (r, c) = (0..10)
            .flat_map(|r| (6..11).map(move |c| (r, c)))
            .find(|&(r, c)| b.test.is_missing(r, c))
            .unwrap();
        let m = b.analytic_conditional_mean(r, c).unwrap();
        b.truth[r][c] += 1e6;
        assert_eq!(b.analytic_conditional_mean(r, c).unwrap(), m);
    }
}
