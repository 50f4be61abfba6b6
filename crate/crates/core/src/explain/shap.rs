//! Interventional Shapley attribution.
//!
//! The value of a coalition `S` is the model output averaged over the
//! background set, with features in `S` taken from the explained sample and
//! the rest from each background row. Exact mode sums Shapley-weighted
//! marginal contributions over all `2^d` coalitions. Monte Carlo mode
//! averages marginal contributions along sampled feature orderings, each
//! paired with its reverse.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;

pub const MAX_EXACT_FEATURES: usize = 10;
pub const DEFAULT_PERMUTATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ShapMode {
    Exact,
    MonteCarlo { n_perm: usize, seed: u64 },
}

/// Attribution of a single sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    /// Mean model output over the background (empty coalition).
    pub base_value: f64,
    /// Model output at the explained sample.
    pub prediction: f64,
    /// Per-feature standard error; Monte Carlo only.
    pub std_error: Option<Vec<f64>>,
    pub n_permutations: Option<usize>,
}

impl Attribution {
    /// `base + Σ phi - f(x)`.
    pub fn efficiency_residual(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - self.prediction
    }
}

struct ValueFn<'a, F> {
    model: &'a F,
    background: &'a [Vec<f64>],
    x: &'a [f64],
}

impl<F: Fn(&[f64]) -> f64 + Sync> ValueFn<'_, F> {
    /// Coalition value; `in_coalition[j]` takes feature `j` from `x`.
    fn value(&self, in_coalition: &[bool]) -> Result<f64> {
        let mut buf = vec![0.0; self.x.len()];
        let mut sum = 0.0;
        for b in self.background {
            for (j, slot) in buf.iter_mut().enumerate() {
                *slot = if in_coalition[j] { self.x[j] } else { b[j] };
            }
            let v = (self.model)(&buf);
            if !v.is_finite() {
                return Err(Error::NonFiniteModel {
                    value: v,
                    coalition: (0..self.x.len()).filter(|&j| in_coalition[j]).collect(),
                });
            }
            sum += v;
        }
        Ok(sum / self.background.len() as f64)
    }
}

pub fn permutation_shap<F>(
    model: &F,
    background: &[Vec<f64>],
    x: &[f64],
    mode: ShapMode,
    exec: Exec,
) -> Result<Attribution>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = x.len();
    if d == 0 {
        return Err(Error::InvalidInput("need at least one feature".into()));
    }
    if background.is_empty() {
        return Err(Error::InvalidInput("background set is empty".into()));
    }
    if background.iter().any(|b| b.len() != d) {
        return Err(Error::InvalidInput("background rows differ in dimension from x".into()));
    }
    let vf = ValueFn { model, background, x };
    match mode {
        ShapMode::Exact => exact(&vf, d, exec),
        ShapMode::MonteCarlo { n_perm, seed } => monte_carlo(&vf, d, n_perm, seed, exec),
    }
}

fn exact<F: Fn(&[f64]) -> f64 + Sync>(vf: &ValueFn<'_, F>, d: usize, exec: Exec) -> Result<Attribution> {
    if d > MAX_EXACT_FEATURES {
        return Err(Error::InvalidInput(format!(
            "exact mode supports at most {MAX_EXACT_FEATURES} features, got {d}"
        )));
    }
    let n_sets = 1usize << d;
    let values = exec.try_map(n_sets, |mask| {
        let members: Vec<bool> = (0..d).map(|j| mask >> j & 1 == 1).collect();
        vf.value(&members)
    })?;
    // weight(|S|) = |S|! (d - |S| - 1)! / d!
    let mut fact = vec![1.0f64; d + 1];
    for i in 1..=d {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..d).map(|s| fact[s] * fact[d - s - 1] / fact[d]).collect();
    let mut phi = vec![0.0; d];
    for mask in 0..n_sets {
        let size = mask.count_ones() as usize;
        for (j, p) in phi.iter_mut().enumerate() {
            if mask >> j & 1 == 0 {
                *p += weight[size] * (values[mask | 1 << j] - values[mask]);
            }
        }
    }
    Ok(Attribution {
        phi,
        base_value: values[0],
        prediction: values[n_sets - 1],
        std_error: None,
        n_permutations: None,
    })
}

fn monte_carlo<F: Fn(&[f64]) -> f64 + Sync>(
    vf: &ValueFn<'_, F>,
    d: usize,
    n_perm: usize,
    seed: u64,
    exec: Exec,
) -> Result<Attribution> {
    if n_perm < 2 {
        return Err(Error::InvalidInput("monte carlo needs at least 2 permutations".into()));
    }
    let n_pairs = n_perm.div_ceil(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orders: Vec<Vec<usize>> = (0..n_pairs)
        .map(|_| {
            let mut o: Vec<usize> = (0..d).collect();
            o.shuffle(&mut rng);
            o
        })
        .collect();
    let base = vf.value(&vec![false; d])?;
    let full = vf.value(&vec![true; d])?;

    let walk = |order: &[usize]| -> Result<Vec<f64>> {
        let mut members = vec![false; d];
        let mut contrib = vec![0.0; d];
        let mut prev = base;
        for (step, &j) in order.iter().enumerate() {
            members[j] = true;
            let v = if step + 1 == d { full } else { vf.value(&members)? };
            contrib[j] = v - prev;
            prev = v;
        }
        Ok(contrib)
    };
    // per pair: mean of the order and its reverse
    let pair_means = exec.try_map(n_pairs, |p| {
        let fwd = walk(&orders[p])?;
        let rev_order: Vec<usize> = orders[p].iter().rev().copied().collect();
        let rev = walk(&rev_order)?;
        Ok::<_, Error>(fwd.iter().zip(&rev).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<f64>>())
    })?;

    let n = n_pairs as f64;
    let phi: Vec<f64> = (0..d)
        .map(|j| pair_means.iter().map(|m| m[j]).sum::<f64>() / n)
        .collect();
    let std_error = (0..d)
        .map(|j| {
            if n_pairs < 2 {
                return f64::INFINITY;
            }
            let var = pair_means.iter().map(|m| (m[j] - phi[j]).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    Ok(Attribution {
        phi,
        base_value: base,
        prediction: full,
        std_error: Some(std_error),
        n_permutations: Some(2 * n_pairs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run<F: Fn(&[f64]) -> f64 + Sync>(f: F, bg: &[Vec<f64>], x: &[f64]) -> Attribution {
        permutation_shap(&f, bg, x, ShapMode::Exact, Exec::Sequential).unwrap()
    }

    #[test]
    fn additive_model() {
        let a = run(|x| x[0] + x[1], &[vec![0.0, 0.0]], &[3.0, 5.0]);
        assert_eq!(a.phi, vec![3.0, 5.0]);
    }

    #[test]
    fn dummy_feature_is_exactly_zero() {
        let a = run(
            |x| x[0] * x[1] + x[0].sin(),
            &[vec![0.3, -1.0, 7.0], vec![1.0, 2.0, -3.0]],
            &[1.5, 0.5, 100.0],
        );
        assert_eq!(a.phi[2], 0.0);
        assert!(a.efficiency_residual().abs() < 1e-12);
    }

    /// Two orderings enumerated by hand: (1,2) gives phi_1 = f(a,0)-f(0,0) = 0,
    /// (2,1) gives phi_1 = f(a,b)-f(0,b) = ab; average ab/2.
    #[test]
    fn product_splits_evenly() {
        let (a, b) = (1.7, -2.3);
        let at = run(|x| x[0] * x[1], &[vec![0.0, 0.0]], &[a, b]);
        assert!((at.phi[0] - a * b / 2.0).abs() < 1e-12);
        assert!((at.phi[1] - a * b / 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_model_reports_coalition() {
        let f = |x: &[f64]| if x[1] > 1.0 { f64::NAN } else { x[0] };
        let err = permutation_shap(&f, &[vec![0.0, 0.0]], &[1.0, 2.0], ShapMode::Exact, Exec::Sequential)
            .unwrap_err();
        match err {
            Error::NonFiniteModel { coalition, .. } => assert!(coalition.contains(&1)),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn input_validation() {
        let f = |x: &[f64]| x.iter().sum::<f64>();
        assert!(permutation_shap(&f, &[], &[1.0], ShapMode::Exact, Exec::Sequential).is_err());
        assert!(permutation_shap(&f, &[vec![0.0]], &[], ShapMode::Exact, Exec::Sequential).is_err());
        let x = vec![0.0; 11];
        assert!(permutation_shap(&f, std::slice::from_ref(&x), &x, ShapMode::Exact, Exec::Sequential).is_err());
        let mc = ShapMode::MonteCarlo { n_perm: 1, seed: 0 };
        assert!(permutation_shap(&f, &[vec![0.0]], &[1.0], mc, Exec::Sequential).is_err());
    }

    #[test]
    fn monte_carlo_is_seeded_and_efficient() {
        let f = |x: &[f64]| x[0] * x[1] + x[2] * x[2] - x[3];
        let bg = vec![vec![0.1, 0.2, 0.3, 0.4], vec![-1.0, 1.0, 0.5, 0.0]];
        let x = [1.0, 2.0, -1.0, 3.0];
        let mode = ShapMode::MonteCarlo { n_perm: 50, seed: 9 };
        let a = permutation_shap(&f, &bg, &x, mode, Exec::Sequential).unwrap();
        let b = permutation_shap(&f, &bg, &x, mode, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.efficiency_residual().abs() < 1e-12);
        assert_eq!(a.n_permutations, Some(50));
    }
}
