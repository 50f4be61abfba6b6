use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability masses over a grid of equal- or unequal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePosterior {
    pub bin_edges: Vec<f64>,
    pub probs: Vec<f64>,
}

impl DiscretePosterior {
    /// Checks edges are strictly increasing and masses form a distribution.
    pub fn new(bin_edges: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if bin_edges.len() != probs.len() + 1 || probs.is_empty() {
            return Err(Error::InvalidInput(format!(
                "{} edges for {} bins",
                bin_edges.len(),
                probs.len()
            )));
        }
        if bin_edges.iter().any(|e| !e.is_finite()) || bin_edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("bin edges must be finite and strictly increasing".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput("bin probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("bin probabilities sum to {total}")));
        }
        Ok(Self { bin_edges, probs })
    }

    pub fn n_bins(&self) -> usize {
        self.probs.len()
    }

    pub fn lower(&self) -> f64 {
        self.bin_edges[0]
    }

    pub fn upper(&self) -> f64 {
        self.bin_edges[self.n_bins()]
    }

    pub fn bin_width(&self, b: usize) -> f64 {
        self.bin_edges[b + 1] - self.bin_edges[b]
    }

    pub fn max_bin_width(&self) -> f64 {
        (0..self.n_bins()).map(|b| self.bin_width(b)).fold(0.0, f64::max)
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    /// Σ probs · bin midpoints.
    pub fn mean(&self) -> f64 {
        self.probs.iter().zip(self.midpoints()).map(|(p, m)| p * m).sum()
    }

    /// CDF with mass spread uniformly inside each bin.
    pub fn cdf(&self, v: f64) -> f64 {
        if v <= self.lower() {
            return 0.0;
        }
        let mut acc = 0.0;
        for (b, p) in self.probs.iter().enumerate() {
            let (lo, hi) = (self.bin_edges[b], self.bin_edges[b + 1]);
            if v < hi {
                return (acc + p * (v - lo) / (hi - lo)).min(1.0);
            }
            acc += p;
        }
        1.0
    }

    /// Inverse of [`cdf`](Self::cdf), interpolating linearly inside the bin
    /// where the cumulative mass crosses `q`. Empty bins are skipped.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidInput(format!("quantile level {q} outside [0, 1]")));
        }
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(self.n_bins() - 1);
        let mut acc = 0.0;
        for (b, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            if acc + p >= q || b == last {
                let frac = ((q - acc) / p).clamp(0.0, 1.0);
                return Ok(self.bin_edges[b] + frac * self.bin_width(b));
            }
            acc += p;
        }
        Ok(self.upper())
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5).expect("0.5 is a valid level")
    }
}

pub fn posterior_mean(p: &DiscretePosterior) -> f64 {
    p.mean()
}

pub fn posterior_quantile(p: &DiscretePosterior, q: f64) -> Result<f64> {
    p.quantile(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(b: usize) -> DiscretePosterior {
        let edges = (0..=b).map(|i| i as f64 / b as f64).collect();
        DiscretePosterior::new(edges, vec![1.0 / b as f64; b]).unwrap()
    }

    #[test]
    fn uniform_mean_and_quartile() {
        let p = uniform(100);
        assert!((p.mean() - 0.5).abs() < 1e-9);
        assert!((p.quantile(0.25).unwrap() - 0.25).abs() <= 0.01);
    }

    #[test]
    fn point_mass_mean_is_midpoint() {
        let mut probs = vec![0.0; 10];
        probs[3] = 1.0;
        let p = DiscretePosterior::new((0..=10).map(f64::from).collect(), probs).unwrap();
        assert_eq!(p.mean(), 3.5);
        assert_eq!(p.median(), 3.5);
        assert_eq!(p.quantile(0.0).unwrap(), 3.0);
        assert_eq!(p.quantile(1.0).unwrap(), 4.0);
    }

    #[test]
    fn invalid_level() {
        let p = uniform(4);
        assert!(p.quantile(-0.1).is_err());
        assert!(p.quantile(1.1).is_err());
    }

    #[test]
    fn validation() {
        assert!(DiscretePosterior::new(vec![0.0, 1.0], vec![0.5]).is_err());
        assert!(DiscretePosterior::new(vec![0.0, 0.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscretePosterior::new(vec![0.0, 1.0, 2.0], vec![1.5, -0.5]).is_err());
        assert!(DiscretePosterior::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn cdf_quantile_round_trip(
            raw in prop::collection::vec(0.0f64..1.0, 8..64),
            u in 0.0f64..1.0,
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
            let b = probs.len();
            let edges: Vec<f64> = (0..=b).map(|i| -3.0 + 0.25 * i as f64).collect();
            let p = DiscretePosterior::new(edges, probs).unwrap();
            let v = p.lower() + u * (p.upper() - p.lower());
            let back = p.quantile(p.cdf(v)).unwrap();
            prop_assert!((back - v).abs() <= p.max_bin_width() + 1e-12);
            prop_assert!(p.mean() >= p.lower() && p.mean() <= p.upper());
        }
    }
}
