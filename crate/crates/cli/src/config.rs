//! Run settings: built-in defaults, overridden by a JSON config file,
//! overridden by command-line flags.

use std::path::Path;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use geoinfer::explain::{ShapMode, DEFAULT_BACKGROUND_SIZE, DEFAULT_PERMUTATIONS};
use geoinfer::imputation::ImputationConfig;
use geoinfer::predictor::{PredictorHyper, DEFAULT_BINS};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "GEOINFER_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ShapModeArg {
    Exact,
    MonteCarlo,
}

/// Fully resolved settings; every field is materialised in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub seed: u64,
    pub iterations: usize,
    pub bins: usize,
    pub bandwidth: Option<f64>,
    pub k: Option<usize>,
    pub shap_mode: ShapModeArg,
    pub shap_perms: usize,
    pub background_size: usize,
    /// Test rows explained per target, from the top of the test table.
    pub explain_rows: usize,
    /// Cells per axis of the decision surface.
    pub grid_resolution: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 0,
            iterations: 10,
            bins: DEFAULT_BINS,
            bandwidth: None,
            k: None,
            shap_mode: ShapModeArg::MonteCarlo,
            shap_perms: DEFAULT_PERMUTATIONS,
            background_size: DEFAULT_BACKGROUND_SIZE,
            explain_rows: 10,
            grid_resolution: 100,
        }
    }
}

/// Partial settings, as read from a config file or the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Random seed [env: GEOINFER_SEED, used when neither flag nor config file sets it]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Imputation sweeps
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Posterior bins
    #[arg(long)]
    pub bins: Option<usize>,
    /// Fixed kernel bandwidth in whitened units
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Neighbours per query
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub shap_mode: Option<ShapModeArg>,
    /// Monte Carlo permutations per explained row
    #[arg(long)]
    pub shap_perms: Option<usize>,
    /// Training rows in the SHAP background set
    #[arg(long)]
    pub background_size: Option<usize>,
    /// Test rows explained per target
    #[arg(long)]
    pub explain_rows: Option<usize>,
    /// Decision-surface cells per axis
    #[arg(long)]
    pub grid_resolution: Option<usize>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    fn apply(&self, s: &mut Settings) {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { s.$f = v; } )* };
        }
        take!(seed, iterations, bins, shap_mode, shap_perms, background_size, explain_rows, grid_resolution);
        if self.bandwidth.is_some() {
            s.bandwidth = self.bandwidth;
        }
        if self.k.is_some() {
            s.k = self.k;
        }
    }
}

/// Precedence: flags, then config file, then `GEOINFER_SEED` (seed only),
/// then built-in defaults.
pub fn resolve(cli: &Overrides, file: Option<&Overrides>, env_seed: Option<&str>) -> anyhow::Result<Settings> {
    let mut s = Settings::default();
    if let Some(raw) = env_seed {
        s.seed = raw
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got '{raw}'"))?;
    }
    if let Some(f) = file {
        f.apply(&mut s);
    }
    cli.apply(&mut s);
    s.validate()?;
    Ok(s)
}

impl Settings {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.iterations == 0 {
            bail!("--iterations must be at least 1");
        }
        if let Some(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                bail!("--bandwidth must be positive and finite");
            }
        }
        if self.k == Some(0) {
            bail!("--k must be at least 1");
        }
        if self.shap_perms < 2 {
            bail!("--shap-perms must be at least 2");
        }
        if self.background_size == 0 {
            bail!("--background-size must be at least 1");
        }
        if self.grid_resolution < 2 {
            bail!("--grid-resolution must be at least 2");
        }
        Ok(())
    }

    pub fn hyper(&self) -> PredictorHyper {
        PredictorHyper {
            bandwidth: self.bandwidth,
            k_neighbors: self.k,
            bins: self.bins,
            ..PredictorHyper::default()
        }
    }

    pub fn imputation(&self) -> ImputationConfig {
        ImputationConfig {
            iterations: self.iterations,
            bins: self.bins,
            hyper: self.hyper(),
            ..ImputationConfig::default()
        }
    }

    pub fn shap_mode(&self) -> ShapMode {
        match self.shap_mode {
            ShapModeArg::Exact => ShapMode::Exact,
            ShapModeArg::MonteCarlo => ShapMode::MonteCarlo {
                n_perm: self.shap_perms,
                seed: self.seed,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_env() {
        let file = Overrides { seed: Some(5), bins: Some(64), ..Default::default() };
        let cli = Overrides { bins: Some(32), ..Default::default() };
        let s = resolve(&cli, Some(&file), Some("9")).unwrap();
        assert_eq!((s.seed, s.bins), (5, 32));
        let s = resolve(&cli, None, Some("9")).unwrap();
        assert_eq!(s.seed, 9);
        let s = resolve(&Overrides { seed: Some(1), ..Default::default() }, Some(&file), Some("9")).unwrap();
        assert_eq!(s.seed, 1);
    }

    #[test]
    fn defaults_are_materialised() {
        let s = resolve(&Overrides::default(), None, None).unwrap();
        assert_eq!(s, Settings::default());
        assert_eq!((s.iterations, s.bins), (10, 128));
    }

    #[test]
    fn bad_values_rejected() {
        assert!(resolve(&Overrides { iterations: Some(0), ..Default::default() }, None, None).is_err());
        assert!(resolve(&Overrides { bandwidth: Some(-1.0), ..Default::default() }, None, None).is_err());
        assert!(resolve(&Overrides::default(), None, Some("abc")).is_err());
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        assert!(serde_json::from_str::<Overrides>(r#"{"seeed": 3}"#).is_err());
        let o: Overrides = serde_json::from_str(r#"{"shap_mode": "exact", "k": 8}"#).unwrap();
        assert_eq!(o.shap_mode, Some(ShapModeArg::Exact));
    }
}
