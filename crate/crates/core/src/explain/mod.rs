//! Shapley attribution for imputation models and cosine-similarity
//! diagnostics over affinity embeddings.

mod shap;
mod similarity;

pub use shap::{permutation_shap, Attribution, ShapMode, DEFAULT_PERMUTATIONS, MAX_EXACT_FEATURES};
pub use similarity::{cosine_matrix, SimilarityMatrix};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ColumnRole, DataTable};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::imputation::{target_context, ImputationConfig, ImputationRun};

pub const DEFAULT_BACKGROUND_SIZE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    IndexProperty,
    MechanicalParameter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapResult {
    pub target: String,
    pub feature_names: Vec<String>,
    pub feature_groups: Vec<FeatureGroup>,
    pub base_value: f64,
    /// Test-row index of each explained sample.
    pub rows: Vec<usize>,
    /// Model inputs of each explained sample.
    pub inputs: Vec<Vec<f64>>,
    pub predictions: Vec<f64>,
    /// `n_samples × d`.
    pub attributions: Vec<Vec<f64>>,
    pub std_errors: Option<Vec<Vec<f64>>>,
    pub n_permutations: Option<usize>,
    pub seed: u64,
    pub background_size: usize,
}

impl ShapResult {
    pub fn efficiency_residuals(&self) -> Vec<f64> {
        self.attributions
            .iter()
            .zip(&self.predictions)
            .map(|(a, p)| self.base_value + a.iter().sum::<f64>() - p)
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// CSV with one row per sample: row, attributions, base_value, prediction.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,");
        out.push_str(&self.feature_names.join(","));
        out.push_str(",base_value,prediction\n");
        for (i, a) in self.attributions.iter().enumerate() {
            out.push_str(&self.rows[i].to_string());
            for v in a {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push_str(&format!(",{},{}\n", self.base_value, self.predictions[i]));
        }
        out
    }
}

/// Explains the final-iteration posterior-mean model for `target` on the
/// given test rows (all rows when `rows` is `None`). The background is a
/// seeded uniform subsample of training rows without replacement.
#[allow(clippy::too_many_arguments)]
pub fn shap_for_target(
    train: &DataTable,
    run: &ImputationRun,
    target: &str,
    rows: Option<&[usize]>,
    mode: ShapMode,
    background_size: usize,
    seed: u64,
    config: &ImputationConfig,
    exec: Exec,
) -> Result<ShapResult> {
    let t = train
        .column_index(target)
        .filter(|&c| train.schema()[c].role == ColumnRole::MechanicalTarget)
        .ok_or_else(|| Error::InvalidInput(format!("unknown target '{target}'")))?;
    if background_size == 0 {
        return Err(Error::InvalidInput("background size must be positive".into()));
    }
    let ctx = target_context(train, target, config, exec)?;
    let feature_cols: Vec<usize> = (0..train.n_cols()).filter(|&c| c != t).collect();
    let feature_groups = feature_cols
        .iter()
        .map(|&c| match train.schema()[c].role {
            ColumnRole::IndexFeature => FeatureGroup::IndexProperty,
            _ => FeatureGroup::MechanicalParameter,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = background_size.min(train.n_rows());
    let mut picks = rand::seq::index::sample(&mut rng, train.n_rows(), m).into_vec();
    picks.sort_unstable();
    let background: Vec<Vec<f64>> = picks
        .iter()
        .map(|&r| feature_cols.iter().map(|&c| train.get(r, c)).collect())
        .collect();

    let all_inputs = run.feature_rows(target)?;
    let rows: Vec<usize> = match rows {
        Some(r) => r.to_vec(),
        None => (0..all_inputs.len()).collect(),
    };
    if let Some(&bad) = rows.iter().find(|&&r| r >= all_inputs.len()) {
        return Err(Error::InvalidInput(format!("test row {bad} out of range")));
    }
    let bins = config.bins;
    let model = |x: &[f64]| {
        ctx.predict_posterior(x, bins)
            .map(|p| p.mean())
            .unwrap_or(f64::NAN)
    };

    let mut attributions = Vec::with_capacity(rows.len());
    let mut predictions = Vec::with_capacity(rows.len());
    let mut std_errors = Vec::new();
    let mut base_value = 0.0;
    let mut n_permutations = None;
    for &r in &rows {
        let row_mode = match mode {
            ShapMode::Exact => ShapMode::Exact,
            ShapMode::MonteCarlo { n_perm, seed } => ShapMode::MonteCarlo {
                n_perm,
                seed: seed.wrapping_add(r as u64),
            },
        };
        let a = permutation_shap(&model, &background, &all_inputs[r], row_mode, exec)?;
        base_value = a.base_value;
        n_permutations = a.n_permutations;
        if let Some(se) = a.std_error {
            std_errors.push(se);
        }
        attributions.push(a.phi);
        predictions.push(a.prediction);
    }
    let inputs = rows.iter().map(|&r| all_inputs[r].clone()).collect();
    Ok(ShapResult {
        target: target.to_string(),
        feature_names: ctx.feature_names().to_vec(),
        feature_groups,
        base_value,
        rows,
        inputs,
        predictions,
        attributions,
        std_errors: matches!(mode, ShapMode::MonteCarlo { .. }).then_some(std_errors),
        n_permutations,
        seed,
        background_size: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub group: FeatureGroup,
    pub mean_abs_shap: f64,
}

/// Mean |phi| per feature, in feature order.
pub fn mean_abs_shap(result: &ShapResult) -> Result<Vec<FeatureImportance>> {
    if result.attributions.is_empty() {
        return Err(Error::InvalidInput("no explained samples".into()));
    }
    let n = result.attributions.len() as f64;
    Ok(result
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| FeatureImportance {
            feature: name.clone(),
            group: result.feature_groups[j],
            mean_abs_shap: result.attributions.iter().map(|a| a[j].abs()).sum::<f64>() / n,
        })
        .collect())
}

/// (feature value, phi) pairs for one feature, in sample order.
pub fn shap_scatter_data(result: &ShapResult, feature: &str) -> Result<Vec<(f64, f64)>> {
    let j = result
        .feature_index(feature)
        .ok_or_else(|| Error::InvalidInput(format!("unknown feature '{feature}'")))?;
    Ok(result
        .inputs
        .iter()
        .zip(&result.attributions)
        .map(|(x, a)| (x[j], a[j]))
        .collect())
}

/// Index property with the largest mean |phi|.
pub fn top_index_property(result: &ShapResult) -> Result<Option<String>> {
    Ok(mean_abs_shap(result)?
        .into_iter()
        .filter(|f| f.group == FeatureGroup::IndexProperty)
        .max_by(|a, b| a.mean_abs_shap.total_cmp(&b.mean_abs_shap))
        .map(|f| f.feature))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn result_with(attributions: Vec<Vec<f64>>) -> ShapResult {
        let n = attributions.len();
        let d = attributions.first().map_or(0, Vec::len);
        ShapResult {
            target: "t".into(),
            feature_names: (0..d).map(|j| format!("f{j}")).collect(),
            feature_groups: (0..d)
                .map(|j| if j < 2 { FeatureGroup::IndexProperty } else { FeatureGroup::MechanicalParameter })
                .collect(),
            base_value: 0.0,
            rows: (0..n).collect(),
            inputs: (0..n).map(|i| (0..d).map(|j| (i * d + j) as f64).collect()).collect(),
            predictions: attributions.iter().map(|a| a.iter().sum()).collect(),
            attributions,
            std_errors: None,
            n_permutations: None,
            seed: 0,
            background_size: 1,
        }
    }

    #[test]
    fn single_sample_mean_abs() {
        let r = result_with(vec![vec![-1.5, 2.0, 0.0]]);
        let m = mean_abs_shap(&r).unwrap();
        assert_eq!(m.iter().map(|f| f.mean_abs_shap).collect::<Vec<_>>(), vec![1.5, 2.0, 0.0]);
        assert_eq!(m[2].group, FeatureGroup::MechanicalParameter);
    }

    #[test]
    fn duplicated_samples_keep_means() {
        let a = vec![vec![1.0, -2.0, 3.0], vec![0.5, 0.5, -0.5]];
        let mut twice = a.clone();
        twice.extend(a.clone());
        let m1 = mean_abs_shap(&result_with(a)).unwrap();
        let m2 = mean_abs_shap(&result_with(twice)).unwrap();
        for (x, y) in m1.iter().zip(&m2) {
            assert!((x.mean_abs_shap - y.mean_abs_shap).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_result_rejected() {
        assert!(mean_abs_shap(&result_with(vec![])).is_err());
    }

    #[test]
    fn scatter_preserves_order() {
        let r = result_with(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let s = shap_scatter_data(&r, "f1").unwrap();
        assert_eq!(s, vec![(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)]);
        assert!(shap_scatter_data(&r, "nope").is_err());
    }

    #[test]
    fn linear_model_scatter_lies_on_identity() {
        let xs = [[-1.0, 4.0], [2.5, 0.0], [3.0, -7.0]];
        let f = |x: &[f64]| x[1];
        for x in xs {
            let a = permutation_shap(&f, &[vec![0.0, 0.0]], &x, ShapMode::Exact, Exec::Sequential).unwrap();
            assert_eq!(a.phi[1], x[1]);
        }
    }

    proptest! {
        #[test]
        fn mean_abs_matches_recompute(
            a in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..20)
        ) {
            let r = result_with(a.clone());
            let m = mean_abs_shap(&r).unwrap();
            for j in 0..4 {
                let want: f64 = a.iter().map(|row| row[j].abs()).sum::<f64>() / a.len() as f64;
                prop_assert!((m[j].mean_abs_shap - want).abs() < 1e-12);
            }
        }
    }
}
