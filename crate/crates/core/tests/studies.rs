//! End-to-end checks of the soil classification study and the oracle
//! imputation study through the public API.

use geoinfer::data::{builtin_soil_dataset, generate_oracle_benchmark, DataTable};
use geoinfer::explain::{cosine_matrix, shap_for_target, top_index_property, ShapMode};
use geoinfer::imputation::{run_icm_with, ImputationConfig};
use geoinfer::predictor::{build_context, decision_grid, PredictorHyper};
use geoinfer::Exec;

fn features(t: &DataTable, r: usize) -> Vec<f64> {
    t.row(r)[..2].to_vec()
}

#[test]
fn soil_classifier_separates_the_fixture() {
    let (train, test) = builtin_soil_dataset();
    let ctx = build_context(&train, "soil", &PredictorHyper::default()).unwrap();
    let soil = test.column_index("soil").unwrap();
    let correct = (0..test.n_rows())
        .filter(|&r| {
            let p = ctx.predict_class_proba(&features(&test, r)).unwrap();
            p.argmax() as f64 == test.get(r, soil)
        })
        .count();
    assert!(correct >= 15, "{correct}/16");
}

#[test]
fn embeddings_cluster_by_class() {
    let (train, test) = builtin_soil_dataset();
    let ctx = build_context(&train, "soil", &PredictorHyper::default()).unwrap();
    let soil = train.column_index("soil").unwrap();
    let emb = |t: &DataTable| -> Vec<Vec<f64>> {
        (0..t.n_rows()).map(|r| ctx.embed(&features(t, r)).unwrap().0).collect()
    };
    let m = cosine_matrix(&emb(&test), &emb(&train)).unwrap();
    let (mut within, mut cross) = (Vec::new(), Vec::new());
    for i in 0..test.n_rows() {
        for j in 0..train.n_rows() {
            if test.get(i, soil) == train.get(j, soil) {
                within.push(m.values[i][j]);
            } else {
                cross.push(m.values[i][j]);
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&within) > mean(&cross));
}

#[test]
fn grid_is_identical_across_execution_modes() {
    let (train, _) = builtin_soil_dataset();
    let ctx = build_context(&train, "soil", &PredictorHyper::default()).unwrap();
    let a = decision_grid(&ctx, "Sand", (1.0, 60.0), (100.0, 450.0), (30, 30), Exec::Sequential).unwrap();
    let b = decision_grid(&ctx, "Sand", (1.0, 60.0), (100.0, 450.0), (30, 30), Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn icm_moves_toward_the_conditional_mean() {
    let bench = generate_oracle_benchmark(11, 300, 20, 0.5).unwrap();
    let config = ImputationConfig { iterations: 4, ..Default::default() };
    let run = run_icm_with(&bench.train, &bench.test, &config, Some(&bench.truth), Exec::Parallel).unwrap();
    let seq = run_icm_with(&bench.train, &bench.test, &config, Some(&bench.truth), Exec::Sequential).unwrap();
    assert_eq!(run, seq);

    let su = bench.test.column_index("su").unwrap();
    let err = |snap: &[Vec<f64>]| -> f64 {
        let mut acc = Vec::new();
        for r in 0..bench.test.n_rows() {
            if bench.test.is_missing(r, su) {
                let acm = bench.analytic_conditional_mean(r, su).unwrap();
                acc.push((snap[r][su] - acm).powi(2));
            }
        }
        (acc.iter().sum::<f64>() / acc.len() as f64).sqrt()
    };
    assert!(err(&run.estimates[4]) < err(&run.estimates[0]));
}

#[test]
fn undrained_strength_is_explained_by_saturation() {
    let bench = generate_oracle_benchmark(2, 300, 20, 0.5).unwrap();
    let config = ImputationConfig { iterations: 2, ..Default::default() };
    let run = run_icm_with(&bench.train, &bench.test, &config, None, Exec::Parallel).unwrap();
    let rows: Vec<usize> = (0..12).collect();
    let shap = shap_for_target(
        &bench.train,
        &run,
        "su",
        Some(&rows),
        ShapMode::MonteCarlo { n_perm: 40, seed: 5 },
        16,
        3,
        &config,
        Exec::Parallel,
    )
    .unwrap();
    assert_eq!(shap.attributions.len(), 12);
    for r in shap.efficiency_residuals() {
        assert!(r.abs() < 1e-9, "{r}");
    }
    assert_eq!(top_index_property(&shap).unwrap().as_deref(), Some("Sr"));
}

#[test]
fn exact_shap_on_ten_features_is_efficient() {
    let bench = generate_oracle_benchmark(6, 100, 5, 0.5).unwrap();
    let config = ImputationConfig { iterations: 1, bins: 32, ..Default::default() };
    let run = run_icm_with(&bench.train, &bench.test, &config, None, Exec::Parallel).unwrap();
    let shap = shap_for_target(&bench.train, &run, "Cc", Some(&[0]), ShapMode::Exact, 4, 1, &config, Exec::Parallel)
        .unwrap();
    assert_eq!(shap.attributions[0].len(), 10);
    assert!(shap.efficiency_residuals()[0].abs() < 1e-9);
}
