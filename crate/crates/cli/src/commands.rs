use std::path::Path;

use anyhow::{bail, ensure, Context};
use geoinfer::data::{
    builtin_soil_dataset, builtin_soil_samples, generate_oracle_benchmark, load_csv, write_csv_to,
    ColumnSchema, DataTable,
};
use geoinfer::explain::{cosine_matrix, mean_abs_shap, shap_for_target, top_index_property, FeatureImportance, ShapResult};
use geoinfer::imputation::{normalized_trend, run_icm_with, ImputationRun};
use geoinfer::predictor::{build_context_with, decision_grid, PredictorHyper};
use geoinfer::report::{
    decision_heatmap, render_svg, shap_bar_chart, Payload, shap_scatter_chart, similarity_heatmap, soil_scatter_chart,
    table_rmse, trend_chart, violin_from_posterior,
};
use geoinfer::Exec;
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::manifest::{input_record, CommandSpec, OutDir, RunManifest, MANIFEST_FILE};
use crate::metrics::{accuracy, roc_auc};

/// Ranges of the soil decision surface: (N, Vs in m/s).
pub const SOIL_GRID_N: (f64, f64) = (0.0, 60.0);
pub const SOIL_GRID_VS: (f64, f64) = (50.0, 400.0);

pub const SNAPSHOTS_FILE: &str = "snapshots.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoilMetrics {
    pub accuracy: f64,
    pub roc_auc: f64,
    /// 1-based test numbers predicted wrongly.
    pub misclassified: Vec<usize>,
}

pub fn cmd_soil_demo(out_dir: &Path, settings: &Settings) -> anyhow::Result<RunManifest> {
    let mut out = OutDir::open(out_dir)?;
    let exec = Exec::default();
    let (train, test) = builtin_soil_dataset();
    let hyper = PredictorHyper { bins: settings.bins, ..PredictorHyper::default() };
    let ctx = build_context_with(&train, "soil", &hyper, exec)?;
    log::info!("soil context: n={}, bandwidth={:.4}", ctx.n(), ctx.bandwidth());
    let classes = ctx.class_names().context("soil context is categorical")?.to_vec();
    let sand = classes.iter().position(|c| c == "Sand").context("no Sand class")?;
    let soil_col = test.column_index("soil").context("no soil column")?;

    let features = |t: &DataTable, r: usize| t.row(r)[..2].to_vec();
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    let mut scores = Vec::new();
    for r in 0..test.n_rows() {
        let p = ctx.predict_class_proba(&features(&test, r))?;
        predicted.push(p.argmax());
        let label = test.class_label(r, soil_col).context("unlabelled test row")?;
        actual.push(classes.iter().position(|c| c == label).context("unknown test class")?);
        scores.push(p.probs[sand]);
    }
    let metrics = SoilMetrics {
        accuracy: accuracy(&predicted, &actual)?,
        roc_auc: roc_auc(&scores, &actual.iter().map(|&a| a == sand).collect::<Vec<_>>())?,
        misclassified: (0..actual.len()).filter(|&i| predicted[i] != actual[i]).map(|i| i + 1).collect(),
    };
    log::info!("accuracy {:.4}, ROC-AUC {:.4}", metrics.accuracy, metrics.roc_auc);

    let (train_s, test_s) = builtin_soil_samples();
    out.write("soil_scatter.svg", render_svg(&soil_scatter_chart(&train_s, &test_s)?)?.as_bytes())?;

    let res = settings.grid_resolution;
    let grid = decision_grid(&ctx, "Sand", SOIL_GRID_N, SOIL_GRID_VS, (res, res), exec)?;
    out.write("decision_surface.svg", render_svg(&decision_heatmap(&grid, "SPT N-value", "Vs (m/s)")?)?.as_bytes())?;

    let embed = |t: &DataTable| -> anyhow::Result<Vec<Vec<f64>>> {
        (0..t.n_rows()).map(|r| Ok(ctx.embed(&features(t, r))?.0)).collect()
    };
    let sim = cosine_matrix(&embed(&test)?, &embed(&train)?)?.with_labels(
        (1..=test.n_rows()).map(|i| format!("Te{i}")).collect(),
        (1..=train.n_rows()).map(|i| format!("Tr{i}")).collect(),
    )?;
    out.write("similarity.svg", render_svg(&similarity_heatmap(&sim)?)?.as_bytes())?;
    out.write_json("metrics.json", &metrics)?;
    out.finish(CommandSpec::SoilDemo, settings, vec![])
}

pub fn load_schema(path: &Path) -> anyhow::Result<Vec<ColumnSchema>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading schema {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing schema {}", path.display()))
}

fn load_truth(path: &Path, schema: &[ColumnSchema], test: &DataTable) -> anyhow::Result<Vec<Vec<f64>>> {
    let t = load_csv(path, schema).with_context(|| format!("loading truth {}", path.display()))?;
    ensure!(t.missing_count() == 0, "truth table {} has missing cells", path.display());
    ensure!(
        t.n_rows() == test.n_rows(),
        "truth has {} rows but the test table has {}",
        t.n_rows(),
        test.n_rows()
    );
    Ok((0..t.n_rows()).map(|r| t.row(r).to_vec()).collect())
}

pub struct ImputeInputs<'a> {
    pub train: &'a Path,
    pub test: &'a Path,
    pub schema: &'a Path,
    pub truth: Option<&'a Path>,
}

pub fn cmd_impute(inputs: &ImputeInputs<'_>, settings: &Settings, out_dir: &Path) -> anyhow::Result<RunManifest> {
    let schema = load_schema(inputs.schema)?;
    let train = load_csv(inputs.train, &schema).with_context(|| format!("loading {}", inputs.train.display()))?;
    let test = load_csv(inputs.test, &schema).with_context(|| format!("loading {}", inputs.test.display()))?;
    let truth = inputs.truth.map(|p| load_truth(p, &schema, &test)).transpose()?;
    if test.missing_count() == 0 {
        log::warn!("test table is fully observed; snapshots will not change");
    }
    let mut out = OutDir::open(out_dir)?;
    let config = settings.imputation();
    let run = run_icm_with(&train, &test, &config, truth.as_deref(), Exec::default())?;
    log::info!("{} sweeps over {} test rows", run.iterations(), test.n_rows());
    out.write_json(SNAPSHOTS_FILE, &run)?;

    for cell in &run.final_posteriors {
        let col = run.column_index(&cell.column).context("posterior for unknown column")?;
        let t = truth.as_ref().map(|t| t[cell.row][col]);
        let mut spec = violin_from_posterior(&cell.posterior, t, None);
        spec.title = format!("Test row {}: {}", cell.row + 1, cell.column);
        spec.y_label = cell.column.clone();
        if let Payload::Violin { violins } = &mut spec.payload {
            violins[0].label = cell.column.clone();
        }
        out.write(
            format!("violins/row{:04}_{}.svg", cell.row + 1, cell.column),
            render_svg(&spec)?.as_bytes(),
        )?;
    }

    if truth.is_some() {
        out.write("rmse_table.csv", table_rmse(&run)?.as_bytes())?;
        let trend = normalized_trend(&run)?;
        if trend.values().any(Option::is_some) {
            out.write("rmse_trend.svg", render_svg(&trend_chart(&trend)?)?.as_bytes())?;
        } else {
            log::warn!("no target has a defined RMSE trend; trend chart skipped");
        }
    }

    let mut records = vec![input_record(inputs.train)?, input_record(inputs.test)?, input_record(inputs.schema)?];
    if let Some(p) = inputs.truth {
        records.push(input_record(p)?);
    }
    out.finish(
        CommandSpec::Impute {
            train: inputs.train.to_path_buf(),
            test: inputs.test.to_path_buf(),
            schema: inputs.schema.to_path_buf(),
            truth: inputs.truth.map(Path::to_path_buf),
        },
        settings,
        records,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetExplanation {
    pub shap: ShapResult,
    pub importance: Vec<FeatureImportance>,
    pub top_index_property: Option<String>,
}

/// Explains the imputation run stored in `run_dir` (an impute output
/// directory). The model settings come from that run's manifest; SHAP
/// settings come from `settings`.
pub fn cmd_explain(run_dir: &Path, settings: &Settings, out_dir: &Path) -> anyhow::Result<RunManifest> {
    let manifest_path = run_dir.join(MANIFEST_FILE);
    let snapshots_path = run_dir.join(SNAPSHOTS_FILE);
    ensure!(manifest_path.exists(), "{} has no {MANIFEST_FILE}", run_dir.display());
    ensure!(snapshots_path.exists(), "{} has no {SNAPSHOTS_FILE}", run_dir.display());
    let source = RunManifest::load(&manifest_path)?;
    let (train_path, schema_path) = match &source.command {
        CommandSpec::Impute { train, schema, .. } => (train.clone(), schema.clone()),
        other => bail!("{} is not an impute run ({other:?})", run_dir.display()),
    };
    let schema = load_schema(&schema_path)?;
    let train = load_csv(&train_path, &schema)?;
    let run: ImputationRun = serde_json::from_str(
        &std::fs::read_to_string(&snapshots_path).with_context(|| format!("reading {}", snapshots_path.display()))?,
    )
    .with_context(|| format!("parsing {}", snapshots_path.display()))?;
    let config = source.config.imputation();

    let mut out = OutDir::open(out_dir)?;
    let n_test = run.final_estimates().len();
    let rows: Vec<usize> = (0..settings.explain_rows.min(n_test)).collect();
    let mut all = Vec::new();
    for target in &run.target_order {
        let shap = shap_for_target(
            &train,
            &run,
            target,
            Some(&rows),
            settings.shap_mode(),
            settings.background_size,
            settings.seed,
            &config,
            Exec::default(),
        )?;
        for (i, r) in shap.efficiency_residuals().iter().enumerate() {
            let scale = 1f64.max(shap.predictions[i].abs()).max(shap.base_value.abs());
            log::info!("{target} row {}: efficiency residual {r:.3e}", shap.rows[i] + 1);
            ensure!(r.abs() <= 1e-9 * scale, "{target} row {}: efficiency residual {r:e} too large", shap.rows[i] + 1);
        }
        let importance = mean_abs_shap(&shap)?;
        let top = top_index_property(&shap)?;
        out.write(format!("shap/{target}.csv"), shap.to_csv().as_bytes())?;
        out.write(
            format!("shap/{target}_importance.svg"),
            render_svg(&shap_bar_chart(target, &importance)?)?.as_bytes(),
        )?;
        if let Some(f) = &top {
            log::info!("{target}: top index property {f}");
            out.write(format!("shap/{target}_scatter_{f}.svg"), render_svg(&shap_scatter_chart(&shap, f)?)?.as_bytes())?;
        }
        all.push(TargetExplanation { shap, importance, top_index_property: top });
    }
    out.write_json("shap.json", &all)?;
    let inputs = vec![
        input_record(&manifest_path)?,
        input_record(&snapshots_path)?,
        input_record(&train_path)?,
        input_record(&schema_path)?,
    ];
    out.finish(CommandSpec::Explain { run_dir: run_dir.to_path_buf() }, settings, inputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub missing_rate: f64,
    pub columns: Vec<String>,
    pub joint_mean: Vec<f64>,
    pub joint_cov: Vec<Vec<f64>>,
}

pub fn cmd_generate(
    n_train: usize,
    n_test: usize,
    missing_rate: f64,
    settings: &Settings,
    out_dir: &Path,
) -> anyhow::Result<RunManifest> {
    let bench = generate_oracle_benchmark(settings.seed, n_train, n_test, missing_rate)?;
    let mut out = OutDir::open(out_dir)?;
    let csv = |t: &DataTable| -> anyhow::Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_csv_to(t, &mut buf)?;
        Ok(buf)
    };
    out.write("train.csv", &csv(&bench.train)?)?;
    out.write("test.csv", &csv(&bench.test)?)?;
    out.write("truth.csv", &csv(&DataTable::from_matrix(bench.schema.clone(), &bench.truth)?)?)?;
    out.write_json("schema.json", &bench.schema)?;
    out.write_json(
        "oracle.json",
        &OracleParams {
            seed: settings.seed,
            n_train,
            n_test,
            missing_rate,
            columns: bench.schema.iter().map(|c| c.name.clone()).collect(),
            joint_mean: bench.joint_mean.clone(),
            joint_cov: bench.joint_cov.clone(),
        },
    )?;
    log::info!("{} masked test cells", bench.test.missing_count());
    out.finish(CommandSpec::Generate { n_train, n_test, missing_rate }, settings, vec![])
}

/// Re-runs the command recorded in `manifest_path` into `out_dir` and checks
/// that every artifact matches its recorded checksum.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> anyhow::Result<RunManifest> {
    let original = RunManifest::load(manifest_path)?;
    for rec in &original.inputs {
        let now = crate::manifest::sha256_file(&rec.path)?;
        ensure!(now == rec.sha256, "input {} changed since the recorded run", rec.path.display());
    }
    let settings = &original.config;
    let fresh = match &original.command {
        CommandSpec::SoilDemo => cmd_soil_demo(out_dir, settings)?,
        CommandSpec::Impute { train, test, schema, truth } => cmd_impute(
            &ImputeInputs { train, test, schema, truth: truth.as_deref() },
            settings,
            out_dir,
        )?,
        CommandSpec::Explain { run_dir } => cmd_explain(run_dir, settings, out_dir)?,
        CommandSpec::Generate { n_train, n_test, missing_rate } => {
            cmd_generate(*n_train, *n_test, *missing_rate, settings, out_dir)?
        }
    };
    let differing: Vec<String> = original
        .outputs
        .iter()
        .filter(|rec| !fresh.outputs.contains(rec))
        .map(|rec| rec.path.display().to_string())
        .collect();
    ensure!(
        differing.is_empty() && fresh.outputs.len() == original.outputs.len(),
        "replay differs from the recorded run: {}",
        differing.join(", ")
    );
    Ok(fresh)
}
