use std::collections::BTreeMap;

use super::{Bar, ChartSpec, HeatmapData, Payload, Series};
use crate::data::{SoilClass, SoilSample};
use crate::error::{Error, Result};
use crate::explain::{shap_scatter_data, FeatureGroup, FeatureImportance, ShapResult, SimilarityMatrix};
use crate::predictor::DecisionGrid;

/// Probability levels drawn on decision heatmaps; 0.5 is drawn in black.
pub const CONTOUR_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

const CLAY_COLOR: &str = "#2166ac";
const SAND_COLOR: &str = "#e66101";
const INDEX_COLOR: &str = "#2166ac";
const MECHANICAL_COLOR: &str = "#e66101";
const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#a6761d"];

fn reference_curve(soil: SoilClass, n_range: (f64, f64)) -> Series {
    let k = soil.vs_coefficient();
    let (lo, hi) = (n_range.0.max(1e-6), n_range.1);
    let points = (0..=100)
        .map(|i| {
            let n = lo + (hi - lo) * i as f64 / 100.0;
            (n, k * n.cbrt())
        })
        .collect();
    Series {
        name: format!("{}N^(1/3)", k),
        color: if soil == SoilClass::Clay { CLAY_COLOR } else { SAND_COLOR }.to_string(),
        points,
        dashed: true,
    }
}

/// The two power-law reference curves over `n_range`.
pub fn soil_reference_curves(n_range: (f64, f64)) -> Vec<Series> {
    vec![reference_curve(SoilClass::Clay, n_range), reference_curve(SoilClass::Sand, n_range)]
}

/// N against Vs for the training and test samples, with reference curves.
pub fn soil_scatter_chart(train: &[SoilSample], test: &[SoilSample]) -> Result<ChartSpec> {
    let all = || train.iter().chain(test);
    let n_lo = all().map(|s| s.n_value).fold(f64::INFINITY, f64::min);
    let n_hi = all().map(|s| s.n_value).fold(f64::NEG_INFINITY, f64::max);
    if !(n_lo.is_finite() && n_hi.is_finite()) {
        return Err(Error::Spec("no soil samples".into()));
    }
    let pick = |set: &[SoilSample], soil: SoilClass| -> Vec<(f64, f64)> {
        set.iter().filter(|s| s.soil == soil).map(|s| (s.n_value, s.vs)).collect()
    };
    let series = vec![
        Series { name: "Clay (train)".into(), color: CLAY_COLOR.into(), points: pick(train, SoilClass::Clay), dashed: false },
        Series { name: "Sand (train)".into(), color: SAND_COLOR.into(), points: pick(train, SoilClass::Sand), dashed: false },
        Series { name: "Clay (test)".into(), color: "#67a9cf".into(), points: pick(test, SoilClass::Clay), dashed: false },
        Series { name: "Sand (test)".into(), color: "#fdb863".into(), points: pick(test, SoilClass::Sand), dashed: false },
    ];
    let mut spec = ChartSpec::new("Soil samples", "SPT N-value", "Vs (m/s)", Payload::Scatter { series });
    spec.overlays = soil_reference_curves((n_lo, n_hi));
    Ok(spec)
}

/// Probability surface with iso-probability contours and the reference
/// curves.
pub fn decision_heatmap(grid: &DecisionGrid, x_label: &str, y_label: &str) -> Result<ChartSpec> {
    let (nx, ny) = (grid.nx(), grid.ny());
    if nx < 2 || ny < 2 {
        return Err(Error::Spec("decision grid too small".into()));
    }
    let half = |axis: &[f64]| 0.5 * (axis[1] - axis[0]);
    let x_range = (grid.x_axis[0] - half(&grid.x_axis), grid.x_axis[nx - 1] + half(&grid.x_axis));
    let y_range = (grid.y_axis[0] - half(&grid.y_axis), grid.y_axis[ny - 1] + half(&grid.y_axis));
    let values = (0..ny).map(|iy| (0..nx).map(|ix| grid.get(ix, iy)).collect()).collect();
    let mut spec = ChartSpec::new(
        format!("P({})", grid.class),
        x_label,
        y_label,
        Payload::Heatmap(HeatmapData {
            values,
            x_range,
            y_range,
            value_range: (0.0, 1.0),
            x_labels: Vec::new(),
            y_labels: Vec::new(),
            contours: CONTOUR_LEVELS.to_vec(),
        }),
    );
    spec.overlays = soil_reference_curves(x_range);
    Ok(spec)
}

/// Test rows top to bottom against training columns left to right.
pub fn similarity_heatmap(m: &SimilarityMatrix) -> Result<ChartSpec> {
    let (ny, nx) = (m.n_rows(), m.n_cols());
    if ny == 0 || nx == 0 {
        return Err(Error::Spec("empty similarity matrix".into()));
    }
    let values: Vec<Vec<f64>> = m.values.iter().rev().cloned().collect();
    let lo = if values.iter().flatten().all(|v| *v >= 0.0) { 0.0 } else { -1.0 };
    Ok(ChartSpec::new(
        "Cosine similarity",
        "training sample",
        "test sample",
        Payload::Heatmap(HeatmapData {
            values,
            x_range: (0.0, nx as f64),
            y_range: (0.0, ny as f64),
            value_range: (lo, 1.0),
            x_labels: m.col_labels.clone(),
            y_labels: m.row_labels.iter().rev().cloned().collect(),
            contours: Vec::new(),
        }),
    ))
}

/// Normalised RMSE per target against sweep number.
pub fn trend_chart(trend: &BTreeMap<String, Option<Vec<f64>>>) -> Result<ChartSpec> {
    let series: Vec<Series> = trend
        .iter()
        .filter_map(|(name, s)| s.as_ref().map(|s| (name, s)))
        .enumerate()
        .map(|(i, (name, s))| Series {
            name: name.clone(),
            color: PALETTE[i % PALETTE.len()].to_string(),
            points: s.iter().enumerate().map(|(k, v)| ((k + 1) as f64, *v)).collect(),
            dashed: false,
        })
        .collect();
    if series.is_empty() {
        return Err(Error::Spec("no target has a defined trend".into()));
    }
    Ok(ChartSpec::new("Normalised RMSE", "iteration", "RMSE / RMSE at iteration 1", Payload::Line { series }))
}

/// Mean |SHAP| per feature, largest first; index properties blue,
/// mechanical parameters orange.
pub fn shap_bar_chart(target: &str, importances: &[FeatureImportance]) -> Result<ChartSpec> {
    let mut sorted: Vec<&FeatureImportance> = importances.iter().collect();
    sorted.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then(a.feature.cmp(&b.feature)));
    let bars = sorted
        .into_iter()
        .map(|f| Bar {
            label: f.feature.clone(),
            value: f.mean_abs_shap,
            color: match f.group {
                FeatureGroup::IndexProperty => INDEX_COLOR,
                FeatureGroup::MechanicalParameter => MECHANICAL_COLOR,
            }
            .to_string(),
        })
        .collect();
    Ok(ChartSpec::new(format!("Mean |SHAP| for {target}"), "feature", "mean |SHAP|", Payload::Bar { bars }))
}

/// Feature value against its SHAP value across explained samples.
pub fn shap_scatter_chart(result: &ShapResult, feature: &str) -> Result<ChartSpec> {
    let points = shap_scatter_data(result, feature)?;
    Ok(ChartSpec::new(
        format!("SHAP of {feature} on {}", result.target),
        feature,
        "SHAP value",
        Payload::Scatter {
            series: vec![Series { name: String::new(), color: INDEX_COLOR.into(), points, dashed: false }],
        },
    ))
}
