//! Deterministic SVG charts and CSV tables.
//!
//! Every chart is described by a [`ChartSpec`] and rendered by
//! [`render_svg`] onto a fixed 800×600 canvas with 10% margins. Numbers in
//! the output are written with four decimals, so identical specs give
//! byte-identical documents.
//!
//! Heatmaps use a diverging ramp through three stops: `#2166ac` (low),
//! `#f7f7f7` (mid) and `#e66101` (high), interpolated linearly in RGB.

mod charts;
mod svg;

pub use charts::{
    decision_heatmap, shap_bar_chart, shap_scatter_chart, similarity_heatmap, soil_reference_curves,
    soil_scatter_chart,
    trend_chart, CONTOUR_LEVELS,
};
pub use svg::{ramp_color, render_svg, CANVAS_HEIGHT, CANVAS_WIDTH, RAMP_STOPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imputation::ImputationRun;
use crate::predictor::DiscretePosterior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartKind {
    Heatmap,
    Line,
    Violin,
    Bar,
    Scatter,
}

/// A polyline or point set in data coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    #[serde(default)]
    pub dashed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapData {
    /// `values[iy][ix]`, `iy = 0` at the bottom of the plot.
    pub values: Vec<Vec<f64>>,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Values mapped to the ends of the colour ramp.
    pub value_range: (f64, f64),
    /// Categorical tick labels; numeric ticks when empty.
    #[serde(default)]
    pub x_labels: Vec<String>,
    #[serde(default)]
    pub y_labels: Vec<String>,
    /// Iso-lines drawn through the cell centres.
    #[serde(default)]
    pub contours: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violin {
    pub label: String,
    pub bin_edges: Vec<f64>,
    /// Probability density per bin.
    pub density: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub label: String,
    pub value: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Payload {
    Heatmap(HeatmapData),
    Line { series: Vec<Series> },
    Violin { violins: Vec<Violin> },
    Bar { bars: Vec<Bar> },
    Scatter { series: Vec<Series> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerKind {
    /// Black horizontal bar.
    Median,
    /// Yellow open circle.
    Truth,
    /// Black filled circle.
    Observed,
}

/// Marker in data coordinates. Violin charts place violin `i` at `x = i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub kind: MarkerKind,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub payload: Payload,
    /// Curves drawn over the payload, clipped to the plot area.
    #[serde(default)]
    pub overlays: Vec<Series>,
    #[serde(default)]
    pub markers: Vec<Marker>,
}

impl ChartSpec {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>, payload: Payload) -> Self {
        ChartSpec {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            payload,
            overlays: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn kind(&self) -> ChartKind {
        match self.payload {
            Payload::Heatmap(_) => ChartKind::Heatmap,
            Payload::Line { .. } => ChartKind::Line,
            Payload::Violin { .. } => ChartKind::Violin,
            Payload::Bar { .. } => ChartKind::Bar,
            Payload::Scatter { .. } => ChartKind::Scatter,
        }
    }

    /// Checks that the payload is non-empty, rectangular and finite.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Spec(format!("{}: {m}", self.title)));
        let finite_range = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && b > a;
        let series_ok = |s: &[Series]| {
            s.iter()
                .all(|s| s.points.iter().all(|(x, y)| x.is_finite() && y.is_finite()))
        };
        match &self.payload {
            Payload::Heatmap(h) => {
                let ny = h.values.len();
                let nx = h.values.first().map_or(0, Vec::len);
                if ny == 0 || nx == 0 {
                    return bad("empty heatmap");
                }
                if h.values.iter().any(|r| r.len() != nx) {
                    return bad("ragged heatmap rows");
                }
                if h.values.iter().flatten().any(|v| !v.is_finite()) {
                    return bad("non-finite heatmap value");
                }
                if !(finite_range(h.x_range) && finite_range(h.y_range) && finite_range(h.value_range)) {
                    return bad("degenerate heatmap range");
                }
                if (!h.x_labels.is_empty() && h.x_labels.len() != nx)
                    || (!h.y_labels.is_empty() && h.y_labels.len() != ny)
                {
                    return bad("tick labels do not match heatmap shape");
                }
            }
            Payload::Line { series } | Payload::Scatter { series } => {
                if series.iter().all(|s| s.points.is_empty()) {
                    return bad("no points");
                }
                if !series_ok(series) {
                    return bad("non-finite point");
                }
            }
            Payload::Violin { violins } => {
                if violins.is_empty() {
                    return bad("no violins");
                }
                for v in violins {
                    if v.bin_edges.len() != v.density.len() + 1 || v.density.is_empty() {
                        return bad("violin edges must exceed densities by one");
                    }
                    if v.bin_edges.windows(2).any(|w| !(w[1] > w[0]))
                        || v.density.iter().any(|d| !d.is_finite() || *d < 0.0)
                    {
                        return bad("invalid violin bins");
                    }
                }
            }
            Payload::Bar { bars } => {
                if bars.is_empty() {
                    return bad("no bars");
                }
                if bars.iter().any(|b| !b.value.is_finite()) {
                    return bad("non-finite bar");
                }
            }
        }
        if !series_ok(&self.overlays) || self.markers.iter().any(|m| !(m.x.is_finite() && m.y.is_finite())) {
            return bad("non-finite overlay or marker");
        }
        Ok(())
    }
}

/// Violin of a discretised posterior with a median bar and optional truth
/// and observed markers.
pub fn violin_from_posterior(p: &DiscretePosterior, truth: Option<f64>, observed: Option<f64>) -> ChartSpec {
    let density = p
        .probs
        .iter()
        .enumerate()
        .map(|(b, pr)| pr / p.bin_width(b))
        .collect();
    let mut spec = ChartSpec::new(
        "Posterior",
        "",
        "value",
        Payload::Violin {
            violins: vec![Violin {
                label: String::new(),
                bin_edges: p.bin_edges.clone(),
                density,
            }],
        },
    );
    spec.markers.push(Marker {
        kind: MarkerKind::Median,
        x: 0.0,
        y: p.median(),
    });
    if let Some(t) = truth {
        spec.markers.push(Marker { kind: MarkerKind::Truth, x: 0.0, y: t });
    }
    if let Some(o) = observed {
        spec.markers.push(Marker { kind: MarkerKind::Observed, x: 0.0, y: o });
    }
    spec
}

/// RMSE at sweep 1 and sweep K per target, with their ratio. Targets
/// without missing cells get empty cells; so does the ratio when the sweep-1
/// RMSE is zero.
pub fn table_rmse(run: &ImputationRun) -> Result<String> {
    let table = run
        .rmse_by_iteration
        .as_ref()
        .ok_or_else(|| Error::Usage("RMSE table needs a run made with truth".into()))?;
    if run.iterations() == 0 {
        return Err(Error::Usage("RMSE table needs at least one sweep".into()));
    }
    let mut out = String::from("target,rmse_iter1,rmse_iterK,ratio\n");
    for name in &run.target_order {
        out.push_str(name);
        match table.get(name).and_then(Option::as_ref) {
            Some(s) => {
                let (first, last) = (s[1], s[s.len() - 1]);
                out.push_str(&format!(",{first},{last},"));
                if first > 0.0 {
                    out.push_str(&(last / first).to_string());
                }
            }
            None => out.push_str(",,,"),
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
