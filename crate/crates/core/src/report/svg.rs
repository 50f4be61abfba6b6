use std::fmt::Write as _;

use super::{ChartSpec, HeatmapData, MarkerKind, Payload, Series};
use crate::error::Result;

pub const CANVAS_WIDTH: f64 = 800.0;
pub const CANVAS_HEIGHT: f64 = 600.0;
const LEFT: f64 = 0.1 * CANVAS_WIDTH;
const RIGHT: f64 = 0.9 * CANVAS_WIDTH;
const TOP: f64 = 0.1 * CANVAS_HEIGHT;
const BOTTOM: f64 = 0.9 * CANVAS_HEIGHT;

/// Low, mid and high stops of the heatmap ramp.
pub const RAMP_STOPS: [&str; 3] = ["#2166ac", "#f7f7f7", "#e66101"];
const RAMP_RGB: [[f64; 3]; 3] = [[33.0, 102.0, 172.0], [247.0, 247.0, 247.0], [230.0, 97.0, 1.0]];

const CONTOUR_MAJOR: &str = "#000000";
const CONTOUR_MINOR: &str = "#808080";
const TRUTH_COLOR: &str = "#f2c200";

fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    let s = num(v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Colour of `t` in `[0, 1]` on the diverging ramp, as `#rrggbb`.
pub fn ramp_color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.5 };
    let (lo, hi, u) = if t <= 0.5 { (0, 1, t / 0.5) } else { (1, 2, (t - 0.5) / 0.5) };
    let c: Vec<u8> = (0..3)
        .map(|i| (RAMP_RGB[lo][i] + u * (RAMP_RGB[hi][i] - RAMP_RGB[lo][i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Linear map from a data interval onto a pixel interval.
#[derive(Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    p0: f64,
    p1: f64,
}

impl Scale {
    fn at(&self, v: f64) -> f64 {
        self.p0 + (v - self.d0) / (self.d1 - self.d0) * (self.p1 - self.p0)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        let w = if lo.abs() > 0.0 { 0.1 * lo.abs() } else { 1.0 };
        return (lo - w, hi + w);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((a, b)) => Some((a.min(v), b.max(v))),
    })
}

pub fn render_svg(spec: &ChartSpec) -> Result<String> {
    spec.validate()?;
    let overlay_pts = || spec.overlays.iter().flat_map(|s| s.points.iter().copied());
    let marker_pts = || spec.markers.iter().map(|m| (m.x, m.y));

    let (xr, yr) = match &spec.payload {
        Payload::Heatmap(h) => (h.x_range, h.y_range),
        Payload::Line { series } | Payload::Scatter { series } => {
            let pts = || {
                series
                    .iter()
                    .flat_map(|s| s.points.iter().copied())
                    .chain(overlay_pts())
                    .chain(marker_pts())
            };
            let (x0, x1) = extent(pts().map(|p| p.0)).unwrap_or((0.0, 1.0));
            let (y0, y1) = extent(pts().map(|p| p.1)).unwrap_or((0.0, 1.0));
            (padded(x0, x1), padded(y0, y1))
        }
        Payload::Violin { violins } => {
            let ys = violins
                .iter()
                .flat_map(|v| [v.bin_edges[0], v.bin_edges[v.bin_edges.len() - 1]])
                .chain(marker_pts().map(|p| p.1))
                .chain(overlay_pts().map(|p| p.1));
            let (y0, y1) = extent(ys).unwrap_or((0.0, 1.0));
            ((-0.5, violins.len() as f64 - 0.5), padded(y0, y1))
        }
        Payload::Bar { bars } => {
            let (y0, y1) = extent(bars.iter().map(|b| b.value).chain([0.0])).unwrap_or((0.0, 1.0));
            let (_, top) = padded(y0, y1);
            ((-0.5, bars.len() as f64 - 0.5), (y0.min(0.0), top))
        }
    };
    let sx = Scale { d0: xr.0, d1: xr.1, p0: LEFT, p1: RIGHT };
    let sy = Scale { d0: yr.0, d1: yr.1, p0: BOTTOM, p1: TOP };

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">",
        w = CANVAS_WIDTH,
        h = CANVAS_HEIGHT
    );
    let _ = writeln!(
        s,
        "<defs><clipPath id=\"plot\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath></defs>",
        num(LEFT),
        num(TOP),
        num(RIGHT - LEFT),
        num(BOTTOM - TOP)
    );
    let _ = writeln!(s, "<rect width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>", CANVAS_WIDTH, CANVAS_HEIGHT);
    let _ = writeln!(
        s,
        "<text class=\"title\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        num(CANVAS_WIDTH / 2.0),
        num(TOP / 2.0),
        escape(&spec.title)
    );

    let mut legend: Vec<(&str, &str, bool)> = Vec::new();
    match &spec.payload {
        Payload::Heatmap(h) => heatmap(&mut s, h, sx, sy),
        Payload::Line { series } => {
            s.push_str("<g clip-path=\"url(#plot)\">\n");
            for ser in series {
                polyline(&mut s, ser, sx, sy, "series");
            }
            s.push_str("</g>\n");
            legend.extend(series.iter().filter(|x| !x.name.is_empty()).map(|x| (x.name.as_str(), x.color.as_str(), x.dashed)));
        }
        Payload::Scatter { series } => {
            for ser in series {
                for &(x, y) in &ser.points {
                    let _ = writeln!(
                        s,
                        "<circle class=\"point\" cx=\"{}\" cy=\"{}\" r=\"3.5\" fill=\"{}\" fill-opacity=\"0.8\"/>",
                        num(sx.at(x)),
                        num(sy.at(y)),
                        escape(&ser.color)
                    );
                }
            }
            legend.extend(series.iter().filter(|x| !x.name.is_empty()).map(|x| (x.name.as_str(), x.color.as_str(), false)));
        }
        Payload::Violin { violins } => {
            let max_d = violins
                .iter()
                .flat_map(|v| v.density.iter().copied())
                .fold(0.0f64, f64::max);
            let slot = sx.at(1.0) - sx.at(0.0);
            for (i, v) in violins.iter().enumerate() {
                let cx = sx.at(i as f64);
                let half: Vec<f64> = v
                    .density
                    .iter()
                    .map(|d| if max_d > 0.0 { 0.4 * slot * d / max_d } else { 0.0 })
                    .collect();
                let mut right = Vec::new();
                for (b, w) in half.iter().enumerate() {
                    right.push((cx + w, sy.at(v.bin_edges[b])));
                    right.push((cx + w, sy.at(v.bin_edges[b + 1])));
                }
                let left: Vec<(f64, f64)> = right.iter().rev().map(|&(x, y)| (2.0 * cx - x, y)).collect();
                let pts: Vec<String> = right
                    .iter()
                    .chain(&left)
                    .map(|&(x, y)| format!("{},{}", num(x), num(y)))
                    .collect();
                let _ = writeln!(
                    s,
                    "<polygon class=\"violin\" points=\"{}\" fill=\"#9ecae1\" stroke=\"#3182bd\" stroke-width=\"1\"/>",
                    pts.join(" ")
                );
            }
        }
        Payload::Bar { bars } => {
            let slot = sx.at(1.0) - sx.at(0.0);
            let y0 = sy.at(0.0);
            for (i, b) in bars.iter().enumerate() {
                let y1 = sy.at(b.value);
                let _ = writeln!(
                    s,
                    "<rect class=\"bar\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
                    num(sx.at(i as f64) - 0.3 * slot),
                    num(y0.min(y1)),
                    num(0.6 * slot),
                    num((y1 - y0).abs()),
                    escape(&b.color)
                );
            }
        }
    }

    if !spec.overlays.is_empty() {
        s.push_str("<g clip-path=\"url(#plot)\">\n");
        for ser in &spec.overlays {
            polyline(&mut s, ser, sx, sy, "overlay");
        }
        s.push_str("</g>\n");
        legend.extend(spec.overlays.iter().filter(|x| !x.name.is_empty()).map(|x| (x.name.as_str(), x.color.as_str(), x.dashed)));
    }

    let violin_half = match &spec.payload {
        Payload::Violin { .. } => 0.15 * (sx.at(1.0) - sx.at(0.0)),
        _ => 10.0,
    };
    for m in &spec.markers {
        let (x, y) = (sx.at(m.x), sy.at(m.y));
        let _ = match m.kind {
            MarkerKind::Median => writeln!(
                s,
                "<line class=\"marker-median\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\" stroke-width=\"3\"/>",
                num(x - violin_half),
                num(y),
                num(x + violin_half),
                num(y)
            ),
            MarkerKind::Truth => writeln!(
                s,
                "<circle class=\"marker-truth\" cx=\"{}\" cy=\"{}\" r=\"6\" fill=\"none\" stroke=\"{TRUTH_COLOR}\" stroke-width=\"2.5\"/>",
                num(x),
                num(y)
            ),
            MarkerKind::Observed => writeln!(
                s,
                "<circle class=\"marker-observed\" cx=\"{}\" cy=\"{}\" r=\"4\" fill=\"#000000\"/>",
                num(x),
                num(y)
            ),
        };
    }

    axes(&mut s, spec, sx, sy);

    for (i, (name, color, dashed)) in legend.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let dash = if *dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            s,
            "<line class=\"legend\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"{dash}/>",
            num(LEFT + 10.0),
            num(y),
            num(LEFT + 34.0),
            num(y),
            escape(color)
        );
        let _ = writeln!(
            s,
            "<text class=\"legend\" x=\"{}\" y=\"{}\">{}</text>",
            num(LEFT + 40.0),
            num(y + 4.0),
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn polyline(s: &mut String, ser: &Series, sx: Scale, sy: Scale, class: &str) {
    if ser.points.is_empty() {
        return;
    }
    let pts: Vec<String> = ser
        .points
        .iter()
        .map(|&(x, y)| format!("{},{}", num(sx.at(x)), num(sy.at(y))))
        .collect();
    let dash = if ser.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
    let _ = writeln!(
        s,
        "<polyline class=\"{class}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{dash}/>",
        pts.join(" "),
        escape(&ser.color)
    );
}

fn heatmap(s: &mut String, h: &HeatmapData, sx: Scale, sy: Scale) {
    let ny = h.values.len();
    let nx = h.values[0].len();
    let dx = (h.x_range.1 - h.x_range.0) / nx as f64;
    let dy = (h.y_range.1 - h.y_range.0) / ny as f64;
    let (v0, v1) = h.value_range;
    s.push_str("<g shape-rendering=\"crispEdges\">\n");
    for (iy, row) in h.values.iter().enumerate() {
        let top = sy.at(h.y_range.0 + (iy + 1) as f64 * dy);
        let bottom = sy.at(h.y_range.0 + iy as f64 * dy);
        for (ix, v) in row.iter().enumerate() {
            let left = sx.at(h.x_range.0 + ix as f64 * dx);
            let right = sx.at(h.x_range.0 + (ix + 1) as f64 * dx);
            let _ = writeln!(
                s,
                "<rect class=\"cell\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
                num(left),
                num(top),
                num(right - left),
                num(bottom - top),
                ramp_color((v - v0) / (v1 - v0))
            );
        }
    }
    s.push_str("</g>\n");

    if !h.contours.is_empty() && nx >= 2 && ny >= 2 {
        s.push_str("<g clip-path=\"url(#plot)\" fill=\"none\">\n");
        for &level in &h.contours {
            let segs = contour_segments(&h.values, level);
            if segs.is_empty() {
                continue;
            }
            let at = |(gx, gy): (f64, f64)| {
                (
                    sx.at(h.x_range.0 + (gx + 0.5) * dx),
                    sy.at(h.y_range.0 + (gy + 0.5) * dy),
                )
            };
            let mut d = String::new();
            for (a, b) in segs {
                let (pa, pb) = (at(a), at(b));
                let _ = write!(d, "M{} {}L{} {}", num(pa.0), num(pa.1), num(pb.0), num(pb.1));
            }
            let (color, width) = if (level - 0.5).abs() < 1e-12 {
                (CONTOUR_MAJOR, 1.5)
            } else {
                (CONTOUR_MINOR, 1.0)
            };
            let _ = writeln!(
                s,
                "<path class=\"contour\" data-level=\"{}\" d=\"{d}\" stroke=\"{color}\" stroke-width=\"{width}\"/>",
                num(level)
            );
        }
        s.push_str("</g>\n");
    }

    // colour bar in the right margin
    let steps = 20;
    let bar_x = RIGHT + 15.0;
    let h_step = (BOTTOM - TOP) / steps as f64;
    for i in 0..steps {
        let t = (i as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            s,
            "<rect class=\"ramp\" x=\"{}\" y=\"{}\" width=\"15\" height=\"{}\" fill=\"{}\"/>",
            num(bar_x),
            num(BOTTOM - (i + 1) as f64 * h_step),
            num(h_step),
            ramp_color(t)
        );
    }
    for (v, y) in [(v0, BOTTOM), (v1, TOP)] {
        let _ = writeln!(
            s,
            "<text class=\"ramp\" x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>",
            num(bar_x + 18.0),
            num(y + 4.0),
            tick_label(v)
        );
    }
}

/// Iso-line segments in grid coordinates (cell-centre units) by marching
/// squares; saddles are split by the cell-centre average.
fn contour_segments(values: &[Vec<f64>], level: f64) -> Vec<((f64, f64), (f64, f64))> {
    let ny = values.len();
    let nx = values[0].len();
    let mut segs = Vec::new();
    let cross = |p: (f64, f64), vp: f64, q: (f64, f64), vq: f64| {
        let t = (level - vp) / (vq - vp);
        (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
    };
    for iy in 0..ny - 1 {
        for ix in 0..nx - 1 {
            let (x0, y0, x1, y1) = (ix as f64, iy as f64, ix as f64 + 1.0, iy as f64 + 1.0);
            let a = values[iy][ix];
            let b = values[iy][ix + 1];
            let c = values[iy + 1][ix + 1];
            let d = values[iy + 1][ix];
            let above = |v: f64| v >= level;
            // edges: bottom a-b, right b-c, top d-c, left a-d
            let edges = [
                ((x0, y0), a, (x1, y0), b),
                ((x1, y0), b, (x1, y1), c),
                ((x0, y1), d, (x1, y1), c),
                ((x0, y0), a, (x0, y1), d),
            ];
            let hits: Vec<Option<(f64, f64)>> = edges
                .iter()
                .map(|&(p, vp, q, vq)| (above(vp) != above(vq)).then(|| cross(p, vp, q, vq)))
                .collect();
            let found: Vec<(f64, f64)> = hits.iter().flatten().copied().collect();
            match found.len() {
                2 => segs.push((found[0], found[1])),
                4 => {
                    let centre = 0.25 * (a + b + c + d);
                    let h = |i: usize| hits[i].expect("saddle has four crossings");
                    if above(centre) == above(a) {
                        segs.push((h(0), h(1)));
                        segs.push((h(2), h(3)));
                    } else {
                        segs.push((h(0), h(3)));
                        segs.push((h(1), h(2)));
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

fn axes(s: &mut String, spec: &ChartSpec, sx: Scale, sy: Scale) {
    let _ = writeln!(
        s,
        "<rect class=\"frame\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>",
        num(LEFT),
        num(TOP),
        num(RIGHT - LEFT),
        num(BOTTOM - TOP)
    );
    let x_ticks: Vec<(f64, String)> = match &spec.payload {
        Payload::Heatmap(h) if !h.x_labels.is_empty() => {
            let dx = (h.x_range.1 - h.x_range.0) / h.x_labels.len() as f64;
            h.x_labels
                .iter()
                .enumerate()
                .map(|(i, l)| (h.x_range.0 + (i as f64 + 0.5) * dx, l.clone()))
                .collect()
        }
        Payload::Violin { violins } => violins.iter().enumerate().map(|(i, v)| (i as f64, v.label.clone())).collect(),
        Payload::Bar { bars } => bars.iter().enumerate().map(|(i, b)| (i as f64, b.label.clone())).collect(),
        _ => numeric_ticks(sx.d0, sx.d1),
    };
    let y_ticks: Vec<(f64, String)> = match &spec.payload {
        Payload::Heatmap(h) if !h.y_labels.is_empty() => {
            let dy = (h.y_range.1 - h.y_range.0) / h.y_labels.len() as f64;
            h.y_labels
                .iter()
                .enumerate()
                .map(|(i, l)| (h.y_range.0 + (i as f64 + 0.5) * dy, l.clone()))
                .collect()
        }
        _ => numeric_ticks(sy.d0, sy.d1),
    };
    let rotate = matches!(spec.payload, Payload::Bar { .. });
    for (v, label) in x_ticks {
        let x = sx.at(v);
        let _ = writeln!(
            s,
            "<line class=\"tick\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#333333\"/>",
            num(x),
            num(BOTTOM),
            num(BOTTOM + 5.0)
        );
        if rotate {
            let _ = writeln!(
                s,
                "<text class=\"tick\" x=\"{0}\" y=\"{1}\" text-anchor=\"end\" font-size=\"10\" transform=\"rotate(-35 {0} {1})\">{2}</text>",
                num(x),
                num(BOTTOM + 16.0),
                escape(&label)
            );
        } else {
            let _ = writeln!(
                s,
                "<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>",
                num(x),
                num(BOTTOM + 17.0),
                escape(&label)
            );
        }
    }
    for (v, label) in y_ticks {
        let y = sy.at(v);
        let _ = writeln!(
            s,
            "<line class=\"tick\" x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#333333\"/>",
            num(LEFT - 5.0),
            num(y),
            num(LEFT)
        );
        let _ = writeln!(
            s,
            "<text class=\"tick\" x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{}</text>",
            num(LEFT - 8.0),
            num(y + 3.0),
            escape(&label)
        );
    }
    let _ = writeln!(
        s,
        "<text class=\"axis-label\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        num((LEFT + RIGHT) / 2.0),
        num(CANVAS_HEIGHT - 12.0),
        escape(&spec.x_label)
    );
    let (lx, ly) = (18.0, (TOP + BOTTOM) / 2.0);
    let _ = writeln!(
        s,
        "<text class=\"axis-label\" x=\"{0}\" y=\"{1}\" text-anchor=\"middle\" transform=\"rotate(-90 {0} {1})\">{2}</text>",
        num(lx),
        num(ly),
        escape(&spec.y_label)
    );
}

/// Ticks at multiples of a 1-2-5 step, about five per axis.
fn numeric_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw * (1.0 - 1e-9))
        .unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).clamp(0.0, 4.0) as usize;
    let mut ticks = Vec::new();
    let mut i = (lo / step).ceil();
    while i * step <= hi + 1e-9 * step {
        let v = i * step;
        let label = format!("{v:.decimals$}");
        let label = if label.starts_with('-') && label[1..].chars().all(|c| c == '0' || c == '.') {
            label[1..].to_string()
        } else {
            label
        };
        ticks.push((v, label));
        i += 1.0;
    }
    ticks
}
