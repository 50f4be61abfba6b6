use std::collections::BTreeMap;

use super::*;
use crate::data::builtin_soil_dataset;
use crate::explain::cosine_matrix;
use crate::predictor::{build_context, PredictorHyper};

fn parse(svg: &str) -> roxmltree::Document<'_> {
    roxmltree::Document::parse(svg).expect("well-formed SVG")
}

fn count_class(svg: &str, class: &str) -> usize {
    parse(svg)
        .descendants()
        .filter(|n| n.attribute("class") == Some(class))
        .count()
}

fn heatmap(values: Vec<Vec<f64>>) -> ChartSpec {
    let (ny, nx) = (values.len() as f64, values[0].len() as f64);
    ChartSpec::new(
        "h",
        "x",
        "y",
        Payload::Heatmap(HeatmapData {
            values,
            x_range: (0.0, nx),
            y_range: (0.0, ny),
            value_range: (0.0, 1.0),
            x_labels: vec![],
            y_labels: vec![],
            contours: vec![0.5],
        }),
    )
}

#[test]
fn single_cell_heatmap() {
    let svg = render_svg(&heatmap(vec![vec![0.3]])).unwrap();
    assert_eq!(count_class(&svg, "cell"), 1);
}

#[test]
fn identical_specs_render_identically() {
    let spec = heatmap(vec![vec![0.1, 0.9], vec![0.7, 0.2]]);
    assert_eq!(render_svg(&spec).unwrap(), render_svg(&spec.clone()).unwrap());
}

#[test]
fn fixture_similarity_heatmap_has_256_cells() {
    let (train, test) = builtin_soil_dataset();
    let ctx = build_context(&train, "soil", &PredictorHyper::default()).unwrap();
    let emb = |t: &crate::data::DataTable| -> Vec<Vec<f64>> {
        (0..t.n_rows())
            .map(|r| ctx.embed(&t.row(r)[..2]).unwrap().0)
            .collect()
    };
    let m = cosine_matrix(&emb(&test), &emb(&train)).unwrap();
    let svg = render_svg(&similarity_heatmap(&m).unwrap()).unwrap();
    assert_eq!(count_class(&svg, "cell"), 256);
}

#[test]
fn inconsistent_payloads_are_spec_errors() {
    let ragged = heatmap(vec![vec![0.1, 0.2], vec![0.3]]);
    assert!(matches!(render_svg(&ragged), Err(Error::Spec(_))));
    let nan = heatmap(vec![vec![f64::NAN]]);
    assert!(render_svg(&nan).is_err());
    let violin = ChartSpec::new(
        "v",
        "",
        "",
        Payload::Violin {
            violins: vec![Violin { label: "a".into(), bin_edges: vec![0.0, 1.0], density: vec![0.5, 0.5] }],
        },
    );
    assert!(render_svg(&violin).is_err());
    assert!(render_svg(&ChartSpec::new("b", "", "", Payload::Bar { bars: vec![] })).is_err());
}

#[test]
fn every_kind_is_well_formed() {
    let series = vec![Series { name: "a & b".into(), color: "#000000".into(), points: vec![(0.0, 1.0), (1.0, 2.0)], dashed: true }];
    let specs = vec![
        ChartSpec::new("<line>", "x", "y", Payload::Line { series: series.clone() }),
        ChartSpec::new("scatter", "x", "y", Payload::Scatter { series }),
        ChartSpec::new(
            "bar",
            "x",
            "y",
            Payload::Bar { bars: vec![Bar { label: "w".into(), value: -0.5, color: "#2166ac".into() }] },
        ),
    ];
    for spec in specs {
        let svg = render_svg(&spec).unwrap();
        let doc = parse(&svg);
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        assert_eq!(doc.root_element().attribute("width"), Some("800"));
    }
}

fn posterior(probs: Vec<f64>) -> DiscretePosterior {
    let edges = (0..=probs.len()).map(|i| i as f64).collect();
    DiscretePosterior::new(edges, probs).unwrap()
}

fn polygon_points(svg: &str) -> Vec<(f64, f64)> {
    let doc = parse(svg);
    let poly = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("violin"))
        .unwrap();
    poly.attribute("points")
        .unwrap()
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn point_mass_violin_is_a_bar() {
    let mut probs = vec![0.0; 8];
    probs[3] = 1.0;
    let p = posterior(probs);
    let spec = violin_from_posterior(&p, None, None);
    let svg = render_svg(&spec).unwrap();
    let pts = polygon_points(&svg);
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let centre = 400.0;
    // only the occupied bin has non-zero width
    let wide: Vec<&(f64, f64)> = pts.iter().filter(|p| (p.0 - centre).abs() > 1e-6).collect();
    assert_eq!(wide.len(), 4);
    assert!(xs.iter().any(|&x| x > centre) && xs.iter().any(|&x| x < centre));
    assert_eq!(spec.markers[0], Marker { kind: MarkerKind::Median, x: 0.0, y: 3.5 });
}

#[test]
fn symmetric_violin_has_centred_median() {
    let p = posterior(vec![0.1, 0.2, 0.4, 0.2, 0.1]);
    let spec = violin_from_posterior(&p, Some(2.2), Some(1.0));
    assert!((spec.markers[0].y - 2.5).abs() < 1e-12);
    assert_eq!(spec.markers[1].kind, MarkerKind::Truth);
    assert_eq!(spec.markers[2].kind, MarkerKind::Observed);
    let svg = render_svg(&spec).unwrap();
    assert_eq!(count_class(&svg, "marker-truth"), 1);
    assert_eq!(count_class(&svg, "marker-observed"), 1);
    let pts = polygon_points(&svg);
    let widths: Vec<f64> = pts.iter().take(pts.len() / 2).map(|p| p.0 - 400.0).collect();
    let rev: Vec<f64> = widths.iter().rev().copied().collect();
    for (a, b) in widths.iter().zip(&rev) {
        assert!((a - b).abs() < 1e-9);
    }
}

fn run_with(rmse: BTreeMap<String, Option<Vec<f64>>>, order: Vec<&str>, k: usize) -> ImputationRun {
    ImputationRun {
        columns: order.iter().map(|s| s.to_string()).collect(),
        target_order: order.iter().map(|s| s.to_string()).collect(),
        estimates: vec![vec![]; k + 1],
        final_posteriors: vec![],
        rmse_by_iteration: Some(rmse),
        missing_mask: vec![],
    }
}

#[test]
fn rmse_table_cases() {
    let mut m = BTreeMap::new();
    m.insert("a".to_string(), Some(vec![3.0, 2.0, 2.0, 2.0]));
    m.insert("b".to_string(), Some(vec![1.0, 0.0, 0.0, 0.0]));
    m.insert("c".to_string(), None);
    m.insert("d".to_string(), Some(vec![4.0, 2.0, 1.5, 1.0]));
    let csv = table_rmse(&run_with(m, vec!["a", "b", "c", "d"], 3)).unwrap();
    assert_eq!(csv, "target,rmse_iter1,rmse_iterK,ratio\na,2,2,1\nb,0,0,\nc,,,\nd,2,1,0.5\n");
}

#[test]
fn rmse_table_needs_truth() {
    let mut run = run_with(BTreeMap::new(), vec!["a"], 2);
    run.rmse_by_iteration = None;
    assert!(table_rmse(&run).is_err());
}

#[test]
fn decision_heatmap_has_contours_and_references() {
    let (train, _) = builtin_soil_dataset();
    let ctx = build_context(&train, "soil", &PredictorHyper::default()).unwrap();
    let grid = crate::predictor::decision_grid(&ctx, "Sand", (1.0, 50.0), (100.0, 400.0), (20, 20), crate::Exec::Sequential)
        .unwrap();
    let spec = decision_heatmap(&grid, "N", "Vs").unwrap();
    assert_eq!(spec.overlays.len(), 2);
    let svg = render_svg(&spec).unwrap();
    assert_eq!(count_class(&svg, "cell"), 400);
    assert!(count_class(&svg, "contour") >= 1);
    assert_eq!(count_class(&svg, "overlay"), 2);
}

#[test]
fn trend_chart_skips_undefined_targets() {
    let mut t = BTreeMap::new();
    t.insert("a".to_string(), Some(vec![1.0, 0.9, 0.8]));
    t.insert("b".to_string(), None);
    let spec = trend_chart(&t).unwrap();
    match &spec.payload {
        Payload::Line { series } => {
            assert_eq!(series.len(), 1);
            assert_eq!(series[0].points[2], (3.0, 0.8));
        }
        _ => unreachable!(),
    }
    t.remove("a");
    assert!(trend_chart(&t).is_err());
}
