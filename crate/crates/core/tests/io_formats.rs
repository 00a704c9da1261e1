use bernstein_copula::datasets::{example_joint, storm_flood_counts};
use bernstein_copula::fit::ContingencyTensor;
use bernstein_copula::io::{
    format_counts, format_joint, format_matrix, format_number, format_sample, format_tensor,
    parse_csv, parse_joint, parse_joint_tensor, parse_sample,
};
use bernstein_copula::plot::{contour_svg, pml_svg, ContourOptions};
use bernstein_copula::risk::{RiskReport, ScenarioResult};
use bernstein_copula::sim::{sample_bernstein, CopulaKind};
use bernstein_copula::{DensityKind, DiscreteJoint, Error, RandomSource, Tensor};
use proptest::prelude::*;

#[test]
fn csv_dialect() {
    let text = "# a comment\nx,y\n1,2.5\n\n# another\n-3e2,4\n";
    let t = parse_csv(text).unwrap();
    assert_eq!(t.header, Some(vec!["x".to_string(), "y".to_string()]));
    assert_eq!(t.rows, vec![vec![1.0, 2.5], vec![-300.0, 4.0]]);
    assert_eq!(t.comments.len(), 2);
    // Semicolons and decimal commas are not part of the dialect.
    match parse_csv("x,y\n1,5;3\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
    match parse_csv("1,2\n3,oops\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn shipped_data_files_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let ranks = parse_csv(&std::fs::read_to_string(dir.join("windstorm_flood_ranks.csv")).unwrap())
        .unwrap();
    assert_eq!(ranks.rows.len(), 34);
    assert_eq!(ranks.header.as_ref().map(Vec::len), Some(2));
    let joint =
        parse_joint(&std::fs::read_to_string(dir.join("example_4x4.csv")).unwrap()).unwrap();
    assert_eq!(joint, example_joint().unwrap());
}

#[test]
fn joint_roundtrips() {
    let joint = example_joint().unwrap();
    assert_eq!(parse_joint(&format_joint(&joint)).unwrap(), joint);

    let mut t = Tensor::filled(vec![2, 3, 2], 1.0 / 12.0).unwrap();
    t.set(&[0, 1, 1], 0.0);
    t.set(&[0, 1, 0], 2.0 / 12.0);
    t.set(&[1, 1, 1], 2.0 / 12.0);
    t.set(&[1, 1, 0], 0.0);
    let j3 = DiscreteJoint::new(t).unwrap();
    let text = format_joint(&j3);
    assert!(text.starts_with("# dims: 2,3,2\n"));
    assert_eq!(parse_joint(&text).unwrap(), j3);

    let counts = ContingencyTensor::from_count_rows(&storm_flood_counts()).unwrap();
    let back = parse_joint_tensor(&format_counts(&counts)).unwrap();
    assert_eq!(back.data().iter().sum::<f64>(), 34.0);
}

#[test]
fn joint_layout_errors() {
    assert!(parse_joint_tensor("# dims: 2,2\n0,0,0.5\n0,0,0.5\n").is_err());
    assert!(parse_joint_tensor("# dims: 2,2\n0,2,0.5\n").is_err());
    assert!(parse_joint_tensor("# dims: 2,2\n0,0\n").is_err());
    assert!(parse_joint_tensor("# only a comment\n").is_err());
    // Valid layout, but margins far from uniform.
    assert!(parse_joint("0.5,0.2\n0.2,0.1\n").is_err());
}

#[test]
fn sample_roundtrip() {
    let joint = example_joint().unwrap();
    let batch = sample_bernstein(
        &joint,
        &joint.density_bound(),
        200,
        &mut RandomSource::new(9),
    )
    .unwrap();
    let text = format_sample(&batch);
    assert!(text.starts_with("# seed=9, kind=bernstein, acceptance="));
    let back = parse_sample(&text).unwrap();
    assert_eq!(back, batch);
    assert!(parse_sample("0.1,0.2\n").is_err());
}

#[test]
fn matrix_formatting() {
    let text = format_matrix(&[vec![0.0, 0.25], vec![1e-20, -3.5]], &["note".to_string()]);
    assert_eq!(text, "# note\n0,0.25\n1e-20,-3.5\n");
    assert_eq!(format_number(2.5e17), "2.5e17");
    assert_eq!(format_number(-0.0), "0");
    assert_eq!(
        format_tensor(&Tensor::from_rows(&[vec![1.0]]).unwrap()),
        "1\n"
    );
}

fn report() -> RiskReport {
    let periods: Vec<f64> = vec![2.0, 5.0, 10.0, 50.0, 100.0, 200.0];
    let scenario = |label: &str, kind, scale: f64| ScenarioResult {
        label: label.to_string(),
        kind,
        seed: 1,
        n: 1000,
        acceptance_rate: 1.0,
        pml: periods.iter().map(|t| scale * 1e8 * t.ln()).collect(),
    };
    RiskReport {
        return_periods: periods.clone(),
        scenarios: vec![
            scenario("bernstein <4x4> & co", CopulaKind::Bernstein, 1.0),
            scenario("independence", CopulaKind::Independence, 0.9),
            scenario("gaussian", CopulaKind::Gaussian, 1.2),
        ],
    }
}

#[test]
fn pml_chart_is_well_formed() {
    let svg = pml_svg(&report(), 1e6, "million").unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    let polylines = root
        .descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .count();
    assert_eq!(polylines, 3);
    let texts: Vec<&str> = root.descendants().filter_map(|n| n.text()).collect();
    assert!(texts.contains(&"bernstein <4x4> & co"));
}

#[test]
fn contour_chart_is_well_formed() {
    let joint = example_joint().unwrap();
    let grid = joint.density_grid(40, DensityKind::Bernstein).unwrap();
    let options = ContourOptions {
        title: "density <example>".into(),
        points: vec![[0.2, 0.3], [0.9, 0.1]],
        ..ContourOptions::default()
    };
    let svg = contour_svg(&grid, &options).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    assert_eq!(
        root.descendants()
            .filter(|n| n.has_tag_name("circle"))
            .count(),
        2
    );
    assert!(root
        .descendants()
        .any(|n| n.text() == Some("density <example>")));

    let flat = DiscreteJoint::independence(&[3, 3])
        .unwrap()
        .density_grid(10, DensityKind::Bernstein)
        .unwrap();
    roxmltree::Document::parse(&contour_svg(&flat, &ContourOptions::default()).unwrap()).unwrap();
    assert!(contour_svg(&[vec![1.0]], &ContourOptions::default()).is_err());
}

proptest! {
    #[test]
    fn numbers_roundtrip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let text = format_number(v);
        prop_assert_eq!(text.parse::<f64>().unwrap(), if v == 0.0 { 0.0 } else { v });
        let table = parse_csv(&format!("{text},{text}\n")).unwrap();
        prop_assert_eq!(table.rows[0][0].to_bits(), text.parse::<f64>().unwrap().to_bits());
    }
}
