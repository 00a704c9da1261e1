//! Browser bindings for the demo page in `www/`.
//!
//! Every operation fits the bundled 34-year windstorm/flood rank sample, so
//! the page needs no uploads. The plain functions return [`Error`] and are
//! tested natively; the `#[wasm_bindgen]` wrappers only convert errors.

use bernstein_copula::datasets::storm_flood_ranks;
use bernstein_copula::fit::{fit_data, pseudo_observations_scaled, Fit, FitMethod, RankScale};
use bernstein_copula::plot::{contour_svg, pml_svg, ContourOptions};
use bernstein_copula::risk::{
    compare_scenarios, Comparison, MarginFamily, MarginalModel, Scenario, ScenarioModel,
};
use bernstein_copula::sim::estimate_gaussian_correlation;
use bernstein_copula::{DensityKind, Error, RandomSource, Result};
use wasm_bindgen::prelude::*;

/// Log-loss margins of the two risks, in currency units.
const WINDSTORM: (f64, f64) = (16.367, 0.8872);
const FLOOD: (f64, f64) = (16.625, 0.9777);
const RETURN_PERIODS: [f64; 10] = [2.0, 5.0, 10.0, 20.0, 50.0, 60.0, 80.0, 95.0, 100.0, 200.0];
const MAX_RESOLUTION: usize = 201;
const MAX_SAMPLE: usize = 200_000;

fn observations() -> Vec<Vec<f64>> {
    storm_flood_ranks()
        .iter()
        .map(|r| r.iter().map(|&v| f64::from(v)).collect())
        .collect()
}

fn parse_method(method: &str) -> Result<FitMethod> {
    match method {
        "closed" => Ok(FitMethod::ClosedForm),
        "qp" => Ok(FitMethod::Qp),
        other => Err(Error::Validation(format!("unknown method {other:?}"))),
    }
}

fn parse_kind(kind: &str) -> Result<DensityKind> {
    match kind {
        "bernstein" => Ok(DensityKind::Bernstein),
        "grid" => Ok(DensityKind::Grid),
        other => Err(Error::Validation(format!("unknown density kind {other:?}"))),
    }
}

fn fit(grid: usize, method: &str) -> Result<Fit> {
    if !(1..=34).contains(&grid) {
        return Err(Error::Validation(format!(
            "grid size {grid} must be between 1 and 34"
        )));
    }
    fit_data(
        &observations(),
        &[grid, grid],
        RankScale::NPlusOne,
        parse_method(method)?,
    )
}

fn check_resolution(resolution: usize) -> Result<()> {
    if !(2..=MAX_RESOLUTION).contains(&resolution) {
        return Err(Error::Validation(format!(
            "resolution {resolution} must be between 2 and {MAX_RESOLUTION}"
        )));
    }
    Ok(())
}

/// Fitted table, its errors and a contour plot of the density.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct DensityView {
    pub svg: String,
    pub closed_form_error: f64,
    pub qp_error: f64,
    pub density_max: f64,
    pub density_bound: f64,
}

pub fn density_view(
    grid: usize,
    method: &str,
    kind: &str,
    resolution: usize,
) -> Result<DensityView> {
    check_resolution(resolution)?;
    let label = kind;
    let kind = parse_kind(kind)?;
    let fit = fit(grid, method)?;
    let values = fit.joint.density_grid(resolution, kind)?;
    let points = pseudo_observations_scaled(&observations(), RankScale::NPlusOne)?
        .points()
        .iter()
        .map(|p| [p[0], p[1]])
        .collect();
    let options = ContourOptions {
        title: format!("{label} density, {grid}x{grid} grid"),
        points,
        ..ContourOptions::default()
    };
    Ok(DensityView {
        svg: contour_svg(&values, &options)?,
        closed_form_error: fit.report.quadratic_error_closed_form,
        qp_error: fit.report.quadratic_error_qp,
        density_max: values.iter().flatten().copied().fold(0.0, f64::max),
        density_bound: fit.joint.density_bound().m,
    })
}

/// Bernstein sample drawn over the density contours.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct SampleView {
    pub svg: String,
    pub accepted: usize,
    pub proposals: u64,
    pub acceptance_rate: f64,
    pub density_bound: f64,
}

pub fn sample_view(grid: usize, method: &str, n: usize, seed: u64) -> Result<SampleView> {
    if n > MAX_SAMPLE {
        return Err(Error::Validation(format!("at most {MAX_SAMPLE} points")));
    }
    let fit = fit(grid, method)?;
    let bound = fit.joint.density_bound();
    let model = ScenarioModel::Bernstein(fit.joint.clone());
    let batch = model.sample(n, &mut RandomSource::new(seed))?;
    let values = fit.joint.density_grid(60, DensityKind::Bernstein)?;
    let options = ContourOptions {
        title: format!("{n} Bernstein draws, seed {seed}"),
        points: batch.points.iter().map(|p| [p[0], p[1]]).collect(),
        ..ContourOptions::default()
    };
    Ok(SampleView {
        svg: contour_svg(&values, &options)?,
        accepted: batch.len(),
        proposals: batch.proposals,
        acceptance_rate: batch.acceptance_rate(),
        density_bound: bound.m,
    })
}

/// PML table (CSV) and chart for four dependence scenarios.
#[wasm_bindgen(getter_with_clone)]
#[derive(Debug, Clone)]
pub struct CompareView {
    pub svg: String,
    pub csv: String,
}

pub fn compare_view(grid: usize, method: &str, n: usize, seed: u64) -> Result<CompareView> {
    if n == 0 || n > MAX_SAMPLE {
        return Err(Error::Validation(format!(
            "sample size must be between 1 and {MAX_SAMPLE}"
        )));
    }
    let fit = fit(grid, method)?;
    let obs = pseudo_observations_scaled(&observations(), RankScale::NPlusOne)?;
    let scenario = |label: String, model| Scenario { label, model };
    let comparison = Comparison {
        scenarios: vec![
            scenario(
                format!("bernstein {grid}x{grid}"),
                ScenarioModel::Bernstein(fit.joint.clone()),
            ),
            scenario(
                format!("grid {grid}x{grid}"),
                ScenarioModel::Grid(fit.joint),
            ),
            scenario(
                "independence".into(),
                ScenarioModel::Independence { dim: 2 },
            ),
            scenario(
                "gaussian".into(),
                ScenarioModel::Gaussian(estimate_gaussian_correlation(&obs)?),
            ),
        ],
        margins: vec![
            MarginalModel::new(MarginFamily::GumbelLog, WINDSTORM.0, WINDSTORM.1)?,
            MarginalModel::new(MarginFamily::NormalLog, FLOOD.0, FLOOD.1)?,
        ],
        n,
        seed,
        return_periods: RETURN_PERIODS.to_vec(),
    };
    let report = compare_scenarios(&comparison)?;
    Ok(CompareView {
        svg: pml_svg(&report, 1e6, "millions")?,
        csv: report.to_csv(),
    })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Contour plot of the fitted density with the data overlaid.
#[wasm_bindgen(js_name = densityView)]
pub fn density_view_js(
    grid: usize,
    method: &str,
    kind: &str,
    resolution: usize,
) -> std::result::Result<DensityView, JsError> {
    density_view(grid, method, kind, resolution).map_err(js)
}

#[wasm_bindgen(js_name = sampleView)]
pub fn sample_view_js(
    grid: usize,
    method: &str,
    n: usize,
    seed: u64,
) -> std::result::Result<SampleView, JsError> {
    sample_view(grid, method, n, seed).map_err(js)
}

#[wasm_bindgen(js_name = compareView)]
pub fn compare_view_js(
    grid: usize,
    method: &str,
    n: usize,
    seed: u64,
) -> std::result::Result<CompareView, JsError> {
    compare_view(grid, method, n, seed).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_matches_the_fit() {
        let view = density_view(10, "closed", "bernstein", 41).unwrap();
        assert!(view.svg.starts_with("<svg") || view.svg.starts_with("<?xml"));
        assert!((view.closed_form_error - 0.002175).abs() < 5e-6);
        assert!(view.qp_error < view.closed_form_error);
        assert!(view.density_max <= view.density_bound);
        assert_eq!(view.svg.matches("<circle").count(), 34);
    }

    #[test]
    fn bad_arguments_are_rejected() {
        assert!(density_view(10, "simplex", "bernstein", 41).is_err());
        assert!(density_view(10, "closed", "spline", 41).is_err());
        assert!(density_view(0, "closed", "grid", 41).is_err());
        assert!(density_view(10, "closed", "grid", 1).is_err());
        assert!(sample_view(10, "qp", MAX_SAMPLE + 1, 0).is_err());
        assert!(compare_view(10, "qp", 0, 0).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = sample_view(4, "qp", 300, 9).unwrap();
        let b = sample_view(4, "qp", 300, 9).unwrap();
        assert_eq!(a.svg, b.svg);
        assert_eq!(a.accepted, 300);
        assert_eq!(a.acceptance_rate, 300.0 / a.proposals as f64);
    }

    #[test]
    fn comparison_has_four_monotone_rows() {
        let view = compare_view(10, "closed", 2000, 1).unwrap();
        let rows: Vec<&str> = view
            .csv
            .lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .collect();
        assert_eq!(rows.len(), 4);
        for row in rows {
            let values: Vec<f64> = row.split(',').skip(1).map(|v| v.parse().unwrap()).collect();
            assert_eq!(values.len(), RETURN_PERIODS.len());
            assert!(values.windows(2).all(|w| w[0] <= w[1]), "{row}");
        }
    }
}
