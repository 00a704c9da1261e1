use std::fs;
use std::path::{Path, PathBuf};

use bernstein_copula::basis::{coarsen, validate_partition, PartitionFamily};
use bernstein_copula::fit::{fit_data, pseudo_observations_scaled, RankScale};
use bernstein_copula::io::{
    format_counts, format_joint, format_matrix, format_number, format_sample, parse_csv,
    parse_joint,
};
use bernstein_copula::plot::{contour_svg, pml_svg, ContourOptions};
use bernstein_copula::quadrature::{adaptive_simpson, integrate_box};
use bernstein_copula::risk::{compare_scenarios, CompareConfig, ScenarioSpec};
use bernstein_copula::sim::{
    estimate_gaussian_correlation, sample_bernstein, sample_gaussian_copula, sample_grid,
    sample_independence, CopulaKind,
};
use bernstein_copula::{DensityKind, DiscreteJoint, RandomSource};
use thiserror::Error;

use crate::{CompareArgs, DensityArgs, FitArgs, SampleArgs, SimulateArgs, ValidateArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Library(#[from] bernstein_copula::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Failed(String),
}

type Result<T> = std::result::Result<T, CliError>;

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        CliError::Library(bernstein_copula::Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read {}: {e}", path.display()),
        )))
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    say!("wrote {}", path.display());
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let rows = parse_csv(&read(path)?)?.rows;
    if rows.is_empty() {
        return Err(CliError::Library(bernstein_copula::Error::Validation(
            format!("{} has no data rows", path.display()),
        )));
    }
    Ok(rows)
}

fn grid_sizes(grid: &[usize], dim: usize) -> Result<Vec<usize>> {
    if grid.contains(&0) {
        return Err(CliError::Usage("grid sizes must be at least 1".into()));
    }
    match grid.len() {
        1 => Ok(vec![grid[0]; dim]),
        n if n == dim => Ok(grid.to_vec()),
        n => Err(CliError::Usage(format!(
            "--grid has {n} sizes but the data has {dim} columns"
        ))),
    }
}

fn points_2d(rows: &[Vec<f64>], scale: RankScale) -> Result<Vec<[f64; 2]>> {
    let obs = pseudo_observations_scaled(rows, scale)?;
    if obs.dim() != 2 {
        return Err(CliError::Usage(format!(
            "overlay data must have 2 columns, found {}",
            obs.dim()
        )));
    }
    Ok(obs.points().into_iter().map(|p| [p[0], p[1]]).collect())
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let rows = read_rows(&args.data)?;
    let sizes = grid_sizes(&args.grid, rows[0].len())?;
    let fit = fit_data(&rows, &sizes, args.ranks.into(), args.method.into())?;
    let report = &fit.report;
    say!(
        "{} observations, grid {}",
        report.observations,
        sizes
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("x")
    );
    say!("shift constant: {}", format_number(report.shift));
    say!(
        "quadratic error, closed form: {}",
        format_number(report.quadratic_error_closed_form)
    );
    say!(
        "quadratic error, qp: {} ({} iterations)",
        format_number(report.quadratic_error_qp),
        report.qp_iterations
    );
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write(&args.out, "counts.csv", &format_counts(&fit.table))?;
    write(&args.out, "joint.csv", &format_joint(&fit.joint))?;
    write(&args.out, "fit_report.json", &(json + "\n"))?;
    Ok(())
}

pub fn density(args: &DensityArgs) -> Result<()> {
    let joint = parse_joint(&read(&args.joint)?)?;
    let kind: DensityKind = args.kind.into();
    let grid = joint.density_grid(args.resolution, kind)?;
    let max = grid
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let (name, title) = match kind {
        DensityKind::Bernstein => ("bernstein", "Bernstein copula density"),
        DensityKind::Grid => ("grid", "Grid-type copula density"),
    };
    say!(
        "{name} density, {0}x{0} grid, maximum {1}",
        args.resolution,
        format_number(max)
    );
    if kind == DensityKind::Bernstein {
        say!(
            "density bound M = {}",
            format_number(joint.density_bound().m)
        );
    }
    let points = match &args.data {
        Some(path) => points_2d(&read_rows(path)?, args.ranks.into())?,
        None => Vec::new(),
    };
    let comment = format!(
        "{name} copula density at ((i + 0.5)/{r}, (j + 0.5)/{r}); row i follows the first variable",
        r = args.resolution
    );
    write(&args.out, "density.csv", &format_matrix(&grid, &[comment]))?;
    let options = ContourOptions {
        title: title.into(),
        points,
        ..ContourOptions::default()
    };
    write(&args.out, "density.svg", &contour_svg(&grid, &options)?)?;
    Ok(())
}

fn load_joint(path: Option<&PathBuf>, kind: CopulaKind) -> Result<DiscreteJoint> {
    let path = path
        .ok_or_else(|| CliError::Usage(format!("the {kind} kind needs a joint table argument")))?;
    Ok(parse_joint(&read(path)?)?)
}

pub fn sample(args: &SampleArgs) -> Result<()> {
    let kind: CopulaKind = args.kind.into();
    let mut rng = RandomSource::new(args.seed);
    let batch = match kind {
        CopulaKind::Bernstein => {
            let joint = load_joint(args.joint.as_ref(), kind)?;
            sample_bernstein(&joint, &joint.density_bound(), args.n, &mut rng)?
        }
        CopulaKind::Grid => sample_grid(&load_joint(args.joint.as_ref(), kind)?, args.n, &mut rng),
        CopulaKind::Independence => {
            let dim = match &args.joint {
                Some(path) => parse_joint(&read(path)?)?.dim(),
                None => args.dim,
            };
            if dim == 0 {
                return Err(CliError::Usage("--dim must be at least 1".into()));
            }
            sample_independence(dim, args.n, &mut rng)
        }
        CopulaKind::Gaussian => {
            let corr = match (&args.data, args.rho) {
                (Some(path), _) => {
                    let obs = pseudo_observations_scaled(&read_rows(path)?, args.ranks.into())?;
                    estimate_gaussian_correlation(&obs)?
                }
                (None, Some(rho)) => vec![vec![1.0, rho], vec![rho, 1.0]],
                (None, None) => {
                    return Err(CliError::Usage(
                        "the gaussian kind needs --data or --rho".into(),
                    ))
                }
            };
            sample_gaussian_copula(&corr, args.n, &mut rng)?
        }
    };
    say!(
        "{} {} points, acceptance rate {} over {} proposals",
        batch.len(),
        kind,
        format_number(batch.acceptance_rate()),
        batch.proposals
    );
    write(&args.out, "sample.csv", &format_sample(&batch))
}

pub fn compare(args: &CompareArgs, only: Option<ScenarioSpec>) -> Result<()> {
    let mut config = CompareConfig::from_json(&read(&args.config)?)?;
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mut spec) = only {
        // A single grid size applies to every margin.
        let dim = config.margins.as_ref().map_or(0, Vec::len);
        if let Some(grid) = &spec.grid {
            spec.grid = Some(grid_sizes(grid, dim.max(1))?);
        }
        config.scenarios = Some(vec![spec]);
    }
    let base = args.config.parent().unwrap_or(Path::new("."));
    let report = compare_scenarios(&config.resolve(base)?)?;
    let csv = report.to_csv();
    say!("{}", csv.trim_end());
    for s in &report.scenarios {
        if s.kind == CopulaKind::Bernstein {
            say!(
                "{}: acceptance rate {}",
                s.label,
                format_number(s.acceptance_rate)
            );
        }
    }
    let largest = report
        .scenarios
        .iter()
        .flat_map(|s| s.pml.iter().copied())
        .fold(0.0, f64::max);
    let (unit, label) = if largest >= 1e6 {
        (1e6, "millions")
    } else {
        (1.0, "")
    };
    write(&args.out, "pml.csv", &csv)?;
    write(&args.out, "pml.svg", &pml_svg(&report, unit, label)?)?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let joint = match &args.joint {
        Some(p) => Some(
            std::path::absolute(p)
                .map_err(|e| CliError::Usage(format!("bad joint path {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let spec = ScenarioSpec {
        label: None,
        kind: args.kind.into(),
        grid: args.grid.clone(),
        joint,
    };
    compare(&args.compare, Some(spec))
}

struct Checks {
    total: usize,
    failed: usize,
}

impl Checks {
    fn record(&mut self, passed: bool, name: &str, detail: String) {
        self.total += 1;
        self.failed += usize::from(!passed);
        say!(
            "[{}] {name}: {detail}",
            if passed { "PASS" } else { "FAIL" }
        );
    }
}

fn family_name(f: &PartitionFamily) -> String {
    match f {
        PartitionFamily::Bernstein => "bernstein".into(),
        PartitionFamily::Indicator => "indicator".into(),
        PartitionFamily::Coarsened { base, factor } => {
            format!("{} coarsened x{factor}", family_name(base))
        }
    }
}

fn check_joint(checks: &mut Checks, path: &Path) {
    let name = path.display().to_string();
    let joint = match read(path).and_then(|t| Ok(parse_joint(&t)?)) {
        Ok(j) => j,
        Err(e) => return checks.record(false, &name, e.to_string()),
    };
    let d = joint.dim();

    let margin_error = joint
        .probabilities()
        .margins()
        .iter()
        .zip(joint.sizes())
        .flat_map(|(margin, &m)| margin.iter().map(move |v| (v - 1.0 / m as f64).abs()))
        .fold(0.0, f64::max);
    checks.record(
        margin_error <= 1e-9,
        &format!("{name} table margins"),
        format!("max |margin - 1/m| {margin_error:.1e} (tol 1e-9)"),
    );

    let corner = (joint.bernstein_cdf(&vec![1.0; d]).unwrap_or(f64::NAN) - 1.0).abs();
    checks.record(
        corner <= 1e-12,
        &format!("{name} total mass"),
        format!("|C(1,...,1) - 1| {corner:.1e} (tol 1e-12)"),
    );

    if d <= 3 {
        let integral = integrate_box(
            |u| joint.bernstein_density(u).unwrap_or(f64::NAN),
            &vec![0.0; d],
            &vec![1.0; d],
            1e-9,
        );
        let err = (integral - 1.0).abs();
        checks.record(
            err <= 1e-6,
            &format!("{name} density normalization"),
            format!("|integral - 1| {err:.1e} (tol 1e-6)"),
        );
    }

    if d == 2 {
        let mut worst = 0.0f64;
        for axis in 0..2 {
            for z in [0.1, 0.5, 0.9] {
                let line = adaptive_simpson(
                    |s| {
                        let u = if axis == 0 { [z, s] } else { [s, z] };
                        joint.bernstein_density(&u).unwrap_or(f64::NAN)
                    },
                    0.0,
                    1.0,
                    1e-12,
                );
                worst = worst.max((line - 1.0).abs());
            }
        }
        checks.record(
            worst <= 1e-9,
            &format!("{name} copula margins"),
            format!("max |line integral - 1| {worst:.1e} (tol 1e-9)"),
        );
    }

    let bound = joint.density_bound();
    let mut rng = RandomSource::new(0);
    let mut u = vec![0.0; d];
    let mut largest = 0.0f64;
    for _ in 0..10_000 {
        for x in u.iter_mut() {
            *x = rng.uniform();
        }
        largest = largest.max(joint.bernstein_density(&u).unwrap_or(f64::INFINITY));
    }
    checks.record(
        largest <= bound.m,
        &format!("{name} density bound"),
        format!(
            "M {} vs largest of 10000 probes {}",
            format_number(bound.m),
            format_number(largest)
        ),
    );
}

pub fn validate(args: &ValidateArgs) -> Result<()> {
    if args.grid.contains(&0) {
        return Err(CliError::Usage("grid sizes must be at least 1".into()));
    }
    let mut checks = Checks {
        total: 0,
        failed: 0,
    };
    let families = [
        PartitionFamily::Bernstein,
        PartitionFamily::Indicator,
        coarsen(PartitionFamily::Bernstein, 3)?,
    ];
    for family in &families {
        for &m in &args.grid {
            let r = validate_partition(family, m, 1e-10)?;
            checks.record(
                r.passed,
                &format!("{} m={m}", family_name(family)),
                format!(
                    "integral error {:.1e}, sum error {:.1e}, min {}",
                    r.max_integral_error,
                    r.max_sum_error,
                    format_number(r.min_value)
                ),
            );
        }
    }
    for path in &args.joints {
        check_joint(&mut checks, path);
    }
    say!(
        "{} of {} checks passed",
        checks.total - checks.failed,
        checks.total
    );
    if checks.failed > 0 {
        return Err(CliError::Failed(format!("{} checks failed", checks.failed)));
    }
    Ok(())
}
