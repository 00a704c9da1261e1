//! Marginal loss models, aggregation of copula samples in loss space, and
//! probable-maximum-loss (PML) curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fit::{fit_data, pseudo_observations_scaled, FitMethod, RankScale};
use crate::io::{format_number, parse_csv, parse_joint};
use crate::joint::DiscreteJoint;
use crate::normal::inverse_normal_cdf;
use crate::rng::RandomSource;
use crate::sim::{
    estimate_gaussian_correlation, sample_bernstein, sample_gaussian_copula, sample_grid,
    sample_independence, CopulaKind, SampleBatch,
};

/// Law of the log-loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginFamily {
    /// Gumbel log-losses, i.e. Fréchet losses with tail index 1/σ.
    GumbelLog,
    /// Normal log-losses, i.e. lognormal losses.
    NormalLog,
}

impl MarginFamily {
    /// Quantile of the standardized log-loss law (μ = 0, σ = 1).
    pub fn standard_quantile(self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(domain(format!("probability {u} is outside (0, 1)")));
        }
        match self {
            MarginFamily::GumbelLog => Ok(-(-u.ln()).ln()),
            MarginFamily::NormalLog => inverse_normal_cdf(u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub family: MarginFamily,
    pub mu: f64,
    pub sigma: f64,
}

impl MarginalModel {
    pub fn new(family: MarginFamily, mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma.is_finite() && sigma > 0.0) {
            return Err(domain(format!(
                "margin needs finite mu and positive sigma, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { family, mu, sigma })
    }

    /// Quantile of the log-loss.
    pub fn log_quantile(&self, u: f64) -> Result<f64> {
        Ok(self.mu + self.sigma * self.family.standard_quantile(u)?)
    }

    /// Loss quantile exp(μ + σ·z(u)).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        Ok(self.log_quantile(u)?.exp())
    }
}

/// Least-squares line through the Q-Q plot of sorted log-losses against the
/// standardized quantiles at plotting positions (i − 0.5)/n: slope σ, intercept μ.
pub fn fit_qq(sample: &[f64], family: MarginFamily) -> Result<MarginalModel> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::Validation(format!(
            "Q-Q fit needs at least 3 losses, got {n}"
        )));
    }
    if let Some(bad) = sample.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(domain(format!(
            "loss {bad} is not positive; its logarithm is undefined"
        )));
    }
    let mut logs: Vec<f64> = sample.iter().map(|v| v.ln()).collect();
    logs.sort_by(f64::total_cmp);
    let z = (1..=n)
        .map(|i| family.standard_quantile((i as f64 - 0.5) / n as f64))
        .collect::<Result<Vec<f64>>>()?;
    let z_mean = z.iter().sum::<f64>() / n as f64;
    let y_mean = logs.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in z.iter().zip(&logs) {
        sxy += (x - z_mean) * (y - y_mean);
        sxx += (x - z_mean) * (x - z_mean);
    }
    let sigma = sxy / sxx;
    if !(sigma > 0.0) {
        return Err(Error::Numeric(format!(
            "Q-Q regression slope {sigma} is not positive"
        )));
    }
    MarginalModel::new(family, y_mean - sigma * z_mean, sigma)
}

/// Aggregate loss S_j = Σ_i quantile_i(u_{j,i}) for every sample row.
pub fn simulate_aggregate(batch: &SampleBatch, margins: &[MarginalModel]) -> Result<Vec<f64>> {
    if batch.dim != margins.len() {
        return Err(Error::Validation(format!(
            "sample has dimension {}, but {} margins were given",
            batch.dim,
            margins.len()
        )));
    }
    batch
        .points
        .iter()
        .map(|p| {
            p.iter()
                .zip(margins)
                .map(|(&u, m)| m.quantile(u))
                .sum::<Result<f64>>()
        })
        .collect()
}

/// Empirical quantile of sorted data: linear interpolation between order
/// statistics placed at positions (i − 0.5)/n, flat beyond the extremes.
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (q * n as f64 + 0.5).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo >= n {
        return sorted[n - 1];
    }
    sorted[lo - 1] + frac * (sorted[lo] - sorted[lo - 1])
}

/// PML(T) = empirical quantile of the losses at level 1 − 1/T.
pub fn pml_curve(losses: &[f64], return_periods: &[f64]) -> Result<Vec<f64>> {
    if losses.is_empty() {
        return Err(Error::Validation("no losses to evaluate".into()));
    }
    if let Some(t) = return_periods
        .iter()
        .find(|t| !(t.is_finite() && **t > 1.0))
    {
        return Err(domain(format!("return period {t} must exceed 1 year")));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(return_periods
        .iter()
        .map(|t| empirical_quantile(&sorted, 1.0 - 1.0 / t))
        .collect())
}

/// Dependence model of one scenario.
#[derive(Debug, Clone)]
pub enum ScenarioModel {
    Bernstein(DiscreteJoint),
    Grid(DiscreteJoint),
    Independence { dim: usize },
    Gaussian(Vec<Vec<f64>>),
}

impl ScenarioModel {
    pub fn kind(&self) -> CopulaKind {
        match self {
            ScenarioModel::Bernstein(_) => CopulaKind::Bernstein,
            ScenarioModel::Grid(_) => CopulaKind::Grid,
            ScenarioModel::Independence { .. } => CopulaKind::Independence,
            ScenarioModel::Gaussian(_) => CopulaKind::Gaussian,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ScenarioModel::Bernstein(j) | ScenarioModel::Grid(j) => j.dim(),
            ScenarioModel::Independence { dim } => *dim,
            ScenarioModel::Gaussian(c) => c.len(),
        }
    }

    /// Draws `n` copula points; Bernstein models use their refined density bound.
    pub fn sample(&self, n: usize, rng: &mut RandomSource) -> Result<SampleBatch> {
        match self {
            ScenarioModel::Bernstein(j) => sample_bernstein(j, &j.density_bound(), n, rng),
            ScenarioModel::Grid(j) => Ok(sample_grid(j, n, rng)),
            ScenarioModel::Independence { dim } => Ok(sample_independence(*dim, n, rng)),
            ScenarioModel::Gaussian(c) => sample_gaussian_copula(c, n, rng),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub model: ScenarioModel,
}

/// Fully resolved input of [`compare_scenarios`].
#[derive(Debug, Clone)]
pub struct Comparison {
    pub scenarios: Vec<Scenario>,
    pub margins: Vec<MarginalModel>,
    pub n: usize,
    pub seed: u64,
    pub return_periods: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub label: String,
    pub kind: CopulaKind,
    pub seed: u64,
    pub n: usize,
    pub acceptance_rate: f64,
    pub pml: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub return_periods: Vec<f64>,
    pub scenarios: Vec<ScenarioResult>,
}

impl RiskReport {
    /// Whether every scenario's PML is non-decreasing along the listed periods.
    pub fn is_monotone(&self) -> bool {
        let mut order: Vec<usize> = (0..self.return_periods.len()).collect();
        order.sort_by(|&a, &b| self.return_periods[a].total_cmp(&self.return_periods[b]));
        self.scenarios
            .iter()
            .all(|s| order.windows(2).all(|w| s.pml[w[0]] <= s.pml[w[1]]))
    }

    /// Scenario × return period matrix.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# probable maximum loss by return period (years)");
        let periods: Vec<String> = self
            .return_periods
            .iter()
            .map(|t| format!("T={}", format_number(*t)))
            .collect();
        let _ = writeln!(out, "scenario,{}", periods.join(","));
        for s in &self.scenarios {
            let values: Vec<String> = s.pml.iter().map(|v| format_number(*v)).collect();
            let _ = writeln!(out, "{},{}", s.label, values.join(","));
        }
        out
    }
}

/// Samples one scenario and evaluates its PML curve.
pub fn run_scenario(
    scenario: &Scenario,
    margins: &[MarginalModel],
    n: usize,
    seed: u64,
    return_periods: &[f64],
) -> Result<ScenarioResult> {
    let mut rng = RandomSource::new(seed);
    let batch = scenario.model.sample(n, &mut rng)?;
    let losses = simulate_aggregate(&batch, margins)?;
    Ok(ScenarioResult {
        label: scenario.label.clone(),
        kind: scenario.model.kind(),
        seed,
        n,
        acceptance_rate: batch.acceptance_rate(),
        pml: pml_curve(&losses, return_periods)?,
    })
}

/// Runs every scenario; scenario i uses seed `seed + i`.
pub fn compare_scenarios(config: &Comparison) -> Result<RiskReport> {
    if config.scenarios.is_empty() {
        return Err(Error::Config {
            field: "scenarios".into(),
            message: "at least one scenario is required".into(),
        });
    }
    if config.n == 0 {
        return Err(Error::Config {
            field: "n".into(),
            message: "sample size must be at least 1".into(),
        });
    }
    let scenarios = config
        .scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| {
            run_scenario(
                s,
                &config.margins,
                config.n,
                config.seed.wrapping_add(i as u64),
                &config.return_periods,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RiskReport {
        return_periods: config.return_periods.clone(),
        scenarios,
    })
}

/// Margin entry of a comparison file: explicit parameters or a Q-Q fit to one
/// column of the data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginSpec {
    pub family: MarginFamily,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    /// 0-based column of the data file holding positive losses.
    #[serde(default)]
    pub fit_column: Option<usize>,
}

/// Scenario entry of a comparison file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub label: Option<String>,
    pub kind: CopulaKind,
    /// Grid sizes for fitting a joint from the data file.
    #[serde(default)]
    pub grid: Option<Vec<usize>>,
    /// Joint CSV to use instead of fitting.
    #[serde(default)]
    pub joint: Option<PathBuf>,
}

/// JSON comparison file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Observations, one row per period and one column per risk.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub rank_scale: RankScale,
    #[serde(default)]
    pub method: FitMethod,
    #[serde(default)]
    pub margins: Option<Vec<MarginSpec>>,
    /// Defaults to Bernstein 4×4, Bernstein 10×10, independence and Gaussian.
    #[serde(default)]
    pub scenarios: Option<Vec<ScenarioSpec>>,
    pub n: usize,
    pub seed: u64,
    pub return_periods: Vec<f64>,
}

fn config_error(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl CompareConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.inner().to_string();
            // Missing keys are reported against their parent.
            let key = ["unknown field `", "missing field `"]
                .iter()
                .find_map(|p| msg.strip_prefix(p))
                .and_then(|rest| rest.split('`').next());
            let field = match (key, path.as_str()) {
                (Some(k), "." | "") => k.to_string(),
                (Some(k), p) if !p.ends_with(k) => format!("{p}.{k}"),
                (_, "." | "") => "(document)".to_string(),
                (_, p) => p.to_string(),
            };
            config_error(field, msg)
        })
    }

    pub fn default_scenarios() -> Vec<ScenarioSpec> {
        let fitted = |m: usize| ScenarioSpec {
            label: Some(format!("bernstein {m}x{m}")),
            kind: CopulaKind::Bernstein,
            grid: Some(vec![m, m]),
            joint: None,
        };
        let plain = |kind: CopulaKind| ScenarioSpec {
            label: Some(kind.to_string()),
            kind,
            grid: None,
            joint: None,
        };
        vec![
            fitted(4),
            fitted(10),
            plain(CopulaKind::Independence),
            plain(CopulaKind::Gaussian),
        ]
    }

    /// Loads inputs, fits the requested joints and margins.
    pub fn resolve(&self, base: &Path) -> Result<Comparison> {
        let data = match &self.data {
            Some(path) => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    config_error("data", format!("cannot read {}: {e}", full.display()))
                })?;
                let rows = parse_csv(&text)?.rows;
                if rows.is_empty() {
                    return Err(config_error("data", "data file has no rows"));
                }
                Some(rows)
            }
            None => None,
        };
        let need_data = |field: &str| {
            data.as_ref()
                .ok_or_else(|| config_error(field, "requires the `data` file"))
        };

        let specs = self
            .margins
            .as_ref()
            .filter(|m| !m.is_empty())
            .ok_or_else(|| config_error("margins", "at least one margin is required"))?;
        let mut margins = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let field = format!("margins[{i}]");
            let model = match (spec.mu, spec.sigma, spec.fit_column) {
                (Some(mu), Some(sigma), None) => MarginalModel::new(spec.family, mu, sigma)
                    .map_err(|e| config_error(&field, e.to_string()))?,
                (None, None, Some(col)) => {
                    let rows = need_data(&field)?;
                    if col >= rows[0].len() {
                        return Err(config_error(field, format!("data has no column {col}")));
                    }
                    let column: Vec<f64> = rows.iter().map(|r| r[col]).collect();
                    fit_qq(&column, spec.family)?
                }
                _ => {
                    return Err(config_error(
                        field,
                        "give either mu and sigma, or fit_column",
                    ))
                }
            };
            margins.push(model);
        }
        let dim = margins.len();

        let specs = self
            .scenarios
            .clone()
            .unwrap_or_else(Self::default_scenarios);
        let mut scenarios = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let field = format!("scenarios[{i}]");
            let label = spec.label.clone().unwrap_or_else(|| match &spec.grid {
                Some(g) => format!(
                    "{} {}",
                    spec.kind,
                    g.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
                ),
                None => spec.kind.to_string(),
            });
            if label.contains(',') || label.contains('\n') {
                return Err(config_error(
                    field,
                    "labels may not contain commas or newlines",
                ));
            }
            let model = match spec.kind {
                CopulaKind::Bernstein | CopulaKind::Grid => {
                    let joint = match (&spec.joint, &spec.grid) {
                        (Some(path), _) => {
                            let full = base.join(path);
                            let text = std::fs::read_to_string(&full).map_err(|e| {
                                config_error(&field, format!("cannot read {}: {e}", full.display()))
                            })?;
                            parse_joint(&text)?
                        }
                        (None, Some(grid)) => {
                            fit_data(need_data(&field)?, grid, self.rank_scale, self.method)?.joint
                        }
                        (None, None) => {
                            return Err(config_error(
                                field,
                                "missing fitted model: give `joint` or `grid`",
                            ))
                        }
                    };
                    if spec.kind == CopulaKind::Bernstein {
                        ScenarioModel::Bernstein(joint)
                    } else {
                        ScenarioModel::Grid(joint)
                    }
                }
                CopulaKind::Independence => ScenarioModel::Independence { dim },
                CopulaKind::Gaussian => {
                    let obs = pseudo_observations_scaled(need_data(&field)?, self.rank_scale)?;
                    ScenarioModel::Gaussian(estimate_gaussian_correlation(&obs)?)
                }
            };
            if model.dim() != dim {
                return Err(config_error(
                    field,
                    format!(
                        "scenario has dimension {}, but {dim} margins are given",
                        model.dim()
                    ),
                ));
            }
            scenarios.push(Scenario { label, model });
        }

        if self.n == 0 {
            return Err(config_error("n", "sample size must be at least 1"));
        }
        if self.return_periods.is_empty() {
            return Err(config_error(
                "return_periods",
                "list at least one return period",
            ));
        }
        if let Some(t) = self
            .return_periods
            .iter()
            .find(|t| !(t.is_finite() && **t > 1.0))
        {
            return Err(config_error(
                "return_periods",
                format!("return period {t} must exceed 1 year"),
            ));
        }
        Ok(Comparison {
            scenarios,
            margins,
            n: self.n,
            seed: self.seed,
            return_periods: self.return_periods.clone(),
        })
    }
}
