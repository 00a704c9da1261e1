//! Random variate generation for grid-type, Bernstein, independence and
//! Gaussian copulas.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{average_ranks, PseudoObservations};
use crate::joint::{DensityBound, DiscreteJoint};
use crate::normal::{inverse_normal_cdf, normal_cdf};
use crate::rng::RandomSource;

/// Proposals allowed per accepted point and unit of M before the bound is
/// declared broken.
const PROPOSAL_CAP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaKind {
    Bernstein,
    Grid,
    Independence,
    Gaussian,
}

impl CopulaKind {
    pub const ALL: [CopulaKind; 4] = [
        CopulaKind::Bernstein,
        CopulaKind::Grid,
        CopulaKind::Independence,
        CopulaKind::Gaussian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CopulaKind::Bernstein => "bernstein",
            CopulaKind::Grid => "grid",
            CopulaKind::Independence => "independence",
            CopulaKind::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for CopulaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CopulaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown copula kind {s:?} (expected bernstein, grid, independence or gaussian)"
                ))
            })
    }
}

/// Simulated points of a copula together with how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub points: Vec<Vec<f64>>,
    pub dim: usize,
    pub kind: CopulaKind,
    pub seed: u64,
    /// Proposals drawn, equal to the number of points for rejection-free samplers.
    pub proposals: u64,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Accepted points per proposal; 1 for an empty batch.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            1.0
        } else {
            self.points.len() as f64 / self.proposals as f64
        }
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[j]).collect()
    }
}

/// Acceptance-rejection sampling from the Bernstein density of `joint`.
///
/// Each proposal draws d + 1 uniforms; (u₁, …, u_d) is kept when
/// c(u) > M·u_{d+1}. Coordinates are drawn from the open interval so that
/// downstream quantile transforms never see 0.
pub fn sample_bernstein(
    joint: &DiscreteJoint,
    bound: &DensityBound,
    n: usize,
    rng: &mut RandomSource,
) -> Result<SampleBatch> {
    let m = bound.m;
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Domain(format!("density bound {m} must be positive")));
    }
    let d = joint.dim();
    let cap = PROPOSAL_CAP_FACTOR * n as f64 * m.max(1.0);
    let mut points = Vec::with_capacity(n);
    let mut proposals: u64 = 0;
    let mut u = vec![0.0; d];
    while points.len() < n {
        if proposals as f64 >= cap {
            return Err(Error::Numeric(format!(
                "acceptance-rejection made {proposals} proposals for {} points; bound M = {m} looks broken",
                points.len()
            )));
        }
        proposals += 1;
        for x in u.iter_mut() {
            *x = rng.open_uniform();
        }
        let v = rng.uniform();
        let c = joint.bernstein_density_unchecked(&u);
        if c > m * v {
            points.push(u.clone());
        }
    }
    Ok(SampleBatch {
        points,
        dim: d,
        kind: CopulaKind::Bernstein,
        seed: rng.seed(),
        proposals,
    })
}

/// Direct sampling of the grid-type copula: pick a cell by inverse CDF on the
/// flattened probabilities, then a uniform point in (k/m, (k+1)/m] per axis.
pub fn sample_grid(joint: &DiscreteJoint, n: usize, rng: &mut RandomSource) -> SampleBatch {
    let p = joint.probabilities();
    let mut cumulative = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for &v in p.data() {
        acc += v;
        cumulative.push(acc);
    }
    let total = acc;
    let sizes = joint.sizes();
    let last_positive = p.data().iter().rposition(|&v| v > 0.0).unwrap_or(0);
    let points = (0..n)
        .map(|_| {
            let target = rng.uniform() * total;
            let cell = cumulative
                .partition_point(|&c| c <= target)
                .min(last_positive);
            p.unravel(cell)
                .iter()
                .zip(sizes)
                .map(|(&k, &m)| (k as f64 + 1.0 - rng.open_uniform()) / m as f64)
                .collect()
        })
        .collect();
    SampleBatch {
        points,
        dim: joint.dim(),
        kind: CopulaKind::Grid,
        seed: rng.seed(),
        proposals: n as u64,
    }
}

/// Independent uniforms on (0, 1)^d.
pub fn sample_independence(d: usize, n: usize, rng: &mut RandomSource) -> SampleBatch {
    let points = (0..n)
        .map(|_| (0..d).map(|_| rng.open_uniform()).collect())
        .collect();
    SampleBatch {
        points,
        dim: d,
        kind: CopulaKind::Independence,
        seed: rng.seed(),
        proposals: n as u64,
    }
}

/// Pearson correlation of the normal scores Φ⁻¹(rank/(n + 1)) of each column.
pub fn estimate_gaussian_correlation(obs: &PseudoObservations) -> Result<Vec<Vec<f64>>> {
    let n = obs.len();
    if n < 3 {
        return Err(Error::Validation(format!(
            "need at least 3 observations to estimate a correlation, got {n}"
        )));
    }
    let d = obs.dim();
    let mut scores = Vec::with_capacity(d);
    for j in 0..d {
        let ranks = average_ranks(&obs.column(j));
        let z = ranks
            .iter()
            .map(|r| inverse_normal_cdf(r / (n as f64 + 1.0)))
            .collect::<Result<Vec<f64>>>()?;
        let mean = z.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = z.iter().map(|v| v - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Validation(format!(
                "column {} is constant; its correlation is undefined",
                j + 1
            )));
        }
        scores.push(centered.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    let mut corr = vec![vec![1.0; d]; d];
    for a in 0..d {
        for b in a + 1..d {
            let r: f64 = scores[a].iter().zip(&scores[b]).map(|(x, y)| x * y).sum();
            let r = r.clamp(-1.0, 1.0);
            corr[a][b] = r;
            corr[b][a] = r;
        }
    }
    Ok(corr)
}

/// Lower Cholesky factor of a correlation matrix, rejecting non-PD input.
pub fn correlation_cholesky(corr: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let d = corr.len();
    if d == 0 || corr.iter().any(|r| r.len() != d) {
        return Err(Error::Validation(
            "correlation matrix must be square and non-empty".into(),
        ));
    }
    for (i, row) in corr.iter().enumerate() {
        if (row[i] - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "correlation diagonal entry {} is {}, expected 1",
                i + 1,
                row[i]
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() || (v - corr[j][i]).abs() > 1e-12 {
                return Err(Error::Validation(
                    "correlation matrix must be symmetric".into(),
                ));
            }
        }
    }
    let matrix = DMatrix::from_fn(d, d, |i, j| corr[i][j]);
    match matrix.clone().cholesky() {
        Some(c) => Ok(c.l()),
        None => {
            let smallest = SymmetricEigen::new(matrix).eigenvalues.min();
            Err(Error::Validation(format!(
                "correlation matrix is not positive definite (smallest eigenvalue {smallest:.6e})"
            )))
        }
    }
}

/// Standard normal variate from exactly two uniforms (Box–Muller, cosine branch).
pub fn standard_normal(rng: &mut RandomSource) -> f64 {
    let r = 1.0 - rng.uniform();
    let theta = std::f64::consts::TAU * rng.uniform();
    (-2.0 * r.ln()).sqrt() * theta.cos()
}

/// Gaussian copula sample: correlated normals through the Cholesky factor,
/// mapped to (0, 1) by Φ.
pub fn sample_gaussian_copula(
    corr: &[Vec<f64>],
    n: usize,
    rng: &mut RandomSource,
) -> Result<SampleBatch> {
    let l = correlation_cholesky(corr)?;
    let d = corr.len();
    // Φ rounds to 0 or 1 beyond about 8.3 standard deviations.
    let lowest = f64::MIN_POSITIVE;
    let highest = 1.0 - f64::EPSILON / 2.0;
    let mut z = vec![0.0; d];
    let points = (0..n)
        .map(|_| {
            for v in z.iter_mut() {
                *v = standard_normal(rng);
            }
            (0..d)
                .map(|i| {
                    let x: f64 = (0..=i).map(|j| l[(i, j)] * z[j]).sum();
                    normal_cdf(x).clamp(lowest, highest)
                })
                .collect()
        })
        .collect();
    Ok(SampleBatch {
        points,
        dim: d,
        kind: CopulaKind::Gaussian,
        seed: rng.seed(),
        proposals: n as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::{BoundMethod, DensityBound};

    fn unit_bound() -> DensityBound {
        DensityBound {
            m: 1.0,
            method: BoundMethod::Analytic,
            analytic: 1.0,
            located_max: 1.0,
            grid_max: 1.0,
        }
    }

    #[test]
    fn independence_joint_accepts_almost_everything() {
        let joint = DiscreteJoint::independence(&[3, 3]).unwrap();
        let mut rng = RandomSource::new(1);
        let batch = sample_bernstein(&joint, &unit_bound(), 10_000, &mut rng).unwrap();
        assert_eq!(batch.len(), 10_000);
        assert!(batch.acceptance_rate() >= 0.99);
    }

    #[test]
    fn non_positive_bound_is_rejected() {
        let joint = DiscreteJoint::independence(&[2, 2]).unwrap();
        let mut rng = RandomSource::new(1);
        for m in [0.0, -1.0, f64::NAN] {
            let bad = DensityBound { m, ..unit_bound() };
            assert!(sample_bernstein(&joint, &bad, 5, &mut rng).is_err());
        }
    }

    #[test]
    fn grid_sampler_degenerate_joint() {
        let joint = DiscreteJoint::independence(&[1, 1]).unwrap();
        let mut rng = RandomSource::new(3);
        let batch = sample_grid(&joint, 100, &mut rng);
        assert!(batch.points.iter().flatten().all(|&u| u > 0.0 && u <= 1.0));
        assert_eq!(batch.acceptance_rate(), 1.0);
    }

    #[test]
    fn grid_sampler_skips_empty_cells() {
        let joint = crate::datasets::example_joint().unwrap();
        let mut rng = RandomSource::new(11);
        for p in sample_grid(&joint, 5_000, &mut rng).points {
            let k: Vec<usize> = p.iter().map(|&u| crate::basis::cell_index(4, u)).collect();
            assert!(joint.prob(&k) > 0.0, "sampled empty cell {k:?}");
        }
    }

    #[test]
    fn empty_requests_give_empty_batches() {
        let joint = DiscreteJoint::independence(&[2, 2]).unwrap();
        let mut rng = RandomSource::new(0);
        assert!(sample_grid(&joint, 0, &mut rng).is_empty());
        assert!(sample_bernstein(&joint, &unit_bound(), 0, &mut rng)
            .unwrap()
            .is_empty());
        assert_eq!(sample_independence(2, 0, &mut rng).acceptance_rate(), 1.0);
    }

    #[test]
    fn kinds_parse_and_print() {
        for k in CopulaKind::ALL {
            assert_eq!(k.to_string().parse::<CopulaKind>().unwrap(), k);
        }
        assert!("clayton".parse::<CopulaKind>().is_err());
    }

    #[test]
    fn comonotone_and_antimonotone_correlations() {
        let pts: Vec<Vec<f64>> = (1..=20)
            .map(|i| vec![i as f64 / 21.0, i as f64 / 21.0])
            .collect();
        let obs = PseudoObservations::from_points(&pts).unwrap();
        let c = estimate_gaussian_correlation(&obs).unwrap();
        assert!((c[0][1] - 1.0).abs() < 1e-12);
        let anti: Vec<Vec<f64>> = (1..=20)
            .map(|i| vec![i as f64 / 21.0, (21 - i) as f64 / 21.0])
            .collect();
        let c = estimate_gaussian_correlation(&PseudoObservations::from_points(&anti).unwrap())
            .unwrap();
        assert!((c[0][1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_errors() {
        let constant: Vec<Vec<f64>> = (0..5).map(|i| vec![0.5, i as f64 / 5.0]).collect();
        let obs = PseudoObservations::from_points(&constant).unwrap();
        assert!(estimate_gaussian_correlation(&obs).is_err());
        let short = PseudoObservations::from_points(&[vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        assert!(estimate_gaussian_correlation(&short).is_err());
    }

    #[test]
    fn non_pd_reports_smallest_eigenvalue() {
        let corr = vec![
            vec![1.0, 0.9, -0.9],
            vec![0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 1.0],
        ];
        let mut rng = RandomSource::new(0);
        let err = sample_gaussian_copula(&corr, 10, &mut rng).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("smallest eigenvalue -8.000000e-1"), "{msg}");
    }

    #[test]
    fn box_muller_uses_two_uniforms() {
        let mut a = RandomSource::new(5);
        let mut b = RandomSource::new(5);
        for _ in 0..10 {
            standard_normal(&mut a);
        }
        for _ in 0..20 {
            b.uniform();
        }
        assert_eq!(a.next_u64(), b.next_u64());
    }
}
