//! Discrete random vectors with uniform margins and the copulas they induce.
//!
//! A [`DiscreteJoint`] holds p(k₁, …, k_d) = P(U₁ = k₁, …, U_d = k_d) where each
//! U_i is uniform on {0, …, m_i − 1}. It induces
//!
//! * the Bernstein copula density Σ_k p(k) Π_i m_i B(m_i − 1, k_i, u_i),
//! * the grid-type (checkerboard) density (Π_i m_i) p(cell(u)),
//! * and more generally c^φ for any partition-of-unity family φ.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::basis::{bernstein_row, cell_index, PartitionFamily};
use crate::error::{domain, Error, Result};
use crate::rng::RandomSource;
use crate::tensor::Tensor;

/// Tolerance on the total mass of a joint.
pub const SUM_TOLERANCE: f64 = 1e-12;
/// Tolerance on each margin entry for programmatically built joints.
pub const MARGIN_TOLERANCE: f64 = 1e-10;
/// Tolerance on each margin entry when ingesting external tables.
pub const INGEST_MARGIN_TOLERANCE: f64 = 1e-6;
/// Tolerance on the total mass of ingested tables.
pub const INGEST_SUM_TOLERANCE: f64 = 1e-9;
/// Inflation applied to the numerically located density maximum.
pub const BOUND_INFLATION: f64 = 1.05;

/// How a printed 2-d table maps onto (U₁, U₂).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `table[i][j] = P(U₁ = i, U₂ = j)`.
    Math,
    /// Rows printed top-down by descending upper cell boundary:
    /// `P(U₁ = i, U₂ = j) = table[m − 1 − i][j]`.
    Scatterplot,
}

/// Which induced copula density to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Bernstein,
    Grid,
}

/// Probability tensor with exactly uniform one-dimensional margins.
#[derive(Debug, Clone)]
pub struct DiscreteJoint {
    p: Tensor,
    cumulative: OnceLock<Tensor>,
}

impl PartialEq for DiscreteJoint {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
    }
}

impl DiscreteJoint {
    /// Validates at the strict tolerances ([`SUM_TOLERANCE`], [`MARGIN_TOLERANCE`]).
    pub fn new(p: Tensor) -> Result<Self> {
        Self::with_tolerance(p, SUM_TOLERANCE, MARGIN_TOLERANCE)
    }

    /// Validates nonnegativity, total mass within `sum_tol` and every margin
    /// entry within `margin_tol` of 1/m_i.
    pub fn with_tolerance(p: Tensor, sum_tol: f64, margin_tol: f64) -> Result<Self> {
        if let Some((o, v)) = p
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::Validation(format!(
                "entry {:?} = {v} is not a nonnegative number",
                p.unravel(o)
            )));
        }
        let total = p.sum();
        if (total - 1.0).abs() > sum_tol {
            return Err(Error::Validation(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        if let Some(err) = worst_margin(&p, margin_tol) {
            return Err(err);
        }
        Ok(Self {
            p,
            cumulative: OnceLock::new(),
        })
    }

    /// The independence joint p ≡ 1/Π m_i.
    pub fn independence(sizes: &[usize]) -> Result<Self> {
        let cells: usize = sizes.iter().product();
        Self::new(Tensor::filled(sizes.to_vec(), 1.0 / cells as f64)?)
    }

    /// Ingests a 2-d table of probabilities.
    ///
    /// Accepts margins within [`INGEST_MARGIN_TOLERANCE`] and total mass within
    /// [`INGEST_SUM_TOLERANCE`]; the mass is rescaled to one.
    pub fn from_table(table: &[Vec<f64>], orientation: Orientation) -> Result<Self> {
        let t = Tensor::from_rows(table)?;
        let t = match orientation {
            Orientation::Math => t,
            Orientation::Scatterplot => t.flip_axis(0),
        };
        Self::ingest(t)
    }

    /// Ingests a tensor of any dimension at the ingestion tolerances.
    pub fn ingest(t: Tensor) -> Result<Self> {
        let total = t.sum();
        if (total - 1.0).abs() > INGEST_SUM_TOLERANCE {
            return Err(Error::Validation(format!("table sums to {total}, not 1")));
        }
        let t = t.map(|v| v / total);
        Self::with_tolerance(t, SUM_TOLERANCE, INGEST_MARGIN_TOLERANCE)
    }

    pub fn dim(&self) -> usize {
        self.p.ndim()
    }

    pub fn sizes(&self) -> &[usize] {
        self.p.shape()
    }

    pub fn probabilities(&self) -> &Tensor {
        &self.p
    }

    pub fn prob(&self, k: &[usize]) -> f64 {
        self.p.get(k)
    }

    /// 2-d table in the requested orientation.
    pub fn to_table(&self, orientation: Orientation) -> Result<Vec<Vec<f64>>> {
        match orientation {
            Orientation::Math => self.p.to_rows(),
            Orientation::Scatterplot => self.p.flip_axis(0).to_rows(),
        }
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(domain(format!(
                "point has {} coordinates, joint has dimension {}",
                u.len(),
                self.dim()
            )));
        }
        if let Some(x) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(domain(format!("coordinate {x} is outside [0, 1]")));
        }
        Ok(())
    }

    /// Bernstein copula density at `u ∈ [0, 1]^d`.
    pub fn bernstein_density(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        Ok(self.bernstein_density_unchecked(u))
    }

    pub(crate) fn bernstein_density_unchecked(&self, u: &[f64]) -> f64 {
        let weights: Vec<Vec<f64>> = self
            .sizes()
            .iter()
            .zip(u)
            .map(|(&m, &x)| scaled(bernstein_row(m - 1, x), m))
            .collect();
        self.p.contract(&weights)
    }

    /// Grid-type copula density: (Π m_i)·p(cell(u)).
    pub fn grid_density(&self, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        let cell: Vec<usize> = self
            .sizes()
            .iter()
            .zip(u)
            .map(|(&m, &x)| cell_index(m, x))
            .collect();
        // Same multiplication order as `Tensor::contract`, so this equals the
        // indicator-family density bit for bit.
        Ok(self
            .sizes()
            .iter()
            .rev()
            .fold(self.p.get(&cell), |acc, &m| acc * m as f64))
    }

    /// Density c^φ induced by an arbitrary partition-of-unity family.
    pub fn generic_density(&self, family: &PartitionFamily, u: &[f64]) -> Result<f64> {
        self.check_point(u)?;
        let weights: Vec<Vec<f64>> = self
            .sizes()
            .iter()
            .zip(u)
            .map(|(&m, &x)| scaled(family.row(m, x), m))
            .collect();
        Ok(self.p.contract(&weights))
    }

    /// Density of the requested kind.
    pub fn density(&self, kind: DensityKind, u: &[f64]) -> Result<f64> {
        match kind {
            DensityKind::Bernstein => self.bernstein_density(u),
            DensityKind::Grid => self.grid_density(u),
        }
    }

    /// P(U_i < k_i for all i) on the index grid k_i = 0..=m_i.
    fn cumulative(&self) -> &Tensor {
        self.cumulative.get_or_init(|| {
            let shape: Vec<usize> = self.sizes().iter().map(|m| m + 1).collect();
            let mut g = Tensor::zeros(shape).expect("padded shape is valid");
            for o in 0..self.p.len() {
                let mut idx = self.p.unravel(o);
                idx.iter_mut().for_each(|k| *k += 1);
                g.set(&idx, self.p.data()[o]);
            }
            let shape = g.shape().to_vec();
            let strides = g.strides();
            for (axis, &m) in shape.iter().enumerate() {
                let stride = strides[axis];
                let data = g.data_mut();
                for o in 0..data.len() {
                    if !(o / stride).is_multiple_of(m) {
                        data[o] += data[o - stride];
                    }
                }
            }
            g
        })
    }

    /// Bernstein copula C(x) = Σ_{k_i = 0..m_i} P(⋂{U_i < k_i}) Π_i B(m_i, k_i, x_i).
    pub fn bernstein_cdf(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let weights: Vec<Vec<f64>> = self
            .sizes()
            .iter()
            .zip(x)
            .map(|(&m, &xi)| bernstein_row(m, xi))
            .collect();
        Ok(self.cumulative().contract(&weights).clamp(0.0, 1.0))
    }

    /// Joint of the sub-vector (U_k)_{k ∈ keep}; `keep` holds distinct 0-based axes.
    pub fn marginal_joint(&self, keep: &[usize]) -> Result<DiscreteJoint> {
        let d = self.dim();
        if keep.is_empty() || keep.len() >= d {
            return Err(domain(format!(
                "kept axes must form a non-empty strict subset of {d} axes"
            )));
        }
        let mut seen = vec![false; d];
        for &k in keep {
            if k >= d || seen[k] {
                return Err(domain(format!("axis {k} is out of range or repeated")));
            }
            seen[k] = true;
        }
        DiscreteJoint::new(self.p.sum_to(keep)?)
    }

    /// Analytic and numerically refined upper bounds on the Bernstein density.
    pub fn density_bound(&self) -> DensityBound {
        let analytic = self.sizes().iter().map(|&m| m as f64).product::<f64>() * self.p.max();
        let (grid_max, argmax) = self.grid_search_maximum();
        let refined_max = self.refine_maximum(&argmax).max(grid_max);
        let numeric = refined_max * BOUND_INFLATION;
        if numeric < analytic {
            DensityBound {
                m: numeric,
                method: BoundMethod::NumericRefined,
                analytic,
                located_max: refined_max,
                grid_max,
            }
        } else {
            DensityBound {
                m: analytic,
                method: BoundMethod::Analytic,
                analytic,
                located_max: refined_max,
                grid_max,
            }
        }
    }

    /// Best values on a 101-point-per-axis grid (d ≤ 2) or random multistart
    /// (d > 2). Returns the maximum and up to eight best starting points.
    fn grid_search_maximum(&self) -> (f64, Vec<Vec<f64>>) {
        const STEPS: usize = 100;
        let d = self.dim();
        let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
        let mut push = |v: f64, u: Vec<f64>| {
            candidates.push((v, u));
            if candidates.len() > 64 {
                candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
                candidates.truncate(8);
            }
        };
        match d {
            1 | 2 => {
                let total = (STEPS + 1).pow(d as u32);
                for o in 0..total {
                    let u: Vec<f64> = (0..d)
                        .map(|axis| {
                            let i = (o / (STEPS + 1).pow((d - 1 - axis) as u32)) % (STEPS + 1);
                            i as f64 / STEPS as f64
                        })
                        .collect();
                    let v = self.bernstein_density_unchecked(&u);
                    push(v, u);
                }
            }
            _ => {
                let mut rng = RandomSource::new(0x6d75_6c74_6973_7461);
                // Corners first: the density often peaks on the boundary.
                for o in 0..(1usize << d.min(12)) {
                    let u: Vec<f64> = (0..d).map(|b| ((o >> b) & 1) as f64).collect();
                    let v = self.bernstein_density_unchecked(&u);
                    push(v, u);
                }
                for _ in 0..(STEPS + 1).pow(2) {
                    let u: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
                    let v = self.bernstein_density_unchecked(&u);
                    push(v, u);
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        candidates.truncate(8);
        let best = candidates.first().map_or(0.0, |c| c.0);
        (best, candidates.into_iter().map(|c| c.1).collect())
    }

    /// Coordinate pattern search from each start, clamped to the unit cube.
    fn refine_maximum(&self, starts: &[Vec<f64>]) -> f64 {
        let mut best: f64 = 0.0;
        for start in starts {
            let mut u = start.clone();
            let mut value = self.bernstein_density_unchecked(&u);
            let mut step = 0.01;
            while step > 1e-10 {
                let mut improved = false;
                for axis in 0..u.len() {
                    for dir in [1.0, -1.0] {
                        let mut trial = u.clone();
                        trial[axis] = (trial[axis] + dir * step).clamp(0.0, 1.0);
                        let v = self.bernstein_density_unchecked(&trial);
                        if v > value {
                            value = v;
                            u = trial;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best = best.max(value);
        }
        best
    }

    /// Density on the midpoints of a `resolution × resolution` lattice;
    /// entry `[i][j]` is the density at ((i + ½)/r, (j + ½)/r).
    pub fn density_grid(&self, resolution: usize, kind: DensityKind) -> Result<Vec<Vec<f64>>> {
        if self.dim() != 2 {
            return Err(Error::Unsupported(format!(
                "density grids need a 2-d joint, got dimension {}",
                self.dim()
            )));
        }
        if resolution < 2 {
            return Err(domain("resolution must be at least 2"));
        }
        let mid = |i: usize| (i as f64 + 0.5) / resolution as f64;
        (0..resolution)
            .map(|i| {
                (0..resolution)
                    .map(|j| self.density(kind, &[mid(i), mid(j)]))
                    .collect()
            })
            .collect()
    }
}

fn scaled(mut row: Vec<f64>, m: usize) -> Vec<f64> {
    let m = m as f64;
    row.iter_mut().for_each(|v| *v *= m);
    row
}

/// The margin entry furthest from 1/m_i, if it exceeds `tol`.
fn worst_margin(p: &Tensor, tol: f64) -> Option<Error> {
    let mut worst: Option<(f64, usize, usize, f64, f64)> = None;
    for (axis, margin) in p.margins().into_iter().enumerate() {
        let expected = 1.0 / margin.len() as f64;
        for (index, value) in margin.into_iter().enumerate() {
            let dev = (value - expected).abs();
            if dev > tol && worst.is_none_or(|w| dev > w.0) {
                worst = Some((dev, axis, index, value, expected));
            }
        }
    }
    worst.map(
        |(_, axis, index, value, expected)| Error::NonUniformMargin {
            axis,
            index,
            value,
            expected,
        },
    )
}

/// Whether a bound came from the coefficient maximum or a numeric search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Analytic,
    NumericRefined,
}

/// Upper bound M on a Bernstein copula density over the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBound {
    /// The bound to use.
    pub m: f64,
    pub method: BoundMethod,
    /// (Π m_i)·max p, always valid.
    pub analytic: f64,
    /// Largest density value located by grid search plus local refinement.
    pub located_max: f64,
    /// Largest density value on the search grid alone.
    pub grid_max: f64,
}
