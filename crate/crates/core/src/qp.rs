//! Exact margin uniformization with nonnegativity.
//!
//! Solves
//!
//! ```text
//! minimize   Σ (x − a)²
//! subject to every one-dimensional margin of x equals 1/m,  x ≥ 0
//! ```
//!
//! by a primal active-set method. Each iteration projects `a` onto the
//! affine set {margins = 1/m, x_W = 0} for the current working set W (an
//! exact equality-constrained least-squares step through the Cholesky factor
//! of the free-cell Gram matrix), then either takes a blocked step, adds the
//! blocking bound, or drops a bound whose multiplier is negative. Ties are
//! broken by smallest index.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{closed_form_from_frequencies, shift_normalize, ContingencyTensor};
use crate::tensor::Tensor;

const STEP_TOL: f64 = 1e-14;
const MULTIPLIER_TOL: f64 = 1e-12;
const STATIONARITY_TOL: f64 = 1e-10;
const FEASIBILITY_TOL: f64 = 1e-12;
/// Minimum Cholesky pivot (diagonal of L) for a Gram matrix to count as full rank.
const PIVOT_TOL: f64 = 1e-7;
/// Threshold used by [`kkt_residual`] to declare a solution valid.
pub const KKT_TOL: f64 = 1e-8;

/// Minimizer of the margin-matching program and its certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Tensor,
    /// Cells held at zero in the final working set.
    pub active: Vec<usize>,
    /// One multiplier per margin constraint, indexed `axis·m + index`
    /// (dropped redundant rows carry 0).
    pub equality_multipliers: Vec<f64>,
    /// Multiplier of each bound x ≥ 0 (zero off the active set).
    pub bound_multipliers: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
}

/// Largest KKT violations of a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KktReport {
    /// max |2(x − a) + Eᵀλ − μ|
    pub stationarity: f64,
    /// max of margin deviations and negative parts of x
    pub primal_feasibility: f64,
    /// max negative part of μ
    pub dual_feasibility: f64,
    /// max |μ·x|
    pub complementarity: f64,
    pub passed: bool,
}

/// Margin constraints of an m^d table with redundant rows removed.
struct MarginSystem {
    m: usize,
    /// Kept row positions touching each cell.
    cell_rows: Vec<Vec<usize>>,
    /// Global row id (`axis·m + index`) of each kept row.
    kept: Vec<usize>,
    rows_total: usize,
}

impl MarginSystem {
    fn new(shape: &[usize]) -> Self {
        let d = shape.len();
        let m = shape[0];
        // All margins total 1, so for each axis past the first its last row is
        // implied by the others.
        let kept: Vec<usize> = (0..d * m)
            .filter(|&r| r / m == 0 || r % m != m - 1)
            .collect();
        let mut position = vec![usize::MAX; d * m];
        for (pos, &r) in kept.iter().enumerate() {
            position[r] = pos;
        }
        let cells: usize = shape.iter().product();
        let cell_rows = (0..cells)
            .map(|mut o| {
                let mut rows = Vec::with_capacity(d);
                for axis in (0..d).rev() {
                    let i = o % m;
                    o /= m;
                    let pos = position[axis * m + i];
                    if pos != usize::MAX {
                        rows.push(pos);
                    }
                }
                rows
            })
            .collect();
        Self {
            m,
            cell_rows,
            kept,
            rows_total: d * m,
        }
    }

    fn gram(&self, free: &[bool]) -> DMatrix<f64> {
        let k = self.kept.len();
        let mut g = DMatrix::zeros(k, k);
        for (rows, _) in self.cell_rows.iter().zip(free).filter(|(_, &f)| f) {
            for &r in rows {
                for &s in rows {
                    g[(r, s)] += 1.0;
                }
            }
        }
        g
    }

    fn factor(&self, free: &[bool]) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let chol = self.gram(free).cholesky()?;
        let min_pivot = chol.l_dirty().diagonal().min();
        (min_pivot > PIVOT_TOL).then_some(chol)
    }

    /// Projection of `a` onto {E x = 1/m, x_i = 0 for non-free i}; returns x and λ
    /// with x_F = a_F − E_Fᵀλ.
    fn project(&self, a: &[f64], free: &[bool]) -> Option<(Vec<f64>, Vec<f64>)> {
        let chol = self.factor(free)?;
        let target = 1.0 / self.m as f64;
        let mut rhs = DVector::from_element(self.kept.len(), -target);
        for ((rows, &f), &ac) in self.cell_rows.iter().zip(free).zip(a) {
            if f {
                for &r in rows {
                    rhs[r] += ac;
                }
            }
        }
        let lambda = chol.solve(&rhs);
        let x = self
            .cell_rows
            .iter()
            .zip(free)
            .zip(a)
            .map(|((rows, &f), &ac)| {
                if f {
                    ac - rows.iter().map(|&r| lambda[r]).sum::<f64>()
                } else {
                    0.0
                }
            })
            .collect();
        Some((x, lambda.iter().copied().collect()))
    }

    fn row_sum(&self, lambda: &[f64], cell: usize) -> f64 {
        self.cell_rows[cell].iter().map(|&r| lambda[r]).sum()
    }

    fn max_margin_violation(&self, x: &Tensor) -> f64 {
        let target = 1.0 / self.m as f64;
        x.margins()
            .iter()
            .flatten()
            .map(|v| (v - target).abs())
            .fold(0.0, f64::max)
    }
}

fn common_size(shape: &[usize]) -> Result<usize> {
    let m = shape[0];
    if shape.iter().any(|&s| s != m) {
        return Err(Error::Unsupported(format!(
            "margin program needs equal grid sizes, got {shape:?}"
        )));
    }
    Ok(m)
}

/// Solves the program for the relative frequencies of `a`.
///
/// `initial`, if given, should satisfy the constraints; otherwise it is
/// re-projected onto the feasible set. The default start is the
/// shift-normalized closed-form table.
pub fn solve(a: &ContingencyTensor, initial: Option<&Tensor>) -> Result<QpSolution> {
    solve_frequencies(&a.frequencies(), initial)
}

/// Same as [`solve`] for an arbitrary target tensor with equal axis lengths.
pub fn solve_frequencies(target: &Tensor, initial: Option<&Tensor>) -> Result<QpSolution> {
    let shape = target.shape().to_vec();
    let m = common_size(&shape)?;
    let system = MarginSystem::new(&shape);
    let a = target.data();
    let n = a.len();

    let mut x = match initial {
        Some(init) if init.shape() != shape.as_slice() => {
            return Err(Error::Domain(format!(
                "initial shape {:?} does not match {:?}",
                init.shape(),
                shape
            )))
        }
        Some(init) if is_feasible(&system, init) => init.map(|v| v.max(0.0)),
        Some(init) => reproject(init, m),
        None => shift_normalize(&closed_form_from_frequencies(target, m)).y,
    };

    // Working set: zero cells, kept only while linearly independent of the
    // margin rows and of each other.
    let mut free = vec![true; n];
    for i in 0..n {
        if x.data()[i] == 0.0 {
            free[i] = false;
            if system.factor(&free).is_none() {
                free[i] = true;
            }
        }
    }

    let cap = 10 * n;
    let mut iterations = 0;
    let lambda = loop {
        iterations += 1;
        if iterations > cap {
            return Err(Error::Numeric(format!(
                "active-set iteration exceeded {cap} steps"
            )));
        }
        let (proj, lambda) = system
            .project(a, &free)
            .ok_or_else(|| Error::Numeric("working set became linearly dependent".into()))?;
        let step: Vec<f64> = proj.iter().zip(x.data()).map(|(p, x)| p - x).collect();
        let step_norm = step.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

        if step_norm <= STEP_TOL {
            // Bound multipliers μ_i = −2 a_i + 2 Σ_r λ_r on fixed cells.
            let leaving = (0..n).find(|&i| {
                !free[i] && -2.0 * a[i] + 2.0 * system.row_sum(&lambda, i) < -MULTIPLIER_TOL
            });
            match leaving {
                Some(i) => free[i] = true,
                None => {
                    x.data_mut().copy_from_slice(&proj);
                    break lambda;
                }
            }
            continue;
        }

        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..n {
            if free[i] && step[i] < -STEP_TOL {
                let ratio = -x.data()[i] / step[i];
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        let xs = x.data_mut();
        for i in 0..n {
            xs[i] += alpha * step[i];
        }
        if let Some(i) = blocking {
            xs[i] = 0.0;
            free[i] = false;
        }
    };

    let equality_multipliers = {
        let mut full = vec![0.0; system.rows_total];
        for (pos, &r) in system.kept.iter().enumerate() {
            full[r] = 2.0 * lambda[pos];
        }
        full
    };
    let bound_multipliers: Vec<f64> = (0..n)
        .map(|i| {
            if free[i] {
                0.0
            } else {
                -2.0 * a[i] + 2.0 * system.row_sum(&lambda, i)
            }
        })
        .collect();

    let xs = x.data_mut();
    for v in xs.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let objective = x.data().iter().zip(a).map(|(x, a)| (x - a).powi(2)).sum();
    let solution = QpSolution {
        active: (0..n).filter(|&i| !free[i]).collect(),
        x,
        equality_multipliers,
        bound_multipliers,
        iterations,
        objective,
    };
    let report = kkt_residual_frequencies(&solution, target)?;
    if report.stationarity > STATIONARITY_TOL {
        return Err(Error::Numeric(format!(
            "active-set solution has stationarity residual {:.3e}",
            report.stationarity
        )));
    }
    Ok(solution)
}

fn is_feasible(system: &MarginSystem, x: &Tensor) -> bool {
    x.data().iter().all(|&v| v >= -FEASIBILITY_TOL)
        && system.max_margin_violation(x) <= FEASIBILITY_TOL
}

/// Maps an arbitrary start onto the feasible set: normalize, project onto the
/// margin constraints, then shift-and-normalize.
fn reproject(init: &Tensor, m: usize) -> Tensor {
    let total = init.sum();
    if !(total.is_finite() && total > 0.0) {
        return init.map(|_| 1.0 / init.len() as f64);
    }
    let scaled = init.map(|v| v / total);
    shift_normalize(&closed_form_from_frequencies(&scaled, m)).y
}

/// Least-squares projection onto the margin constraints alone (no x ≥ 0).
pub fn equality_projection(target: &Tensor) -> Result<Tensor> {
    common_size(target.shape())?;
    let system = MarginSystem::new(target.shape());
    let free = vec![true; target.len()];
    let (x, _) = system
        .project(target.data(), &free)
        .ok_or_else(|| Error::Numeric("margin system is rank deficient".into()))?;
    Tensor::new(target.shape().to_vec(), x)
}

/// KKT violations of `sol` for the relative frequencies of `a`.
pub fn kkt_residual(sol: &QpSolution, a: &ContingencyTensor) -> Result<KktReport> {
    kkt_residual_frequencies(sol, &a.frequencies())
}

pub fn kkt_residual_frequencies(sol: &QpSolution, target: &Tensor) -> Result<KktReport> {
    if sol.x.shape() != target.shape() {
        return Err(Error::Domain(format!(
            "solution shape {:?} does not match {:?}",
            sol.x.shape(),
            target.shape()
        )));
    }
    let m = common_size(target.shape())?;
    let d = target.ndim();
    if sol.equality_multipliers.len() != d * m || sol.bound_multipliers.len() != target.len() {
        return Err(Error::Domain(
            "multiplier vectors have the wrong length".into(),
        ));
    }
    let mut stationarity: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut negative: f64 = 0.0;
    for o in 0..target.len() {
        let idx = target.unravel(o);
        let x = sol.x.data()[o];
        let mu = sol.bound_multipliers[o];
        let eq: f64 = idx
            .iter()
            .enumerate()
            .map(|(axis, &i)| sol.equality_multipliers[axis * m + i])
            .sum();
        let s = 2.0 * (x - target.data()[o]) + eq - mu;
        stationarity = stationarity.max(s.abs());
        complementarity = complementarity.max((mu * x).abs());
        dual = dual.max(-mu);
        negative = negative.max(-x);
    }
    let target_margin = 1.0 / m as f64;
    let margin_violation = sol
        .x
        .margins()
        .iter()
        .flatten()
        .map(|v| (v - target_margin).abs())
        .fold(0.0, f64::max);
    let primal_feasibility = margin_violation.max(negative);
    let passed = stationarity < KKT_TOL
        && primal_feasibility < KKT_TOL
        && dual < KKT_TOL
        && complementarity < KKT_TOL;
    Ok(KktReport {
        stationarity,
        primal_feasibility,
        dual_feasibility: if dual > 0.0 { dual } else { 0.0 },
        complementarity,
        passed,
    })
}
