//! Partitions of unity on the unit interval.
//!
//! A family φ(m, k, ·), 0 ≤ k < m, is a partition of unity when every member
//! is nonnegative, integrates to 1/m, and the members sum to one pointwise.
//! Bernstein polynomials (φ(m, k, z) = B(m − 1, k, z)) and cell indicators
//! are the two base instances; [`coarsen`] builds φ_K from any family.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quadrature::adaptive_simpson;

/// Degrees above this use log-space binomial coefficients.
const DIRECT_DEGREE_LIMIT: usize = 20;

fn check_unit(z: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&z) {
        return Err(domain(format!("z = {z} is outside [0, 1]")));
    }
    Ok(())
}

/// Bernstein basis polynomial B(m, k, z) = C(m, k) z^k (1 − z)^(m − k).
pub fn bernstein_basis(m: usize, k: usize, z: f64) -> Result<f64> {
    if k > m {
        return Err(domain(format!("index k = {k} exceeds degree m = {m}")));
    }
    check_unit(z)?;
    Ok(bernstein_unchecked(m, k, z))
}

/// B(m, k, z) without argument checks; callers guarantee `k ≤ m`, `z ∈ [0, 1]`.
pub(crate) fn bernstein_unchecked(m: usize, k: usize, z: f64) -> f64 {
    if z == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if z == 1.0 {
        return if k == m { 1.0 } else { 0.0 };
    }
    if m <= DIRECT_DEGREE_LIMIT {
        binomial(m, k) * z.powi(k as i32) * (1.0 - z).powi((m - k) as i32)
    } else {
        (ln_binomial(m, k) + k as f64 * z.ln() + (m - k) as f64 * (-z).ln_1p()).exp()
    }
}

/// All m + 1 values B(m, 0..=m, z).
pub(crate) fn bernstein_row(m: usize, z: f64) -> Vec<f64> {
    (0..=m).map(|k| bernstein_unchecked(m, k, z)).collect()
}

fn binomial(m: usize, k: usize) -> f64 {
    let k = k.min(m - k);
    // Exact in u64 for m ≤ 20.
    let mut c: u64 = 1;
    for i in 0..k as u64 {
        c = c * (m as u64 - i) / (i + 1);
    }
    c as f64
}

fn ln_binomial(m: usize, k: usize) -> f64 {
    let k = k.min(m - k);
    (1..=k).map(|i| ((m - k + i) as f64 / i as f64).ln()).sum()
}

/// d/dz B(m, k, z) = m [B(m − 1, k − 1, z) − B(m − 1, k, z)],
/// with B(m − 1, −1, ·) = B(m − 1, m, ·) = 0.
pub fn bernstein_basis_derivative(m: usize, k: usize, z: f64) -> Result<f64> {
    if k > m {
        return Err(domain(format!("index k = {k} exceeds degree m = {m}")));
    }
    check_unit(z)?;
    if m == 0 {
        return Ok(0.0);
    }
    let lower = if k == 0 {
        0.0
    } else {
        bernstein_unchecked(m - 1, k - 1, z)
    };
    let upper = if k == m {
        0.0
    } else {
        bernstein_unchecked(m - 1, k, z)
    };
    Ok(m as f64 * (lower - upper))
}

/// Indicator of the cell (k/m, (k + 1)/m]; the point z = 0 belongs to cell 0.
pub fn indicator_basis(m: usize, k: usize, z: f64) -> Result<f64> {
    if m == 0 || k >= m {
        return Err(domain(format!("cell k = {k} invalid for m = {m}")));
    }
    check_unit(z)?;
    Ok(if cell_index(m, z) == k { 1.0 } else { 0.0 })
}

/// Cell of `z` in the half-open right-closed partition of [0, 1] into `m` cells.
///
/// Boundaries are the doubles nearest k/m, so z = r/n with r·m = k·n lands in
/// cell k − 1 exactly as in rational arithmetic.
pub fn cell_index(m: usize, z: f64) -> usize {
    let mf = m as f64;
    let mut k = ((z * mf).ceil() as usize).clamp(1, m) - 1;
    while k > 0 && z <= k as f64 / mf {
        k -= 1;
    }
    while k + 1 < m && z > (k + 1) as f64 / mf {
        k += 1;
    }
    k
}

/// A partition-of-unity family φ(m, k, ·).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionFamily {
    /// φ(m, k, z) = B(m − 1, k, z).
    Bernstein,
    /// φ(m, k, z) = 1 on (k/m, (k + 1)/m].
    Indicator,
    /// φ_K(m, k, ·) = Σ_{j<K} φ(K·m, K·k + j, ·).
    Coarsened {
        base: Box<PartitionFamily>,
        factor: usize,
    },
}

impl PartitionFamily {
    /// Evaluates φ(m, k, z).
    pub fn eval(&self, m: usize, k: usize, z: f64) -> Result<f64> {
        if m == 0 || k >= m {
            return Err(domain(format!("member k = {k} invalid for m = {m}")));
        }
        check_unit(z)?;
        Ok(self.eval_unchecked(m, k, z))
    }

    pub(crate) fn eval_unchecked(&self, m: usize, k: usize, z: f64) -> f64 {
        match self {
            PartitionFamily::Bernstein => bernstein_unchecked(m - 1, k, z),
            PartitionFamily::Indicator => {
                if cell_index(m, z) == k {
                    1.0
                } else {
                    0.0
                }
            }
            PartitionFamily::Coarsened { base, factor } => (0..*factor)
                .map(|j| base.eval_unchecked(factor * m, factor * k + j, z))
                .sum(),
        }
    }

    /// All m members evaluated at `z`.
    pub(crate) fn row(&self, m: usize, z: f64) -> Vec<f64> {
        match self {
            PartitionFamily::Bernstein => bernstein_row(m - 1, z),
            _ => (0..m).map(|k| self.eval_unchecked(m, k, z)).collect(),
        }
    }
}

/// φ_K built from `base`; K = 0 is rejected.
pub fn coarsen(base: PartitionFamily, factor: usize) -> Result<PartitionFamily> {
    if factor == 0 {
        return Err(domain("coarsening factor K must be at least 1"));
    }
    Ok(PartitionFamily::Coarsened {
        base: Box::new(base),
        factor,
    })
}

/// Result of checking both partition-of-unity conditions numerically.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    pub m: usize,
    pub tolerance: f64,
    /// max_k |∫ φ(m, k, u) du − 1/m|
    pub max_integral_error: f64,
    /// max_z |Σ_k φ(m, k, z) − 1| over the sweep
    pub max_sum_error: f64,
    /// Smallest member value seen during the sweep.
    pub min_value: f64,
    pub sweep_points: usize,
    pub passed: bool,
}

/// Checks the integral condition by adaptive Simpson (absolute tolerance
/// `tol / 10`) and the sum condition on a 1001-point sweep of [0, 1].
pub fn validate_partition(family: &PartitionFamily, m: usize, tol: f64) -> Result<PartitionReport> {
    if m == 0 {
        return Err(domain("m must be at least 1"));
    }
    if tol.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(domain("tolerance must be positive"));
    }
    let target = 1.0 / m as f64;
    let max_integral_error = (0..m)
        .map(|k| {
            let v = adaptive_simpson(|u| family.eval_unchecked(m, k, u), 0.0, 1.0, tol / 10.0);
            (v - target).abs()
        })
        .fold(0.0, f64::max);

    let sweep_points = 1001;
    let mut max_sum_error: f64 = 0.0;
    let mut min_value = f64::INFINITY;
    for i in 0..sweep_points {
        let z = i as f64 / (sweep_points - 1) as f64;
        let row = family.row(m, z);
        min_value = row.iter().copied().fold(min_value, f64::min);
        max_sum_error = max_sum_error.max((row.iter().sum::<f64>() - 1.0).abs());
    }
    let passed = max_integral_error < tol && max_sum_error < tol && min_value >= 0.0;
    Ok(PartitionReport {
        m,
        tolerance: tol,
        max_integral_error,
        max_sum_error,
        min_value,
        sweep_points,
        passed,
    })
}
