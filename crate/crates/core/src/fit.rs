//! From raw observations to a uniform-margin [`DiscreteJoint`].
//!
//! The pipeline is: relative ranks → contingency table on an m^d grid →
//! margin uniformization, either by the unconstrained least-squares solution
//! followed by a shift-and-normalize repair, or by the exact nonnegative
//! least-squares program in [`crate::qp`].

use serde::{Deserialize, Serialize};

use crate::basis::cell_index;
use crate::error::{domain, Error, Result};
use crate::joint::DiscreteJoint;
use crate::qp;
use crate::tensor::{cell_count, strides_of, Tensor};

/// Denominator used to turn integer ranks into relative ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankScale {
    /// rank / n, values in (0, 1].
    #[default]
    N,
    /// rank / (n + 1), values in (0, 1).
    NPlusOne,
}

/// Points in the unit cube, row-major `n × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservations {
    n: usize,
    d: usize,
    values: Vec<f64>,
    scale: RankScale,
}

impl PseudoObservations {
    /// Wraps points that already lie in [0, 1]^d (e.g. simulated copula samples).
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::Validation(
                "points must be non-empty rows of equal length".into(),
            ));
        }
        if points.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(domain("points must lie in the unit cube"));
        }
        Ok(Self {
            n: points.len(),
            d,
            values: points.iter().flatten().copied().collect(),
            scale: RankScale::N,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn scale(&self) -> RankScale {
        self.scale
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.values[i * self.d + j]).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.point(i).to_vec()).collect()
    }

    /// Average ranks of column `j` (1-based, ties averaged), recovered from the values.
    pub fn ranks(&self, j: usize) -> Vec<f64> {
        let denom = match self.scale {
            RankScale::N => self.n as f64,
            RankScale::NPlusOne => self.n as f64 + 1.0,
        };
        self.column(j).into_iter().map(|u| u * denom).collect()
    }
}

/// Average ranks (1-based) of `values`; tied entries share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Relative ranks rank/n of each column (ties by average rank).
pub fn pseudo_observations(data: &[Vec<f64>]) -> Result<PseudoObservations> {
    pseudo_observations_scaled(data, RankScale::N)
}

/// Relative ranks with an explicit denominator convention.
pub fn pseudo_observations_scaled(
    data: &[Vec<f64>],
    scale: RankScale,
) -> Result<PseudoObservations> {
    let n = data.len();
    if n < 2 {
        return Err(domain(format!("need at least 2 observations, got {n}")));
    }
    let d = data[0].len();
    if d == 0 || data.iter().any(|r| r.len() != d) {
        return Err(Error::Validation(
            "observation rows must have equal, non-zero length".into(),
        ));
    }
    if let Some((i, _)) = data
        .iter()
        .enumerate()
        .find(|(_, r)| r.iter().any(|v| !v.is_finite()))
    {
        return Err(domain(format!(
            "observation {i} contains a non-finite value"
        )));
    }
    let denom = match scale {
        RankScale::N => n as f64,
        RankScale::NPlusOne => n as f64 + 1.0,
    };
    let mut values = vec![0.0; n * d];
    for j in 0..d {
        let column: Vec<f64> = data.iter().map(|r| r[j]).collect();
        if column.iter().all(|&v| v == column[0]) {
            return Err(domain(format!(
                "column {j} is constant; dependence is undefined"
            )));
        }
        for (i, r) in average_ranks(&column).into_iter().enumerate() {
            values[i * d + j] = r / denom;
        }
    }
    Ok(PseudoObservations {
        n,
        d,
        values,
        scale,
    })
}

/// Integer cell counts on a product grid, with relative frequencies counts/n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTensor {
    sizes: Vec<usize>,
    counts: Vec<u64>,
    n: u64,
}

impl ContingencyTensor {
    /// Builds a table from row-major counts.
    pub fn from_counts(sizes: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        let cells = cell_count(&sizes)?;
        if cells != counts.len() {
            return Err(Error::Validation(format!(
                "{} counts for a grid of {cells} cells",
                counts.len()
            )));
        }
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(domain("contingency table holds no observations"));
        }
        Ok(Self { sizes, counts, n })
    }

    /// 2-d table from a matrix of counts (`rows[k1][k2]`).
    pub fn from_count_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Validation("ragged count rows".into()));
        }
        Self::from_counts(
            vec![rows.len(), cols],
            rows.iter().flatten().copied().collect(),
        )
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    /// Relative frequencies a = counts / n.
    pub fn frequencies(&self) -> Tensor {
        let n = self.n as f64;
        Tensor::new(
            self.sizes.clone(),
            self.counts.iter().map(|&c| c as f64 / n).collect(),
        )
        .expect("shape checked at construction")
    }

    /// Count margins of one axis.
    pub fn margin_counts(&self, axis: usize) -> Vec<u64> {
        let stride: usize = self.sizes[axis + 1..].iter().product();
        let m = self.sizes[axis];
        let mut out = vec![0; m];
        for (o, &c) in self.counts.iter().enumerate() {
            out[(o / stride) % m] += c;
        }
        out
    }

    /// Common grid size when all axes agree.
    pub fn common_size(&self) -> Option<usize> {
        let m = self.sizes[0];
        self.sizes.iter().all(|&s| s == m).then_some(m)
    }
}

/// Bins points into the grid with half-open right-closed cells; the value 1.0
/// falls in the top cell.
pub fn contingency_table(obs: &PseudoObservations, sizes: &[usize]) -> Result<ContingencyTensor> {
    if sizes.len() != obs.dim() {
        return Err(domain(format!(
            "{} grid sizes for {}-dimensional observations",
            sizes.len(),
            obs.dim()
        )));
    }
    if sizes.contains(&0) {
        return Err(domain("grid sizes must be at least 1"));
    }
    let strides = strides_of(sizes);
    let mut counts = vec![0u64; cell_count(sizes)?];
    for i in 0..obs.len() {
        let offset: usize = sizes
            .iter()
            .zip(obs.point(i))
            .zip(&strides)
            .map(|((&m, &u), s)| cell_index(m, u) * s)
            .sum();
        counts[offset] += 1;
    }
    ContingencyTensor::from_counts(sizes.to_vec(), counts)
}

/// Least-squares table with all margins 1/m, ignoring nonnegativity:
/// x = a − m^{1−d} Σ_k a_{•[k]}(i_k) + d/m^d.
pub fn uniformize_closed_form(a: &ContingencyTensor) -> Result<Tensor> {
    let m = a.common_size().ok_or_else(|| {
        Error::Unsupported(format!(
            "closed-form uniformization needs equal grid sizes, got {:?}",
            a.sizes()
        ))
    })?;
    let freq = a.frequencies();
    Ok(closed_form_from_frequencies(&freq, m))
}

pub(crate) fn closed_form_from_frequencies(freq: &Tensor, m: usize) -> Tensor {
    let d = freq.ndim();
    let mf = m as f64;
    let margins = freq.margins();
    let scale = mf.powi(d as i32 - 1);
    let offset = d as f64 / mf.powi(d as i32);
    let mut x = freq.clone();
    for o in 0..x.len() {
        let idx = freq.unravel(o);
        let margin_sum: f64 = idx.iter().enumerate().map(|(k, &i)| margins[k][i]).sum();
        x.data_mut()[o] = freq.data()[o] - margin_sum / scale + offset;
    }
    x
}

/// Output of [`shift_normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftNormalized {
    pub y: Tensor,
    /// The additive constant a = max(0, −min x).
    pub shift: f64,
}

/// y = (x + a) / (1 + N·a) with a = −min x (or 0 when x ≥ 0) and N the number
/// of cells. Keeps every margin at 1/m_i and makes all entries nonnegative.
pub fn shift_normalize(x: &Tensor) -> ShiftNormalized {
    let shift = (-x.min()).max(0.0);
    if shift == 0.0 {
        return ShiftNormalized {
            y: x.clone(),
            shift,
        };
    }
    let denom = 1.0 + x.len() as f64 * shift;
    let y = x.map(|v| ((v + shift) / denom).max(0.0));
    ShiftNormalized { y, shift }
}

/// Σ (x − a)² against the relative frequencies of `a`.
pub fn quadratic_error(x: &Tensor, a: &ContingencyTensor) -> Result<f64> {
    if x.shape() != a.sizes() {
        return Err(domain(format!(
            "shape {:?} does not match table {:?}",
            x.shape(),
            a.sizes()
        )));
    }
    let n = a.total() as f64;
    Ok(x.data()
        .iter()
        .zip(a.counts())
        .map(|(&v, &c)| (v - c as f64 / n).powi(2))
        .sum())
}

/// Uniformization method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Closed-form least squares plus shift-and-normalize.
    #[default]
    ClosedForm,
    /// Exact nonnegative least squares.
    Qp,
}

/// Summary of a fit, serialized as the JSON fit report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub method: FitMethod,
    pub sizes: Vec<usize>,
    pub observations: u64,
    /// Shift constant a of the shift-and-normalize step.
    pub shift: f64,
    /// Σ (y − a)² for the shift-normalized closed-form table.
    pub quadratic_error_closed_form: f64,
    /// Σ (x* − a)² for the exact program.
    pub quadratic_error_qp: f64,
    pub qp_iterations: usize,
    pub rank_scale: Option<RankScale>,
}

/// Result of [`fit_table`] / [`fit_data`].
#[derive(Debug, Clone)]
pub struct Fit {
    pub joint: DiscreteJoint,
    pub table: ContingencyTensor,
    pub report: FitReport,
}

/// Uniformizes a contingency table; both quadratic errors are always reported.
pub fn fit_table(a: &ContingencyTensor, method: FitMethod) -> Result<Fit> {
    let x = uniformize_closed_form(a)?;
    let shifted = shift_normalize(&x);
    let closed_error = quadratic_error(&shifted.y, a)?;
    let solution = qp::solve(a, Some(&shifted.y))?;
    let qp_error = quadratic_error(&solution.x, a)?;
    let chosen = match method {
        FitMethod::ClosedForm => shifted.y.clone(),
        FitMethod::Qp => solution.x.clone(),
    };
    let joint = DiscreteJoint::new(chosen)?;
    Ok(Fit {
        joint,
        table: a.clone(),
        report: FitReport {
            method,
            sizes: a.sizes().to_vec(),
            observations: a.total(),
            shift: shifted.shift,
            quadratic_error_closed_form: closed_error,
            quadratic_error_qp: qp_error,
            qp_iterations: solution.iterations,
            rank_scale: None,
        },
    })
}

/// Full pipeline from raw observations (rows = events, columns = risks).
pub fn fit_data(
    data: &[Vec<f64>],
    sizes: &[usize],
    scale: RankScale,
    method: FitMethod,
) -> Result<Fit> {
    let obs = pseudo_observations_scaled(data, scale)?;
    let table = contingency_table(&obs, sizes)?;
    let mut fit = fit_table(&table, method)?;
    fit.report.rank_scale = Some(scale);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_of_permutation() {
        let obs = pseudo_observations(&[vec![3.0], vec![1.0], vec![2.0]]).unwrap();
        let col = obs.column(0);
        assert_eq!(col, vec![1.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn sorted_column_gives_lattice() {
        let data: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 1.5, -(i as f64)]).collect();
        let obs = pseudo_observations(&data).unwrap();
        assert_eq!(obs.column(0), vec![0.2, 0.4, 0.6, 0.8, 1.0]);
        assert_eq!(obs.column(1), vec![1.0, 0.8, 0.6, 0.4, 0.2]);
    }

    #[test]
    fn ties_use_average_rank() {
        let obs = pseudo_observations(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(obs.column(0), vec![2.5 / 3.0, 2.5 / 3.0, 1.0 / 3.0]);
        assert!((obs.column(0)[0] - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pseudo_observation_errors() {
        assert!(pseudo_observations(&[vec![1.0]]).is_err());
        assert!(pseudo_observations(&[vec![1.0, 2.0], vec![1.0, 3.0]]).is_err());
        assert!(pseudo_observations(&[vec![f64::NAN, 2.0], vec![1.0, 3.0]]).is_err());
        assert!(pseudo_observations(&[vec![1.0, 2.0], vec![2.0]]).is_err());
    }

    #[test]
    fn n_plus_one_scale() {
        let obs =
            pseudo_observations_scaled(&[vec![2.0], vec![1.0], vec![3.0]], RankScale::NPlusOne)
                .unwrap();
        assert_eq!(obs.column(0), vec![0.5, 0.25, 0.75]);
        assert_eq!(obs.ranks(0), vec![2.0, 1.0, 3.0]);
    }

    #[test]
    fn diagonal_binning() {
        let pts = vec![
            vec![0.05, 0.05],
            vec![0.55, 0.55],
            vec![0.2, 0.3],
            vec![0.9, 0.7],
        ];
        let obs = PseudoObservations::from_points(&pts).unwrap();
        let t = contingency_table(&obs, &[2, 2]).unwrap();
        assert_eq!(t.counts(), &[2, 0, 0, 2]);
    }

    #[test]
    fn one_point_per_cell_lattice() {
        let m = 5;
        let pts: Vec<Vec<f64>> = (0..m * m)
            .map(|o| {
                let (i, j) = (o / m, o % m);
                vec![(i as f64 + 0.5) / m as f64, (j as f64 + 1.0) / m as f64]
            })
            .collect();
        let obs = PseudoObservations::from_points(&pts).unwrap();
        let t = contingency_table(&obs, &[m, m]).unwrap();
        assert!(t.counts().iter().all(|&c| c == 1));
    }

    #[test]
    fn closed_form_on_uniform_table_is_identity() {
        let a = ContingencyTensor::from_counts(vec![3, 3], vec![1; 9]).unwrap();
        let x = uniformize_closed_form(&a).unwrap();
        for (v, w) in x.data().iter().zip(a.frequencies().data()) {
            assert!((v - w).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_rejects_unequal_sizes() {
        let a = ContingencyTensor::from_counts(vec![2, 3], vec![1; 6]).unwrap();
        assert!(matches!(
            uniformize_closed_form(&a),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn shift_normalize_keeps_feasible_input() {
        let x = Tensor::new(vec![2, 2], vec![0.3, 0.2, 0.2, 0.3]).unwrap();
        let s = shift_normalize(&x);
        assert_eq!(s.shift, 0.0);
        assert_eq!(s.y, x);
        let again = shift_normalize(&s.y);
        assert_eq!(again.y, s.y);
    }

    #[test]
    fn shift_normalize_repairs_negatives() {
        let x = Tensor::new(vec![2, 2], vec![0.6, -0.1, -0.1, 0.6]).unwrap();
        let s = shift_normalize(&x);
        assert!((s.shift - 0.1).abs() < 1e-15);
        assert!(s.y.min() >= 0.0);
        for axis in 0..2 {
            for v in s.y.margin(axis) {
                assert!((v - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn quadratic_error_zero_on_self_and_shape_checked() {
        let a = ContingencyTensor::from_counts(vec![2, 2], vec![1, 2, 3, 4]).unwrap();
        assert_eq!(quadratic_error(&a.frequencies(), &a).unwrap(), 0.0);
        let wrong = Tensor::zeros(vec![4]).unwrap();
        assert!(quadratic_error(&wrong, &a).is_err());
    }

    #[test]
    fn independence_lattice_fits_to_independence() {
        let m = 4;
        let data: Vec<Vec<f64>> = (0..m * m)
            .map(|o| {
                vec![
                    (o / m) as f64 * m as f64 + (o % m) as f64,
                    ((o % m) * m + o / m) as f64,
                ]
            })
            .collect();
        for method in [FitMethod::ClosedForm, FitMethod::Qp] {
            let fit = fit_data(&data, &[m, m], RankScale::N, method).unwrap();
            for v in fit.joint.probabilities().data() {
                assert!((v - 1.0 / 16.0).abs() < 1e-12, "{method:?}");
            }
            assert!(
                fit.report.quadratic_error_qp <= fit.report.quadratic_error_closed_form + 1e-15
            );
        }
    }
}
