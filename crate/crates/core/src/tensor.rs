//! Dense row-major tensors of `f64` with an arbitrary number of axes.

use crate::error::{Error, Result};

/// Largest number of cells a dense tensor may hold.
pub const MAX_CELLS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = checked_len(&shape)?;
        if data.len() != len {
            return Err(Error::Validation(format!(
                "tensor of shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let len = checked_len(&shape)?;
        Ok(Self {
            shape,
            data: vec![0.0; len],
        })
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Result<Self> {
        let mut t = Self::zeros(shape)?;
        t.data.iter_mut().for_each(|v| *v = value);
        Ok(t)
    }

    /// Builds a 2-axis tensor from rows of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Validation("ragged matrix rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::new(vec![n_rows, n_cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &m)| acc * m + i)
    }

    pub fn unravel(&self, mut offset: usize) -> Vec<usize> {
        let mut index = vec![0; self.shape.len()];
        for (slot, &m) in index.iter_mut().zip(&self.shape).rev() {
            *slot = offset % m;
            offset /= m;
        }
        index
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.offset(index);
        self.data[o] = value;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// One-dimensional margin: sums over every axis except `axis`.
    pub fn margin(&self, axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.shape[axis]];
        let stride: usize = self.shape[axis + 1..].iter().product();
        let m = self.shape[axis];
        for (o, v) in self.data.iter().enumerate() {
            out[(o / stride) % m] += v;
        }
        out
    }

    /// All one-dimensional margins, one vector per axis.
    pub fn margins(&self) -> Vec<Vec<f64>> {
        (0..self.ndim()).map(|k| self.margin(k)).collect()
    }

    /// Sums out every axis not listed in `keep`; the result's axes follow the order of `keep`.
    pub fn sum_to(&self, keep: &[usize]) -> Result<Tensor> {
        let new_shape: Vec<usize> = keep.iter().map(|&k| self.shape[k]).collect();
        let mut out = Tensor::zeros(new_shape)?;
        let mut kept = vec![0; keep.len()];
        for (o, v) in self.data.iter().enumerate() {
            let idx = self.unravel(o);
            for (slot, &k) in kept.iter_mut().zip(keep) {
                *slot = idx[k];
            }
            let t = out.offset(&kept);
            out.data[t] += v;
        }
        Ok(out)
    }

    /// Reverses the order of one axis.
    pub fn flip_axis(&self, axis: usize) -> Tensor {
        let m = self.shape[axis];
        let mut out = self.clone();
        for o in 0..self.data.len() {
            let mut idx = self.unravel(o);
            idx[axis] = m - 1 - idx[axis];
            let t = self.offset(&idx);
            out.data[t] = self.data[o];
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rows of a 2-axis tensor.
    pub fn to_rows(&self) -> Result<Vec<Vec<f64>>> {
        if self.ndim() != 2 {
            return Err(Error::Unsupported(format!(
                "matrix view needs 2 axes, tensor has {}",
                self.ndim()
            )));
        }
        Ok(self
            .data
            .chunks(self.shape[1])
            .map(<[f64]>::to_vec)
            .collect())
    }

    /// Contracts the tensor against one weight vector per axis: Σ_k t(k) Π_i w_i(k_i).
    pub fn contract(&self, weights: &[Vec<f64>]) -> f64 {
        debug_assert_eq!(weights.len(), self.ndim());
        // Fold axes from the last one inwards so the work is O(len).
        let mut current = self.data.clone();
        for (axis, w) in weights.iter().enumerate().rev() {
            let m = self.shape[axis];
            debug_assert_eq!(w.len(), m);
            current = current
                .chunks(m)
                .map(|chunk| chunk.iter().zip(w).map(|(a, b)| a * b).sum())
                .collect();
        }
        current[0]
    }
}

pub(crate) fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

/// Number of cells of a shape, enforcing non-empty axes and [`MAX_CELLS`].
pub fn cell_count(shape: &[usize]) -> Result<usize> {
    checked_len(shape)
}

fn checked_len(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::Validation("tensor needs at least one axis".into()));
    }
    if shape.contains(&0) {
        return Err(Error::Validation(format!(
            "zero-length axis in shape {shape:?}"
        )));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &m| acc.checked_mul(m))
        .filter(|&n| n <= MAX_CELLS)
        .ok_or_else(|| {
            Error::Unsupported(format!(
                "shape {shape:?} exceeds the dense limit of {MAX_CELLS} cells"
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_roundtrip() {
        let t = Tensor::zeros(vec![2, 3, 4]).unwrap();
        for o in 0..t.len() {
            assert_eq!(t.offset(&t.unravel(o)), o);
        }
        assert_eq!(t.strides(), vec![12, 4, 1]);
    }

    #[test]
    fn margins_and_sum_to() {
        let t = Tensor::new(vec![2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(t.margin(0), vec![6., 15.]);
        assert_eq!(t.margin(1), vec![5., 7., 9.]);
        let s = t.sum_to(&[1]).unwrap();
        assert_eq!(s.data(), &[5., 7., 9.]);
        let tr = t.sum_to(&[1, 0]).unwrap();
        assert_eq!(tr.shape(), &[3, 2]);
        assert_eq!(tr.get(&[2, 0]), 3.0);
    }

    #[test]
    fn contract_matches_brute_force() {
        let t = Tensor::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap();
        let w = vec![vec![0.5, 2.0], vec![1.0, -1.0], vec![3.0, 0.25]];
        let mut brute = 0.0;
        for o in 0..t.len() {
            let k = t.unravel(o);
            brute += t.data()[o] * w[0][k[0]] * w[1][k[1]] * w[2][k[2]];
        }
        assert!((t.contract(&w) - brute).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized_and_empty() {
        assert!(matches!(
            Tensor::zeros(vec![10_000, 10_000]),
            Err(Error::Unsupported(_))
        ));
        assert!(Tensor::zeros(vec![3, 0]).is_err());
    }

    #[test]
    fn flip_reverses_axis() {
        let t = Tensor::new(vec![2, 2], vec![1., 2., 3., 4.]).unwrap();
        assert_eq!(t.flip_axis(0).data(), &[3., 4., 1., 2.]);
    }
}
