//! Dense row-major matrices and vectors.
//!
//! Every reduction runs left to right over its index range, so results are
//! bit-reproducible for identical inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "DenseMatrix::new",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from `f64` rows; panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&x| T::from_f64(x)))
            .collect();
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks blocks vertically. All blocks must share a column count.
    pub fn vstack(blocks: &[Self]) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Ok(Self::zeros(0, 0));
        };
        let cols = first.cols;
        let mut data = Vec::with_capacity(blocks.iter().map(|b| b.data.len()).sum());
        let mut rows = 0;
        for b in blocks {
            if b.cols != cols {
                return Err(Error::shape(
                    "vstack",
                    format!("block with {} columns, expected {cols}", b.cols),
                ));
            }
            rows += b.rows;
            data.extend_from_slice(&b.data);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|x| x * factor)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "hadamard", |a, b| a * b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other, op)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn check_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        Ok(())
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| if x.abs() > acc { x.abs() } else { acc })
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| {
                let d = (a - b).abs();
                if d > acc || d.is_nan() {
                    d
                } else {
                    acc
                }
            }))
    }

    /// `max|self - reference| / max|reference|`, falling back to the absolute
    /// difference when the reference is identically zero.
    pub fn max_rel_err(&self, reference: &Self) -> Result<f64> {
        let diff = self.max_abs_diff(reference)?.to_f64();
        let scale = reference.max_abs().to_f64();
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    /// Converts element type (used to run the same inputs at both precisions).
    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealVector<T> {
    data: Vec<T>,
}

impl<T: Scalar> RealVector<T> {
    pub fn from_vec(data: Vec<T>) -> Self {
        Self { data }
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Self {
            data: values.iter().map(|&x| T::from_f64(x)).collect(),
        }
    }

    pub fn filled(len: usize, value: T) -> Self {
        Self {
            data: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize) -> T {
        self.data[i]
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            data: idx.iter().map(|&i| self.data[i]).collect(),
        }
    }

    pub fn concat(parts: &[Self]) -> Self {
        Self {
            data: parts.iter().flat_map(|p| p.data.iter().copied()).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> RealVector<U> {
        RealVector {
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }
}

/// Textbook product `a · b` (or `a · bᵀ` when `transpose_b`), summing the
/// inner dimension left to right.
pub fn matmul<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
    transpose_b: bool,
) -> Result<DenseMatrix<T>> {
    let (inner_b, out_cols) = if transpose_b {
        (b.cols, b.rows)
    } else {
        (b.rows, b.cols)
    };
    if a.cols != inner_b {
        return Err(Error::shape(
            "matmul",
            format!(
                "{:?} x {:?}{}",
                a.shape(),
                b.shape(),
                if transpose_b { "^T" } else { "" }
            ),
        ));
    }
    let mut out = DenseMatrix::zeros(a.rows, out_cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..out_cols {
            let mut acc = T::zero();
            for (k, &aik) in arow.iter().enumerate() {
                let bkj = if transpose_b { b.get(j, k) } else { b.get(k, j) };
                acc = acc + aik * bkj;
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// Per-row maximum. Rows that are entirely `-inf` yield `-inf`.
pub fn row_max<T: Scalar>(a: &DenseMatrix<T>) -> RealVector<T> {
    RealVector::from_vec(
        (0..a.rows())
            .map(|i| {
                a.row(i)
                    .iter()
                    .fold(T::neg_infinity(), |m, &x| if x > m { x } else { m })
            })
            .collect(),
    )
}

/// Per-row sum.
pub fn row_sum<T: Scalar>(a: &DenseMatrix<T>) -> RealVector<T> {
    RealVector::from_vec(
        (0..a.rows())
            .map(|i| a.row(i).iter().fold(T::zero(), |s, &x| s + x))
            .collect(),
    )
}

/// Divides row `i` of `a` by `v[i]`, i.e. `Diag(v)⁻¹ · a`.
pub fn diag_scale<T: Scalar>(v: &RealVector<T>, a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if v.len() != a.rows() {
        return Err(Error::shape(
            "diag_scale",
            format!("vector of {} for {} rows", v.len(), a.rows()),
        ));
    }
    let mut out = a.clone();
    for (i, &vi) in v.data().iter().enumerate() {
        if vi == T::zero() {
            return Err(Error::DivisionByZero { row: i });
        }
        for x in out.row_mut(i) {
            *x = *x / vi;
        }
    }
    Ok(out)
}

/// Multiplies row `i` of `a` by `v[i]`, i.e. `Diag(v) · a`.
pub fn diag_mul<T: Scalar>(v: &RealVector<T>, a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if v.len() != a.rows() {
        return Err(Error::shape(
            "diag_mul",
            format!("vector of {} for {} rows", v.len(), a.rows()),
        ));
    }
    let mut out = a.clone();
    for (i, &vi) in v.data().iter().enumerate() {
        for x in out.row_mut(i) {
            *x = *x * vi;
        }
    }
    Ok(out)
}
