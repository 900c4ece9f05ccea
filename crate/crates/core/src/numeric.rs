//! Dense vector and matrix arithmetic.
//!
//! Every reduction accumulates strictly left to right so that results are
//! bitwise reproducible; seed replay on stale clients depends on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat parameter or feature vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc + x * x)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Vector {
        Vector(self.0.iter().map(|x| alpha * x).collect())
    }

    /// In-place `self += alpha * x`.
    pub fn add_scaled(&mut self, alpha: f64, x: &Vector) -> Result<()> {
        check_dim("add_scaled", self.dim(), x.dim())?;
        for (y, xi) in self.0.iter_mut().zip(&x.0) {
            *y += alpha * xi;
        }
        Ok(())
    }

    /// Splits into `[0, at)` and `[at, dim)`.
    pub fn split_at(&self, at: usize) -> (Vector, Vector) {
        let (a, b) = self.0.split_at(at);
        (Vector(a.to_vec()), Vector(b.to_vec()))
    }

    pub fn concat(a: &Vector, b: &Vector) -> Vector {
        let mut data = Vec::with_capacity(a.dim() + b.dim());
        data.extend_from_slice(&a.0);
        data.extend_from_slice(&b.0);
        Vector(data)
    }

    /// Little-endian byte image, used for checksums.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.0.iter().flat_map(|x| x.to_le_bytes()).collect()
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

pub fn dot(a: &Vector, b: &Vector) -> Result<f64> {
    check_dim("dot", a.dim(), b.dim())?;
    Ok(dot_slices(&a.0, &b.0))
}

pub(crate) fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Returns `alpha * x + y`.
pub fn axpy(alpha: f64, x: &Vector, y: &Vector) -> Result<Vector> {
    check_dim("axpy", y.dim(), x.dim())?;
    Ok(Vector(
        x.0.iter().zip(&y.0).map(|(xi, yi)| alpha * xi + yi).collect(),
    ))
}

/// Element-wise mean of equally sized vectors, accumulated in slice order.
pub fn mean(vectors: &[Vector]) -> Result<Vector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::InvalidConfig("mean of zero vectors".into()))?;
    let mut acc = Vector::zeros(first.dim());
    for v in vectors {
        acc.add_scaled(1.0, v)?;
    }
    let k = vectors.len() as f64;
    Ok(Vector(acc.0.into_iter().map(|x| x / k).collect()))
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim("matrix data", rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("matrix row", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Selects the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Frobenius inner product, row-major order.
    pub fn inner(&self, other: &Matrix) -> Result<f64> {
        check_dim("matrix inner rows", self.rows, other.rows)?;
        check_dim("matrix inner cols", self.cols, other.cols)?;
        Ok(dot_slices(&self.data, &other.data))
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        check_dim("matrix sub rows", self.rows, other.rows)?;
        check_dim("matrix sub cols", self.cols, other.cols)?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc + x * x)
    }
}
