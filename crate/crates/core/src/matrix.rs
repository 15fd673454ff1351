use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<F> {
    data: Vec<F>,
    rows: usize,
    cols: usize,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { data: vec![F::zero(); rows * cols], rows, cols }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(RpuError::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        Ok(Self { data, rows, cols })
    }

    /// Builds a matrix from equally sized rows. An empty input yields a `0 x 0` matrix.
    pub fn from_rows<R: AsRef<[F]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(RpuError::DimensionMismatch { expected: cols, actual: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { data, rows: rows.len(), cols })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        self.data[i * self.cols + j] = v;
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[F]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// New matrix holding the given rows, in the given order (repeats allowed).
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { data, rows: idx.len(), cols: self.cols }
    }

    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(RpuError::DimensionMismatch { expected: self.cols, actual: other.cols });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { data, rows: self.rows + other.rows, cols: self.cols })
    }

    pub fn column_means(&self) -> Vec<F> {
        let mut means = vec![F::zero(); self.cols];
        for r in self.rows_iter() {
            for (m, &v) in means.iter_mut().zip(r) {
                *m = *m + v;
            }
        }
        let n = F::of_usize(self.rows.max(1));
        means.iter_mut().for_each(|m| *m = *m / n);
        means
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self { data: self.data.iter().map(|&v| f(v)).collect(), rows: self.rows, cols: self.cols }
    }

    pub fn cast<G: Scalar>(&self) -> Matrix<G> {
        Matrix {
            data: self.data.iter().map(|v| G::of(v.as_f64())).collect(),
            rows: self.rows,
            cols: self.cols,
        }
    }
}

pub fn squared_euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

pub fn euclidean<F: Scalar>(a: &[F], b: &[F]) -> F {
    squared_euclidean(a, b).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_rejects_ragged_input() {
        let rows = vec![vec![1.0, 2.0], vec![3.0]];
        assert!(Matrix::<f64>::from_rows(&rows).is_err());
    }

    #[test]
    fn select_and_stack() {
        let m = Matrix::from_rows(&[[1.0f32, 2.0], [3.0, 4.0]]).unwrap();
        let s = m.select_rows(&[1, 1, 0]);
        assert_eq!(s.row(0), &[3.0, 4.0]);
        assert_eq!(s.nrows(), 3);
        let st = m.vstack(&s).unwrap();
        assert_eq!(st.nrows(), 5);
        assert_eq!(st.column_means(), vec![11.0 / 5.0, 16.0 / 5.0]);
    }

    #[test]
    fn distance() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }
}
