use rayon::prelude::*;

use crate::error::{Result, RpuError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Exact brute-force nearest-neighbour search in Euclidean space.
#[derive(Debug, Clone)]
pub struct KnnIndex<'a, F> {
    points: &'a Matrix<F>,
}

impl<'a, F: Scalar> KnnIndex<'a, F> {
    pub fn new(points: &'a Matrix<F>) -> Result<Self> {
        if points.is_empty() {
            return Err(RpuError::EmptyDataset("knn reference set".into()));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    /// The `k` smallest distances from `query`, ascending.
    pub fn query(&self, query: &[F], k: usize) -> Vec<F> {
        let k = k.min(self.len());
        // (squared distance, row), kept sorted ascending
        let mut best: Vec<(F, usize)> = Vec::with_capacity(k + 1);
        for (i, p) in self.points.rows_iter().enumerate() {
            let worst = if best.len() == k { best[k - 1].0 } else { F::infinity() };
            let mut acc = F::zero();
            let mut abandoned = false;
            for (a, b) in p.iter().zip(query) {
                let d = *a - *b;
                acc = acc + d * d;
                if acc > worst {
                    abandoned = true;
                    break;
                }
            }
            if abandoned || (best.len() == k && acc >= worst) {
                continue;
            }
            let pos = best.partition_point(|&(d, _)| d <= acc);
            best.insert(pos, (acc, i));
            best.truncate(k);
        }
        best.into_iter().map(|(d, _)| d.sqrt()).collect()
    }
}

/// Distances from every query row to its `k` nearest reference rows.
pub fn knn_distances<F: Scalar>(reference: &Matrix<F>, queries: &Matrix<F>, k: usize) -> Result<Vec<Vec<F>>> {
    if k == 0 {
        return Err(RpuError::InvalidParameter("k must be positive".into()));
    }
    if reference.ncols() != queries.ncols() {
        return Err(RpuError::DimensionMismatch { expected: reference.ncols(), actual: queries.ncols() });
    }
    let index = KnnIndex::new(reference)?;
    Ok((0..queries.nrows()).into_par_iter().map(|i| index.query(queries.row(i), k)).collect())
}
