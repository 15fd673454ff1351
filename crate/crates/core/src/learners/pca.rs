use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Two-component principal axes of a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pca2 {
    pub mean: Vec<f64>,
    /// Row-major, two rows of length d.
    pub components: [Vec<f64>; 2],
    pub explained_variance: [f64; 2],
    pub explained_variance_ratio: [f64; 2],
}

impl Pca2 {
    pub fn transform_row<F: Scalar>(&self, row: &[F]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = row.iter().zip(&self.mean).zip(c).map(|((v, m), w)| (v.as_f64() - m) * w).sum();
        }
        out
    }

    pub fn transform<F: Scalar>(&self, x: &Matrix<F>) -> Vec<[f64; 2]> {
        x.rows_iter().map(|r| self.transform_row(r)).collect()
    }
}

pub fn pca_2d<F: Scalar>(x: &Matrix<F>) -> Result<Pca2> {
    let (n, d) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(RpuError::InvalidParameter(format!("pca needs at least 2 rows, got {n}")));
    }
    if d < 2 {
        return Err(RpuError::InvalidParameter(format!("pca needs at least 2 columns, got {d}")));
    }
    let mean: Vec<f64> = x.column_means().iter().map(|m| m.as_f64()).collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for r in x.rows_iter() {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(v, m)| v.as_f64() - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / (n - 1) as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let total: f64 = cov.diagonal().sum();
    if total <= 0.0 {
        return Err(RpuError::DegenerateReference("zero variance in pca input".into()));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let component = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let ev = [eig.eigenvalues[order[0]].max(0.0), eig.eigenvalues[order[1]].max(0.0)];
    Ok(Pca2 {
        mean,
        components: [component(0), component(1)],
        explained_variance: ev,
        explained_variance_ratio: [ev[0] / total, ev[1] / total],
    })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn axis_aligned() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| vec![rng.random_range(-10.0..10.0), rng.random_range(-1.0..1.0), 0.0])
            .collect();
        let p = pca_2d(&Matrix::from_rows(&rows).unwrap()).unwrap();
        assert!((p.components[0][0] - 1.0).abs() < 1e-3);
        assert!((p.components[1][1] - 1.0).abs() < 1e-3);
        assert!(p.explained_variance[0] > p.explained_variance[1]);
        assert!((p.explained_variance_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let p = pca_2d(&Matrix::from_rows(&rows).unwrap()).unwrap();
        let s = 0.5f64.sqrt();
        assert!((p.components[0][0] - s).abs() < 1e-9 && (p.components[0][1] - s).abs() < 1e-9);
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        // first projected coordinate is the signed distance along the line
        let t = p.transform_row(&[9.0, 9.0]);
        assert!((t[0] - 4.5 * 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn components_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..5).map(|_| rng.random()).collect()).collect();
        let p = pca_2d(&Matrix::from_rows(&rows).unwrap()).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&p.components[0], &p.components[0]) - 1.0).abs() < 1e-9);
        assert!(dot(&p.components[0], &p.components[1]).abs() < 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(pca_2d(&Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap()).is_err());
        assert!(pca_2d(&Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap()).is_err());
        assert!(pca_2d(&Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap()).is_err());
    }
}
