use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::matrix::{squared_euclidean, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KMeansParams {
    pub n_restarts: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { n_restarts: 10, max_iter: 300, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel<F> {
    pub centroids: Matrix<F>,
    pub inertia: F,
    pub n_iter_run: usize,
}

impl<F: Scalar> KMeansModel<F> {
    pub fn predict_row(&self, row: &[F]) -> usize {
        nearest(&self.centroids, row).0
    }
}

/// Inertia after the assignment and after the update step of one Lloyd iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationInertia<F> {
    pub after_assign: F,
    pub after_update: F,
}

fn nearest<F: Scalar>(centroids: &Matrix<F>, row: &[F]) -> (usize, F) {
    let mut best = (0, F::infinity());
    for (j, c) in centroids.rows_iter().enumerate() {
        let d = squared_euclidean(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus_init<F: Scalar, R: Rng>(x: &Matrix<F>, k: usize, rng: &mut R) -> Matrix<F> {
    let n = x.nrows();
    let mut centroids = Matrix::zeros(k, x.ncols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<F> = x.rows_iter().map(|r| squared_euclidean(r, x.row(first))).collect();
    for c in 1..k {
        let total: F = d2.iter().copied().sum();
        let pick = if total > F::zero() {
            let target = F::of(rng.random::<f64>()) * total;
            let mut acc = F::zero();
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc = acc + d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, r) in x.rows_iter().enumerate() {
            let d = squared_euclidean(r, centroids.row(c));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn lloyd<F: Scalar>(
    x: &Matrix<F>,
    mut centroids: Matrix<F>,
    params: &KMeansParams,
    trace: &mut Vec<IterationInertia<F>>,
) -> KMeansModel<F> {
    let (k, d) = (centroids.nrows(), x.ncols());
    let tol = F::of(params.tol);
    let mut labels = vec![0usize; x.nrows()];
    let mut n_iter_run = 0;
    for _ in 0..params.max_iter {
        n_iter_run += 1;
        let mut after_assign = F::zero();
        for (i, r) in x.rows_iter().enumerate() {
            let (j, dist) = nearest(&centroids, r);
            labels[i] = j;
            after_assign = after_assign + dist;
        }
        let mut sums = Matrix::<F>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, r) in x.rows_iter().enumerate() {
            counts[labels[i]] += 1;
            for (s, &v) in sums.row_mut(labels[i]).iter_mut().zip(r) {
                *s = *s + v;
            }
        }
        let mut updated = centroids.clone();
        for j in 0..k {
            // an empty cluster keeps its centroid
            if counts[j] > 0 {
                let c = F::of_usize(counts[j]);
                for (u, &s) in updated.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *u = s / c;
                }
            }
        }
        let after_update = x
            .rows_iter()
            .enumerate()
            .map(|(i, r)| squared_euclidean(r, updated.row(labels[i])))
            .sum();
        trace.push(IterationInertia { after_assign, after_update });
        let shift = (0..k)
            .map(|j| squared_euclidean(centroids.row(j), updated.row(j)).sqrt())
            .fold(F::zero(), F::max);
        centroids = updated;
        if shift < tol {
            break;
        }
    }
    let inertia = x.rows_iter().map(|r| nearest(&centroids, r).1).sum();
    KMeansModel { centroids, inertia, n_iter_run }
}

/// Rows in a canonical (lexicographic) order so the fit does not depend on
/// how the caller ordered them.
fn canonical<F: Scalar>(x: &Matrix<F>) -> Matrix<F> {
    let mut idx: Vec<usize> = (0..x.nrows()).collect();
    idx.sort_by(|&a, &b| {
        x.row(a)
            .iter()
            .zip(x.row(b))
            .map(|(p, q)| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    x.select_rows(&idx)
}

/// k-means++ seeding and Lloyd iterations, best of `n_restarts` by inertia.
/// Returns the per-restart iteration trace alongside the model.
pub fn kmeans_fit_traced<F: Scalar>(
    x: &Matrix<F>,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<(KMeansModel<F>, Vec<Vec<IterationInertia<F>>>)> {
    if k == 0 || k > x.nrows() {
        return Err(RpuError::InvalidParameter(format!("k = {k} must be in 1..={}", x.nrows())));
    }
    let x = canonical(x);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansModel<F>> = None;
    let mut traces = Vec::with_capacity(params.n_restarts.max(1));
    for _ in 0..params.n_restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(master.random());
        let init = plus_plus_init(&x, k, &mut rng);
        let mut trace = Vec::new();
        let model = lloyd(&x, init, params, &mut trace);
        traces.push(trace);
        if best.as_ref().is_none_or(|b| model.inertia < b.inertia) {
            best = Some(model);
        }
    }
    Ok((best.expect("at least one restart"), traces))
}

pub fn kmeans_fit<F: Scalar>(x: &Matrix<F>, k: usize, seed: u64) -> Result<KMeansModel<F>> {
    kmeans_fit_with(x, k, seed, &KMeansParams::default())
}

pub fn kmeans_fit_with<F: Scalar>(x: &Matrix<F>, k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansModel<F>> {
    kmeans_fit_traced(x, k, seed, params).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, Normal};

    use super::*;

    fn two_blobs(n: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { [0.0, 0.0] } else { [5.0, 5.0] };
                vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]
            })
            .collect();
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x = two_blobs(100, 1);
        let m = kmeans_fit(&x, 1, 0).unwrap();
        let mean = x.column_means();
        for (a, b) in m.centroids.row(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn recovers_separated_blobs() {
        let x = two_blobs(400, 2);
        let m = kmeans_fit(&x, 2, 3).unwrap();
        let mut c: Vec<Vec<f64>> = m.centroids.rows_iter().map(<[f64]>::to_vec).collect();
        c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        for v in &c[0] {
            assert!(v.abs() < 0.05);
        }
        for v in &c[1] {
            assert!((v - 5.0).abs() < 0.05);
        }
    }

    #[test]
    fn centroids_are_means_of_assigned_points() {
        let x = two_blobs(300, 4);
        let m = kmeans_fit(&x, 3, 1).unwrap();
        let k = m.centroids.nrows();
        let mut sums = vec![vec![0.0; 2]; k];
        let mut counts = vec![0usize; k];
        for r in x.rows_iter() {
            let j = m.predict_row(r);
            counts[j] += 1;
            sums[j][0] += r[0];
            sums[j][1] += r[1];
        }
        for j in 0..k {
            for t in 0..2 {
                assert!((m.centroids.get(j, t) - sums[j][t] / counts[j] as f64).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn more_clusters_lower_inertia() {
        let x = two_blobs(300, 5);
        let i2 = kmeans_fit(&x, 2, 7).unwrap().inertia;
        let i3 = kmeans_fit(&x, 3, 7).unwrap().inertia;
        assert!(i3 <= i2);
    }

    #[test]
    fn each_lloyd_step_lowers_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..500).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let (_, traces) = kmeans_fit_traced(&x, 6, 2, &KMeansParams::default()).unwrap();
        for trace in traces {
            for (i, it) in trace.iter().enumerate() {
                assert!(it.after_update <= it.after_assign + 1e-12);
                if i > 0 {
                    assert!(it.after_assign <= trace[i - 1].after_update + 1e-12);
                }
            }
        }
    }

    #[test]
    fn row_order_does_not_matter() {
        let x = two_blobs(200, 9);
        let rev: Vec<usize> = (0..200).rev().collect();
        let a = kmeans_fit(&x, 4, 11).unwrap();
        let b = kmeans_fit(&x.select_rows(&rev), 4, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k_larger_than_n() {
        let x = two_blobs(3, 1);
        assert!(kmeans_fit(&x, 4, 0).is_err());
    }
}
