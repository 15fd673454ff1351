use nalgebra::{DMatrix, SymmetricEigen};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{Draft, GeneratorModel, ModelParams, RecordSampler};
use crate::data_model::{Feature, TripDataset};
use crate::error::{Result, RpuError};

/// Inverse of one feature's empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CopulaMarginal {
    /// Sorted train values.
    Minutes { sorted: Vec<f64> },
    /// Categories in descending frequency with their cumulative upper bounds.
    Categorical { values: Vec<String>, cum: Vec<f64> },
}

impl CopulaMarginal {
    fn invert(&self, u: f64) -> Quantile<'_> {
        match self {
            CopulaMarginal::Minutes { sorted } => {
                let i = ((u * sorted.len() as f64) as usize).min(sorted.len() - 1);
                Quantile::Minutes(sorted[i])
            }
            CopulaMarginal::Categorical { values, cum } => {
                let i = cum.partition_point(|&c| c <= u).min(values.len() - 1);
                Quantile::Category(&values[i])
            }
        }
    }
}

enum Quantile<'a> {
    Minutes(f64),
    Category(&'a str),
}

/// Gaussian copula over rank-transformed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaModel {
    pub features: Vec<Feature>,
    pub marginals: Vec<CopulaMarginal>,
    /// Latent correlation, row-major p x p.
    pub correlation: Vec<f64>,
    /// Lower Cholesky factor of `correlation`, row-major.
    pub cholesky: Vec<f64>,
}

impl CopulaModel {
    pub fn correlation_at(&self, i: usize, j: usize) -> f64 {
        self.correlation[i * self.features.len() + j]
    }
}

/// Mid-rank pseudo-observations in (0, 1): tied values share the centre of
/// their block.
fn mid_ranks<T: PartialOrd>(v: &[T]) -> Vec<f64> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("comparable"));
    let mut u = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mid = ((i + j) as f64 / 2.0 + 0.5) / n as f64;
        for &k in &idx[i..=j] {
            u[k] = mid;
        }
        i = j + 1;
    }
    u
}

pub fn fit_copula(train: &TripDataset, seed: u64) -> Result<GeneratorModel> {
    let n = train.len();
    if n < 10 {
        return Err(RpuError::InvalidParameter(format!("copula needs at least 10 rows, got {n}")));
    }
    let features = Feature::ALL.to_vec();
    let p = features.len();
    let std_normal = Normal::standard();
    let mut marginals = Vec::with_capacity(p);
    let mut z = DMatrix::<f64>::zeros(n, p);
    for (j, &f) in features.iter().enumerate() {
        let u = if f.is_categorical() {
            let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
            for r in train.iter() {
                *counts.entry(r.category(f).unwrap()).or_insert(0) += 1;
            }
            let mut order: Vec<(&str, usize)> = counts.into_iter().collect();
            order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            let rank: std::collections::BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, (v, _))| (*v, i)).collect();
            let codes: Vec<usize> = train.iter().map(|r| rank[r.category(f).unwrap()]).collect();
            let mut acc = 0.0;
            let cum = order
                .iter()
                .map(|(_, c)| {
                    acc += *c as f64 / n as f64;
                    acc
                })
                .collect();
            marginals.push(CopulaMarginal::Categorical { values: order.iter().map(|(v, _)| v.to_string()).collect(), cum });
            mid_ranks(&codes)
        } else {
            let vals: Vec<f64> = train.iter().map(|r| r.minutes(f).unwrap()).collect();
            let mut sorted = vals.clone();
            sorted.sort_by(f64::total_cmp);
            marginals.push(CopulaMarginal::Minutes { sorted });
            mid_ranks(&vals)
        };
        for (i, ui) in u.into_iter().enumerate() {
            z[(i, j)] = std_normal.inverse_cdf(ui);
        }
    }

    let mut corr = DMatrix::<f64>::identity(p, p);
    let means: Vec<f64> = (0..p).map(|j| z.column(j).mean()).collect();
    let sds: Vec<f64> = (0..p).map(|j| z.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>().sqrt()).collect();
    for a in 0..p {
        for b in (a + 1)..p {
            let r = if sds[a] > 0.0 && sds[b] > 0.0 {
                (0..n).map(|i| (z[(i, a)] - means[a]) * (z[(i, b)] - means[b])).sum::<f64>() / (sds[a] * sds[b])
            } else {
                0.0
            };
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }
    let corr = nearest_correlation(corr);
    let chol = corr
        .clone()
        .cholesky()
        .ok_or_else(|| RpuError::Numerical("latent correlation is singular after projection".into()))?;
    let l = chol.l();
    let row_major = |m: &DMatrix<f64>| (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
    let model = CopulaModel { correlation: row_major(&corr), cholesky: row_major(&l), features, marginals };
    Ok(GeneratorModel::new(seed, ModelParams::Copula(model)))
}

/// Clip eigenvalues to stay positive definite, then rescale to a unit diagonal.
fn nearest_correlation(c: DMatrix<f64>) -> DMatrix<f64> {
    const MIN_EIGEN: f64 = 1e-6;
    let eig = SymmetricEigen::new(c.clone());
    if eig.eigenvalues.iter().all(|&v| v > MIN_EIGEN) {
        return c;
    }
    let clipped = eig.eigenvalues.map(|v| v.max(MIN_EIGEN));
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let d: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)].sqrt()).collect();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { 1.0 } else { m[(i, j)] / (d[i] * d[j]) })
}

impl RecordSampler for CopulaModel {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Draft {
        let p = self.features.len();
        let eps: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let std_normal = Normal::standard();
        let mut d = Draft::default();
        for i in 0..p {
            let z: f64 = (0..=i).map(|j| self.cholesky[i * p + j] * eps[j]).sum();
            let u = std_normal.cdf(z);
            match self.marginals[i].invert(u) {
                Quantile::Minutes(v) => d.set_minutes(self.features[i], v),
                Quantile::Category(c) => d.set_category(self.features[i], c),
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};

    use super::*;
    use crate::data_model::{DatasetRole, DayOfWeek, TripRecord};
    use crate::generators::sample;

    fn copula(m: &GeneratorModel) -> &CopulaModel {
        match &m.params {
            ModelParams::Copula(c) => c,
            _ => unreachable!(),
        }
    }

    fn train(n: usize, seed: u64, comonotone: bool) -> TripDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = (0..n)
            .map(|_| {
                let s = rng.random_range(300..1300);
                let e = if comonotone { s + 15 } else { rng.random_range(300..1400) };
                TripRecord {
                    passenger_id: "p".into(),
                    origin: format!("ST{}", rng.random_range(0..10)),
                    destination: format!("ST{}", rng.random_range(0..10)),
                    start_min: s,
                    end_min: e,
                    day_of_week: DayOfWeek::ALL[rng.random_range(0..7)],
                }
            })
            .collect();
        TripDataset::new(recs, DatasetRole::Train, "real")
    }

    #[test]
    fn independent_features_give_identity() {
        let m = fit_copula(&train(10_000, 1, false), 0).unwrap();
        let c = copula(&m);
        for i in 0..5 {
            assert!((c.correlation_at(i, i) - 1.0).abs() < 1e-12);
            for j in 0..5 {
                if i != j {
                    assert!(c.correlation_at(i, j).abs() < 0.05, "{i},{j}: {}", c.correlation_at(i, j));
                }
            }
        }
    }

    #[test]
    fn comonotone_pair() {
        let m = fit_copula(&train(2000, 2, true), 0).unwrap();
        assert!(copula(&m).correlation_at(2, 3) > 0.95);
    }

    fn ks(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut best) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            best = best.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        best
    }

    #[test]
    fn sampled_marginals_follow_train() {
        let t = train(5000, 3, true);
        let s = sample(&fit_copula(&t, 0).unwrap(), 50_000, 4).unwrap();
        for f in [Feature::StartMin, Feature::EndMin] {
            let a: Vec<f64> = t.iter().map(|r| r.minutes(f).unwrap()).collect();
            let b: Vec<f64> = s.iter().map(|r| r.minutes(f).unwrap()).collect();
            assert!(ks(&a, &b) < 0.02, "{f}: {}", ks(&a, &b));
        }
        // categories too, read as frequency-ordered codes
        let freq = |ds: &TripDataset, v: &str| ds.iter().filter(|r| r.origin == v).count() as f64 / ds.len() as f64;
        for k in 0..10 {
            let v = format!("ST{k}");
            assert!((freq(&t, &v) - freq(&s, &v)).abs() < 0.01);
        }
        // the comonotone pair stays ordered
        let ordered = s.iter().filter(|r| r.end_min > r.start_min).count() as f64 / s.len() as f64;
        assert!(ordered > 0.9);
    }

    #[test]
    fn projection_fixes_indefinite_input() {
        let bad = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let fixed = nearest_correlation(bad);
        assert!(fixed.clone().cholesky().is_some());
        for i in 0..3 {
            assert!((fixed[(i, i)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(fit_copula(&train(9, 0, false), 0).is_err());
    }

    #[test]
    fn mid_ranks_of_ties() {
        assert_eq!(mid_ranks(&[3, 1, 3, 2]), vec![0.75, 0.125, 0.75, 0.375]);
    }
}
