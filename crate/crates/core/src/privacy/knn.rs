use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{encode, partition_by_group, EncodingSchema, Feature, TripDataset};
use crate::error::{Result, RpuError};
use crate::learners::KnnIndex;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnConfig {
    pub k: usize,
    /// Weight group ratios by real group size instead of a plain mean.
    pub weighted_group_mean: bool,
    pub theta_low: f64,
    pub theta_high: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5, weighted_group_mean: false, theta_low: 0.5, theta_high: 0.9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    High,
    Moderate,
    Low,
}

impl RiskLevel {
    pub fn annotate(ratio: f64, cfg: &KnnConfig) -> Self {
        if ratio < cfg.theta_low {
            RiskLevel::High
        } else if ratio > cfg.theta_high {
            RiskLevel::Low
        } else {
            RiskLevel::Moderate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnRatio {
    pub ratio: f64,
    /// Mean distance from synthetic rows to their k nearest real rows.
    pub numerator: f64,
    /// Mean distance from real rows to their k nearest other real rows.
    pub denominator: f64,
}

/// Running sum taken row by row, neighbour by neighbour, so the result is
/// reproducible against a plain all-pairs scan.
fn flat_mean(rows: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    let mut c = 0usize;
    for r in rows {
        for &v in r {
            s += v;
            c += 1;
        }
    }
    s / c as f64
}

/// Mean real-to-real k-NN distance with the self match dropped.
pub fn real_reference_distance(real: &Matrix<f64>, k: usize) -> Result<f64> {
    if real.nrows() <= k {
        return Err(RpuError::InvalidParameter(format!("k-NN needs more than k = {k} real rows, got {}", real.nrows())));
    }
    let index = KnnIndex::new(real)?;
    let rows: Vec<Vec<f64>> = (0..real.nrows())
        .into_par_iter()
        .map(|i| {
            let mut d = index.query(real.row(i), k + 1);
            d.remove(0);
            d
        })
        .collect();
    Ok(flat_mean(&rows))
}

fn syn_distance(real: &Matrix<f64>, syn: &Matrix<f64>, k: usize) -> Result<f64> {
    if syn.nrows() == 0 {
        return Err(RpuError::EmptyDataset("synthetic rows for k-NN".into()));
    }
    if syn.ncols() != real.ncols() {
        return Err(RpuError::DimensionMismatch { expected: real.ncols(), actual: syn.ncols() });
    }
    let index = KnnIndex::new(real)?;
    let rows: Vec<Vec<f64>> = (0..syn.nrows()).into_par_iter().map(|i| index.query(syn.row(i), k)).collect();
    Ok(flat_mean(&rows))
}

fn ratio_with_reference(real: &Matrix<f64>, syn: &Matrix<f64>, k: usize, denominator: f64) -> Result<KnnRatio> {
    if denominator <= 0.0 {
        return Err(RpuError::DegenerateReference(
            "every real row has k exact duplicates; the real-to-real distance is zero".into(),
        ));
    }
    let numerator = syn_distance(real, syn, k)?;
    Ok(KnnRatio { ratio: numerator / denominator, numerator, denominator })
}

/// Distance ratio on already encoded matrices.
pub fn knn_ratio(real: &Matrix<f64>, syn: &Matrix<f64>, k: usize) -> Result<KnnRatio> {
    if k == 0 {
        return Err(RpuError::InvalidParameter("k must be positive".into()));
    }
    let den = real_reference_distance(real, k)?;
    ratio_with_reference(real, syn, k, den)
}

pub fn knn_privacy_population(
    real: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
    k: usize,
) -> Result<KnnRatio> {
    let schema = schema.select(features)?;
    let r = encode::<f64>(real, &schema)?.rows;
    let s = encode::<f64>(syn, &schema)?.rows;
    knn_ratio(&r, &s, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRatio {
    pub ratio: f64,
    pub real_n: usize,
    pub syn_n: usize,
    pub risk: RiskLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedKnnGroup {
    pub group: String,
    pub real_n: usize,
    pub syn_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnPrivacyResult {
    pub k: usize,
    pub population_ratio: f64,
    pub population: KnnRatio,
    pub population_risk: RiskLevel,
    pub group_feature: Feature,
    pub group_ratios: BTreeMap<String, GroupRatio>,
    pub group_mean: f64,
    pub weighted_group_mean: bool,
    pub skipped_groups: Vec<SkippedKnnGroup>,
}

/// Population ratio plus one ratio per value of `group_feature`. A group is
/// skipped when it has at most k real rows or no synthetic rows.
pub fn knn_privacy_group(
    real: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
    group_feature: Feature,
    cfg: &KnnConfig,
) -> Result<KnnPrivacyResult> {
    let population = knn_privacy_population(real, syn, features, schema, cfg.k)?;
    let schema = schema.select(features)?;
    let real_groups = partition_by_group(real, group_feature)?;
    let syn_groups = partition_by_group(syn, group_feature)?;
    let keys: BTreeSet<&String> = real_groups.keys().chain(syn_groups.keys()).collect();

    let mut todo = Vec::new();
    let mut skipped_groups = Vec::new();
    for key in keys {
        let r = real_groups.get(key);
        let s = syn_groups.get(key);
        let (real_n, syn_n) = (r.map_or(0, TripDataset::len), s.map_or(0, TripDataset::len));
        match (r, s) {
            (Some(r), Some(s)) if real_n > cfg.k && syn_n > 0 => todo.push((key.clone(), r, s)),
            _ => skipped_groups.push(SkippedKnnGroup { group: key.clone(), real_n, syn_n }),
        }
    }
    let evaluated: Vec<(String, Result<KnnRatio>, usize, usize)> = todo
        .into_par_iter()
        .map(|(key, r, s)| {
            let res = (|| {
                let rm = encode::<f64>(r, &schema)?.rows;
                let sm = encode::<f64>(s, &schema)?.rows;
                knn_ratio(&rm, &sm, cfg.k)
            })();
            (key, res, r.len(), s.len())
        })
        .collect();

    let mut group_ratios = BTreeMap::new();
    for (key, res, real_n, syn_n) in evaluated {
        match res {
            Ok(kr) => {
                group_ratios.insert(key, GroupRatio { ratio: kr.ratio, real_n, syn_n, risk: RiskLevel::annotate(kr.ratio, cfg) });
            }
            // a group whose real rows are all duplicates has no usable reference
            Err(RpuError::DegenerateReference(_)) => skipped_groups.push(SkippedKnnGroup { group: key, real_n, syn_n }),
            Err(e) => return Err(e),
        }
    }
    if group_ratios.is_empty() {
        return Err(RpuError::NoEvaluableGroups(skipped_groups.len()));
    }
    skipped_groups.sort_by(|a, b| a.group.cmp(&b.group));
    let group_mean = if cfg.weighted_group_mean {
        let total: f64 = group_ratios.values().map(|g| g.real_n as f64).sum();
        group_ratios.values().map(|g| g.ratio * g.real_n as f64 / total).sum()
    } else {
        group_ratios.values().map(|g| g.ratio).sum::<f64>() / group_ratios.len() as f64
    };
    Ok(KnnPrivacyResult {
        k: cfg.k,
        population_ratio: population.ratio,
        population,
        population_risk: RiskLevel::annotate(population.ratio, cfg),
        group_feature,
        group_ratios,
        group_mean,
        weighted_group_mean: cfg.weighted_group_mean,
        skipped_groups,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data_model::{fit_encoding, DatasetRole, TripRecord};
    use crate::oracles::knn_ratio_brute;
    use crate::world::{simulate_splits, WorldConfig};

    fn gaussian_cloud(n: usize, d: usize, shift: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random::<f64>() + shift).collect()).collect()
    }

    #[test]
    fn copy_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let real = Matrix::from_rows(&gaussian_cloud(200, 3, 0.0, &mut rng)).unwrap();
        let r = knn_ratio(&real, &real, 1).unwrap();
        assert_eq!(r.ratio, 0.0);
        assert!(r.denominator > 0.0);
        // with k > 1 the copy still matches itself but the other neighbours count
        let r5 = knn_ratio(&real, &real, 5).unwrap();
        assert!(r5.ratio > 0.0 && r5.ratio < 1.0);
    }

    #[test]
    fn fresh_sample_near_one_and_displaced_far() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let real = Matrix::from_rows(&gaussian_cloud(3000, 3, 0.0, &mut rng)).unwrap();
        let fresh = Matrix::from_rows(&gaussian_cloud(3000, 3, 0.0, &mut rng)).unwrap();
        let far = Matrix::from_rows(&gaussian_cloud(100, 3, 10.0, &mut rng)).unwrap();
        let r = knn_ratio(&real, &fresh, 5).unwrap().ratio;
        assert!((0.9..=1.3).contains(&r), "{r}");
        assert!(knn_ratio(&real, &far, 5).unwrap().ratio > 20.0);
    }

    #[test]
    fn errors() {
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(knn_ratio(&m, &m, 3).is_err());
        assert!(knn_ratio(&m, &Matrix::zeros(0, 1), 1).is_err());
        let dup = Matrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(knn_ratio(&dup, &m, 2), Err(RpuError::DegenerateReference(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn equals_brute_force(seed in any::<u64>(), n in 7usize..120, m in 1usize..80, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let real = gaussian_cloud(n, 4, 0.0, &mut rng);
            let syn = gaussian_cloud(m, 4, 0.2, &mut rng);
            let got = knn_ratio(&Matrix::from_rows(&real).unwrap(), &Matrix::from_rows(&syn).unwrap(), k).unwrap();
            prop_assert_eq!(got.ratio, knn_ratio_brute(&real, &syn, k));
        }

        #[test]
        fn scale_and_permutation(seed in any::<u64>(), c in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let real = gaussian_cloud(60, 3, 0.0, &mut rng);
            let syn = gaussian_cloud(30, 3, 0.1, &mut rng);
            let base = knn_ratio(&Matrix::from_rows(&real).unwrap(), &Matrix::from_rows(&syn).unwrap(), 5).unwrap().ratio;
            let scale = |m: &[Vec<f64>]| Matrix::from_rows(&m.iter().map(|r| r.iter().map(|v| v * c).collect::<Vec<_>>()).collect::<Vec<_>>()).unwrap();
            let scaled = knn_ratio(&scale(&real), &scale(&syn), 5).unwrap().ratio;
            prop_assert!((scaled - base).abs() < 1e-9 * base.max(1.0));
            let mut rev_real = real.clone();
            rev_real.reverse();
            let mut rev_syn = syn.clone();
            rev_syn.reverse();
            let permuted = knn_ratio(&Matrix::from_rows(&rev_real).unwrap(), &Matrix::from_rows(&rev_syn).unwrap(), 5).unwrap().ratio;
            prop_assert!((permuted - base).abs() < 1e-12 * base.max(1.0));
        }
    }

    #[test]
    fn group_copies_and_skips() {
        let w = simulate_splits(&WorldConfig::default(), 1500, 0, 0).unwrap();
        let schema = fit_encoding(&w.train, &Feature::ALL).unwrap();
        let copy = w.train.relabeled(DatasetRole::Synthetic, "copy");
        let k1 = KnnConfig { k: 1, ..Default::default() };
        let res = knn_privacy_group(&w.train, &copy, &Feature::ALL, &schema, Feature::DayOfWeek, &k1).unwrap();
        assert_eq!(res.population_ratio, 0.0);
        assert_eq!(res.group_ratios.len(), 7);
        assert!(res.group_ratios.values().all(|g| g.ratio == 0.0 && g.risk == RiskLevel::High));
        assert_eq!(res.group_mean, 0.0);

        // leave only k Sunday rows in the real set
        let mut sundays = 0;
        let recs: Vec<TripRecord> = w
            .train
            .iter()
            .filter(|r| {
                if r.day_of_week == crate::data_model::DayOfWeek::Sun {
                    sundays += 1;
                    sundays <= 5
                } else {
                    true
                }
            })
            .cloned()
            .collect();
        let real = TripDataset::new(recs, DatasetRole::Train, "real");
        let res = knn_privacy_group(&real, &copy, &Feature::ALL, &schema, Feature::DayOfWeek, &KnnConfig::default()).unwrap();
        assert_eq!(res.skipped_groups, vec![SkippedKnnGroup { group: "Sun".into(), real_n: 5, syn_n: copy.iter().filter(|r| r.day_of_week == crate::data_model::DayOfWeek::Sun).count() }]);
    }

    #[test]
    fn memorized_group_stands_out() {
        let w = simulate_splits(&WorldConfig::default(), 3000, 3000, 0).unwrap();
        let schema = fit_encoding(&w.train, &Feature::ALL).unwrap();
        // Monday copied from the real set, every other day fresh from the world
        let recs: Vec<TripRecord> = w
            .train
            .iter()
            .filter(|r| r.day_of_week == crate::data_model::DayOfWeek::Mon)
            .chain(w.holdout.iter().filter(|r| r.day_of_week != crate::data_model::DayOfWeek::Mon))
            .cloned()
            .collect();
        let syn = TripDataset::new(recs, DatasetRole::Synthetic, "mixed");
        let cfg = KnnConfig { k: 1, ..Default::default() };
        let res = knn_privacy_group(&w.train, &syn, &Feature::ALL, &schema, Feature::DayOfWeek, &cfg).unwrap();
        let mon = res.group_ratios["Mon"].ratio;
        let others: Vec<f64> = res.group_ratios.iter().filter(|(k, _)| *k != "Mon").map(|(_, g)| g.ratio).collect();
        assert_eq!(mon, 0.0);
        assert!(others.iter().all(|&r| r > 0.5));
        let lo = others.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(res.group_mean > mon && res.group_mean < lo);
        let plain = res.group_ratios.values().map(|g| g.ratio).sum::<f64>() / 7.0;
        assert!((res.group_mean - plain).abs() < 1e-15);

        let weighted = knn_privacy_group(&w.train, &syn, &Feature::ALL, &schema, Feature::DayOfWeek, &KnnConfig { weighted_group_mean: true, ..cfg }).unwrap();
        assert!(weighted.group_mean != res.group_mean);
    }
}
