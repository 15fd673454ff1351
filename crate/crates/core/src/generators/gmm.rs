use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{draw_index, Draft, GeneratorModel, ModelParams, RecordSampler};
use crate::data_model::{encode, fit_encoding, Feature, TripDataset};
use crate::error::{Result, RpuError};
use crate::learners::{kmeans_fit_with, KMeansParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmmConfig {
    pub n_components: usize,
    pub max_iter: usize,
    /// Stop once the mean per-row log-likelihood gains less than this.
    pub tol: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self { n_components: 8, max_iter: 200, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// One probability table per categorical feature.
    pub cat_probs: Vec<Vec<f64>>,
}

/// Diagonal Gaussians over the time features with a categorical table per
/// component for each discrete feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub continuous: Vec<Feature>,
    pub categorical: Vec<(Feature, Vec<String>)>,
    pub components: Vec<GmmComponent>,
    /// Mean per-row log-likelihood after every EM iteration.
    pub log_likelihood_trace: Vec<f64>,
    pub pruned: usize,
    pub converged: bool,
}

const MIN_WEIGHT: f64 = 1e-8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

struct Data {
    x: Vec<Vec<f64>>,
    c: Vec<Vec<usize>>,
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|a| (a - m).exp()).sum::<f64>().ln()
}

impl GmmComponent {
    fn log_density(&self, x: &[f64], c: &[usize]) -> f64 {
        let mut l = self.weight.ln();
        for ((v, m), s2) in x.iter().zip(&self.mean).zip(&self.var) {
            l -= 0.5 * (LN_2PI + s2.ln() + (v - m) * (v - m) / s2);
        }
        for (t, &k) in self.cat_probs.iter().zip(c) {
            l += t[k].ln();
        }
        l
    }
}

/// Weighted maximum-likelihood update from responsibilities `resp[i][k]`.
fn m_step(data: &Data, resp: &[Vec<f64>], cards: &[usize], var_floor: &[f64]) -> Vec<Option<GmmComponent>> {
    let n = data.x.len();
    let k = resp[0].len();
    let d = var_floor.len();
    (0..k)
        .map(|j| {
            let nk: f64 = resp.iter().map(|r| r[j]).sum();
            let weight = nk / n as f64;
            if weight < MIN_WEIGHT {
                return None;
            }
            let mut mean = vec![0.0; d];
            for (x, r) in data.x.iter().zip(resp) {
                for (m, v) in mean.iter_mut().zip(x) {
                    *m += r[j] * v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut var = vec![0.0; d];
            for (x, r) in data.x.iter().zip(resp) {
                for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
                    *s += r[j] * (v - m) * (v - m);
                }
            }
            for (s, floor) in var.iter_mut().zip(var_floor) {
                *s = (*s / nk).max(*floor);
            }
            let mut cat_probs: Vec<Vec<f64>> = cards.iter().map(|&c| vec![0.0; c]).collect();
            for (c, r) in data.c.iter().zip(resp) {
                for (t, &v) in cat_probs.iter_mut().zip(c) {
                    t[v] += r[j];
                }
            }
            for t in &mut cat_probs {
                t.iter_mut().for_each(|p| *p /= nk);
            }
            Some(GmmComponent { weight, mean, var, cat_probs })
        })
        .collect()
}

fn e_step(data: &Data, comps: &[GmmComponent]) -> (Vec<Vec<f64>>, f64) {
    let mut ll = 0.0;
    let resp = data
        .x
        .iter()
        .zip(&data.c)
        .map(|(x, c)| {
            let logs: Vec<f64> = comps.iter().map(|g| g.log_density(x, c)).collect();
            let z = log_sum_exp(&logs);
            ll += z;
            logs.iter().map(|l| (l - z).exp()).collect()
        })
        .collect();
    (resp, ll / data.x.len() as f64)
}

pub fn fit_gmm(train: &TripDataset, n_components: usize, seed: u64) -> Result<GeneratorModel> {
    fit_gmm_with(train, &GmmConfig { n_components, ..Default::default() }, seed)
}

pub fn fit_gmm_with(train: &TripDataset, cfg: &GmmConfig, seed: u64) -> Result<GeneratorModel> {
    let n = train.len();
    if cfg.n_components == 0 || n < cfg.n_components {
        return Err(RpuError::InvalidParameter(format!(
            "gmm needs at least n_components = {} rows, got {n}",
            cfg.n_components
        )));
    }
    let continuous: Vec<Feature> = Feature::ALL.iter().copied().filter(|f| !f.is_categorical()).collect();
    let schema = fit_encoding(train, &Feature::ALL)?;
    let mut categorical = Vec::new();
    for f in Feature::ALL.iter().copied().filter(|f| f.is_categorical()) {
        match schema.encoding(f) {
            Some(crate::data_model::FeatureEncoding::Categorical { vocabulary, .. }) => {
                categorical.push((f, vocabulary.clone()))
            }
            _ => unreachable!("categorical features get a vocabulary"),
        }
    }
    let cards: Vec<usize> = categorical.iter().map(|(_, v)| v.len()).collect();
    let data = Data {
        x: train.iter().map(|r| continuous.iter().map(|&f| r.minutes(f).unwrap()).collect()).collect(),
        c: train
            .iter()
            .map(|r| {
                categorical
                    .iter()
                    .map(|(f, vocab)| {
                        let v = r.category(*f).unwrap();
                        vocab.iter().position(|s| s == v).expect("vocabulary fitted on this data")
                    })
                    .collect()
            })
            .collect(),
    };
    let var_floor: Vec<f64> = (0..continuous.len())
        .map(|j| {
            let m = data.x.iter().map(|x| x[j]).sum::<f64>() / n as f64;
            let v = data.x.iter().map(|x| (x[j] - m) * (x[j] - m)).sum::<f64>() / n as f64;
            1e-6 * v + 1e-9
        })
        .collect();

    // hard k-means assignment on the encoded rows seeds the first M-step
    let encoded = encode::<f64>(train, &schema)?.rows;
    let km = kmeans_fit_with(&encoded, cfg.n_components, seed, &KMeansParams { n_restarts: 3, ..Default::default() })?;
    let resp: Vec<Vec<f64>> = encoded
        .rows_iter()
        .map(|row| {
            let mut r = vec![0.0; cfg.n_components];
            r[km.predict_row(row)] = 1.0;
            r
        })
        .collect();

    let mut pruned = 0;
    let mut keep = |raw: Vec<Option<GmmComponent>>| -> Vec<GmmComponent> {
        let before = raw.len();
        let kept: Vec<GmmComponent> = raw.into_iter().flatten().collect();
        if kept.len() < before {
            log::warn!("gmm: pruned {} collapsed component(s)", before - kept.len());
            pruned += before - kept.len();
        }
        kept
    };
    let mut comps = keep(m_step(&data, &resp, &cards, &var_floor));
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let (resp, ll) = e_step(&data, &comps);
        if let Some(&prev) = trace.last() {
            if ll - prev < cfg.tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        comps = keep(m_step(&data, &resp, &cards, &var_floor));
    }
    if !converged {
        log::warn!("gmm: no convergence after {} iterations", cfg.max_iter);
    }
    let model = GmmModel { continuous, categorical, components: comps, log_likelihood_trace: trace, pruned, converged };
    Ok(GeneratorModel::new(seed, ModelParams::Gmm(model)))
}

impl RecordSampler for GmmModel {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Draft {
        let weights: Vec<f64> = self.components.iter().map(|c| c.weight).collect();
        let comp = &self.components[draw_index(&weights, rng)];
        let mut d = Draft::default();
        for (j, &f) in self.continuous.iter().enumerate() {
            let g = Normal::new(comp.mean[j], comp.var[j].sqrt()).expect("positive variance");
            d.set_minutes(f, g.sample(rng));
        }
        for ((f, vocab), probs) in self.categorical.iter().zip(&comp.cat_probs) {
            d.set_category(*f, &vocab[draw_index(probs, rng)]);
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
    use crate::world::{simulate_splits, WorldConfig};

    fn gmm(m: &GeneratorModel) -> &GmmModel {
        match &m.params {
            ModelParams::Gmm(g) => g,
            _ => unreachable!(),
        }
    }

    #[test]
    fn one_component_is_the_moments() {
        let w = simulate_splits(&WorldConfig::default(), 1000, 0, 0).unwrap();
        let m = fit_gmm(&w.train, 1, 0).unwrap();
        let g = &gmm(&m).components[0];
        let xs: Vec<f64> = w.train.iter().map(|r| r.start_min as f64).collect();
        let mu = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64;
        assert!((g.mean[0] - mu).abs() < 1e-6);
        assert!((g.var[0] - var).abs() < 1e-6 * var.max(1.0));
        assert_eq!(g.weight, 1.0);
    }

    #[test]
    fn two_modes_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 15.0).unwrap();
        let recs: Vec<TripRecord> = (0..2000)
            .map(|i| {
                let c: f64 = if i % 2 == 0 { 420.0 } else { 1020.0 };
                let s = (c + noise.sample(&mut rng)).round() as i64;
                TripRecord {
                    passenger_id: "p".into(),
                    origin: "A".into(),
                    destination: "B".into(),
                    start_min: s,
                    end_min: s + 20 + rng.random_range(0..5),
                    day_of_week: DayOfWeek::Wed,
                }
            })
            .collect();
        let train = TripDataset::new(recs, DatasetRole::Train, "real");
        let range = (train.iter().map(|r| r.start_min).max().unwrap() - train.iter().map(|r| r.start_min).min().unwrap()) as f64;
        let m = fit_gmm(&train, 2, 1).unwrap();
        let mut means: Vec<f64> = gmm(&m).components.iter().map(|c| c.mean[0]).collect();
        means.sort_by(f64::total_cmp);
        assert!((means[0] - 420.0).abs() / range < 0.05);
        assert!((means[1] - 1020.0).abs() / range < 0.05);
    }

    #[test]
    fn log_likelihood_never_drops() {
        let w = simulate_splits(&WorldConfig::default(), 2000, 0, 0).unwrap();
        let m = fit_gmm(&w.train, 6, 2).unwrap();
        let trace = &gmm(&m).log_likelihood_trace;
        assert!(trace.len() >= 2);
        for p in trace.windows(2) {
            assert!(p[1] >= p[0] - 1e-9, "{} -> {}", p[0], p[1]);
        }
        for c in &gmm(&m).components {
            for t in &c.cat_probs {
                assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn collapsed_components_pruned() {
        // identical rows collapse onto a single component
        let r = TripRecord {
            passenger_id: "p".into(),
            origin: "A".into(),
            destination: "B".into(),
            start_min: 500,
            end_min: 530,
            day_of_week: DayOfWeek::Mon,
        };
        let train = TripDataset::new(vec![r; 6], DatasetRole::Train, "real");
        let m = fit_gmm(&train, 6, 0).unwrap();
        assert!(gmm(&m).pruned > 0);
        assert!(!gmm(&m).components.is_empty());
        let s = sample(&m, 10, 0).unwrap();
        assert!(s.iter().all(|x| x.start_min == 500));
    }

    #[test]
    fn too_few_rows() {
        let w = simulate_splits(&WorldConfig::default(), 3, 0, 0).unwrap();
        assert!(fit_gmm(&w.train, 4, 0).is_err());
    }
}
