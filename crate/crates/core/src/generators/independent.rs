use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{draw_index, Draft, GeneratorModel, ModelParams, RecordSampler};
use crate::data_model::{Feature, TripDataset};
use crate::error::Result;

/// Empirical distribution of one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Marginal {
    Categorical { values: Vec<String>, probs: Vec<f64> },
    Minutes { values: Vec<i64>, probs: Vec<f64> },
}

impl Marginal {
    pub fn fit(ds: &TripDataset, feature: Feature) -> Self {
        let n = ds.len() as f64;
        if feature.is_categorical() {
            // first-appearance order, like the encoding vocabulary
            let mut order: Vec<String> = Vec::new();
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for r in ds.iter() {
                let v = r.category(feature).expect("categorical");
                let c = counts.entry(v).or_insert(0);
                if *c == 0 {
                    order.push(v.to_owned());
                }
                *c += 1;
            }
            let probs = order.iter().map(|v| counts[v.as_str()] as f64 / n).collect();
            Marginal::Categorical { values: order, probs }
        } else {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for r in ds.iter() {
                *counts.entry(r.minutes(feature).expect("continuous") as i64).or_insert(0) += 1;
            }
            let probs = counts.values().map(|&c| c as f64 / n).collect();
            Marginal::Minutes { values: counts.into_keys().collect(), probs }
        }
    }

    fn draw_into(&self, feature: Feature, draft: &mut Draft, rng: &mut ChaCha8Rng) {
        match self {
            Marginal::Categorical { values, probs } => draft.set_category(feature, &values[draw_index(probs, rng)]),
            Marginal::Minutes { values, probs } => draft.set_minutes(feature, values[draw_index(probs, rng)] as f64),
        }
    }
}

/// Every feature drawn on its own from the train marginal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentModel {
    pub marginals: Vec<(Feature, Marginal)>,
}

pub fn fit_independent(train: &TripDataset) -> Result<GeneratorModel> {
    train.ensure_non_empty()?;
    let marginals = Feature::ALL.iter().map(|&f| (f, Marginal::fit(train, f))).collect();
    Ok(GeneratorModel::new(0, ModelParams::Independent(IndependentModel { marginals })))
}

impl RecordSampler for IndependentModel {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Draft {
        let mut d = Draft::default();
        for (f, m) in &self.marginals {
            m.draw_into(*f, &mut d, rng);
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{fit_encoding, DatasetRole, DayOfWeek, TripRecord};
    use crate::generators::sample;
    use crate::metrics::{divergence_profile, BinningSpec};
    use crate::world::{simulate_splits, WorldConfig};

    #[test]
    fn single_record_reproduced() {
        let r = TripRecord {
            passenger_id: "p".into(),
            origin: "A".into(),
            destination: "B".into(),
            start_min: 480,
            end_min: 505,
            day_of_week: DayOfWeek::Thu,
        };
        let m = fit_independent(&TripDataset::new(vec![r.clone()], DatasetRole::Train, "real")).unwrap();
        for s in sample(&m, 20, 1).unwrap().iter() {
            assert_eq!(TripRecord { passenger_id: "p".into(), ..s.clone() }, r);
        }
    }

    fn mutual_info(pairs: &[(String, String)]) -> f64 {
        let n = pairs.len() as f64;
        let mut joint: BTreeMap<(&str, &str), f64> = BTreeMap::new();
        let mut a: BTreeMap<&str, f64> = BTreeMap::new();
        let mut b: BTreeMap<&str, f64> = BTreeMap::new();
        for (x, y) in pairs {
            *joint.entry((x, y)).or_default() += 1.0 / n;
            *a.entry(x).or_default() += 1.0 / n;
            *b.entry(y).or_default() += 1.0 / n;
        }
        joint.iter().map(|((x, y), p)| p * (p / (a[x] * b[y])).ln()).sum()
    }

    #[test]
    fn correlation_is_broken() {
        let recs: Vec<TripRecord> = (0..400)
            .map(|i| {
                let s = format!("ST{}", i % 10);
                TripRecord {
                    passenger_id: "p".into(),
                    origin: s.clone(),
                    destination: s,
                    start_min: 400 + i,
                    end_min: 420 + i,
                    day_of_week: DayOfWeek::Mon,
                }
            })
            .collect();
        let train = TripDataset::new(recs, DatasetRole::Train, "real");
        let before: Vec<(String, String)> = train.iter().map(|r| (r.origin.clone(), r.destination.clone())).collect();
        assert!(mutual_info(&before) > 2.0);
        let syn = sample(&fit_independent(&train).unwrap(), 50_000, 3).unwrap();
        let after: Vec<(String, String)> = syn.iter().map(|r| (r.origin.clone(), r.destination.clone())).collect();
        assert!(mutual_info(&after) < 0.01);
    }

    #[test]
    fn marginals_match_at_scale() {
        let w = simulate_splits(&WorldConfig::default(), 5000, 0, 0).unwrap();
        let syn = sample(&fit_independent(&w.train).unwrap(), 50_000, 9).unwrap();
        let schema = fit_encoding(&w.train, &Feature::ALL).unwrap();
        let rep = divergence_profile(&w.train, &syn, &Feature::ALL, &schema, &BinningSpec::default()).unwrap();
        for (f, d) in &rep.features {
            assert!(d.jsd < 0.01, "{f}: {}", d.jsd);
        }
    }
}
