use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{encode, DatasetRole, EncodingSchema, Feature, TripDataset};
use crate::error::{Result, RpuError};
use crate::learners::{fit_random_forest, rf_predict_proba, roc_auc, ForestParams, RandomForest};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    /// Share of each class held out to measure the attack.
    pub test_fraction: f64,
    pub seed: u64,
    pub forest: ForestParams,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self { test_fraction: 0.3, seed: 0, forest: ForestParams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSource {
    pub role: DatasetRole,
    pub index: usize,
}

/// Train rows labelled 1 stacked over holdout rows labelled 0.
#[derive(Debug, Clone)]
pub struct LabeledMatrix {
    pub x: Matrix<f64>,
    pub y: Vec<bool>,
    pub source: Vec<RowSource>,
}

pub fn prepare_mia_data(
    train: &TripDataset,
    holdout: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
) -> Result<LabeledMatrix> {
    train.ensure_non_empty()?;
    holdout.ensure_non_empty()?;
    let schema = schema.select(features)?;
    let a = encode::<f64>(train, &schema)?.rows;
    let b = encode::<f64>(holdout, &schema)?.rows;
    let x = a.vstack(&b)?;
    let y = (0..x.nrows()).map(|i| i < train.len()).collect();
    let source = (0..train.len())
        .map(|index| RowSource { role: DatasetRole::Train, index })
        .chain((0..holdout.len()).map(|index| RowSource { role: DatasetRole::Holdout, index }))
        .collect();
    Ok(LabeledMatrix { x, y, source })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSamples {
    pub train: Vec<f64>,
    pub holdout: Vec<f64>,
    pub synthetic: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaResult {
    pub attack_auc: f64,
    pub mean_synthetic_confidence: f64,
    /// Mean member probability over holdout rows the forest was not fitted on.
    pub mean_holdout_confidence: f64,
    /// Same, for train rows outside the attack's fitting split.
    pub mean_train_confidence: f64,
    pub n_attack_fit: usize,
    pub n_attack_test: usize,
    /// Scores for every train, holdout and synthetic row, in dataset order.
    pub score_samples: ScoreSamples,
}

/// A fitted membership classifier. Fitting depends only on train and
/// holdout, so one attack can score any number of synthetic sets.
#[derive(Debug, Clone)]
pub struct MiaAttack {
    schema: EncodingSchema,
    forest: RandomForest<f64>,
    attack_auc: f64,
    train_scores: Vec<f64>,
    holdout_scores: Vec<f64>,
    mean_train_confidence: f64,
    mean_holdout_confidence: f64,
    n_fit: usize,
    n_test: usize,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

impl MiaAttack {
    pub fn fit(
        train: &TripDataset,
        holdout: &TripDataset,
        features: &[Feature],
        schema: &EncodingSchema,
        cfg: &AttackConfig,
    ) -> Result<Self> {
        if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
            return Err(RpuError::InvalidParameter(format!("test_fraction {} not in (0, 1)", cfg.test_fraction)));
        }
        let data = prepare_mia_data(train, holdout, features, schema)?;
        let schema = schema.select(features)?;

        // stratified split, each class shuffled on its own
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut fit_idx = Vec::new();
        let mut test_idx = Vec::new();
        for class in [true, false] {
            let mut idx: Vec<usize> = (0..data.y.len()).filter(|&i| data.y[i] == class).collect();
            idx.shuffle(&mut rng);
            let n_test = (idx.len() as f64 * cfg.test_fraction).round() as usize;
            if n_test == 0 || n_test == idx.len() {
                return Err(RpuError::SingleClass);
            }
            test_idx.extend_from_slice(&idx[..n_test]);
            fit_idx.extend_from_slice(&idx[n_test..]);
        }
        fit_idx.sort_unstable();
        test_idx.sort_unstable();

        let y_fit: Vec<bool> = fit_idx.iter().map(|&i| data.y[i]).collect();
        let params = ForestParams { seed: cfg.forest.seed ^ cfg.seed, ..cfg.forest };
        let forest = fit_random_forest(&data.x.select_rows(&fit_idx), &y_fit, &params)?;
        let scores = rf_predict_proba(&forest, &data.x)?;

        let y_test: Vec<bool> = test_idx.iter().map(|&i| data.y[i]).collect();
        let s_test: Vec<f64> = test_idx.iter().map(|&i| scores[i]).collect();
        let attack_auc = roc_auc(&y_test, &s_test)?;
        let (member_test, non_member_test): (Vec<usize>, Vec<usize>) = test_idx.iter().partition(|&&i| data.y[i]);
        let pick = |idx: &[usize]| idx.iter().map(|&i| scores[i]).collect::<Vec<_>>();

        Ok(Self {
            schema,
            forest,
            attack_auc,
            mean_train_confidence: mean(&pick(&member_test)),
            mean_holdout_confidence: mean(&pick(&non_member_test)),
            holdout_scores: scores[train.len()..].to_vec(),
            train_scores: scores[..train.len()].to_vec(),
            n_fit: fit_idx.len(),
            n_test: test_idx.len(),
        })
    }

    pub fn attack_auc(&self) -> f64 {
        self.attack_auc
    }

    pub fn forest(&self) -> &RandomForest<f64> {
        &self.forest
    }

    pub fn evaluate(&self, syn: &TripDataset) -> Result<MiaResult> {
        syn.ensure_non_empty()?;
        let x = encode::<f64>(syn, &self.schema)?.rows;
        let synthetic = rf_predict_proba(&self.forest, &x)?;
        Ok(MiaResult {
            attack_auc: self.attack_auc,
            mean_synthetic_confidence: mean(&synthetic),
            mean_holdout_confidence: self.mean_holdout_confidence,
            mean_train_confidence: self.mean_train_confidence,
            n_attack_fit: self.n_fit,
            n_attack_test: self.n_test,
            score_samples: ScoreSamples {
                train: self.train_scores.clone(),
                holdout: self.holdout_scores.clone(),
                synthetic,
            },
        })
    }
}

pub fn run_mia(
    train: &TripDataset,
    holdout: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
    cfg: &AttackConfig,
) -> Result<MiaResult> {
    syn.ensure_non_empty()?;
    MiaAttack::fit(train, holdout, features, schema, cfg)?.evaluate(syn)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceHistogram {
    pub n: usize,
    pub mass: Vec<f64>,
}

/// Equal-width histograms of the member scores on [0, 1], per source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaDistributions {
    pub edges: Vec<f64>,
    pub sources: BTreeMap<String, SourceHistogram>,
}

pub fn export_mia_distributions(res: &MiaResult, bins: usize) -> Result<MiaDistributions> {
    if bins == 0 {
        return Err(RpuError::InvalidParameter("bins must be positive".into()));
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let hist = |v: &[f64]| {
        let mut mass = vec![0.0; bins];
        for &s in v {
            let b = ((s * bins as f64).floor() as usize).min(bins - 1);
            mass[b] += 1.0;
        }
        if !v.is_empty() {
            mass.iter_mut().for_each(|m| *m /= v.len() as f64);
        }
        SourceHistogram { n: v.len(), mass }
    };
    let s = &res.score_samples;
    let sources = [("train", &s.train), ("holdout", &s.holdout), ("synthetic", &s.synthetic)]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), hist(v)))
        .collect();
    Ok(MiaDistributions { edges, sources })
}

/// Long-format `source,score` rows for external plotting.
pub fn write_score_samples_csv<W: Write>(res: &MiaResult, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "score"])?;
    let s = &res.score_samples;
    for (name, v) in [("train", &s.train), ("holdout", &s.holdout), ("synthetic", &s.synthetic)] {
        for x in v.iter() {
            w.write_record([name, &x.to_string()])?;
        }
    }
    w.flush().map_err(|e| RpuError::Io { path: "<score samples>".into(), source: e })?;
    Ok(())
}
