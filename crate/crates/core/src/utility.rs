//! Task utility: agreement of K-Means centroids and the train-on-synthetic
//! versus train-on-real prediction gap.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::{encode, EncodingSchema, Feature, TripDataset, TripRecord};
use crate::error::{Result, RpuError};
use crate::learners::{fit_gradient_boosting, kmeans_fit_with, pca_2d, BoostingParams, GradientBoostingModel, KMeansParams};
use crate::matrix::{euclidean, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChamferMode {
    Symmetric,
    RealToSyn,
    SynToReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    pub k_clusters: usize,
    pub seed: u64,
    pub mode: ChamferMode,
    pub kmeans: KMeansParams,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self { k_clusters: 8, seed: 0, mode: ChamferMode::Symmetric, kmeans: KMeansParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentroidProjection {
    pub real: Vec<[f64; 2]>,
    pub syn: Vec<[f64; 2]>,
    pub explained_variance_ratio: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringUtilityResult {
    pub centroid_distance: f64,
    pub mode: ChamferMode,
    pub real_centroids: Matrix<f64>,
    pub syn_centroids: Matrix<f64>,
    /// None when the stacked centroids have no spread to project.
    pub pca_projection: Option<CentroidProjection>,
}

fn mean_min_distance(from: &Matrix<f64>, to: &Matrix<f64>) -> f64 {
    let total: f64 = from
        .rows_iter()
        .map(|a| to.rows_iter().map(|b| euclidean(a, b)).fold(f64::INFINITY, f64::min))
        .sum();
    total / from.nrows() as f64
}

pub fn chamfer_distance(real: &Matrix<f64>, syn: &Matrix<f64>, mode: ChamferMode) -> f64 {
    match mode {
        ChamferMode::Symmetric => 0.5 * (mean_min_distance(real, syn) + mean_min_distance(syn, real)),
        ChamferMode::RealToSyn => mean_min_distance(real, syn),
        ChamferMode::SynToReal => mean_min_distance(syn, real),
    }
}

/// Clustering utility on already encoded matrices.
pub fn clustering_utility_encoded(
    real: &Matrix<f64>,
    syn: &Matrix<f64>,
    cfg: &ClusteringConfig,
) -> Result<ClusteringUtilityResult> {
    if real.ncols() != syn.ncols() {
        return Err(RpuError::DimensionMismatch { expected: real.ncols(), actual: syn.ncols() });
    }
    let rc = kmeans_fit_with(real, cfg.k_clusters, cfg.seed, &cfg.kmeans)?.centroids;
    let sc = kmeans_fit_with(syn, cfg.k_clusters, cfg.seed, &cfg.kmeans)?.centroids;
    let centroid_distance = chamfer_distance(&rc, &sc, cfg.mode);
    let pca_projection = pca_2d(&rc.vstack(&sc)?).ok().map(|p| CentroidProjection {
        real: p.transform(&rc),
        syn: p.transform(&sc),
        explained_variance_ratio: p.explained_variance_ratio,
    });
    Ok(ClusteringUtilityResult { centroid_distance, mode: cfg.mode, real_centroids: rc, syn_centroids: sc, pca_projection })
}

pub fn clustering_utility(
    real_test: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
    cfg: &ClusteringConfig,
) -> Result<ClusteringUtilityResult> {
    let schema = schema.select(features)?;
    let r = encode::<f64>(real_test, &schema)?.rows;
    let s = encode::<f64>(syn, &schema)?.rows;
    clustering_utility_encoded(&r, &s, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Duration,
    StartMin,
    EndMin,
}

impl Target {
    pub fn value(self, r: &TripRecord) -> f64 {
        match self {
            Target::Duration => r.duration() as f64,
            Target::StartMin => r.start_min as f64,
            Target::EndMin => r.end_min as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSpec {
    pub target: Target,
    pub predictors: Vec<Feature>,
}

impl Default for TargetSpec {
    fn default() -> Self {
        Self {
            target: Target::Duration,
            predictors: vec![Feature::Origin, Feature::Destination, Feature::StartMin, Feature::DayOfWeek],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictionConfig {
    pub folds: usize,
    pub seed: u64,
    pub target: TargetSpec,
    pub boosting: BoostingParams,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self { folds: 5, seed: 0, target: TargetSpec::default(), boosting: BoostingParams::default() }
    }
}

/// How the synthetic training set was sized to match the real one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TstrSampling {
    AsIs,
    WithoutReplacement,
    WithReplacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldErrors {
    pub n: usize,
    pub tstr_mae: f64,
    pub trtr_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveUtilityResult {
    pub target: Target,
    pub tstr_mae: f64,
    pub tstr_rmse: f64,
    pub trtr_mae: f64,
    pub trtr_rmse: f64,
    pub d_mae: f64,
    pub d_rmse: f64,
    pub folds: usize,
    pub n_train: usize,
    pub tstr_sampling: TstrSampling,
    pub per_fold: Vec<FoldErrors>,
}

fn design(ds: &TripDataset, schema: &EncodingSchema, target: Target) -> Result<(Matrix<f64>, Vec<f64>)> {
    let x = encode::<f64>(ds, schema)?.rows;
    let y = ds.iter().map(|r| target.value(r)).collect();
    Ok((x, y))
}

/// The real-data arm, fitted once and shared across synthetic sets. The
/// evaluation folds partition `real_test`; no test row is ever trained on.
#[derive(Debug, Clone)]
pub struct TrtrBaseline {
    cfg: PredictionConfig,
    schema: EncodingSchema,
    n_train: usize,
    model: GradientBoostingModel<f64>,
    folds: Vec<(Matrix<f64>, Vec<f64>)>,
    fold_pred: Vec<Vec<f64>>,
}

impl TrtrBaseline {
    pub fn fit(
        real_train: &TripDataset,
        real_test: &TripDataset,
        schema: &EncodingSchema,
        cfg: &PredictionConfig,
    ) -> Result<Self> {
        if cfg.folds < 2 {
            return Err(RpuError::InvalidParameter(format!("folds = {} must be at least 2", cfg.folds)));
        }
        real_train.ensure_non_empty()?;
        if real_test.len() < cfg.folds {
            return Err(RpuError::InvalidParameter(format!(
                "{} test rows cannot fill {} folds",
                real_test.len(),
                cfg.folds
            )));
        }
        let schema = schema.select(&cfg.target.predictors)?;
        let (x, y) = design(real_train, &schema, cfg.target.target)?;
        let model = fit_gradient_boosting(&x, &y, &cfg.boosting)?;

        let mut order: Vec<usize> = (0..real_test.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
        let mut folds = Vec::with_capacity(cfg.folds);
        let mut fold_pred = Vec::with_capacity(cfg.folds);
        for f in 0..cfg.folds {
            let mut idx: Vec<usize> = order.iter().copied().skip(f).step_by(cfg.folds).collect();
            idx.sort_unstable();
            let (fx, fy) = design(&real_test.subset(&idx), &schema, cfg.target.target)?;
            fold_pred.push(model.predict(&fx)?);
            folds.push((fx, fy));
        }
        Ok(Self { cfg: cfg.clone(), schema, n_train: real_train.len(), model, folds, fold_pred })
    }

    pub fn model(&self) -> &GradientBoostingModel<f64> {
        &self.model
    }

    fn training_sample(&self, syn: &TripDataset, fold: usize) -> (TripDataset, TstrSampling) {
        let n = self.n_train;
        if syn.len() == n {
            return (syn.clone(), TstrSampling::AsIs);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(fold as u64 + 1)));
        if syn.len() > n {
            let mut idx = rand::seq::index::sample(&mut rng, syn.len(), n).into_vec();
            idx.sort_unstable();
            (syn.subset(&idx), TstrSampling::WithoutReplacement)
        } else {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..syn.len())).collect();
            (syn.subset(&idx), TstrSampling::WithReplacement)
        }
    }

    pub fn evaluate(&self, syn: &TripDataset) -> Result<PredictiveUtilityResult> {
        syn.ensure_non_empty()?;
        let mut per_fold = Vec::with_capacity(self.folds.len());
        let (mut tstr_abs, mut tstr_sq, mut trtr_abs, mut trtr_sq, mut n_total) = (0.0, 0.0, 0.0, 0.0, 0usize);
        let mut sampling = TstrSampling::AsIs;
        let mut shared: Option<GradientBoostingModel<f64>> = None;
        for (f, ((fx, fy), trtr)) in self.folds.iter().zip(&self.fold_pred).enumerate() {
            let (train, how) = self.training_sample(syn, f);
            sampling = how;
            // the as-is training set is the same for every fold, so fit it once
            let model = match (&shared, how) {
                (Some(m), TstrSampling::AsIs) => m.clone(),
                _ => {
                    let (sx, sy) = design(&train, &self.schema, self.cfg.target.target)?;
                    let m = fit_gradient_boosting(&sx, &sy, &self.cfg.boosting)?;
                    if how == TstrSampling::AsIs {
                        shared = Some(m.clone());
                    }
                    m
                }
            };
            let tstr = model.predict(fx)?;
            let (mut a_s, mut a_r) = (0.0, 0.0);
            for ((y, p_s), p_r) in fy.iter().zip(&tstr).zip(trtr) {
                let (es, er) = (p_s - y, p_r - y);
                a_s += es.abs();
                a_r += er.abs();
                tstr_sq += es * es;
                trtr_sq += er * er;
            }
            tstr_abs += a_s;
            trtr_abs += a_r;
            n_total += fy.len();
            per_fold.push(FoldErrors { n: fy.len(), tstr_mae: a_s / fy.len() as f64, trtr_mae: a_r / fy.len() as f64 });
        }
        let n = n_total as f64;
        let (tstr_mae, trtr_mae) = (tstr_abs / n, trtr_abs / n);
        let (tstr_rmse, trtr_rmse) = ((tstr_sq / n).sqrt(), (trtr_sq / n).sqrt());
        Ok(PredictiveUtilityResult {
            target: self.cfg.target.target,
            tstr_mae,
            tstr_rmse,
            trtr_mae,
            trtr_rmse,
            d_mae: (tstr_mae - trtr_mae).abs(),
            d_rmse: (tstr_rmse - trtr_rmse).abs(),
            folds: self.folds.len(),
            n_train: self.n_train,
            tstr_sampling: sampling,
            per_fold,
        })
    }
}

pub fn tstr_trtr(
    real_train: &TripDataset,
    real_test: &TripDataset,
    syn: &TripDataset,
    schema: &EncodingSchema,
    cfg: &PredictionConfig,
) -> Result<PredictiveUtilityResult> {
    syn.ensure_non_empty()?;
    TrtrBaseline::fit(real_train, real_test, schema, cfg)?.evaluate(syn)
}
