use serde::{Deserialize, Serialize};

use rpu_core::data_model::{fit_encoding, load_csv, DatasetRole, EncodingSchema, Feature, TripDataset};
use rpu_core::privacy::{export_mia_distributions, knn_privacy_group, KnnPrivacyResult, MiaAttack, MiaDistributions, MiaResult};
use rpu_core::metrics::DivergenceReport;
use rpu_core::representativeness::{group_raw, population_raw, record_level_score, KnownOd, ValidityReport};
use rpu_core::scoring::RawIndicators;
use rpu_core::utility::{clustering_utility, ClusteringUtilityResult, PredictiveUtilityResult, TrtrBaseline};
use rpu_core::world::simulate_splits;
use rpu_core::RpuError;

use crate::config::BenchmarkConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestSource {
    Test,
    Holdout,
}

/// The three real splits a run is evaluated against.
#[derive(Debug, Clone)]
pub struct RealData {
    pub train: TripDataset,
    pub holdout: TripDataset,
    pub test: TripDataset,
    pub test_source: TestSource,
}

pub fn load_real_data(cfg: &BenchmarkConfig) -> Result<RealData, CliError> {
    let d = &cfg.data;
    if let Some(w) = &d.world {
        let s = simulate_splits(&w.world_config(), w.train, w.holdout, w.test)?;
        let test_source = if w.test > 0 { TestSource::Test } else { TestSource::Holdout };
        let test = if w.test > 0 { s.test } else { s.holdout.clone() };
        return Ok(RealData { train: s.train, holdout: s.holdout, test, test_source });
    }
    let (train, holdout) = match (&d.train, &d.holdout) {
        (Some(t), Some(h)) => (load_csv(t, DatasetRole::Train)?, load_csv(h, DatasetRole::Holdout)?),
        _ => return Err(CliError::Usage("data: `train` and `holdout` paths are required".into())),
    };
    let (test, test_source) = match &d.test {
        Some(p) => (load_csv(p, DatasetRole::Holdout)?, TestSource::Test),
        None => {
            log::warn!("no test split configured; the holdout split is used as evaluation reference");
            (holdout.clone(), TestSource::Holdout)
        }
    };
    Ok(RealData { train, holdout, test, test_source })
}

/// Summary of the membership attack for one synthetic set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiaSummary {
    pub attack_auc: f64,
    pub mean_synthetic_confidence: f64,
    pub mean_holdout_confidence: f64,
    pub mean_train_confidence: f64,
    pub n_attack_fit: usize,
    pub n_attack_test: usize,
}

impl From<&MiaResult> for MiaSummary {
    fn from(r: &MiaResult) -> Self {
        Self {
            attack_auc: r.attack_auc,
            mean_synthetic_confidence: r.mean_synthetic_confidence,
            mean_holdout_confidence: r.mean_holdout_confidence,
            mean_train_confidence: r.mean_train_confidence,
            n_attack_fit: r.n_attack_fit,
            n_attack_test: r.n_attack_test,
        }
    }
}

/// Generator provenance, present for models fitted by the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub kind: String,
    pub seed: u64,
    pub epsilon: Option<f64>,
}

/// All eight indicators for one synthetic dataset, with their details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub generator: Option<GeneratorInfo>,
    pub n_synthetic: usize,
    pub raw: RawIndicators,
    pub record: ValidityReport,
    pub population: DivergenceReport,
    pub group: DivergenceReport,
    pub mia: MiaSummary,
    pub knn: KnnPrivacyResult,
    pub clustering: ClusteringUtilityResult,
    pub prediction: PredictiveUtilityResult,
}

/// Per-model data that goes to `plots/` rather than into the report.
#[derive(Debug, Clone)]
pub struct ModelPlots {
    pub mia: MiaResult,
    pub mia_histogram: MiaDistributions,
}

#[derive(Debug)]
pub struct ModelOutcome {
    pub report: ModelReport,
    pub plots: ModelPlots,
}

/// An evaluation that stopped, and where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub model: String,
    pub stage: String,
    pub error: String,
}

impl FailureEntry {
    pub fn new(model: &str, stage: &str, error: impl std::fmt::Display) -> Self {
        Self { model: model.to_owned(), stage: stage.to_owned(), error: error.to_string() }
    }
}

/// State shared by every model's evaluation: the fitted schema, the known OD
/// pairs, the membership attack and the real-on-real prediction baseline.
pub struct Reference<'a> {
    pub cfg: &'a BenchmarkConfig,
    pub data: &'a RealData,
    pub schema: EncodingSchema,
    pub known_od: KnownOd,
    pub mia: MiaAttack,
    pub trtr: TrtrBaseline,
}

impl<'a> Reference<'a> {
    pub fn prepare(cfg: &'a BenchmarkConfig, data: &'a RealData) -> Result<Self, CliError> {
        let stage = |s: &str, e: RpuError| CliError::Runtime(format!("{s}: {e}"));
        let schema = fit_encoding(&data.train, &Feature::ALL).map_err(|e| stage("encoding", e))?;
        let known_od = KnownOd::from_datasets([&data.train, &data.holdout]);
        let mia = MiaAttack::fit(&data.train, &data.holdout, &cfg.features, &schema, &cfg.privacy.attack)
            .map_err(|e| stage("membership attack", e))?;
        let trtr = TrtrBaseline::fit(&data.train, &data.test, &schema, &cfg.utility.prediction)
            .map_err(|e| stage("prediction baseline", e))?;
        Ok(Self { cfg, data, schema, known_od, mia, trtr })
    }

    /// Runs every evaluator; the first failing one names the stage.
    pub fn evaluate(&self, model: &str, syn: &TripDataset) -> Result<ModelOutcome, FailureEntry> {
        let cfg = self.cfg;
        let features = &cfg.features;
        let at = |stage: &'static str| move |e: RpuError| FailureEntry::new(model, stage, e);

        let record = record_level_score(syn, &self.known_od).map_err(at("record"))?;
        let population = population_raw(&self.data.test, syn, features, &self.schema, &cfg.representativeness)
            .map_err(at("population"))?;
        let group =
            group_raw(&self.data.test, syn, features, &self.schema, &cfg.representativeness).map_err(at("group"))?;
        let group_aggregate = group.groups.as_ref().map(|g| g.group_aggregate);
        let mia = self.mia.evaluate(syn).map_err(at("mia"))?;
        let mia_histogram = export_mia_distributions(&mia, cfg.privacy.score_bins).map_err(at("mia"))?;
        let group_feature = cfg.representativeness.group_feature;
        let knn = knn_privacy_group(&self.data.train, syn, features, &self.schema, group_feature, &cfg.privacy.knn)
            .map_err(at("knn"))?;
        let clustering = clustering_utility(&self.data.test, syn, features, &self.schema, &cfg.utility.clustering)
            .map_err(at("clustering"))?;
        let prediction = self.trtr.evaluate(syn).map_err(at("prediction"))?;

        let raw = RawIndicators {
            r_record: Some(record.score_r),
            r_group: group_aggregate,
            r_pop: Some(population.aggregate),
            p_mia_mean: Some(mia.mean_synthetic_confidence),
            p_knn_pop_ratio: Some(knn.population_ratio),
            p_knn_group_mean: Some(knn.group_mean),
            u_centroid_distance: Some(clustering.centroid_distance),
            u_d_mae: Some(prediction.d_mae),
            u_d_rmse: Some(prediction.d_rmse),
        };
        let report = ModelReport {
            model: model.to_owned(),
            generator: None,
            n_synthetic: syn.len(),
            raw,
            record,
            population,
            group,
            mia: MiaSummary::from(&mia),
            knn,
            clustering,
            prediction,
        };
        Ok(ModelOutcome { report, plots: ModelPlots { mia, mia_histogram } })
    }
}
