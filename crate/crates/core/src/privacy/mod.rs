//! Membership inference and nearest-neighbour distance privacy indicators.

mod knn;
mod mia;

pub use knn::{
    knn_privacy_group, knn_privacy_population, knn_ratio, GroupRatio, KnnConfig, KnnPrivacyResult, KnnRatio,
    RiskLevel, SkippedKnnGroup,
};
pub use mia::{
    export_mia_distributions, prepare_mia_data, run_mia, write_score_samples_csv, AttackConfig, LabeledMatrix,
    MiaAttack, MiaDistributions, MiaResult, RowSource, ScoreSamples, SourceHistogram,
};
