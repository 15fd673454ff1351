//! Benchmarking toolkit that scores synthetic trip datasets against real
//! reference data on representativeness, privacy and utility, at record,
//! group and population level.

pub mod data_model;
pub mod error;
pub mod generators;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod privacy;
pub mod representativeness;
pub mod scalar;
pub mod scoring;
pub mod utility;
pub mod world;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use error::{Result, RpuError};
pub use scalar::Scalar;

pub type Matrix = matrix::Matrix<f64>;
pub type Histogram = metrics::Histogram<f64>;
pub type EncodedMatrix = data_model::EncodedMatrix<f64>;
pub type RandomForest = learners::RandomForest<f64>;
pub type GradientBoostingModel = learners::GradientBoostingModel<f64>;
pub type KMeansModel = learners::KMeansModel<f64>;
pub type DecisionTree = learners::DecisionTree<f64>;
