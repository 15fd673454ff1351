//! Small self-contained learners used by the evaluators and generators.

mod auc;
mod boosting;
mod forest;
mod kmeans;
mod knn;
mod pca;
mod tree;

pub use auc::roc_auc;
pub use boosting::{fit_gradient_boosting, BoostingParams, GradientBoostingModel};
pub use forest::{fit_random_forest, rf_predict_class_probabilities, rf_predict_proba, ForestParams, RandomForest};
pub use kmeans::{kmeans_fit, kmeans_fit_traced, kmeans_fit_with, IterationInertia, KMeansModel, KMeansParams};
pub use knn::{knn_distances, KnnIndex};
pub use pca::{pca_2d, Pca2};
pub use tree::{DecisionTree, MaxFeatures, Node, Task, TreeParams};
