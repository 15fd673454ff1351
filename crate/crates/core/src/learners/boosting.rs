use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::tree::{DecisionTree, MaxFeatures, Presorted, Task, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoostingParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn (without replacement) for each stage.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self { n_stages: 100, learning_rate: 0.1, max_depth: 3, min_samples_leaf: 1, subsample: 1.0, seed: 0 }
    }
}

/// Squared-error gradient boosting: `base + lr * sum(tree outputs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostingModel<F> {
    base_prediction: F,
    trees: Vec<DecisionTree<F>>,
    learning_rate: F,
    n_stages: usize,
    /// Training MSE after the base prediction and after every stage.
    train_loss: Vec<F>,
}

impl<F: Scalar> GradientBoostingModel<F> {
    pub fn base_prediction(&self) -> F {
        self.base_prediction
    }

    pub fn trees(&self) -> &[DecisionTree<F>] {
        &self.trees
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    pub fn train_loss(&self) -> &[F] {
        &self.train_loss
    }

    pub fn predict_row(&self, row: &[F]) -> F {
        let s: F = self.trees.iter().map(|t| t.predict_row(row)).sum();
        self.base_prediction + self.learning_rate * s
    }

    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<F>> {
        if let Some(t) = self.trees.first() {
            if t.n_features() != x.ncols() {
                return Err(RpuError::DimensionMismatch { expected: t.n_features(), actual: x.ncols() });
            }
        }
        Ok(x.rows_iter().map(|r| self.predict_row(r)).collect())
    }
}

fn mse<F: Scalar>(y: &[F], pred: &[F]) -> F {
    let s: F = y.iter().zip(pred).map(|(&a, &b)| (a - b) * (a - b)).sum();
    s / F::of_usize(y.len())
}

pub fn fit_gradient_boosting<F: Scalar>(
    x: &Matrix<F>,
    y: &[F],
    params: &BoostingParams,
) -> Result<GradientBoostingModel<F>> {
    if x.nrows() != y.len() {
        return Err(RpuError::DimensionMismatch { expected: x.nrows(), actual: y.len() });
    }
    if y.len() < 10 {
        return Err(RpuError::InvalidParameter(format!("boosting needs at least 10 rows, got {}", y.len())));
    }
    if !(params.learning_rate > 0.0) || !(params.subsample > 0.0 && params.subsample <= 1.0) {
        return Err(RpuError::InvalidParameter("learning_rate must be > 0 and subsample in (0, 1]".into()));
    }
    let n = y.len();
    let base = y.iter().copied().sum::<F>() / F::of_usize(n);
    if y.iter().all(|&v| v == y[0]) {
        log::warn!("gradient boosting target is constant; model reduces to its mean");
    }
    let lr = F::of(params.learning_rate);
    let presorted = Presorted::new(x);
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_samples_leaf: params.min_samples_leaf,
        max_features: MaxFeatures::All,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut pred = vec![base; n];
    let mut train_loss = vec![mse(y, &pred)];
    let mut trees = Vec::with_capacity(params.n_stages);
    let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    for _ in 0..params.n_stages {
        let residual: Vec<F> = y.iter().zip(&pred).map(|(&a, &b)| a - b).collect();
        let counts = if take < n {
            let mut c = vec![0u32; n];
            for i in rand::seq::index::sample(&mut rng, n, take) {
                c[i] = 1;
            }
            c
        } else {
            vec![1u32; n]
        };
        let tree =
            DecisionTree::fit_presorted(x, &residual, &presorted, &counts, Task::Regression, tree_params, &mut rng)?;
        for (p, row) in pred.iter_mut().zip(x.rows_iter()) {
            *p = *p + lr * tree.predict_row(row);
        }
        train_loss.push(mse(y, &pred));
        trees.push(tree);
    }

    Ok(GradientBoostingModel { base_prediction: base, trees, learning_rate: lr, n_stages: params.n_stages, train_loss })
}
