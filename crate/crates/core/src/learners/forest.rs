use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::tree::{DecisionTree, MaxFeatures, Presorted, Task, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// Bagged Gini trees for binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest<F> {
    trees: Vec<DecisionTree<F>>,
    features_per_split: usize,
    bootstrap_seed: u64,
    n_features: usize,
}

impl<F: Scalar> RandomForest<F> {
    pub fn trees(&self) -> &[DecisionTree<F>] {
        &self.trees
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn features_per_split(&self) -> usize {
        self.features_per_split
    }

    pub fn bootstrap_seed(&self) -> u64 {
        self.bootstrap_seed
    }
}

pub fn fit_random_forest<F: Scalar>(x: &Matrix<F>, y: &[bool], params: &ForestParams) -> Result<RandomForest<F>> {
    if x.nrows() != y.len() {
        return Err(RpuError::DimensionMismatch { expected: x.nrows(), actual: y.len() });
    }
    if y.len() < 2 || y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(RpuError::SingleClass);
    }
    if params.n_trees == 0 {
        return Err(RpuError::InvalidParameter("n_trees must be positive".into()));
    }
    let targets: Vec<F> = y.iter().map(|&b| if b { F::one() } else { F::zero() }).collect();
    let presorted = Presorted::new(x);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features,
    };
    let mut master = ChaCha8Rng::seed_from_u64(params.seed);
    let seeds: Vec<u64> = (0..params.n_trees).map(|_| master.random()).collect();
    let n = x.nrows();

    let trees = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let counts = if params.bootstrap {
                let mut c = vec![0u32; n];
                for _ in 0..n {
                    c[rng.random_range(0..n)] += 1;
                }
                c
            } else {
                vec![1u32; n]
            };
            DecisionTree::fit_presorted(x, &targets, &presorted, &counts, Task::Classification, tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RandomForest {
        trees,
        features_per_split: params.max_features.resolve(x.ncols()),
        bootstrap_seed: params.seed,
        n_features: x.ncols(),
    })
}

/// Class-1 probability per row: mean of the trees' leaf class frequencies.
pub fn rf_predict_proba<F: Scalar>(model: &RandomForest<F>, x: &Matrix<F>) -> Result<Vec<F>> {
    if x.ncols() != model.n_features {
        return Err(RpuError::DimensionMismatch { expected: model.n_features, actual: x.ncols() });
    }
    let n_trees = F::of_usize(model.trees.len());
    let rows: Vec<&[F]> = x.rows_iter().collect();
    Ok(rows
        .par_iter()
        .map(|row| {
            let s: F = model.trees.iter().map(|t| t.predict_row(row)).sum();
            s / n_trees
        })
        .collect())
}

/// Both class probabilities per row.
pub fn rf_predict_class_probabilities<F: Scalar>(model: &RandomForest<F>, x: &Matrix<F>) -> Result<Vec<[F; 2]>> {
    let p1 = rf_predict_proba(model, x)?;
    let n_trees = F::of_usize(model.trees.len());
    Ok(x.rows_iter()
        .zip(p1)
        .map(|(row, p1)| {
            let p0: F = model.trees.iter().map(|t| t.leaf_value(row)[0]).sum::<F>() / n_trees;
            [p0, p1]
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, Normal};

    use super::*;
    use crate::learners::roc_auc;

    fn blobs(n: usize, sep: f64, seed: u64) -> (Matrix<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2 == 0;
            let off = if c { sep } else { -sep };
            rows.push(vec![off + noise.sample(&mut rng), off + noise.sample(&mut rng)]);
            y.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(200, 3.0, 1);
        let f = fit_random_forest(&x, &y, &ForestParams { n_trees: 20, seed: 4, ..Default::default() }).unwrap();
        let p = rf_predict_proba(&f, &x).unwrap();
        let acc = p.iter().zip(&y).filter(|(p, &y)| (**p > 0.5) == y).count();
        assert_eq!(acc, 200);
        assert_eq!(f.n_trees(), 20);
        assert_eq!(f.features_per_split(), 1);
    }

    #[test]
    fn random_labels_give_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..2000).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let y: Vec<bool> = (0..2000).map(|_| rng.random()).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let train: Vec<usize> = (0..1400).collect();
        let test: Vec<usize> = (1400..2000).collect();
        let ytr: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let yte: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        let f = fit_random_forest(&x.select_rows(&train), &ytr, &ForestParams { n_trees: 50, seed: 8, ..Default::default() })
            .unwrap();
        let auc = roc_auc(&yte, &rf_predict_proba(&f, &x.select_rows(&test)).unwrap()).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "{auc}");
    }

    #[test]
    fn xor_is_learnable() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let noise = Normal::new(0.0, 0.15).unwrap();
        let mut make = |n: usize| {
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for i in 0..n {
                let a = (i % 2) as f64;
                let b = ((i / 2) % 2) as f64;
                rows.push(vec![a + noise.sample(&mut rng), b + noise.sample(&mut rng)]);
                y.push((a == 1.0) != (b == 1.0));
            }
            (Matrix::from_rows(&rows).unwrap(), y)
        };
        let (xtr, ytr) = make(400);
        let (xte, yte) = make(400);
        let f = fit_random_forest(&xtr, &ytr, &ForestParams { n_trees: 30, seed: 1, ..Default::default() }).unwrap();
        let p = rf_predict_proba(&f, &xte).unwrap();
        let acc = p.iter().zip(&yte).filter(|(p, &y)| (**p > 0.5) == y).count() as f64 / 400.0;
        assert!(acc > 0.95, "{acc}");
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(fit_random_forest(&x, &[true, true], &ForestParams::default()), Err(RpuError::SingleClass)));
    }

    #[test]
    fn memorising_tree_returns_one_on_pure_training_point() {
        let (x, y) = blobs(50, 0.2, 2);
        let params = ForestParams { n_trees: 1, bootstrap: false, max_features: MaxFeatures::All, ..Default::default() };
        let f = fit_random_forest(&x, &y, &params).unwrap();
        let p = rf_predict_proba(&f, &x).unwrap();
        for (p, &y) in p.iter().zip(&y) {
            assert_eq!(*p, if y { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn probabilities_are_complementary_and_bounded() {
        let (x, y) = blobs(120, 0.5, 3);
        let f = fit_random_forest(&x, &y, &ForestParams { n_trees: 15, seed: 2, ..Default::default() }).unwrap();
        let far = Matrix::from_rows(&[[50.0, 50.0], [-50.0, -50.0], [0.0, 0.0]]).unwrap();
        let probs = rf_predict_class_probabilities(&f, &far).unwrap();
        assert_eq!(probs[0][1], 1.0);
        assert_eq!(probs[1][1], 0.0);
        for [p0, p1] in probs {
            assert!((0.0..=1.0).contains(&p1));
            assert!((p0 + p1 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = blobs(150, 0.4, 7);
        let params = ForestParams { n_trees: 10, seed: 99, ..Default::default() };
        let a = fit_random_forest(&x, &y, &params).unwrap();
        let b = fit_random_forest(&x, &y, &params).unwrap();
        assert_eq!(a, b);
        let pa = rf_predict_proba(&a, &x).unwrap();
        let pb = rf_predict_proba(&b, &x).unwrap();
        assert!(pa.iter().zip(&pb).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn dimension_mismatch_on_predict() {
        let (x, y) = blobs(20, 1.0, 1);
        let f = fit_random_forest(&x, &y, &ForestParams { n_trees: 2, ..Default::default() }).unwrap();
        let bad = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert!(rf_predict_proba(&f, &bad).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let (x, y) = blobs(100, 3.0, 4);
        let x32: Matrix<f32> = x.cast();
        let f = fit_random_forest(&x32, &y, &ForestParams { n_trees: 5, ..Default::default() }).unwrap();
        let p = rf_predict_proba(&f, &x32).unwrap();
        assert!(p.iter().zip(&y).all(|(p, &y)| (*p > 0.5) == y));
    }
}
