//! CART trees shared by the random forest (Gini) and gradient boosting
//! (squared error).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Binary targets (0 or 1); leaves hold `[p(0), p(1)]`.
    Classification,
    /// Real targets; leaves hold `[mean]`.
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Count(n) => n.clamp(1, d.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_leaf: 1, max_features: MaxFeatures::All }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<F> {
    Split { feature: usize, threshold: F, left: usize, right: usize },
    Leaf { value: Vec<F> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<F> {
    nodes: Vec<Node<F>>,
    task: Task,
    max_depth: Option<usize>,
    min_samples_leaf: usize,
    n_features: usize,
}

/// Row ids sorted by each column once, reused across trees and stages.
#[derive(Debug, Clone)]
pub struct Presorted {
    order: Vec<Vec<u32>>,
    n_rows: usize,
}

impl Presorted {
    pub fn new<F: Scalar>(x: &Matrix<F>) -> Self {
        let order = (0..x.ncols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.nrows() as u32).collect();
                idx.sort_by(|&a, &b| {
                    x.get(a as usize, j).partial_cmp(&x.get(b as usize, j)).unwrap_or(std::cmp::Ordering::Equal)
                });
                idx
            })
            .collect();
        Self { order, n_rows: x.nrows() }
    }

    /// Sorted lists for a weighted sample: row `i` appears `counts[i]` times.
    fn with_multiplicity(&self, counts: &[u32]) -> Vec<Vec<u32>> {
        self.order
            .iter()
            .map(|col| {
                let mut out = Vec::with_capacity(counts.iter().map(|&c| c as usize).sum());
                for &i in col {
                    for _ in 0..counts[i as usize] {
                        out.push(i);
                    }
                }
                out
            })
            .collect()
    }
}

struct Builder<'a, F, R> {
    x: &'a Matrix<F>,
    y: &'a [F],
    task: Task,
    params: TreeParams,
    mtry: usize,
    rng: &'a mut R,
    nodes: Vec<Node<F>>,
    goes_left: Vec<bool>,
}

struct Best<F> {
    score: F,
    feature: usize,
    threshold: F,
}

impl<F: Scalar, R: Rng> Builder<'_, F, R> {
    fn leaf_value(&self, rows: &[u32]) -> Vec<F> {
        let n = F::of_usize(rows.len());
        let s: F = rows.iter().map(|&i| self.y[i as usize]).sum();
        match self.task {
            Task::Classification => {
                let p1 = s / n;
                vec![F::one() - p1, p1]
            }
            Task::Regression => vec![s / n],
        }
    }

    /// Split score to maximise: `sum(y)^2 / n` per side for squared error,
    /// `(pos^2 + neg^2) / n` per side for Gini; both are equivalent to
    /// minimising the weighted child impurity.
    fn side_score(&self, sum: F, n: usize) -> F {
        let nf = F::of_usize(n);
        match self.task {
            Task::Classification => (sum * sum + (nf - sum) * (nf - sum)) / nf,
            Task::Regression => sum * sum / nf,
        }
    }

    fn is_pure(&self, rows: &[u32]) -> bool {
        let first = self.y[rows[0] as usize];
        rows.iter().all(|&i| self.y[i as usize] == first)
    }

    fn best_split(&mut self, sorted: &[Vec<u32>]) -> Option<Best<F>> {
        let d = self.x.ncols();
        let n = sorted[0].len();
        let msl = self.params.min_samples_leaf.max(1);
        let total: F = sorted[0].iter().map(|&i| self.y[i as usize]).sum();
        let mut features: Vec<usize> = (0..d).collect();
        if self.mtry < d {
            features.shuffle(self.rng);
        }
        let mut best: Option<Best<F>> = None;
        for (visited, &f) in features.iter().enumerate() {
            if visited >= self.mtry && best.is_some() {
                break;
            }
            let col = &sorted[f];
            let mut left_sum = F::zero();
            for pos in 0..n - 1 {
                let i = col[pos] as usize;
                left_sum = left_sum + self.y[i];
                let nl = pos + 1;
                if nl < msl || n - nl < msl {
                    continue;
                }
                let a = self.x.get(i, f);
                let b = self.x.get(col[pos + 1] as usize, f);
                if !(b > a) {
                    continue;
                }
                let score = self.side_score(left_sum, nl) + self.side_score(total - left_sum, n - nl);
                if best.as_ref().is_none_or(|bs| score > bs.score) {
                    let mid = (a + b) * F::of(0.5);
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Best { score, feature: f, threshold });
                }
            }
        }
        best
    }

    fn grow(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let rows = &sorted[0];
        let n = rows.len();
        let at_depth_limit = self.params.max_depth.is_some_and(|m| depth >= m);
        if at_depth_limit || n < 2 * self.params.min_samples_leaf.max(1) || self.is_pure(rows) {
            return self.push_leaf(rows);
        }
        let Some(best) = self.best_split(&sorted) else {
            return self.push_leaf(rows);
        };
        for &i in rows {
            self.goes_left[i as usize] = self.x.get(i as usize, best.feature) <= best.threshold;
        }
        let mut left = Vec::with_capacity(sorted.len());
        let mut right = Vec::with_capacity(sorted.len());
        for col in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = col.into_iter().partition(|&i| self.goes_left[i as usize]);
            left.push(l);
            right.push(r);
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: Vec::new() });
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split { feature: best.feature, threshold: best.threshold, left: l, right: r };
        id
    }

    fn push_leaf(&mut self, rows: &[u32]) -> usize {
        let value = self.leaf_value(rows);
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }
}

impl<F: Scalar> DecisionTree<F> {
    /// Fits on the rows of `x` weighted by `counts` (bootstrap multiplicities;
    /// zero drops a row).
    pub(crate) fn fit_presorted<R: Rng>(
        x: &Matrix<F>,
        y: &[F],
        presorted: &Presorted,
        counts: &[u32],
        task: Task,
        params: TreeParams,
        rng: &mut R,
    ) -> Result<Self> {
        if y.len() != x.nrows() || presorted.n_rows != x.nrows() || counts.len() != x.nrows() {
            return Err(RpuError::DimensionMismatch { expected: x.nrows(), actual: y.len() });
        }
        let sorted = presorted.with_multiplicity(counts);
        if x.ncols() == 0 || sorted[0].is_empty() {
            return Err(RpuError::InvalidParameter("tree needs at least one row and one column".into()));
        }
        let mut b = Builder {
            x,
            y,
            task,
            params,
            mtry: params.max_features.resolve(x.ncols()),
            rng,
            nodes: Vec::new(),
            goes_left: vec![false; x.nrows()],
        };
        b.grow(sorted, 0);
        Ok(Self {
            nodes: b.nodes,
            task,
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            n_features: x.ncols(),
        })
    }

    /// Fits on every row once.
    pub fn fit<R: Rng>(x: &Matrix<F>, y: &[F], task: Task, params: TreeParams, rng: &mut R) -> Result<Self> {
        let presorted = Presorted::new(x);
        Self::fit_presorted(x, y, &presorted, &vec![1; x.nrows()], task, params, rng)
    }

    pub fn leaf_value(&self, row: &[F]) -> &[F] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split { feature, threshold, left, right } => {
                    id = if row[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { value } => return value,
            }
        }
    }

    /// Regression output, or the class-1 probability for classifiers.
    pub fn predict_row(&self, row: &[F]) -> F {
        let v = self.leaf_value(row);
        match self.task {
            Task::Classification => v[1],
            Task::Regression => v[0],
        }
    }

    pub fn predict(&self, x: &Matrix<F>) -> Result<Vec<F>> {
        if x.ncols() != self.n_features {
            return Err(RpuError::DimensionMismatch { expected: self.n_features, actual: x.ncols() });
        }
        Ok(x.rows_iter().map(|r| self.predict_row(r)).collect())
    }

    pub fn nodes(&self) -> &[Node<F>] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.max_depth
    }

    pub fn min_samples_leaf(&self) -> usize {
        self.min_samples_leaf
    }

    /// Length of the longest root-to-leaf path, in edges.
    pub fn depth(&self) -> usize {
        fn walk<F>(nodes: &[Node<F>], id: usize) -> usize {
            match &nodes[id] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}
