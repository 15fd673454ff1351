use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{draw_index, Draft, GeneratorModel, ModelParams, RecordSampler};
use crate::data_model::{Feature, TripDataset, TripRecord};
use crate::error::{Result, RpuError};
use crate::metrics::Support;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    /// Equal-width bins over the train range for each time feature.
    pub bins: usize,
    /// Explicit parent lists; when absent a Chow-Liu tree is learned.
    pub parents: Option<BTreeMap<Feature, Vec<Feature>>>,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self { bins: 48, parents: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VariableKind {
    Categorical { values: Vec<String> },
    Binned { min: f64, max: f64, bins: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub feature: Feature,
    pub kind: VariableKind,
}

impl Variable {
    pub fn cardinality(&self) -> usize {
        match &self.kind {
            VariableKind::Categorical { values } => values.len(),
            VariableKind::Binned { bins, .. } => *bins,
        }
    }

    fn code(&self, r: &TripRecord) -> usize {
        match &self.kind {
            VariableKind::Categorical { values } => {
                let v = r.category(self.feature).unwrap();
                values.iter().position(|s| s == v).expect("vocabulary fitted on this data")
            }
            VariableKind::Binned { min, max, bins } => {
                let v = r.minutes(self.feature).unwrap();
                let u = if max > min { (v - min) / (max - min) } else { 0.5 };
                Support::<f64>::equal_width(0.0, 1.0, *bins).unwrap().bin_of(u).unwrap()
            }
        }
    }

    /// The category, or a uniform draw inside the bin.
    fn emit<R: Rng>(&self, code: usize, draft: &mut Draft, rng: &mut R) {
        match &self.kind {
            VariableKind::Categorical { values } => draft.set_category(self.feature, &values[code]),
            VariableKind::Binned { min, max, bins } => {
                let u = (code as f64 + rng.random::<f64>()) / *bins as f64;
                draft.set_minutes(self.feature, min + u * (max - min));
            }
        }
    }
}

/// One variable with its parents and a conditional table per parent state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptNode {
    pub var: usize,
    pub parents: Vec<usize>,
    /// `table[config][value]`; parent states are mixed-radix with the first
    /// parent most significant.
    pub table: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesNetModel {
    pub variables: Vec<Variable>,
    /// In topological order.
    pub nodes: Vec<CptNode>,
    /// Learned tree edges (parent, child, mutual information in nats).
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivBayesModel {
    pub epsilon: f64,
    pub n_tables: usize,
    /// Laplace scale applied to every count, 1 / (epsilon / n_tables).
    pub noise_scale: f64,
    pub net: BayesNetModel,
}

fn variables(train: &TripDataset, bins: usize) -> Result<Vec<Variable>> {
    if bins == 0 {
        return Err(RpuError::InvalidParameter("bins must be positive".into()));
    }
    Ok(Feature::ALL
        .iter()
        .map(|&f| {
            let kind = if f.is_categorical() {
                let mut values: Vec<String> = Vec::new();
                for r in train.iter() {
                    let v = r.category(f).unwrap();
                    if !values.iter().any(|s| s == v) {
                        values.push(v.to_owned());
                    }
                }
                VariableKind::Categorical { values }
            } else {
                let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
                for r in train.iter() {
                    let v = r.minutes(f).unwrap();
                    min = min.min(v);
                    max = max.max(v);
                }
                VariableKind::Binned { min, max, bins }
            };
            Variable { feature: f, kind }
        })
        .collect())
}

/// Mutual information (nats) of a joint count table laid out `a * cb + b`.
pub fn mutual_information(counts: &[f64], ca: usize, cb: usize) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut pa = vec![0.0; ca];
    let mut pb = vec![0.0; cb];
    for a in 0..ca {
        for b in 0..cb {
            let p = counts[a * cb + b] / total;
            pa[a] += p;
            pb[b] += p;
        }
    }
    let mut mi = 0.0;
    for a in 0..ca {
        for b in 0..cb {
            let p = counts[a * cb + b] / total;
            if p > 0.0 {
                mi += p * (p / (pa[a] * pb[b])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Laplace(0, scale) by inverse transform.
fn laplace<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let t = 1.0 - 2.0 * u.abs();
        if t > 0.0 {
            return -scale * u.signum() * t.ln();
        }
    }
}

struct Noise {
    rng: ChaCha8Rng,
    scale: f64,
}

impl Noise {
    /// Perturbs counts and clamps negatives to zero.
    fn apply(&mut self, counts: &mut [f64]) {
        for c in counts {
            *c = (*c + laplace(&mut self.rng, self.scale)).max(0.0);
        }
    }
}

/// Maximum spanning tree on pairwise information (Prim from variable 0).
fn chow_liu(mi: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
    let p = mi.len();
    let mut in_tree = vec![false; p];
    in_tree[0] = true;
    let mut edges = Vec::with_capacity(p.saturating_sub(1));
    for _ in 1..p {
        let mut best: Option<(usize, usize, f64)> = None;
        for u in (0..p).filter(|&u| in_tree[u]) {
            for v in (0..p).filter(|&v| !in_tree[v]) {
                if best.is_none_or(|b| mi[u][v] > b.2) {
                    best = Some((u, v, mi[u][v]));
                }
            }
        }
        let (u, v, w) = best.expect("a vertex remains outside the tree");
        in_tree[v] = true;
        edges.push((u, v, w));
    }
    edges
}

/// Kahn's algorithm; lower variable index first among ready nodes.
fn topological_order(parents: &[Vec<usize>]) -> Result<Vec<usize>> {
    let p = parents.len();
    let mut indeg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut order = Vec::with_capacity(p);
    let mut done = vec![false; p];
    while order.len() < p {
        let Some(next) = (0..p).find(|&v| !done[v] && indeg[v] == 0) else {
            return Err(RpuError::InvalidParameter("parent lists contain a cycle; a DAG is required".into()));
        };
        done[next] = true;
        order.push(next);
        for (v, ps) in parents.iter().enumerate() {
            indeg[v] -= ps.iter().filter(|&&q| q == next).count();
        }
    }
    Ok(order)
}

fn fit_network(train: &TripDataset, cfg: &StructureConfig, mut noise: Option<&mut Noise>) -> Result<BayesNetModel> {
    train.ensure_non_empty()?;
    let vars = variables(train, cfg.bins)?;
    let p = vars.len();
    let codes: Vec<Vec<usize>> = train.iter().map(|r| vars.iter().map(|v| v.code(r)).collect()).collect();
    let card: Vec<usize> = vars.iter().map(Variable::cardinality).collect();

    let (parents, edges) = match &cfg.parents {
        Some(map) => {
            let index = |f: &Feature| Feature::ALL.iter().position(|g| g == f).expect("every feature is a variable");
            let mut parents = vec![Vec::new(); p];
            for (child, ps) in map {
                parents[index(child)] = ps.iter().map(index).collect();
            }
            (parents, Vec::new())
        }
        None => {
            let mut mi = vec![vec![0.0; p]; p];
            for a in 0..p {
                for b in (a + 1)..p {
                    let mut counts = vec![0.0; card[a] * card[b]];
                    for row in &codes {
                        counts[row[a] * card[b] + row[b]] += 1.0;
                    }
                    if let Some(n) = noise.as_deref_mut() {
                        n.apply(&mut counts);
                    }
                    let v = mutual_information(&counts, card[a], card[b]);
                    mi[a][b] = v;
                    mi[b][a] = v;
                }
            }
            let edges = chow_liu(&mi);
            let mut parents = vec![Vec::new(); p];
            for &(u, v, _) in &edges {
                parents[v].push(u);
            }
            (parents, edges)
        }
    };
    let order = topological_order(&parents)?;

    let nodes = order
        .into_iter()
        .map(|v| {
            let ps = parents[v].clone();
            let configs: usize = ps.iter().map(|&q| card[q]).product();
            let mut counts = vec![0.0; configs * card[v]];
            for row in &codes {
                let cfg_idx = ps.iter().fold(0, |acc, &q| acc * card[q] + row[q]);
                counts[cfg_idx * card[v] + row[v]] += 1.0;
            }
            if let Some(n) = noise.as_deref_mut() {
                n.apply(&mut counts);
            }
            let table = counts
                .chunks(card[v])
                .map(|c| {
                    let total: f64 = c.iter().map(|x| x + 1.0).sum();
                    c.iter().map(|x| (x + 1.0) / total).collect()
                })
                .collect();
            CptNode { var: v, parents: ps, table }
        })
        .collect();
    Ok(BayesNetModel { variables: vars, nodes, edges })
}

pub fn fit_bayes_net(train: &TripDataset, cfg: &StructureConfig) -> Result<GeneratorModel> {
    Ok(GeneratorModel::new(0, ModelParams::BayesNet(fit_network(train, cfg, None)?)))
}

/// Bayesian network whose count tables carry Laplace noise. The budget is
/// split evenly over every table touched (pairwise structure tables and one
/// table per node). This is an educational baseline, not an audited
/// differential-privacy implementation.
pub fn fit_priv_bayes(train: &TripDataset, cfg: &StructureConfig, epsilon: f64, seed: u64) -> Result<GeneratorModel> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(RpuError::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let p = Feature::ALL.len();
    let n_tables = p + if cfg.parents.is_none() { p * (p - 1) / 2 } else { 0 };
    let noise_scale = n_tables as f64 / epsilon;
    let mut noise = Noise { rng: ChaCha8Rng::seed_from_u64(seed), scale: noise_scale };
    let net = fit_network(train, cfg, Some(&mut noise))?;
    Ok(GeneratorModel::new(seed, ModelParams::PrivBayes(PrivBayesModel { epsilon, n_tables, noise_scale, net })))
}

impl RecordSampler for BayesNetModel {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Draft {
        let mut state = vec![0usize; self.variables.len()];
        for node in &self.nodes {
            let cfg_idx =
                node.parents.iter().fold(0, |acc, &q| acc * self.variables[q].cardinality() + state[q]);
            state[node.var] = draw_index(&node.table[cfg_idx], rng);
        }
        let mut d = Draft::default();
        for (v, &code) in self.variables.iter().zip(&state) {
            v.emit(code, &mut d, rng);
        }
        d
    }
}
