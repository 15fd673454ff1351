//! Statistical baseline generators and the versioned model file.

mod bayes_net;
mod copula;
mod gmm;
mod independent;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_model::{DatasetRole, DayOfWeek, Feature, TripDataset, TripRecord};
use crate::error::{Result, RpuError};

pub use bayes_net::{
    fit_bayes_net, fit_priv_bayes, mutual_information, BayesNetModel, CptNode, PrivBayesModel, StructureConfig,
    Variable, VariableKind,
};
pub use copula::{fit_copula, CopulaModel};
pub use gmm::{fit_gmm, fit_gmm_with, GmmComponent, GmmConfig, GmmModel};
pub use independent::{fit_independent, IndependentModel, Marginal};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Rows drawn from one seed-derived stream; output order is fixed by the
/// block layout, not by thread scheduling.
const BLOCK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Independent,
    Gmm,
    Copula,
    BayesNet,
    PrivBayes,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 5] = [
        GeneratorKind::Independent,
        GeneratorKind::Gmm,
        GeneratorKind::Copula,
        GeneratorKind::BayesNet,
        GeneratorKind::PrivBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Independent => "independent",
            GeneratorKind::Gmm => "gmm",
            GeneratorKind::Copula => "copula",
            GeneratorKind::BayesNet => "bayes_net",
            GeneratorKind::PrivBayes => "priv_bayes",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = RpuError;

    fn from_str(s: &str) -> Result<Self> {
        GeneratorKind::ALL.iter().copied().find(|k| k.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = GeneratorKind::ALL.iter().map(|k| k.name()).collect();
            RpuError::InvalidParameter(format!("unknown model kind '{s}'; valid kinds: {}", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Independent(IndependentModel),
    Gmm(GmmModel),
    Copula(CopulaModel),
    BayesNet(BayesNetModel),
    PrivBayes(PrivBayesModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub format_version: u32,
    /// Seed used while fitting (initialisation, privacy noise).
    pub seed: u64,
    pub params: ModelParams,
}

impl GeneratorModel {
    pub fn new(seed: u64, params: ModelParams) -> Self {
        Self { format_version: MODEL_FORMAT_VERSION, seed, params }
    }

    pub fn kind(&self) -> GeneratorKind {
        match self.params {
            ModelParams::Independent(_) => GeneratorKind::Independent,
            ModelParams::Gmm(_) => GeneratorKind::Gmm,
            ModelParams::Copula(_) => GeneratorKind::Copula,
            ModelParams::BayesNet(_) => GeneratorKind::BayesNet,
            ModelParams::PrivBayes(_) => GeneratorKind::PrivBayes,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match &self.params {
            ModelParams::PrivBayes(p) => Some(p.epsilon),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| RpuError::ModelFile(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(RpuError::ModelFile(format!(
                "model file version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| RpuError::Io { path: path.to_owned(), source: e })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RpuError::Io { path: path.to_owned(), source: e })?;
        Self::from_json(&text)
    }
}

/// Model choice and hyper-parameters as written in a benchmark config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Independent,
    Gmm {
        #[serde(default)]
        config: GmmConfig,
    },
    Copula,
    BayesNet {
        #[serde(default)]
        structure: StructureConfig,
    },
    PrivBayes {
        epsilon: f64,
        #[serde(default)]
        structure: StructureConfig,
    },
}

impl GeneratorSpec {
    pub fn default_for(kind: GeneratorKind) -> Self {
        match kind {
            GeneratorKind::Independent => GeneratorSpec::Independent,
            GeneratorKind::Gmm => GeneratorSpec::Gmm { config: GmmConfig::default() },
            GeneratorKind::Copula => GeneratorSpec::Copula,
            GeneratorKind::BayesNet => GeneratorSpec::BayesNet { structure: StructureConfig::default() },
            GeneratorKind::PrivBayes => GeneratorSpec::PrivBayes { epsilon: 1.0, structure: StructureConfig::default() },
        }
    }

    pub fn kind(&self) -> GeneratorKind {
        match self {
            GeneratorSpec::Independent => GeneratorKind::Independent,
            GeneratorSpec::Gmm { .. } => GeneratorKind::Gmm,
            GeneratorSpec::Copula => GeneratorKind::Copula,
            GeneratorSpec::BayesNet { .. } => GeneratorKind::BayesNet,
            GeneratorSpec::PrivBayes { .. } => GeneratorKind::PrivBayes,
        }
    }
}

pub fn fit_generator(spec: &GeneratorSpec, train: &TripDataset, seed: u64) -> Result<GeneratorModel> {
    match spec {
        GeneratorSpec::Independent => fit_independent(train),
        GeneratorSpec::Gmm { config } => fit_gmm_with(train, config, seed),
        GeneratorSpec::Copula => fit_copula(train, seed),
        GeneratorSpec::BayesNet { structure } => fit_bayes_net(train, structure),
        GeneratorSpec::PrivBayes { epsilon, structure } => fit_priv_bayes(train, structure, *epsilon, seed),
    }
}

/// Accumulates one synthetic record feature by feature.
#[derive(Debug, Clone)]
pub(crate) struct Draft {
    origin: String,
    destination: String,
    start_min: i64,
    end_min: i64,
    day_of_week: DayOfWeek,
}

impl Default for Draft {
    fn default() -> Self {
        Self { origin: String::new(), destination: String::new(), start_min: 0, end_min: 0, day_of_week: DayOfWeek::Mon }
    }
}

impl Draft {
    pub(crate) fn set_category(&mut self, f: Feature, v: &str) {
        match f {
            Feature::Origin => v.clone_into(&mut self.origin),
            Feature::Destination => v.clone_into(&mut self.destination),
            Feature::DayOfWeek => self.day_of_week = v.parse().expect("day vocabulary comes from parsed records"),
            _ => unreachable!("{f} is not categorical"),
        }
    }

    /// Times are rounded to whole minutes; no validity repair is applied.
    pub(crate) fn set_minutes(&mut self, f: Feature, v: f64) {
        let m = v.round() as i64;
        match f {
            Feature::StartMin => self.start_min = m,
            Feature::EndMin => self.end_min = m,
            _ => unreachable!("{f} is not continuous"),
        }
    }

    fn finish(self, idx: usize) -> TripRecord {
        TripRecord {
            passenger_id: format!("S{idx}"),
            origin: self.origin,
            destination: self.destination,
            start_min: self.start_min,
            end_min: self.end_min,
            day_of_week: self.day_of_week,
        }
    }
}

pub(crate) trait RecordSampler: Sync {
    fn draw(&self, rng: &mut ChaCha8Rng) -> Draft;
}

/// Index drawn from a discrete distribution given as probabilities.
pub(crate) fn draw_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn sample_with<S: RecordSampler>(s: &S, n: usize, seed: u64) -> Vec<TripRecord> {
    let blocks = n.div_ceil(BLOCK);
    let out: Vec<Vec<TripRecord>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            (lo..hi).map(|i| s.draw(&mut rng).finish(i)).collect()
        })
        .collect();
    out.into_iter().flatten().collect()
}

/// Exactly `n` synthetic records; identical for identical (model, n, seed).
pub fn sample(model: &GeneratorModel, n: usize, seed: u64) -> Result<TripDataset> {
    if n == 0 {
        return Err(RpuError::InvalidParameter("n must be at least 1".into()));
    }
    let records = match &model.params {
        ModelParams::Independent(m) => sample_with(m, n, seed),
        ModelParams::Gmm(m) => sample_with(m, n, seed),
        ModelParams::Copula(m) => sample_with(m, n, seed),
        ModelParams::BayesNet(m) => sample_with(m, n, seed),
        ModelParams::PrivBayes(m) => sample_with(&m.net, n, seed),
    };
    Ok(TripDataset::new(records, DatasetRole::Synthetic, model.kind().name()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{simulate_splits, WorldConfig};

    fn train() -> TripDataset {
        simulate_splits(&WorldConfig::default(), 800, 0, 0).unwrap().train
    }

    fn all_specs() -> Vec<GeneratorSpec> {
        vec![
            GeneratorSpec::Independent,
            GeneratorSpec::Gmm { config: GmmConfig { n_components: 3, ..Default::default() } },
            GeneratorSpec::Copula,
            GeneratorSpec::BayesNet { structure: StructureConfig::default() },
            GeneratorSpec::PrivBayes { epsilon: 1.0, structure: StructureConfig::default() },
        ]
    }

    #[test]
    fn every_kind_samples_exactly_and_reproducibly() {
        let t = train();
        for spec in all_specs() {
            let m = fit_generator(&spec, &t, 3).unwrap();
            assert_eq!(m.kind(), spec.kind());
            let a = sample(&m, 5000, 11).unwrap();
            assert_eq!(a.len(), 5000);
            assert_eq!(a.role(), DatasetRole::Synthetic);
            assert_eq!(a.records()[4999].passenger_id, "S4999");
            assert_eq!(a, sample(&m, 5000, 11).unwrap());
            assert_ne!(a, sample(&m, 5000, 12).unwrap());
            let one = sample(&m, 1, 0).unwrap();
            assert_eq!(one.len(), 1);
            assert!(!one.records()[0].origin.is_empty());
        }
    }

    #[test]
    fn model_file_round_trip() {
        let t = train();
        let dir = tempfile::tempdir().unwrap();
        for spec in all_specs() {
            let m = fit_generator(&spec, &t, 5).unwrap();
            let path = dir.path().join(format!("{}.json", m.kind()));
            m.save(&path).unwrap();
            let back = GeneratorModel::load(&path).unwrap();
            assert_eq!(sample(&back, 300, 1).unwrap(), sample(&m, 300, 1).unwrap());
        }
    }

    #[test]
    fn model_file_version_checked() {
        let m = fit_independent(&train()).unwrap();
        let text = m.to_json().unwrap().replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(matches!(GeneratorModel::from_json(&text), Err(RpuError::ModelFile(_))));
        assert!(GeneratorModel::from_json("{").is_err());
    }

    #[test]
    fn kind_names() {
        assert_eq!("bayes_net".parse::<GeneratorKind>().unwrap(), GeneratorKind::BayesNet);
        let err = "vae".parse::<GeneratorKind>().unwrap_err().to_string();
        assert!(err.contains("independent, gmm, copula, bayes_net, priv_bayes"));
    }

    #[test]
    fn zero_rows_rejected() {
        let m = fit_independent(&train()).unwrap();
        assert!(sample(&m, 0, 0).is_err());
    }

    #[test]
    fn draw_index_follows_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[draw_index(&[0.2, 0.0, 0.8], &mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 30_000.0 - 0.2).abs() < 0.01);
    }
}
