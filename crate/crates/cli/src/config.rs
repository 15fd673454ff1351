use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rpu_core::data_model::Feature;
use rpu_core::generators::GeneratorSpec;
use rpu_core::privacy::{AttackConfig, KnnConfig};
use rpu_core::representativeness::RepresentativenessConfig;
use rpu_core::scoring::ScoringConfig;
use rpu_core::utility::{ClusteringConfig, PredictionConfig};
use rpu_core::world::WorldConfig;

use crate::error::CliError;

/// Everything a run depends on besides the input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Base seed; model `i` without an explicit seed uses `seed + i`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_features")]
    pub features: Vec<Feature>,
    pub data: DataConfig,
    #[serde(default)]
    pub representativeness: RepresentativenessConfig,
    #[serde(default)]
    pub privacy: PrivacyConfig,
    #[serde(default)]
    pub utility: UtilityConfig,
    #[serde(default)]
    pub scoring: ScoringConfig,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn all_features() -> Vec<Feature> {
    Feature::ALL.to_vec()
}

/// Either CSV paths (relative to the config file) or a simulated world.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub holdout: Option<PathBuf>,
    /// Evaluation reference for divergences and utility; defaults to holdout.
    pub test: Option<PathBuf>,
    pub world: Option<WorldData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorldData {
    pub n_stations: usize,
    pub n_passengers: usize,
    pub seed: u64,
    pub train: usize,
    pub holdout: usize,
    pub test: usize,
}

impl Default for WorldData {
    fn default() -> Self {
        let w = WorldConfig::default();
        Self { n_stations: w.n_stations, n_passengers: w.n_passengers, seed: w.seed, train: 5000, holdout: 2500, test: 2500 }
    }
}

impl WorldData {
    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            n_stations: self.n_stations,
            n_passengers: self.n_passengers,
            n_trips: self.train + self.holdout + self.test,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrivacyConfig {
    pub knn: KnnConfig,
    pub attack: AttackConfig,
    /// Bins for the exported attack-score histograms.
    pub score_bins: usize,
}

impl Default for PrivacyConfig {
    fn default() -> Self {
        Self { knn: KnnConfig::default(), attack: AttackConfig::default(), score_bins: 20 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilityConfig {
    pub clustering: ClusteringConfig,
    pub prediction: PredictionConfig,
}

/// One generator in a benchmark. The generator keys (`kind`, `epsilon`,
/// `structure`, `config`) sit next to the entry's own keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "toml::Table")]
pub struct ModelEntry {
    /// Report name; defaults to the kind.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Rows to sample; defaults to the train size.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(flatten)]
    pub spec: GeneratorSpec,
}

impl TryFrom<toml::Table> for ModelEntry {
    type Error = String;

    fn try_from(mut t: toml::Table) -> Result<Self, String> {
        fn take<T: serde::de::DeserializeOwned>(t: &mut toml::Table, key: &str) -> Result<Option<T>, String> {
            t.remove(key).map(|v| v.try_into().map_err(|e: toml::de::Error| format!("`{key}`: {}", e.message()))).transpose()
        }
        let name = take(&mut t, "name")?;
        let seed = take(&mut t, "seed")?;
        let n = take(&mut t, "n")?;
        let spec: GeneratorSpec = toml::Value::Table(t.clone()).try_into().map_err(|e: toml::de::Error| e.message().to_owned())?;
        // flattened unit variants would otherwise swallow stray keys
        let known = toml::Table::try_from(&spec).map_err(|e| e.to_string())?;
        if let Some(k) = t.keys().find(|k| !known.contains_key(*k)) {
            return Err(format!("unknown field `{k}` for generator `{}`", spec.kind().name()));
        }
        Ok(Self { name, seed, n, spec })
    }
}

impl ModelEntry {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.spec.kind().name().to_owned())
    }
}

impl BenchmarkConfig {
    /// The bundled demo: a simulated world and the five baseline generators.
    pub fn demo() -> Self {
        toml::from_str(DEMO_CONFIG).expect("bundled demo config parses")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves data paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.train, &mut cfg.data.holdout, &mut cfg.data.test].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.data;
        match (&d.world, &d.train, &d.holdout) {
            (Some(_), None, None) if d.test.is_none() => {}
            (None, Some(_), Some(_)) => {}
            (Some(_), _, _) => return Err(CliError::Usage("data: give either `world` or CSV paths, not both".into())),
            _ => return Err(CliError::Usage("data: `train` and `holdout` paths are required".into())),
        }
        if self.features.is_empty() {
            return Err(CliError::Usage("features: at least one feature is required".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f) {
                return Err(CliError::Usage(format!("features: '{f}' listed twice")));
            }
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            let name = m.display_name();
            if !names.insert(name.clone()) {
                return Err(CliError::Usage(format!("models: duplicate name '{name}'")));
            }
            if m.n == Some(0) {
                return Err(CliError::Usage(format!("models: '{name}' has n = 0")));
            }
        }
        Ok(())
    }

    pub fn model_seed(&self, index: usize) -> u64 {
        self.models[index].seed.unwrap_or(self.seed.wrapping_add(index as u64))
    }
}

pub const DEMO_CONFIG: &str = include_str!("../demo/benchmark.toml");
