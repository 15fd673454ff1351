use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rpu_core::data_model::Feature;
use rpu_core::privacy::write_score_samples_csv;
use rpu_core::scoring::{build_scorecard, format_leaderboard, rank_models, write_heatmap_csv, Dimension, LeaderboardEntry, ScoreSet};

use crate::config::BenchmarkConfig;
use crate::error::CliError;
use crate::pipeline::{FailureEntry, ModelOutcome, ModelPlots, ModelReport, RealData, TestSource};

pub const REPORT_FORMAT_VERSION: u32 = 1;

const COMPARATIVE_NOTE: &str = "Scores are min-max normalized across the models evaluated together. \
    A low score means comparatively weaker than the other models in this run, not poor in absolute terms.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub train_n: usize,
    pub holdout_n: usize,
    pub test_n: usize,
    pub test_source: TestSource,
    pub features: Vec<Feature>,
}

impl DataSummary {
    pub fn new(data: &RealData, cfg: &BenchmarkConfig) -> Self {
        Self {
            train_n: data.train.len(),
            holdout_n: data.holdout.len(),
            test_n: data.test.len(),
            test_source: data.test_source,
            features: cfg.features.clone(),
        }
    }
}

/// Contents of `report.json`. Apart from `generated_at` every field is a
/// function of the config, the inputs and the seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub tool_version: String,
    pub generated_at: String,
    pub command: String,
    pub note: String,
    pub seed: u64,
    pub data: DataSummary,
    pub models: Vec<ModelReport>,
    pub failures: Vec<FailureEntry>,
    pub scorecard: Option<ScoreSet>,
    pub leaderboards: BTreeMap<String, Vec<LeaderboardEntry>>,
}

impl Report {
    /// Assembles the report; models keep the order they were given in.
    pub fn assemble(
        command: &str,
        cfg: &BenchmarkConfig,
        data: DataSummary,
        models: Vec<ModelReport>,
        mut failures: Vec<FailureEntry>,
    ) -> Self {
        let raw = models.iter().map(|m| (m.model.clone(), m.raw)).collect();
        let scorecard = if models.is_empty() {
            None
        } else {
            match build_scorecard(&raw, &cfg.scoring) {
                Ok(s) => Some(s),
                Err(e) => {
                    failures.push(FailureEntry::new("*", "scoring", e));
                    None
                }
            }
        };
        let leaderboards = scorecard
            .as_ref()
            .map(|s| Dimension::ALL.iter().map(|&d| (d.name().to_owned(), rank_models(&s.cards, d))).collect())
            .unwrap_or_default();
        Self {
            format_version: REPORT_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            command: command.to_owned(),
            note: COMPARATIVE_NOTE.to_owned(),
            seed: cfg.seed,
            data,
            models,
            failures,
            scorecard,
            leaderboards,
        }
    }

    pub fn leaderboard_text(&self) -> String {
        match &self.scorecard {
            Some(s) => {
                let mut out = format_leaderboard(&s.cards);
                for w in &s.warnings {
                    out.push_str(&format!("warning: {w}\n"));
                }
                for f in &self.failures {
                    out.push_str(&format!("failed: {} ({}): {}\n", f.model, f.stage, f.error));
                }
                out.push_str(&format!("\n{}\n", self.note));
                out
            }
            None => "no scorecard: every model failed\n".to_owned(),
        }
    }
}

/// Run metadata that is allowed to vary between reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub generated_at: String,
    pub command: String,
    pub config: BenchmarkConfig,
    pub seed: u64,
    pub jobs: usize,
    pub models: Vec<ManifestModel>,
    pub timings_ms: BTreeMap<String, u128>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestModel {
    pub name: String,
    pub kind: Option<String>,
    pub seed: Option<u64>,
    pub source: Option<PathBuf>,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|e| CliError::io(path, e))
}

/// File-name safe version of a model name.
fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' }).collect()
}

/// Writes `report.json`, `scorecard.{csv,json}` and `leaderboard.txt`.
/// Returns the relative paths written.
pub fn write_report_files(report: &Report, out: &Path) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut files = vec!["report.json".to_owned(), "leaderboard.txt".to_owned()];
    let json = serde_json::to_string_pretty(report).map_err(rpu_core::RpuError::from)?;
    write(&out.join("report.json"), json + "\n")?;
    write(&out.join("leaderboard.txt"), report.leaderboard_text())?;
    if let Some(s) = &report.scorecard {
        write_heatmap_csv(&s.cards, create(&out.join("scorecard.csv"))?)?;
        let json = serde_json::to_string_pretty(s).map_err(rpu_core::RpuError::from)?;
        write(&out.join("scorecard.json"), json + "\n")?;
        files.extend(["scorecard.csv".to_owned(), "scorecard.json".to_owned()]);
    }
    Ok(files)
}

/// Plot data under `plots/`: attack scores, centroid projections and the
/// divergence tables, all as CSV or JSON for any plotting tool.
pub fn write_plot_files(models: &[&ModelOutcome], out: &Path) -> Result<Vec<String>, CliError> {
    let dir = out.join("plots");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut files = Vec::new();
    let csv_err = |e: csv::Error| CliError::Core(e.into());

    let mut pop = csv::Writer::from_writer(create(&dir.join("divergence_population.csv"))?);
    pop.write_record(["model", "feature", "kld", "jsd", "emd"]).map_err(csv_err)?;
    let mut grp = csv::Writer::from_writer(create(&dir.join("divergence_group.csv"))?);
    grp.write_record(["model", "group", "feature", "kld", "jsd", "emd"]).map_err(csv_err)?;
    let mut knn = csv::Writer::from_writer(create(&dir.join("knn_groups.csv"))?);
    knn.write_record(["model", "group", "ratio", "real_n", "syn_n", "risk"]).map_err(csv_err)?;
    let mut pca = csv::Writer::from_writer(create(&dir.join("centroids_pca.csv"))?);
    pca.write_record(["model", "set", "cluster", "pc1", "pc2"]).map_err(csv_err)?;
    let f = |v: f64| format!("{v:.9}");

    for m in models {
        let r = &m.report;
        for (feat, d) in &r.population.features {
            pop.write_record([r.model.as_str(), feat.name(), &f(d.kld), &f(d.jsd), &f(d.emd)]).map_err(csv_err)?;
        }
        if let Some(g) = &r.group.groups {
            for (key, entry) in &g.groups {
                for (feat, d) in &entry.features {
                    grp.write_record([r.model.as_str(), key, feat.name(), &f(d.kld), &f(d.jsd), &f(d.emd)])
                        .map_err(csv_err)?;
                }
            }
        }
        for (key, g) in &r.knn.group_ratios {
            let risk = serde_json::to_value(g.risk).map_err(rpu_core::RpuError::from)?;
            knn.write_record([
                r.model.as_str(),
                key,
                &f(g.ratio),
                &g.real_n.to_string(),
                &g.syn_n.to_string(),
                risk.as_str().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        if let Some(p) = &r.clustering.pca_projection {
            for (set, pts) in [("real", &p.real), ("synthetic", &p.syn)] {
                for (i, [a, b]) in pts.iter().enumerate() {
                    pca.write_record([r.model.as_str(), set, &i.to_string(), &f(*a), &f(*b)]).map_err(csv_err)?;
                }
            }
        }
        files.extend(write_model_plots(&r.model, &m.plots, &dir)?);
    }
    for w in [&mut pop, &mut grp, &mut knn, &mut pca] {
        w.flush().map_err(|e| CliError::io(&dir, e))?;
    }
    files.extend(
        ["divergence_population.csv", "divergence_group.csv", "knn_groups.csv", "centroids_pca.csv"]
            .map(|s| format!("plots/{s}")),
    );
    files.sort();
    Ok(files)
}

fn write_model_plots(model: &str, plots: &ModelPlots, dir: &Path) -> Result<Vec<String>, CliError> {
    let base = slug(model);
    let scores = format!("mia_scores_{base}.csv");
    let hist = format!("mia_histogram_{base}.json");
    write_score_samples_csv(&plots.mia, create(&dir.join(&scores))?)?;
    let json = serde_json::to_string_pretty(&plots.mia_histogram).map_err(rpu_core::RpuError::from)?;
    write(&dir.join(&hist), json + "\n")?;
    Ok(vec![format!("plots/{scores}"), format!("plots/{hist}")])
}

pub fn write_manifest(manifest: &Manifest, out: &Path) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest).map_err(rpu_core::RpuError::from)?;
    write(&out.join("manifest.json"), json + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(slug("priv_bayes eps=0.1"), "priv_bayes_eps_0.1");
        assert_eq!(slug("a/b"), "a_b");
    }
}
