//! Cross-model min-max normalization and aggregation of the raw indicators.
//! Scores are comparative: 0 marks the weakest model on an indicator among
//! those evaluated together, not an absolute failure.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::metrics::FeatureDivergence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// Score given to every model when an indicator does not discriminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantRule {
    #[default]
    One,
    Half,
}

impl ConstantRule {
    fn value(self) -> f64 {
        match self {
            ConstantRule::One => 1.0,
            ConstantRule::Half => 0.5,
        }
    }
}

pub fn minmax_normalize(
    values: &BTreeMap<String, f64>,
    direction: Direction,
    constant: ConstantRule,
) -> Result<BTreeMap<String, f64>> {
    if values.is_empty() {
        return Err(RpuError::InvalidParameter("nothing to normalize".into()));
    }
    if let Some((m, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(RpuError::NonFinite(format!("model '{m}' has value {v}")));
    }
    let lo = values.values().copied().fold(f64::INFINITY, f64::min);
    let hi = values.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(values
        .iter()
        .map(|(m, &v)| {
            let s = if span == 0.0 {
                constant.value()
            } else {
                let t = (v - lo) / span;
                match direction {
                    Direction::HigherBetter => t,
                    Direction::LowerBetter => 1.0 - t,
                }
            };
            (m.clone(), s)
        })
        .collect())
}

/// Raw indicator values for one model. Missing entries are reported by
/// [`build_scorecard`] rather than defaulted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawIndicators {
    pub r_record: Option<f64>,
    pub r_group: Option<FeatureDivergence>,
    pub r_pop: Option<FeatureDivergence>,
    pub p_mia_mean: Option<f64>,
    pub p_knn_pop_ratio: Option<f64>,
    pub p_knn_group_mean: Option<f64>,
    pub u_centroid_distance: Option<f64>,
    pub u_d_mae: Option<f64>,
    pub u_d_rmse: Option<f64>,
}

impl RawIndicators {
    fn missing(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let checks = [
            ("r_record", self.r_record.is_none()),
            ("r_group", self.r_group.is_none()),
            ("r_pop", self.r_pop.is_none()),
            ("p_mia_mean", self.p_mia_mean.is_none()),
            ("p_knn_pop_ratio", self.p_knn_pop_ratio.is_none()),
            ("p_knn_group_mean", self.p_knn_group_mean.is_none()),
            ("u_centroid_distance", self.u_centroid_distance.is_none()),
            ("u_d_mae", self.u_d_mae.is_none()),
            ("u_d_rmse", self.u_d_rmse.is_none()),
        ];
        for (name, absent) in checks {
            if absent {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoringConfig {
    /// When false the record score enters R as its raw value in [0, 1].
    pub normalize_record_score: bool,
    pub constant_rule: ConstantRule,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { normalize_record_score: true, constant_rule: ConstantRule::One }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub model: String,
    #[serde(rename = "R_r")]
    pub r_r: f64,
    #[serde(rename = "R_g")]
    pub r_g: f64,
    #[serde(rename = "R_p")]
    pub r_p: f64,
    #[serde(rename = "P_r")]
    pub p_r: f64,
    #[serde(rename = "P_g")]
    pub p_g: f64,
    #[serde(rename = "P_p")]
    pub p_p: f64,
    #[serde(rename = "U_cluster")]
    pub u_cluster: f64,
    #[serde(rename = "U_pred")]
    pub u_pred: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "U")]
    pub u: f64,
    pub overall: f64,
}

impl ScoreCard {
    pub const HEATMAP_COLUMNS: [&'static str; 8] = ["R_r", "R_g", "R_p", "P_r", "P_g", "P_p", "U_cluster", "U_pred"];

    pub fn indicators(&self) -> [f64; 8] {
        [self.r_r, self.r_g, self.r_p, self.p_r, self.p_g, self.p_p, self.u_cluster, self.u_pred]
    }

    pub fn dimension(&self, d: Dimension) -> f64 {
        match d {
            Dimension::R => self.r,
            Dimension::P => self.p,
            Dimension::U => self.u,
            Dimension::Overall => self.overall,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    /// Sorted by model name.
    pub cards: Vec<ScoreCard>,
    pub warnings: Vec<String>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn build_scorecard(raw: &BTreeMap<String, RawIndicators>, cfg: &ScoringConfig) -> Result<ScoreSet> {
    if raw.is_empty() {
        return Err(RpuError::InvalidParameter("no models to score".into()));
    }
    let gaps: Vec<String> = raw
        .iter()
        .filter_map(|(m, r)| {
            let miss = r.missing();
            (!miss.is_empty()).then(|| format!("{m}: {}", miss.join(", ")))
        })
        .collect();
    if !gaps.is_empty() {
        return Err(RpuError::MissingIndicators(gaps.join("; ")));
    }
    let mut warnings = Vec::new();
    if raw.len() == 1 {
        warnings.push("single model: min-max scores carry no comparison".to_owned());
    }

    let rule = cfg.constant_rule;
    let column = |f: &dyn Fn(&RawIndicators) -> f64| -> BTreeMap<String, f64> {
        raw.iter().map(|(m, r)| (m.clone(), f(r))).collect()
    };
    let norm = |f: &dyn Fn(&RawIndicators) -> f64, d: Direction| minmax_normalize(&column(f), d, rule);
    use Direction::{HigherBetter as Hi, LowerBetter as Lo};

    let r_record = if cfg.normalize_record_score {
        norm(&|r| r.r_record.unwrap(), Hi)?
    } else {
        column(&|r| r.r_record.unwrap())
    };
    let g = |r: &RawIndicators| r.r_group.unwrap();
    let p = |r: &RawIndicators| r.r_pop.unwrap();
    let g_k = norm(&|r| g(r).kld, Lo)?;
    let g_j = norm(&|r| g(r).jsd, Lo)?;
    let g_e = norm(&|r| g(r).emd, Lo)?;
    let p_k = norm(&|r| p(r).kld, Lo)?;
    let p_j = norm(&|r| p(r).jsd, Lo)?;
    let p_e = norm(&|r| p(r).emd, Lo)?;
    let mia = norm(&|r| r.p_mia_mean.unwrap(), Lo)?;
    let knn_g = norm(&|r| r.p_knn_group_mean.unwrap(), Hi)?;
    let knn_p = norm(&|r| r.p_knn_pop_ratio.unwrap(), Hi)?;
    let dc = norm(&|r| r.u_centroid_distance.unwrap(), Lo)?;
    let dmae = norm(&|r| r.u_d_mae.unwrap(), Lo)?;
    let drmse = norm(&|r| r.u_d_rmse.unwrap(), Lo)?;

    let cards = raw
        .keys()
        .map(|m| {
            let r_r = r_record[m];
            let r_g = mean(&[g_k[m], g_j[m], g_e[m]]);
            let r_p = mean(&[p_k[m], p_j[m], p_e[m]]);
            let (p_r, p_g, p_p) = (mia[m], knn_g[m], knn_p[m]);
            let u_cluster = dc[m];
            let u_pred = mean(&[dmae[m], drmse[m]]);
            let r = mean(&[r_r, r_g, r_p]);
            let p = mean(&[p_r, p_g, p_p]);
            let u = mean(&[u_cluster, u_pred]);
            ScoreCard {
                model: m.clone(),
                r_r,
                r_g,
                r_p,
                p_r,
                p_g,
                p_p,
                u_cluster,
                u_pred,
                r,
                p,
                u,
                overall: mean(&[r, p, u]),
            }
        })
        .collect();
    Ok(ScoreSet { cards, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    R,
    P,
    U,
    #[serde(rename = "overall")]
    Overall,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [Dimension::R, Dimension::P, Dimension::U, Dimension::Overall];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::R => "R",
            Dimension::P => "P",
            Dimension::U => "U",
            Dimension::Overall => "overall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub model: String,
    pub score: f64,
}

/// Descending by the chosen dimension, equal scores in model-name order.
pub fn rank_models(cards: &[ScoreCard], dimension: Dimension) -> Vec<LeaderboardEntry> {
    let mut sorted: Vec<&ScoreCard> = cards.iter().collect();
    sorted.sort_by(|a, b| {
        b.dimension(dimension).total_cmp(&a.dimension(dimension)).then_with(|| a.model.cmp(&b.model))
    });
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, c)| LeaderboardEntry { rank: i + 1, model: c.model.clone(), score: c.dimension(dimension) })
        .collect()
}

/// Rows are models, columns the eight normalized indicators.
pub fn write_heatmap_csv<W: Write>(cards: &[ScoreCard], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["model"];
    header.extend(ScoreCard::HEATMAP_COLUMNS);
    header.extend(["R", "P", "U", "overall"]);
    w.write_record(&header)?;
    for c in cards {
        let mut row = vec![c.model.clone()];
        row.extend(c.indicators().iter().chain(&[c.r, c.p, c.u, c.overall]).map(|v| format!("{v:.6}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| RpuError::Io { path: "<heatmap>".into(), source: e })?;
    Ok(())
}

pub fn format_leaderboard(cards: &[ScoreCard]) -> String {
    let mut out = String::new();
    for d in Dimension::ALL {
        let _ = writeln!(out, "== {} ==", d.name());
        for e in rank_models(cards, d) {
            let _ = writeln!(out, "{:>2}. {:<24} {:.4}", e.rank, e.model, e.score);
        }
        out.push('\n');
    }
    out
}
