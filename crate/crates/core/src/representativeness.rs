//! Record validity and the raw divergence inputs for group and population
//! representativeness.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data_model::{EncodingSchema, Feature, TripDataset, TripRecord};
use crate::error::Result;
use crate::metrics::{divergence_profile, group_divergence_profile, BinningSpec, DivergenceReport};

pub const MINUTES_PER_DAY: i64 = 1440;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityRule {
    UnknownOdPair,
    TimeOrder,
    TimeRange,
}

impl ValidityRule {
    pub const ALL: [ValidityRule; 3] = [ValidityRule::UnknownOdPair, ValidityRule::TimeOrder, ValidityRule::TimeRange];
}

/// Origin-destination pairs observed in real data.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnownOd(BTreeSet<(String, String)>);

impl KnownOd {
    pub fn from_datasets<'a>(datasets: impl IntoIterator<Item = &'a TripDataset>) -> Self {
        let mut set = BTreeSet::new();
        for ds in datasets {
            for r in ds.iter() {
                set.insert((r.origin.clone(), r.destination.clone()));
            }
        }
        Self(set)
    }

    pub fn contains(&self, origin: &str, destination: &str) -> bool {
        // BTreeSet<(String, String)> cannot be probed with borrowed strs
        self.0.contains(&(origin.to_owned(), destination.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Rules violated by one record; empty when the record is valid.
pub fn check_record_validity(rec: &TripRecord, known_od: &KnownOd) -> BTreeSet<ValidityRule> {
    let mut out = BTreeSet::new();
    if !known_od.contains(&rec.origin, &rec.destination) {
        out.insert(ValidityRule::UnknownOdPair);
    }
    if rec.start_min >= rec.end_min {
        out.insert(ValidityRule::TimeOrder);
    }
    let in_day = |t: i64| (0..=MINUTES_PER_DAY).contains(&t);
    if !in_day(rec.start_min) || !in_day(rec.end_min) {
        out.insert(ValidityRule::TimeRange);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureBreakdown {
    pub unknown_od_pair: usize,
    pub time_order: usize,
    pub time_range: usize,
}

impl FailureBreakdown {
    fn bump(&mut self, rule: ValidityRule) {
        match rule {
            ValidityRule::UnknownOdPair => self.unknown_od_pair += 1,
            ValidityRule::TimeOrder => self.time_order += 1,
            ValidityRule::TimeRange => self.time_range += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureExample {
    pub row: usize,
    pub rules: Vec<ValidityRule>,
    pub record: TripRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub total: usize,
    pub failures: usize,
    pub failure_breakdown: FailureBreakdown,
    pub score_r: f64,
    /// The first few failing records (0-based row index), for inspection.
    pub examples: Vec<FailureExample>,
}

const MAX_EXAMPLES: usize = 10;

pub fn record_level_score(syn: &TripDataset, known_od: &KnownOd) -> Result<ValidityReport> {
    syn.ensure_non_empty()?;
    let mut failures = 0;
    let mut failure_breakdown = FailureBreakdown::default();
    let mut examples = Vec::new();
    for (row, rec) in syn.iter().enumerate() {
        let rules = check_record_validity(rec, known_od);
        if rules.is_empty() {
            continue;
        }
        failures += 1;
        rules.iter().for_each(|&r| failure_breakdown.bump(r));
        if examples.len() < MAX_EXAMPLES {
            examples.push(FailureExample { row, rules: rules.into_iter().collect(), record: rec.clone() });
        }
    }
    let total = syn.len();
    Ok(ValidityReport {
        total,
        failures,
        failure_breakdown,
        score_r: 1.0 - failures as f64 / total as f64,
        examples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RepresentativenessConfig {
    pub binning: BinningSpec,
    pub group_feature: Feature,
    /// Groups with fewer records than this on either side are skipped.
    pub min_group_size: usize,
}

impl Default for RepresentativenessConfig {
    fn default() -> Self {
        Self { binning: BinningSpec::default(), group_feature: Feature::DayOfWeek, min_group_size: 10 }
    }
}

/// Population-level divergences of `syn` against the held-out real split.
pub fn population_raw(
    real_test: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
    cfg: &RepresentativenessConfig,
) -> Result<DivergenceReport> {
    divergence_profile(real_test, syn, features, schema, &cfg.binning)
}

/// Group-conditioned divergences; `groups` is always populated on success.
pub fn group_raw(
    real_test: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
    cfg: &RepresentativenessConfig,
) -> Result<DivergenceReport> {
    group_divergence_profile(real_test, syn, features, cfg.group_feature, schema, &cfg.binning, cfg.min_group_size)
}
