use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data_model::{partition_by_group, EncodingSchema, Feature, FeatureEncoding, TripDataset};
use crate::error::{Result, RpuError};

use super::divergence::{emd_1d, jsd, kld};
use super::histogram::{build_histogram, BinningSpec, Histogram, Sample, Support};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureDivergence {
    pub kld: f64,
    pub jsd: f64,
    pub emd: f64,
}

impl FeatureDivergence {
    fn mean<'a>(items: impl IntoIterator<Item = &'a FeatureDivergence>) -> Self {
        let mut acc = FeatureDivergence::default();
        let mut n = 0usize;
        for d in items {
            acc.kld += d.kld;
            acc.jsd += d.jsd;
            acc.emd += d.emd;
            n += 1;
        }
        let n = n.max(1) as f64;
        FeatureDivergence { kld: acc.kld / n, jsd: acc.jsd / n, emd: acc.emd / n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub real_n: usize,
    pub syn_n: usize,
    pub features: BTreeMap<Feature, FeatureDivergence>,
    pub aggregate: FeatureDivergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedGroup {
    pub group: String,
    pub real_n: usize,
    pub syn_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDivergence {
    pub group_feature: Feature,
    pub min_group_size: usize,
    pub groups: BTreeMap<String, GroupEntry>,
    /// Mean of the retained groups' aggregates, weighted by real group size.
    pub group_aggregate: FeatureDivergence,
    pub skipped: Vec<SkippedGroup>,
}

/// Per-feature divergences of synthetic marginals from real ones.
///
/// JSON layout: `{"features": {feature: {kld, jsd, emd}}, "aggregate": {...},
/// "groups": {...} | null}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub features: BTreeMap<Feature, FeatureDivergence>,
    /// Unweighted mean over features.
    pub aggregate: FeatureDivergence,
    pub groups: Option<GroupDivergence>,
}

/// Histogram support for a feature, anchored on the train-fitted schema.
/// Continuous features are binned in min-max units over [0, 1], so EMD is
/// reported as a fraction of the train range.
fn support_for(enc: &FeatureEncoding, binning: &BinningSpec) -> Result<Support<f64>> {
    match enc {
        FeatureEncoding::Categorical { vocabulary, .. } => Ok(Support::categorical(vocabulary.clone(), true)),
        FeatureEncoding::Continuous { .. } => Support::equal_width(0.0, 1.0, binning.bins),
    }
}

fn marginal(ds: &TripDataset, enc: &FeatureEncoding, support: &Support<f64>, binning: &BinningSpec) -> Result<Histogram<f64>> {
    let f = enc.feature();
    if f.is_categorical() {
        let values: Vec<&str> = ds.iter().map(|r| r.category(f).expect("categorical")).collect();
        build_histogram(Sample::Categorical(&values), support, binning.smoothing)
    } else {
        let values: Vec<f64> =
            ds.iter().map(|r| enc.normalize(r.minutes(f).expect("continuous")).expect("continuous")).collect();
        build_histogram(Sample::Numeric(&values), support, binning.smoothing)
    }
}

fn per_feature(
    real: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
    binning: &BinningSpec,
) -> Result<BTreeMap<Feature, FeatureDivergence>> {
    let mut out = BTreeMap::new();
    for &f in features {
        let enc = schema.encoding(f).ok_or_else(|| RpuError::Schema(format!("feature '{f}' not in schema")))?;
        let support = support_for(enc, binning)?;
        let p = marginal(real, enc, &support, binning)?;
        let q = marginal(syn, enc, &support, binning)?;
        out.insert(f, FeatureDivergence { kld: kld(&p, &q)?, jsd: jsd(&p, &q)?, emd: emd_1d(&p, &q)? });
    }
    Ok(out)
}

/// Real-vs-synthetic marginal divergences for each feature plus their mean.
pub fn divergence_profile(
    real: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    schema: &EncodingSchema,
    binning: &BinningSpec,
) -> Result<DivergenceReport> {
    real.ensure_non_empty()?;
    syn.ensure_non_empty()?;
    let features = per_feature(real, syn, features, schema, binning)?;
    let aggregate = FeatureDivergence::mean(features.values());
    Ok(DivergenceReport { features, aggregate, groups: None })
}

/// Divergences within each group of `group_feature`. Groups with fewer than
/// `min_group_size` records on either side are skipped and listed. The
/// grouping feature itself is left out of the within-group features.
pub fn group_divergence_profile(
    real: &TripDataset,
    syn: &TripDataset,
    features: &[Feature],
    group_feature: Feature,
    schema: &EncodingSchema,
    binning: &BinningSpec,
    min_group_size: usize,
) -> Result<DivergenceReport> {
    let mut report = divergence_profile(real, syn, features, schema, binning)?;
    let real_groups = partition_by_group(real, group_feature)?;
    let syn_groups = partition_by_group(syn, group_feature)?;
    let within: Vec<Feature> = features.iter().copied().filter(|&f| f != group_feature).collect();
    if within.is_empty() {
        return Err(RpuError::Schema("no features left after removing the group feature".into()));
    }

    let keys: BTreeSet<&String> = real_groups.keys().chain(syn_groups.keys()).collect();
    let mut groups = BTreeMap::new();
    let mut skipped = Vec::new();
    for key in keys {
        let r = real_groups.get(key);
        let s = syn_groups.get(key);
        let (real_n, syn_n) = (r.map_or(0, TripDataset::len), s.map_or(0, TripDataset::len));
        match (r, s) {
            (Some(r), Some(s)) if real_n >= min_group_size && syn_n >= min_group_size => {
                let feats = per_feature(r, s, &within, schema, binning)?;
                let aggregate = FeatureDivergence::mean(feats.values());
                groups.insert(key.clone(), GroupEntry { real_n, syn_n, features: feats, aggregate });
            }
            _ => skipped.push(SkippedGroup { group: key.clone(), real_n, syn_n }),
        }
    }
    if groups.is_empty() {
        return Err(RpuError::NoEvaluableGroups(skipped.len()));
    }

    let total: f64 = groups.values().map(|g| g.real_n as f64).sum();
    let mut agg = FeatureDivergence::default();
    for g in groups.values() {
        let w = g.real_n as f64 / total;
        agg.kld += w * g.aggregate.kld;
        agg.jsd += w * g.aggregate.jsd;
        agg.emd += w * g.aggregate.emd;
    }
    report.groups = Some(GroupDivergence {
        group_feature,
        min_group_size,
        groups,
        group_aggregate: agg,
        skipped,
    });
    Ok(report)
}
