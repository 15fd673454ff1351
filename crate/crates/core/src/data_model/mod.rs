//! Trip records, datasets, CSV ingestion, feature encoding and grouping.

mod encoding;
mod io;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};

pub use encoding::{decode_row, encode, fit_encoding, DecodedValue, EncodedMatrix, EncodingSchema, FeatureEncoding};
pub use io::{load_csv, read_csv, write_csv, write_csv_to, CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DayOfWeek {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl DayOfWeek {
    pub const ALL: [DayOfWeek; 7] = [
        DayOfWeek::Mon,
        DayOfWeek::Tue,
        DayOfWeek::Wed,
        DayOfWeek::Thu,
        DayOfWeek::Fri,
        DayOfWeek::Sat,
        DayOfWeek::Sun,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DayOfWeek::Mon => "Mon",
            DayOfWeek::Tue => "Tue",
            DayOfWeek::Wed => "Wed",
            DayOfWeek::Thu => "Thu",
            DayOfWeek::Fri => "Fri",
            DayOfWeek::Sat => "Sat",
            DayOfWeek::Sun => "Sun",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_weekend(self) -> bool {
        matches!(self, DayOfWeek::Sat | DayOfWeek::Sun)
    }
}

impl fmt::Display for DayOfWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayOfWeek {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DayOfWeek::ALL
            .iter()
            .copied()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("'{s}' is not one of Mon,Tue,Wed,Thu,Fri,Sat,Sun"))
    }
}

/// One trip row. Times are minutes past midnight and are not range-checked
/// here; validity is evaluated by the representativeness module.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripRecord {
    pub passenger_id: String,
    pub origin: String,
    pub destination: String,
    pub start_min: i64,
    pub end_min: i64,
    pub day_of_week: DayOfWeek,
}

impl TripRecord {
    /// Category of a categorical feature, `None` for continuous ones.
    pub fn category(&self, feature: Feature) -> Option<&str> {
        match feature {
            Feature::Origin => Some(&self.origin),
            Feature::Destination => Some(&self.destination),
            Feature::DayOfWeek => Some(self.day_of_week.as_str()),
            Feature::StartMin | Feature::EndMin => None,
        }
    }

    /// Value of a continuous feature, `None` for categorical ones.
    pub fn minutes(&self, feature: Feature) -> Option<f64> {
        match feature {
            Feature::StartMin => Some(self.start_min as f64),
            Feature::EndMin => Some(self.end_min as f64),
            _ => None,
        }
    }

    pub fn duration(&self) -> i64 {
        self.end_min - self.start_min
    }
}

/// Behavioural features a record exposes to evaluators. The passenger id is
/// deliberately absent: it is a key, never a model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Origin,
    Destination,
    StartMin,
    EndMin,
    DayOfWeek,
}

impl Feature {
    pub const ALL: [Feature; 5] =
        [Feature::Origin, Feature::Destination, Feature::StartMin, Feature::EndMin, Feature::DayOfWeek];

    pub fn is_categorical(self) -> bool {
        matches!(self, Feature::Origin | Feature::Destination | Feature::DayOfWeek)
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Origin => "origin",
            Feature::Destination => "destination",
            Feature::StartMin => "start_min",
            Feature::EndMin => "end_min",
            Feature::DayOfWeek => "day_of_week",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = RpuError;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| RpuError::Schema(format!("unknown feature '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetRole {
    Train,
    Holdout,
    Synthetic,
}

/// Ordered trip collection tagged with its role. The role cannot change once
/// the dataset exists.
#[derive(Debug, Clone, PartialEq)]
pub struct TripDataset {
    records: Vec<TripRecord>,
    role: DatasetRole,
    source_label: String,
}

impl TripDataset {
    pub fn new(records: Vec<TripRecord>, role: DatasetRole, source_label: impl Into<String>) -> Self {
        Self { records, role, source_label: source_label.into() }
    }

    pub fn records(&self) -> &[TripRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TripRecord> {
        self.records
    }

    pub fn role(&self) -> DatasetRole {
        self.role
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TripRecord> {
        self.records.iter()
    }

    /// Errors with [`RpuError::EmptyDataset`] when there is nothing to evaluate.
    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.records.is_empty() {
            Err(RpuError::EmptyDataset(self.source_label.clone()))
        } else {
            Ok(())
        }
    }

    /// Same records under another role and label.
    pub fn relabeled(&self, role: DatasetRole, source_label: impl Into<String>) -> Self {
        Self::new(self.records.clone(), role, source_label)
    }

    /// Subset by index, keeping role and label.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self::new(idx.iter().map(|&i| self.records[i].clone()).collect(), self.role, self.source_label.clone())
    }
}

/// Splits a dataset by the values of a categorical feature. Keys are the
/// category strings; the groups are disjoint and cover every record.
pub fn partition_by_group(ds: &TripDataset, group_feature: Feature) -> Result<BTreeMap<String, TripDataset>> {
    if !group_feature.is_categorical() {
        return Err(RpuError::Schema(format!("group feature '{group_feature}' is not categorical")));
    }
    let mut groups: BTreeMap<String, Vec<TripRecord>> = BTreeMap::new();
    for r in ds.iter() {
        let key = r.category(group_feature).expect("categorical feature");
        groups.entry(key.to_owned()).or_default().push(r.clone());
    }
    Ok(groups
        .into_iter()
        .map(|(k, recs)| (k, TripDataset::new(recs, ds.role(), ds.source_label())))
        .collect())
}
