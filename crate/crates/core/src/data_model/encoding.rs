use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::{Feature, TripDataset, TripRecord};

/// How one feature maps onto matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureEncoding {
    /// One-hot block, one column per vocabulary entry in first-appearance order.
    Categorical { feature: Feature, vocabulary: Vec<String> },
    /// Single min-max column. `min == max` encodes every value to 0.5.
    Continuous { feature: Feature, min: f64, max: f64 },
}

impl FeatureEncoding {
    pub fn feature(&self) -> Feature {
        match self {
            FeatureEncoding::Categorical { feature, .. } | FeatureEncoding::Continuous { feature, .. } => *feature,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureEncoding::Categorical { vocabulary, .. } => vocabulary.len(),
            FeatureEncoding::Continuous { .. } => 1,
        }
    }

    /// Min-max transform; `None` for categorical encodings.
    pub fn normalize(&self, v: f64) -> Option<f64> {
        match *self {
            FeatureEncoding::Continuous { min, max, .. } => Some(if max > min { (v - min) / (max - min) } else { 0.5 }),
            FeatureEncoding::Categorical { .. } => None,
        }
    }

    pub fn denormalize(&self, u: f64) -> Option<f64> {
        match *self {
            FeatureEncoding::Continuous { min, max, .. } => Some(if max > min { min + u * (max - min) } else { min }),
            FeatureEncoding::Categorical { .. } => None,
        }
    }
}

/// Train-anchored encoding. Fitting happens once; encoding other splits
/// never changes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSchema {
    encodings: Vec<FeatureEncoding>,
}

impl EncodingSchema {
    pub fn encodings(&self) -> &[FeatureEncoding] {
        &self.encodings
    }

    pub fn features(&self) -> Vec<Feature> {
        self.encodings.iter().map(FeatureEncoding::feature).collect()
    }

    pub fn encoding(&self, feature: Feature) -> Option<&FeatureEncoding> {
        self.encodings.iter().find(|e| e.feature() == feature)
    }

    pub fn width(&self) -> usize {
        self.encodings.iter().map(FeatureEncoding::width).sum()
    }

    /// Schema restricted to the given features, in the given order.
    pub fn select(&self, features: &[Feature]) -> Result<Self> {
        let encodings = features
            .iter()
            .map(|&f| {
                self.encoding(f).cloned().ok_or_else(|| RpuError::Schema(format!("feature '{f}' not in schema")))
            })
            .collect::<Result<_>>()?;
        Ok(Self { encodings })
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width());
        for e in &self.encodings {
            match e {
                FeatureEncoding::Categorical { feature, vocabulary } => {
                    names.extend(vocabulary.iter().map(|v| format!("{feature}={v}")));
                }
                FeatureEncoding::Continuous { feature, .. } => names.push(feature.to_string()),
            }
        }
        names
    }
}

/// Learns vocabularies (first-appearance order) and min/max ranges from the
/// training split.
pub fn fit_encoding(train: &TripDataset, features: &[Feature]) -> Result<EncodingSchema> {
    train.ensure_non_empty()?;
    if features.is_empty() {
        return Err(RpuError::Schema("no features requested".into()));
    }
    let mut encodings = Vec::with_capacity(features.len());
    for (i, &feature) in features.iter().enumerate() {
        if features[..i].contains(&feature) {
            return Err(RpuError::Schema(format!("feature '{feature}' requested twice")));
        }
        if feature.is_categorical() {
            let mut seen = HashMap::new();
            let mut vocabulary = Vec::new();
            for r in train.iter() {
                let v = r.category(feature).expect("categorical");
                if !seen.contains_key(v) {
                    seen.insert(v.to_owned(), vocabulary.len());
                    vocabulary.push(v.to_owned());
                }
            }
            if vocabulary.is_empty() {
                return Err(RpuError::Schema(format!("feature '{feature}' has no values")));
            }
            encodings.push(FeatureEncoding::Categorical { feature, vocabulary });
        } else {
            let (min, max) = train
                .iter()
                .map(|r| r.minutes(feature).expect("continuous"))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            encodings.push(FeatureEncoding::Continuous { feature, min, max });
        }
    }
    Ok(EncodingSchema { encodings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix<F> {
    pub rows: Matrix<F>,
    pub schema: EncodingSchema,
    pub feature_names: Vec<String>,
    /// Number of categorical cells that fell outside the vocabulary.
    pub oov_count: usize,
}

impl<F: Scalar> EncodedMatrix<F> {
    pub fn nrows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.rows.ncols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            rows: self.rows.select_rows(idx),
            schema: self.schema.clone(),
            feature_names: self.feature_names.clone(),
            oov_count: self.oov_count,
        }
    }
}

fn encode_record_into<F: Scalar>(
    r: &TripRecord,
    schema: &EncodingSchema,
    lookups: &[Option<HashMap<&str, usize>>],
    out: &mut [F],
) -> usize {
    let mut col = 0;
    let mut oov = 0;
    for (e, lookup) in schema.encodings.iter().zip(lookups) {
        match e {
            FeatureEncoding::Categorical { feature, vocabulary } => {
                let v = r.category(*feature).expect("categorical");
                match lookup.as_ref().and_then(|l| l.get(v)) {
                    Some(&j) => out[col + j] = F::one(),
                    None => oov += 1,
                }
                col += vocabulary.len();
            }
            FeatureEncoding::Continuous { feature, .. } => {
                let v = r.minutes(*feature).expect("continuous");
                out[col] = F::of(e.normalize(v).expect("continuous"));
                col += 1;
            }
        }
    }
    oov
}

/// One-hot plus min-max encoding against a fitted schema. Unseen categories
/// become an all-zero block and are tallied; out-of-range times are kept
/// unclamped.
pub fn encode<F: Scalar>(ds: &TripDataset, schema: &EncodingSchema) -> Result<EncodedMatrix<F>> {
    ds.ensure_non_empty()?;
    let width = schema.width();
    let lookups: Vec<Option<HashMap<&str, usize>>> = schema
        .encodings
        .iter()
        .map(|e| match e {
            FeatureEncoding::Categorical { vocabulary, .. } => {
                Some(vocabulary.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect())
            }
            FeatureEncoding::Continuous { .. } => None,
        })
        .collect();
    let mut rows = Matrix::zeros(ds.len(), width);
    let mut oov_count = 0;
    for (i, r) in ds.iter().enumerate() {
        oov_count += encode_record_into(r, schema, &lookups, rows.row_mut(i));
    }
    Ok(EncodedMatrix { rows, schema: schema.clone(), feature_names: schema.column_names(), oov_count })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodedValue {
    /// `None` when the one-hot block is all zero.
    Category(Option<String>),
    Minutes(f64),
}

/// Inverse of [`encode`] for a single row: argmax per one-hot block and the
/// inverse min-max transform for continuous columns.
pub fn decode_row<F: Scalar>(row: &[F], schema: &EncodingSchema) -> Result<Vec<(Feature, DecodedValue)>> {
    if row.len() != schema.width() {
        return Err(RpuError::DimensionMismatch { expected: schema.width(), actual: row.len() });
    }
    let mut col = 0;
    let mut out = Vec::with_capacity(schema.encodings.len());
    for e in &schema.encodings {
        match e {
            FeatureEncoding::Categorical { feature, vocabulary } => {
                let block = &row[col..col + vocabulary.len()];
                let best = block
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > F::zero())
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
                    .map(|(j, _)| vocabulary[j].clone());
                out.push((*feature, DecodedValue::Category(best)));
                col += vocabulary.len();
            }
            FeatureEncoding::Continuous { feature, .. } => {
                out.push((*feature, DecodedValue::Minutes(e.denormalize(row[col].as_f64()).expect("continuous"))));
                col += 1;
            }
        }
    }
    Ok(out)
}
