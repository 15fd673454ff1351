use serde::{Deserialize, Serialize};

use crate::error::{Result, RpuError};
use crate::scalar::Scalar;

/// Binning used for every continuous marginal: equal-width bins over the
/// real train range and additive smoothing before normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinningSpec {
    pub bins: usize,
    pub smoothing: f64,
}

impl Default for BinningSpec {
    fn default() -> Self {
        Self { bins: 48, smoothing: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Support<F> {
    /// Equal-width bins; `edges` has one more entry than there are bins.
    Continuous { edges: Vec<F> },
    /// Category list, optionally followed by a catch-all bucket for unseen values.
    Categorical { categories: Vec<String>, oov_bucket: bool },
}

impl<F: Scalar> Support<F> {
    pub fn equal_width(lo: F, hi: F, bins: usize) -> Result<Self> {
        if bins == 0 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(RpuError::InvalidParameter(format!("cannot bin [{lo}, {hi}] into {bins} bins")));
        }
        let width = (hi - lo) / F::of_usize(bins);
        let mut edges: Vec<F> = (0..bins).map(|i| lo + width * F::of_usize(i)).collect();
        edges.push(hi);
        Ok(Support::Continuous { edges })
    }

    pub fn categorical(categories: Vec<String>, oov_bucket: bool) -> Self {
        Support::Categorical { categories, oov_bucket }
    }

    pub fn len(&self) -> usize {
        match self {
            Support::Continuous { edges } => edges.len() - 1,
            Support::Categorical { categories, oov_bucket } => categories.len() + usize::from(*oov_bucket),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin width for continuous supports.
    pub fn width(&self) -> Option<F> {
        match self {
            Support::Continuous { edges } => {
                let bins = edges.len() - 1;
                Some((edges[bins] - edges[0]) / F::of_usize(bins))
            }
            Support::Categorical { .. } => None,
        }
    }

    pub fn centers(&self) -> Option<Vec<F>> {
        match self {
            Support::Continuous { edges } => {
                let half = F::of(0.5);
                Some(edges.windows(2).map(|w| (w[0] + w[1]) * half).collect())
            }
            Support::Categorical { .. } => None,
        }
    }

    /// Bin index for a continuous value; values outside the range fall into
    /// the end bins.
    pub fn bin_of(&self, v: F) -> Option<usize> {
        let Support::Continuous { edges } = self else { return None };
        let bins = edges.len() - 1;
        let lo = edges[0];
        let w = self.width()?;
        let raw = ((v - lo) / w).floor();
        if !(raw > F::zero()) {
            return Some(0);
        }
        Some(raw.to_usize().unwrap_or(usize::MAX).min(bins - 1))
    }
}

/// Probability vector over a [`Support`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram<F> {
    support: Support<F>,
    mass: Vec<F>,
}

pub enum Sample<'a, F> {
    Numeric(&'a [F]),
    Categorical(&'a [&'a str]),
}

impl<F: Scalar> Histogram<F> {
    /// Wraps an explicit probability vector.
    pub fn from_masses(support: Support<F>, mass: Vec<F>) -> Result<Self> {
        if mass.len() != support.len() {
            return Err(RpuError::BinMismatch);
        }
        if mass.iter().any(|&m| !(m >= F::zero()) || !m.is_finite()) {
            return Err(RpuError::InvalidParameter("histogram mass must be finite and non-negative".into()));
        }
        let total: F = mass.iter().copied().sum();
        if (total - F::one()).abs().as_f64() > 1e-9 {
            return Err(RpuError::InvalidParameter(format!("histogram mass sums to {total}, not 1")));
        }
        Ok(Self { support, mass })
    }

    /// Counts, adds `smoothing` to every bin proportion, and renormalises.
    pub fn from_counts(support: Support<F>, counts: &[usize], smoothing: F) -> Result<Self> {
        if counts.len() != support.len() {
            return Err(RpuError::BinMismatch);
        }
        let n: usize = counts.iter().sum();
        if n == 0 {
            return Err(RpuError::EmptyDataset("histogram sample".into()));
        }
        let nf = F::of_usize(n);
        let raw: Vec<F> = counts.iter().map(|&c| F::of_usize(c) / nf + smoothing).collect();
        let total: F = raw.iter().copied().sum();
        Ok(Self { support, mass: raw.into_iter().map(|m| m / total).collect() })
    }

    pub fn support(&self) -> &Support<F> {
        &self.support
    }

    pub fn mass(&self) -> &[F] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }
}

pub fn build_histogram<F: Scalar>(sample: Sample<'_, F>, support: &Support<F>, smoothing: F) -> Result<Histogram<F>> {
    let mut counts = vec![0usize; support.len()];
    match (sample, support) {
        (Sample::Numeric(values), Support::Continuous { .. }) => {
            if values.is_empty() {
                return Err(RpuError::EmptyDataset("histogram sample".into()));
            }
            for &v in values {
                counts[support.bin_of(v).expect("continuous")] += 1;
            }
        }
        (Sample::Categorical(values), Support::Categorical { categories, oov_bucket }) => {
            if values.is_empty() {
                return Err(RpuError::EmptyDataset("histogram sample".into()));
            }
            let index: std::collections::HashMap<&str, usize> =
                categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
            for v in values {
                match index.get(v) {
                    Some(&i) => counts[i] += 1,
                    None if *oov_bucket => counts[categories.len()] += 1,
                    None => {
                        return Err(RpuError::InvalidParameter(format!(
                            "category '{v}' outside support without an OOV bucket"
                        )))
                    }
                }
            }
        }
        _ => return Err(RpuError::BinMismatch),
    }
    Histogram::from_counts(support.clone(), &counts, smoothing)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn single_value_lands_in_upper_bin() {
        let s = Support::equal_width(0.0, 1.0, 2).unwrap();
        let h = build_histogram::<f64>(Sample::Numeric(&[0.5]), &s, 1e-6).unwrap();
        assert!(h.mass()[0] < 1e-5);
        assert!((h.mass()[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn uniform_sample_spreads_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let s = Support::equal_width(0.0, 1.0, 4).unwrap();
        let h = build_histogram(Sample::Numeric(&v), &s, 1e-6).unwrap();
        for (i, m) in h.mass().iter().enumerate() {
            let direct = v.iter().filter(|&&x| (x * 4.0).floor() as usize == i).count() as f64 / 1e4;
            assert!((m - direct).abs() < 1e-5);
            assert!((m - 0.25).abs() < 0.02, "bin {i}: {m}");
        }
    }

    #[test]
    fn categorical_frequencies() {
        let s: Support<f64> = Support::categorical(vec!["A".into(), "B".into()], true);
        let h = build_histogram(Sample::Categorical(&["A", "A", "B", "A"]), &s, 1e-6).unwrap();
        assert!((h.mass()[0] - 0.75).abs() < 1e-5);
        assert!((h.mass()[1] - 0.25).abs() < 1e-5);
        assert!(h.mass()[2] < 1e-5);
        assert!((h.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_clamped_into_end_bins() {
        let s = Support::equal_width(0.0f32, 1.0, 4).unwrap();
        assert_eq!(s.bin_of(-3.0), Some(0));
        assert_eq!(s.bin_of(1.0), Some(3));
        assert_eq!(s.bin_of(7.0), Some(3));
        assert_eq!(s.bin_of(0.26), Some(1));
    }

    #[test]
    fn empty_sample_is_error() {
        let s = Support::equal_width(0.0, 1.0, 4).unwrap();
        assert!(build_histogram::<f64>(Sample::Numeric(&[]), &s, 1e-6).is_err());
    }

    #[test]
    fn masses_are_validated() {
        let s = Support::equal_width(0.0, 1.0, 2).unwrap();
        assert!(Histogram::from_masses(s.clone(), vec![0.4, 0.4]).is_err());
        assert!(Histogram::from_masses(s.clone(), vec![1.2, -0.2]).is_err());
        assert!(Histogram::from_masses(s, vec![0.4, 0.6]).is_ok());
    }
}
