use crate::error::{Result, RpuError};
use crate::scalar::Scalar;

/// Area under the ROC curve via the Mann-Whitney statistic, ties counted half.
pub fn roc_auc<F: Scalar>(labels: &[bool], scores: &[F]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(RpuError::DimensionMismatch { expected: labels.len(), actual: scores.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(RpuError::NonFinite("auc scores".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(RpuError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // mid-rank of the tie block, ranks 1-based
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += mid * order[i..=j].iter().filter(|&&o| labels[o]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::oracles::auc_pair_count;

    #[test]
    fn perfect_and_inverted() {
        let y = [false, false, true, true];
        assert_eq!(roc_auc(&y, &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
        assert_eq!(roc_auc(&y, &[0.9, 0.8, 0.2, 0.1]).unwrap(), 0.0);
        assert_eq!(roc_auc(&y, &[0.5f32; 4]).unwrap(), 0.5);
    }

    #[test]
    fn small_hand_case() {
        // positives {0.35, 0.8}, negatives {0.1, 0.4}: 3 of 4 pairs ordered
        let y = [false, false, true, true];
        assert_eq!(roc_auc(&y, &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
    }

    #[test]
    fn errors() {
        assert!(matches!(roc_auc(&[true, true], &[0.1, 0.2]), Err(RpuError::SingleClass)));
        assert!(roc_auc(&[true], &[0.1, 0.2]).is_err());
        assert!(roc_auc(&[true, false], &[f64::NAN, 0.2]).is_err());
    }

    proptest! {
        #[test]
        fn matches_pair_count(data in prop::collection::vec((any::<bool>(), 0u8..6), 2..60)) {
            let y: Vec<bool> = data.iter().map(|d| d.0).collect();
            let s: Vec<f64> = data.iter().map(|d| d.1 as f64 / 5.0).collect();
            prop_assume!(y.iter().any(|&b| b) && y.iter().any(|&b| !b));
            let got = roc_auc(&y, &s).unwrap();
            prop_assert!((got - auc_pair_count(&y, &s)).abs() < 1e-12);
        }
    }
}
