use crate::error::{Result, RpuError};
use crate::scalar::Scalar;

use super::histogram::{Histogram, Support};

fn check_bins<F: Scalar>(p: &Histogram<F>, q: &Histogram<F>) -> Result<()> {
    if p.support() == q.support() {
        Ok(())
    } else {
        Err(RpuError::BinMismatch)
    }
}

fn kl_nats<F: Scalar>(p: &[F], q: &[F]) -> F {
    p.iter().zip(q).fold(F::zero(), |acc, (&pi, &qi)| {
        if pi > F::zero() {
            if qi > F::zero() {
                acc + pi * (pi / qi).ln()
            } else {
                F::infinity()
            }
        } else {
            acc
        }
    })
}

/// Kullback-Leibler divergence `KL(p || q)` in nats. Infinite when `q` has a
/// zero bin where `p` does not; smoothed histograms never do.
pub fn kld<F: Scalar>(p: &Histogram<F>, q: &Histogram<F>) -> Result<F> {
    check_bins(p, q)?;
    Ok(kl_nats(p.mass(), q.mass()).max(F::zero()))
}

/// Jensen-Shannon divergence with base-2 logarithms, so the result lies in [0, 1].
pub fn jsd<F: Scalar>(p: &Histogram<F>, q: &Histogram<F>) -> Result<F> {
    check_bins(p, q)?;
    let half = F::of(0.5);
    let m: Vec<F> = p.mass().iter().zip(q.mass()).map(|(&a, &b)| (a + b) * half).collect();
    let nats = half * kl_nats(p.mass(), &m) + half * kl_nats(q.mass(), &m);
    Ok((nats / F::of(std::f64::consts::LN_2)).max(F::zero()).min(F::one()))
}

/// One-dimensional earth mover's distance.
///
/// Continuous supports use the closed form `sum |CDF_p - CDF_q| * width`;
/// categorical supports use the 0/1 ground metric, which reduces to total
/// variation `0.5 * sum |p - q|`.
pub fn emd_1d<F: Scalar>(p: &Histogram<F>, q: &Histogram<F>) -> Result<F> {
    check_bins(p, q)?;
    match p.support() {
        Support::Continuous { .. } => {
            let width = p.support().width().expect("continuous");
            let bins = p.len();
            let mut cp = F::zero();
            let mut cq = F::zero();
            let mut area = F::zero();
            for i in 0..bins - 1 {
                cp = cp + p.mass()[i];
                cq = cq + q.mass()[i];
                area = area + (cp - cq).abs();
            }
            Ok(area * width)
        }
        Support::Categorical { .. } => {
            let tv: F = p.mass().iter().zip(q.mass()).map(|(&a, &b)| (a - b).abs()).sum();
            Ok(tv * F::of(0.5))
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::oracles::transport_cost;

    fn two_bin(p: [f64; 2]) -> Histogram<f64> {
        Histogram::from_masses(Support::equal_width(0.0, 1.0, 2).unwrap(), p.to_vec()).unwrap()
    }

    #[test]
    fn hand_computed_pair() {
        let p = two_bin([0.5, 0.5]);
        let q = two_bin([0.9, 0.1]);
        // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1)
        let want_kl = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * 5f64.ln();
        assert!((kld(&p, &q).unwrap() - want_kl).abs() < 1e-15);
        assert!((kld(&p, &q).unwrap() - 0.5108).abs() < 1e-4);
        assert!((kld(&q, &p).unwrap() - 0.3681).abs() < 1e-4);
        // m = [0.7, 0.3]; half of each KL to m, divided by ln 2
        assert!((jsd(&p, &q).unwrap() - 0.146793).abs() < 1e-6);
        assert!((emd_1d(&p, &q).unwrap() - 0.4 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn disjoint_point_masses_have_unit_jsd() {
        assert_eq!(jsd(&two_bin([1.0, 0.0]), &two_bin([0.0, 1.0])).unwrap(), 1.0);
    }

    #[test]
    fn emd_of_deltas_is_their_gap() {
        let s = Support::equal_width(-0.05, 0.95, 2).unwrap();
        assert_eq!(s.centers().unwrap(), vec![0.2, 0.7]);
        let p = Histogram::from_masses(s.clone(), vec![1.0, 0.0]).unwrap();
        let q = Histogram::from_masses(s, vec![0.0, 1.0]).unwrap();
        assert_eq!(emd_1d(&p, &q).unwrap(), 0.5);
    }

    #[test]
    fn emd_half_mass_shift() {
        let s = Support::equal_width(0.0, 1.0, 2).unwrap();
        let p = Histogram::from_masses(s.clone(), vec![0.5, 0.5]).unwrap();
        let q = Histogram::from_masses(s, vec![1.0, 0.0]).unwrap();
        assert_eq!(emd_1d(&p, &q).unwrap(), 0.25);
        let brute = transport_cost(&[0.25, 0.75], &[0.5, 0.5], &[1.0, 0.0]);
        assert!((brute - 0.25).abs() < 1e-12);
    }

    #[test]
    fn categorical_emd_is_total_variation() {
        let s: Support<f64> = Support::categorical(vec!["a".into(), "b".into(), "c".into()], false);
        let p = Histogram::from_masses(s.clone(), vec![0.2, 0.3, 0.5]).unwrap();
        let q = Histogram::from_masses(s, vec![0.5, 0.3, 0.2]).unwrap();
        assert!((emd_1d(&p, &q).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn bin_mismatch() {
        let p = two_bin([0.5, 0.5]);
        let q = Histogram::from_masses(Support::equal_width(0.0, 2.0, 2).unwrap(), vec![0.5, 0.5]).unwrap();
        assert!(matches!(kld(&p, &q), Err(RpuError::BinMismatch)));
        assert!(matches!(jsd(&p, &q), Err(RpuError::BinMismatch)));
        assert!(matches!(emd_1d(&p, &q), Err(RpuError::BinMismatch)));
    }

    #[test]
    fn works_in_single_precision() {
        let s = Support::equal_width(0.0f32, 1.0, 2).unwrap();
        let p = Histogram::from_masses(s.clone(), vec![0.5f32, 0.5]).unwrap();
        let q = Histogram::from_masses(s, vec![0.9f32, 0.1]).unwrap();
        assert!((kld(&p, &q).unwrap() - 0.5108).abs() < 1e-4);
    }

    fn arb_masses(bins: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, bins).prop_map(|w| {
            let w: Vec<f64> = w.into_iter().map(|x| x + 1e-3).collect();
            let t: f64 = w.iter().sum();
            w.into_iter().map(|x| x / t).collect()
        })
    }

    fn hist(m: Vec<f64>) -> Histogram<f64> {
        let s = Support::equal_width(0.0, 1.0, m.len()).unwrap();
        Histogram::from_masses(s, m).unwrap()
    }

    proptest! {
        #[test]
        fn identities_hold(m in (1usize..12).prop_flat_map(arb_masses)) {
            let p = hist(m);
            prop_assert_eq!(kld(&p, &p).unwrap(), 0.0);
            prop_assert_eq!(jsd(&p, &p).unwrap(), 0.0);
            prop_assert_eq!(emd_1d(&p, &p).unwrap(), 0.0);
        }

        #[test]
        fn jsd_symmetric_and_bounded((a, b) in (1usize..12).prop_flat_map(|n| (arb_masses(n), arb_masses(n)))) {
            let (p, q) = (hist(a), hist(b));
            let pq = jsd(&p, &q).unwrap();
            prop_assert!((pq - jsd(&q, &p).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&pq));
            prop_assert!(kld(&p, &q).unwrap() >= 0.0);
        }

        #[test]
        fn emd_triangle_inequality((a, b, c) in (1usize..10).prop_flat_map(|n| (arb_masses(n), arb_masses(n), arb_masses(n)))) {
            let (p, q, r) = (hist(a), hist(b), hist(c));
            let pr = emd_1d(&p, &r).unwrap();
            prop_assert!(pr <= emd_1d(&p, &q).unwrap() + emd_1d(&q, &r).unwrap() + 1e-9);
        }

        #[test]
        fn emd_matches_transport_lp((a, b) in (1usize..=5).prop_flat_map(|n| (arb_masses(n), arb_masses(n)))) {
            let (p, q) = (hist(a.clone()), hist(b.clone()));
            let centers = p.support().centers().unwrap();
            let lp = transport_cost(&centers, &a, &b);
            prop_assert!((emd_1d(&p, &q).unwrap() - lp).abs() < 1e-12, "{} vs {}", emd_1d(&p, &q).unwrap(), lp);
        }

        #[test]
        fn mixing_toward_p_never_raises_kld((a, b) in (2usize..10).prop_flat_map(|n| (arb_masses(n), arb_masses(n)))) {
            let p = hist(a.clone());
            let mut last = f64::INFINITY;
            for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let mixed: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| (1.0 - t) * y + t * x).collect();
                let k = kld(&p, &hist(mixed)).unwrap();
                prop_assert!(k <= last + 1e-12);
                last = k;
            }
        }
    }
}
