//! Bounds for sampling without replacement, built on the Serfling-type
//! finite-population inequalities.

use serde::Serialize;

use super::with_replacement::clamp_exp;
use super::{check_args, deviation, BoundResult, BoundTerm, InequalityKind, InequalitySet, Side};
use crate::error::Result;
use crate::model::{check_without_replacement, population_variance, SamplingMethod};

/// Finite-population correction factors `rho` and `zeta`, piecewise in
/// `k` relative to `n / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SerflingCoefficients {
    pub rho: f64,
    pub zeta: f64,
}

/// Requires `n >= 2` and `1 <= k < n`. The `k <= n / 2` branch is decided
/// exactly as `2k <= n` and includes the tie.
pub fn serfling_coefficients(k: u64, n: u64) -> Result<SerflingCoefficients> {
    check_without_replacement(k, n)?;
    let (kf, nf) = (k as f64, n as f64);
    let coeffs = if u128::from(k) * 2 <= u128::from(n) {
        SerflingCoefficients {
            rho: 1.0 - (kf - 1.0) / nf,
            zeta: 4.0 / 3.0 + (kf * (kf - 1.0) / (nf * (nf - kf + 1.0))).sqrt(),
        }
    } else {
        SerflingCoefficients {
            rho: (1.0 - kf / nf) * (1.0 + 1.0 / kf),
            zeta: 4.0 / 3.0 + ((nf - kf - 1.0) * (nf - kf) / ((kf + 1.0) * nf)).sqrt(),
        }
    };
    Ok(coeffs)
}

/// Both branch formulas evaluated at the same `(k, n)`, regardless of which
/// one [`serfling_coefficients`] would pick. Used to probe continuity at
/// `2k = n`.
pub fn serfling_branches(k: u64, n: u64) -> (SerflingCoefficients, SerflingCoefficients) {
    let (kf, nf) = (k as f64, n as f64);
    (
        SerflingCoefficients {
            rho: 1.0 - (kf - 1.0) / nf,
            zeta: 4.0 / 3.0 + (kf * (kf - 1.0) / (nf * (nf - kf + 1.0))).sqrt(),
        },
        SerflingCoefficients {
            rho: (1.0 - kf / nf) * (1.0 + 1.0 / kf),
            zeta: 4.0 / 3.0 + ((nf - kf - 1.0) * (nf - kf) / ((kf + 1.0) * nf)).sqrt(),
        },
    )
}

/// Hoeffding-Serfling: `exp(-2 k eps^2 / rho)`.
pub fn hoeffding_serfling_term(p: f64, k: u64, n: u64, q: f64, side: Side) -> Result<f64> {
    check_args(p, k, q)?;
    let SerflingCoefficients { rho, .. } = serfling_coefficients(k, n)?;
    let eps = deviation(p, q, side);
    Ok(clamp_exp(-2.0 * k as f64 * eps * eps / rho))
}

/// Bernstein-Serfling: `min(1, 2 delta)` where `log(1/delta)` is the
/// non-negative root of `eps = sigma sqrt(2 rho L / k) + zeta L / k`.
///
/// That root is `(k / zeta^2) (eps zeta + sigma^2 rho - s)` with
/// `s = sqrt(2 zeta rho sigma^2 eps + rho^2 sigma^4)`; multiplying through
/// by the conjugate gives `k eps^2 / (eps zeta + sigma^2 rho + s)`, which
/// is what is evaluated here to avoid cancellation for small `eps`.
pub fn bernstein_serfling_term(p: f64, k: u64, n: u64, q: f64, side: Side) -> Result<f64> {
    check_args(p, k, q)?;
    let SerflingCoefficients { rho, zeta } = serfling_coefficients(k, n)?;
    let eps = deviation(p, q, side);
    if eps == 0.0 {
        return Ok(1.0);
    }
    let var = population_variance(p)?;
    let s = (2.0 * zeta * rho * var * eps + rho * rho * var * var).sqrt();
    let log_inv_delta = k as f64 * eps * eps / (eps * zeta + var * rho + s);
    Ok((2.0 * (-log_inv_delta).exp()).min(1.0))
}

/// Combined without-replacement confidence for a non-empty subset of
/// {Hoeffding-Serfling, Bernstein-Serfling}.
pub fn confidence_wor(p: f64, k: u64, n: u64, q: f64, set: InequalitySet) -> Result<BoundResult> {
    set.check_for(SamplingMethod::WithoutReplacement)?;
    check_args(p, k, q)?;
    serfling_coefficients(k, n)?;
    let mut terms = Vec::with_capacity(4);
    for kind in set.iter() {
        for side in [Side::Over, Side::Under] {
            let value = match kind {
                InequalityKind::HoeffdingSerfling => hoeffding_serfling_term(p, k, n, q, side)?,
                InequalityKind::BernsteinSerfling => bernstein_serfling_term(p, k, n, q, side)?,
                _ => unreachable!("rejected by check_for"),
            };
            terms.push(BoundTerm::new(kind, side, value));
        }
    }
    Ok(BoundResult::from_terms(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::hoeffding_term;
    use crate::error::Error;
    use proptest::prelude::*;

    // 40-digit independent evaluations of the closed forms.
    const HS_OVER_P1667_K100_N1E6: f64 = 0.003_855_215_876_282_069_5;
    const HS_UNDER_P1667_K100_N1E6: f64 = 0.249_179_422_771_866_05;
    const BS_OVER_P1667_K100_N1E6: f64 = 0.027_065_917_957_858_728;
    const BS_UNDER_P001666_K10000_N1E6: f64 = 0.539_359_093_131_172_6;
    const ZETA_K100_N1E6: f64 = 1.333_432_837_002_597_5;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(serfling_coefficients(1, 100).unwrap().rho, 1.0);
        let c = serfling_coefficients(10_000, 1_000_000).unwrap();
        assert!((c.rho - 0.990001).abs() < 1e-15);
        let c = serfling_coefficients(100, 1_000_000).unwrap();
        assert!(close(c.zeta, ZETA_K100_N1E6, 1e-14));
        let c = serfling_coefficients(99, 100).unwrap();
        assert_eq!(c.zeta, 4.0 / 3.0);
    }

    #[test]
    fn coefficient_errors() {
        assert!(matches!(serfling_coefficients(5, 5), Err(Error::Domain(_))));
        assert!(matches!(serfling_coefficients(6, 5), Err(Error::Domain(_))));
        assert!(matches!(serfling_coefficients(1, 1), Err(Error::Domain(_))));
        assert!(matches!(serfling_coefficients(0, 5), Err(Error::Domain(_))));
    }

    #[test]
    fn tie_uses_lower_branch() {
        let n = 1_000_000;
        let chosen = serfling_coefficients(n / 2, n).unwrap();
        let (lower, upper) = serfling_branches(n / 2, n);
        assert_eq!(chosen, lower);
        // The two formulas happen to agree at the tie for even n.
        assert!((lower.rho - upper.rho).abs() < 1e-12);
        assert!((lower.zeta - upper.zeta).abs() < 1e-12);
    }

    #[test]
    fn term_values() {
        let p = 0.1667;
        let n = 1_000_000;
        assert!(close(
            hoeffding_serfling_term(p, 100, n, 2.0, Side::Over).unwrap(),
            HS_OVER_P1667_K100_N1E6,
            1e-12
        ));
        assert!(close(
            hoeffding_serfling_term(p, 100, n, 2.0, Side::Under).unwrap(),
            HS_UNDER_P1667_K100_N1E6,
            1e-12
        ));
        assert!(close(
            bernstein_serfling_term(p, 100, n, 2.0, Side::Over).unwrap(),
            BS_OVER_P1667_K100_N1E6,
            1e-12
        ));
        assert!(close(
            bernstein_serfling_term(0.001666, 10_000, n, 2.0, Side::Under).unwrap(),
            BS_UNDER_P001666_K10000_N1E6,
            1e-12
        ));
        for side in [Side::Over, Side::Under] {
            assert_eq!(hoeffding_serfling_term(p, 100, n, 1.0, side).unwrap(), 1.0);
            assert_eq!(bernstein_serfling_term(p, 100, n, 1.0, side).unwrap(), 1.0);
            assert_eq!(
                bernstein_serfling_term(1.0, 100, n, 1.0, side).unwrap(),
                1.0
            );
        }
    }

    #[test]
    fn rationalized_form_matches_direct_form() {
        // direct evaluation is fine away from tiny eps
        for &(p, k, q) in &[(0.1667, 100u64, 2.0), (0.3, 5000, 1.5), (0.01, 20_000, 3.0)] {
            let n = 1_000_000u64;
            let c = serfling_coefficients(k, n).unwrap();
            let var = p * (1.0 - p);
            let eps: f64 = p * q - p;
            let direct = (k as f64 / (c.zeta * c.zeta))
                * (-(2.0 * c.zeta * c.rho * var * eps + c.rho * c.rho * var * var).sqrt()
                    + eps * c.zeta
                    + var * c.rho);
            let expected = (2.0 * (-direct).exp()).min(1.0);
            let got = bernstein_serfling_term(p, k, n, q, Side::Over).unwrap();
            assert!(close(got, expected, 1e-9), "{got} vs {expected}");
        }
    }

    #[test]
    fn table_cells() {
        let n = 1_000_000;
        let c = |cardinality: f64, k| {
            confidence_wor(
                cardinality / 1e6,
                k,
                n,
                2.0,
                InequalitySet::WITHOUT_REPLACEMENT,
            )
            .unwrap()
            .confidence
        };
        assert!((c(166_666.0, 100) - 0.75).abs() <= 0.005);
        assert!((c(1666.0, 10_000) - 0.42).abs() <= 0.005);
        assert!((c(5000.0, 10_000) - 0.96).abs() <= 0.005);
        assert_eq!(
            confidence_wor(0.4, 10, n, 1.0, InequalitySet::WITHOUT_REPLACEMENT)
                .unwrap()
                .confidence,
            0.0
        );
    }

    #[test]
    fn rejects_with_replacement_kinds() {
        assert!(matches!(
            confidence_wor(0.4, 10, 100, 2.0, InequalitySet::WITH_REPLACEMENT),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn hs_tends_to_classical_hoeffding() {
        let (p, k, q) = (0.2, 1000, 1.5);
        let hs = hoeffding_serfling_term(p, k, 1_000_000_000_000, q, Side::Over).unwrap();
        let classical = hoeffding_term(p, k, q, Side::Over)
            .unwrap()
            .probability
            .unwrap();
        assert!(close(hs, classical, 1e-7));
    }

    proptest! {
        #[test]
        fn coefficient_ranges(n in 2u64..=1_000_000_000, frac in 0.0f64..1.0) {
            let k = ((frac * (n - 1) as f64) as u64).clamp(1, n - 1);
            let c = serfling_coefficients(k, n).unwrap();
            prop_assert!(c.rho > 0.0 && c.rho <= 1.0);
            prop_assert!(c.zeta >= 4.0 / 3.0 && c.zeta <= 7.0 / 3.0);
        }

        #[test]
        fn terms_in_unit_interval(
            p in 1e-9f64..=1.0,
            n in 2u64..1_000_000_000,
            frac in 0.0f64..1.0,
            q in 1.0f64..1e6,
        ) {
            let k = ((frac * (n - 1) as f64) as u64).clamp(1, n - 1);
            for side in [Side::Over, Side::Under] {
                let hs = hoeffding_serfling_term(p, k, n, q, side).unwrap();
                let bs = bernstein_serfling_term(p, k, n, q, side).unwrap();
                prop_assert!((0.0..=1.0).contains(&hs));
                prop_assert!((0.0..=1.0).contains(&bs));
            }
        }
    }
}
