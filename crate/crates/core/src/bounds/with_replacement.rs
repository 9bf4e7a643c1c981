//! Bounds for sampling with replacement: the hit count is `Binomial(k, p)`
//! and none of the bounds depend on the table size.

use super::{check_args, deviation, BoundResult, BoundTerm, InequalityKind, InequalitySet, Side};
use crate::error::Result;
use crate::model::{population_variance, SamplingMethod};

/// Chernoff bound for a sum of Bernoulli trials with `1 + delta = q`
/// (over) or `1 - delta = 1 / q` (under).
///
/// Evaluated as `exp(pk * log_base)` so that `q^q` never materializes.
pub fn chernoff_term(p: f64, k: u64, q: f64, side: Side) -> Result<f64> {
    check_args(p, k, q)?;
    let ln_q = (q - 1.0).ln_1p();
    let log_base = match side {
        Side::Over => (q - 1.0) - q * ln_q,
        Side::Under => (1.0 / q - 1.0) + ln_q / q,
    };
    Ok(clamp_exp(p * k as f64 * log_base))
}

/// Bernstein's inequality with `M = 1` and `sigma^2 = p (1 - p)`.
pub fn bernstein_term(p: f64, k: u64, q: f64, side: Side) -> Result<f64> {
    check_args(p, k, q)?;
    let eps = deviation(p, q, side);
    if eps == 0.0 {
        return Ok(1.0);
    }
    let var = population_variance(p)?;
    Ok(clamp_exp(
        -(k as f64) * eps * eps / (2.0 * var + 2.0 * eps / 3.0),
    ))
}

/// Hoeffding's inequality. The under-estimation side is only available
/// when `p q > 1`; otherwise the returned term is marked inapplicable.
pub fn hoeffding_term(p: f64, k: u64, q: f64, side: Side) -> Result<BoundTerm> {
    check_args(p, k, q)?;
    let k = k as f64;
    let probability = match side {
        Side::Over => {
            let d = p * (q - 1.0);
            Some(clamp_exp(-2.0 * d * d * k))
        }
        Side::Under if p * q > 1.0 => {
            let d = (p * q - 1.0) / q;
            Some(clamp_exp(-2.0 * k * d * d))
        }
        Side::Under => None,
    };
    Ok(BoundTerm {
        inequality: InequalityKind::Hoeffding,
        side,
        probability,
    })
}

/// Combined with-replacement confidence for any non-empty subset of
/// {Chernoff, Bernstein, Hoeffding}. Never reads the table size.
pub fn confidence_wr(p: f64, k: u64, q: f64, set: InequalitySet) -> Result<BoundResult> {
    set.check_for(SamplingMethod::WithReplacement)?;
    check_args(p, k, q)?;
    let mut terms = Vec::with_capacity(6);
    for kind in set.iter() {
        for side in [Side::Over, Side::Under] {
            let term = match kind {
                InequalityKind::Chernoff => {
                    BoundTerm::new(kind, side, chernoff_term(p, k, q, side)?)
                }
                InequalityKind::Bernstein => {
                    BoundTerm::new(kind, side, bernstein_term(p, k, q, side)?)
                }
                InequalityKind::Hoeffding => hoeffding_term(p, k, q, side)?,
                InequalityKind::HoeffdingSerfling | InequalityKind::BernsteinSerfling => {
                    unreachable!("rejected by check_for")
                }
            };
            terms.push(term);
        }
    }
    Ok(BoundResult::from_terms(terms))
}

pub(super) fn clamp_exp(log_value: f64) -> f64 {
    log_value.exp().clamp(0.0, 1.0)
}
