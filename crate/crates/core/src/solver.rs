//! Planning queries: invert a bound into the smallest sample size reaching a
//! target confidence at a given `q`, or the smallest `q` guaranteed at a
//! given sample size.

use serde::Serialize;

use crate::bounds::{BoundQuery, InequalitySet};
use crate::error::{Error, Result};
use crate::model::SamplingMethod;

pub const DEFAULT_K_MAX: u64 = 1_000_000_000;
pub const DEFAULT_Q_MAX: f64 = 1e6;

/// Relative width at which the bisection on `q` stops.
pub const Q_TOLERANCE: f64 = 1e-9;

/// Longest stretch the sample-size search will scan linearly after it sees
/// the bound decrease in `k`.
const MAX_LINEAR_SCAN: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanQuery {
    pub method: SamplingMethod,
    pub p: f64,
    /// Table size; required without replacement.
    pub rows: Option<u64>,
    pub inequalities: InequalitySet,
    pub target_confidence: f64,
    /// Fixed `q` for sample-size queries.
    pub target_q: Option<f64>,
    /// Fixed `k` for Q-error queries.
    pub k: Option<u64>,
    pub k_max: u64,
    pub q_max: f64,
}

impl PlanQuery {
    pub fn new(method: SamplingMethod, p: f64, rows: Option<u64>, target_confidence: f64) -> Self {
        Self {
            method,
            p,
            rows,
            inequalities: InequalitySet::default_for(method),
            target_confidence,
            target_q: None,
            k: None,
            k_max: DEFAULT_K_MAX,
            q_max: DEFAULT_Q_MAX,
        }
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.target_q = Some(q);
        self
    }

    pub fn with_k(mut self, k: u64) -> Self {
        self.k = Some(k);
        self
    }

    pub fn with_inequalities(mut self, set: InequalitySet) -> Self {
        self.inequalities = set;
        self
    }

    pub fn with_k_max(mut self, k_max: u64) -> Self {
        self.k_max = k_max;
        self
    }

    pub fn with_q_max(mut self, q_max: f64) -> Self {
        self.q_max = q_max;
        self
    }

    /// Bound confidence at `(k, q)` for this query's population and method.
    pub fn confidence_at(&self, k: u64, q: f64) -> Result<f64> {
        BoundQuery::new(self.method, self.p, self.rows, k, q)
            .with_inequalities(self.inequalities)
            .confidence()
    }

    /// Largest `k` the sample-size search may try.
    pub fn k_cap(&self) -> Result<u64> {
        match self.method {
            SamplingMethod::WithReplacement => Ok(self.k_max),
            SamplingMethod::WithoutReplacement => {
                let n = self.rows.ok_or_else(|| {
                    Error::usage("sampling without replacement needs the table row count")
                })?;
                if n < 2 {
                    return Err(Error::domain(
                        "sampling without replacement needs a table of at least 2 rows",
                    ));
                }
                Ok(self.k_max.min(n - 1))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.target_confidence > 0.0 && self.target_confidence < 1.0) {
            return Err(Error::usage(format!(
                "target confidence {} must lie strictly between 0 and 1",
                self.target_confidence
            )));
        }
        if self.k_max == 0 {
            return Err(Error::usage("k_max must be positive"));
        }
        if !(self.q_max >= 1.0) || !self.q_max.is_finite() {
            return Err(Error::usage(format!(
                "q_max = {} must be finite and >= 1",
                self.q_max
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::domain(format!(
                "selectivity p = {} must lie in [0, 1]",
                self.p
            )));
        }
        self.inequalities.check_for(self.method)
    }
}

/// Outcome of a planning query. `Unreachable` is an ordinary answer: the
/// target cannot be met anywhere up to the search cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Plan<T> {
    Reached { value: T, confidence: f64 },
    Unreachable { cap: T, confidence_at_cap: f64 },
}

impl<T: Copy> Plan<T> {
    pub fn value(&self) -> Option<T> {
        match *self {
            Plan::Reached { value, .. } => Some(value),
            Plan::Unreachable { .. } => None,
        }
    }

    pub fn is_unreachable(&self) -> bool {
        matches!(self, Plan::Unreachable { .. })
    }
}

/// Least `k` in `[1, cap]` whose bound reaches the target confidence at
/// `target_q`.
///
/// Probes `k = 1, 2, 4, ...` until the target is met, then bisects between
/// the last two probes. If the probes show the bound decreasing somewhere
/// (possible for Bernstein-Serfling, whose coefficients move with `k`), the
/// bracket is scanned linearly instead so the answer is still the least `k`
/// above the last failing probe.
pub fn min_sample_size(query: &PlanQuery) -> Result<Plan<u64>> {
    query.validate()?;
    let q = query
        .target_q
        .ok_or_else(|| Error::usage("sample-size query needs a target q"))?;
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::usage(format!(
            "target q = {q} must be finite and >= 1"
        )));
    }
    let target = query.target_confidence;
    let cap = query.k_cap()?;
    let conf = |k: u64| query.confidence_at(k, q);

    let mut probes: Vec<(u64, f64)> = Vec::new();
    let mut k = 1;
    loop {
        let c = conf(k)?;
        probes.push((k, c));
        if c >= target || k == cap {
            break;
        }
        k = k.saturating_mul(2).min(cap);
    }
    let (k_hi, c_hi) = *probes.last().expect("at least one probe");
    if c_hi < target {
        return Ok(Plan::Unreachable {
            cap,
            confidence_at_cap: c_hi,
        });
    }
    if probes.len() == 1 {
        return Ok(Plan::Reached {
            value: k_hi,
            confidence: c_hi,
        });
    }
    let (k_lo, _) = probes[probes.len() - 2];
    let monotone = probes.windows(2).all(|w| w[1].1 >= w[0].1);

    if !monotone && k_hi - k_lo <= MAX_LINEAR_SCAN {
        for k in k_lo + 1..=k_hi {
            let c = conf(k)?;
            if c >= target {
                return Ok(Plan::Reached {
                    value: k,
                    confidence: c,
                });
            }
        }
        unreachable!("the upper probe meets the target");
    }

    let (mut lo, mut hi, mut c_at_hi) = (k_lo, k_hi, c_hi);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let c = conf(mid)?;
        if c >= target {
            hi = mid;
            c_at_hi = c;
        } else {
            lo = mid;
        }
    }
    Ok(Plan::Reached {
        value: hi,
        confidence: c_at_hi,
    })
}

/// Least `q` in `[1, q_max]` (to relative tolerance [`Q_TOLERANCE`]) whose
/// bound reaches the target confidence at sample size `k`.
pub fn q_at_confidence(query: &PlanQuery) -> Result<Plan<f64>> {
    query.validate()?;
    let k = query
        .k
        .ok_or_else(|| Error::usage("q-error query needs a sample size k"))?;
    let target = query.target_confidence;
    let conf = |q: f64| query.confidence_at(k, q);

    let c_max = conf(query.q_max)?;
    if c_max < target {
        return Ok(Plan::Unreachable {
            cap: query.q_max,
            confidence_at_cap: c_max,
        });
    }
    let c_one = conf(1.0)?;
    if c_one >= target {
        return Ok(Plan::Reached {
            value: 1.0,
            confidence: c_one,
        });
    }
    // Bisect on log q; the bound is non-decreasing in q.
    let (mut lo, mut hi, mut c_at_hi) = (1.0f64, query.q_max, c_max);
    while hi / lo - 1.0 > Q_TOLERANCE {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        let c = conf(mid)?;
        if c >= target {
            hi = mid;
            c_at_hi = c;
        } else {
            lo = mid;
        }
    }
    Ok(Plan::Reached {
        value: hi,
        confidence: c_at_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const WR: SamplingMethod = SamplingMethod::WithReplacement;
    const WOR: SamplingMethod = SamplingMethod::WithoutReplacement;

    #[test]
    fn sample_size_brackets_table_cell() {
        let q = PlanQuery::new(WR, 0.005, None, 0.39).with_q(2.0);
        let k = min_sample_size(&q).unwrap().value().unwrap();
        assert!(k <= 1000);
        assert!(q.confidence_at(k, 2.0).unwrap() >= 0.39);
        assert!(q.confidence_at(k - 1, 2.0).unwrap() < 0.39);
    }

    #[test]
    fn sample_size_for_95_percent() {
        let q = PlanQuery::new(WR, 0.005, None, 0.95).with_q(2.0);
        let k = min_sample_size(&q).unwrap().value().unwrap();
        assert!(k > 1000 && k < 10_000, "{k}");
    }

    #[test]
    fn full_selectivity() {
        // p = 1 still has non-zero bound terms at k = 1
        let q = PlanQuery::new(WR, 1.0, None, 0.5).with_q(2.0);
        let k = min_sample_size(&q).unwrap().value().unwrap();
        assert!(q.confidence_at(k, 2.0).unwrap() >= 0.5);
        assert!(k == 1 || q.confidence_at(k - 1, 2.0).unwrap() < 0.5);
        let q = PlanQuery::new(WR, 1.0, None, 0.3).with_q(2.0);
        assert_eq!(min_sample_size(&q).unwrap().value(), Some(1));
    }

    #[test]
    fn without_replacement_capped_below_n() {
        let q = PlanQuery::new(WOR, 0.001, Some(1000), 0.999).with_q(1.01);
        match min_sample_size(&q).unwrap() {
            Plan::Reached { value, .. } => assert!(value <= 999),
            Plan::Unreachable { cap, .. } => assert_eq!(cap, 999),
        }
        let q = PlanQuery::new(WOR, 0.2, Some(1_000_000), 0.95).with_q(2.0);
        let k = min_sample_size(&q).unwrap().value().unwrap();
        assert!(q.confidence_at(k, 2.0).unwrap() >= 0.95);
        assert!(q.confidence_at(k - 1, 2.0).unwrap() < 0.95);
    }

    #[test]
    fn unreachable_sample_size() {
        let q = PlanQuery::new(WR, 0.0001, None, 0.99)
            .with_q(2.0)
            .with_k_max(1000);
        let plan = min_sample_size(&q).unwrap();
        assert!(plan.is_unreachable());
        let q = PlanQuery::new(WR, 0.0, None, 0.5).with_q(2.0);
        assert!(min_sample_size(&q).unwrap().is_unreachable());
    }

    #[test]
    fn q_below_two_at_large_sample() {
        let query = PlanQuery::new(WR, 0.005, None, 0.95).with_k(10_000);
        let q = q_at_confidence(&query).unwrap().value().unwrap();
        assert!(q <= 2.0);
        assert!(query.confidence_at(10_000, q).unwrap() >= 0.95);
        assert!(query.confidence_at(10_000, q * (1.0 - 1e-6)).unwrap() < 0.95);
    }

    #[test]
    fn q_unreachable_under_floor() {
        let query = PlanQuery::new(WR, 0.005, None, 0.999).with_k(10);
        match q_at_confidence(&query).unwrap() {
            Plan::Unreachable {
                cap,
                confidence_at_cap,
            } => {
                assert_eq!(cap, DEFAULT_Q_MAX);
                assert!(confidence_at_cap < 0.999);
                assert!(confidence_at_cap <= 1.0 - (-0.05f64).exp() + 1e-9);
            }
            other => panic!("expected unreachable, got {other:?}"),
        }
    }

    #[test]
    fn q_for_tiny_target_is_edge_of_zero_region() {
        // confidence is clamped to 0 while the two tails sum past 1, so a
        // vanishing target lands on the edge of that region, not on q = 1
        let query = PlanQuery::new(WR, 0.3, None, 1e-12).with_k(1000);
        let q = q_at_confidence(&query).unwrap().value().unwrap();
        assert!(q > 1.0);
        assert!(query.confidence_at(1000, q).unwrap() > 0.0);
        assert_eq!(query.confidence_at(1000, q * (1.0 - 1e-6)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_queries() {
        let base = PlanQuery::new(WR, 0.1, None, 0.9);
        assert!(matches!(min_sample_size(&base), Err(Error::Usage(_))));
        assert!(matches!(q_at_confidence(&base), Err(Error::Usage(_))));
        for bad in [0.0, 1.0, 1.5, f64::NAN] {
            let q = PlanQuery::new(WR, 0.1, None, bad).with_q(2.0);
            assert!(matches!(min_sample_size(&q), Err(Error::Usage(_))));
        }
        let q = PlanQuery::new(WOR, 0.1, None, 0.9).with_q(2.0);
        assert!(matches!(min_sample_size(&q), Err(Error::Usage(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sample_size_round_trip(
            p in 1e-4f64..=1.0,
            q in 1.05f64..10.0,
            target in 0.01f64..0.99,
        ) {
            let query = PlanQuery::new(WR, p, None, target).with_q(q).with_k_max(10_000_000);
            match min_sample_size(&query).unwrap() {
                Plan::Reached { value: k, .. } => {
                    prop_assert!(query.confidence_at(k, q).unwrap() >= target);
                    prop_assert!(k == 1 || query.confidence_at(k - 1, q).unwrap() < target);
                }
                Plan::Unreachable { cap, .. } => {
                    prop_assert!(query.confidence_at(cap, q).unwrap() < target);
                }
            }
        }

        #[test]
        fn sample_size_monotone_in_target(
            p in 1e-3f64..=1.0,
            t1 in 0.01f64..0.98,
            dt in 0.0f64..0.01,
        ) {
            let a = PlanQuery::new(WR, p, None, t1).with_q(2.0);
            let b = PlanQuery::new(WR, p, None, t1 + dt).with_q(2.0);
            let ka = min_sample_size(&a).unwrap().value();
            let kb = min_sample_size(&b).unwrap().value();
            if let (Some(ka), Some(kb)) = (ka, kb) {
                prop_assert!(kb >= ka);
            }
        }
    }
}
