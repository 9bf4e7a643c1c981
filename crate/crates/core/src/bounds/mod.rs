//! Concentration-inequality bounds on the Q-error of a uniform sample.
//!
//! Every inequality contributes an over-estimation term (a bound on
//! `P(est > q * truth)`) and an under-estimation term (a bound on
//! `P(est < truth / q)`). For a chosen set of inequalities the smallest
//! applicable term on each side wins, giving `omega` and `psi`, and the
//! reported confidence is the lower bound `max(0, 1 - omega - psi)` on
//! `P(Q-error <= q)`.

mod with_replacement;
mod without_replacement;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{PopulationSpec, SampleDesign, SamplingMethod};

pub use with_replacement::{bernstein_term, chernoff_term, confidence_wr, hoeffding_term};
pub use without_replacement::{
    bernstein_serfling_term, confidence_wor, hoeffding_serfling_term, serfling_branches,
    serfling_coefficients, SerflingCoefficients,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityKind {
    Chernoff,
    Bernstein,
    Hoeffding,
    HoeffdingSerfling,
    BernsteinSerfling,
}

impl InequalityKind {
    pub const ALL: [InequalityKind; 5] = [
        InequalityKind::Chernoff,
        InequalityKind::Bernstein,
        InequalityKind::Hoeffding,
        InequalityKind::HoeffdingSerfling,
        InequalityKind::BernsteinSerfling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InequalityKind::Chernoff => "chernoff",
            InequalityKind::Bernstein => "bernstein",
            InequalityKind::Hoeffding => "hoeffding",
            InequalityKind::HoeffdingSerfling => "hoeffding_serfling",
            InequalityKind::BernsteinSerfling => "bernstein_serfling",
        }
    }

    /// The sampling method the inequality is valid for.
    pub fn method(self) -> SamplingMethod {
        match self {
            InequalityKind::Chernoff | InequalityKind::Bernstein | InequalityKind::Hoeffding => {
                SamplingMethod::WithReplacement
            }
            InequalityKind::HoeffdingSerfling | InequalityKind::BernsteinSerfling => {
                SamplingMethod::WithoutReplacement
            }
        }
    }

    fn bit(self) -> u8 {
        1 << self as u8
    }
}

impl fmt::Display for InequalityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of inequalities, iterated in [`InequalityKind::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct InequalitySet(u8);

impl InequalitySet {
    /// Chernoff + Bernstein: the standard with-replacement bound.
    pub const WITH_REPLACEMENT: Self = Self(0b00011);
    /// Chernoff + Bernstein + Hoeffding.
    pub const WITH_HOEFFDING: Self = Self(0b00111);
    /// Hoeffding-Serfling + Bernstein-Serfling.
    pub const WITHOUT_REPLACEMENT: Self = Self(0b11000);

    pub fn empty() -> Self {
        Self(0)
    }

    pub fn default_for(method: SamplingMethod) -> Self {
        match method {
            SamplingMethod::WithReplacement => Self::WITH_REPLACEMENT,
            SamplingMethod::WithoutReplacement => Self::WITHOUT_REPLACEMENT,
        }
    }

    pub fn with(self, kind: InequalityKind) -> Self {
        Self(self.0 | kind.bit())
    }

    pub fn contains(self, kind: InequalityKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_superset_of(self, other: Self) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn iter(self) -> impl Iterator<Item = InequalityKind> {
        InequalityKind::ALL
            .into_iter()
            .filter(move |k| self.contains(*k))
    }

    /// Rejects empty sets and sets holding kinds meant for the other method.
    pub fn check_for(self, method: SamplingMethod) -> Result<()> {
        if self.is_empty() {
            return Err(Error::usage("inequality set is empty"));
        }
        if let Some(bad) = self.iter().find(|k| k.method() != method) {
            return Err(Error::usage(format!(
                "{bad} is not valid for sampling {}",
                match method {
                    SamplingMethod::WithReplacement => "with replacement",
                    SamplingMethod::WithoutReplacement => "without replacement",
                }
            )));
        }
        Ok(())
    }
}

impl FromIterator<InequalityKind> for InequalitySet {
    fn from_iter<I: IntoIterator<Item = InequalityKind>>(iter: I) -> Self {
        iter.into_iter().fold(Self::empty(), Self::with)
    }
}

impl fmt::Display for InequalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.iter().map(InequalityKind::name).collect();
        f.write_str(&names.join("+"))
    }
}

impl Serialize for InequalitySet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Over,
    Under,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Over => "over",
            Side::Under => "under",
        }
    }
}

/// One inequality's bound on one tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTerm {
    pub inequality: InequalityKind,
    pub side: Side,
    /// Clamped to `[0, 1]`; `None` when the inequality does not apply
    /// (Hoeffding's under-estimation side with `p * q <= 1`).
    pub probability: Option<f64>,
}

impl BoundTerm {
    pub(crate) fn new(inequality: InequalityKind, side: Side, probability: f64) -> Self {
        Self {
            inequality,
            side,
            probability: Some(probability),
        }
    }

    pub fn applicable(&self) -> bool {
        self.probability.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub omega: f64,
    pub psi: f64,
    pub confidence: f64,
    /// Inequality that supplied `omega`.
    pub omega_by: InequalityKind,
    /// Inequality that supplied `psi`.
    pub psi_by: InequalityKind,
    pub terms: Vec<BoundTerm>,
    /// Set when the predicate is empty (`p = 0`): every term is vacuous and
    /// the confidence is reported as the trivial bound 0.
    pub degenerate: bool,
}

impl BoundResult {
    /// Takes the per-side minimum over applicable terms. A side with no
    /// applicable term (only possible for a Hoeffding-only set) is bounded
    /// by 1.
    pub(crate) fn from_terms(terms: Vec<BoundTerm>) -> Self {
        let best = |side: Side| {
            let on_side = terms.iter().filter(|t| t.side == side);
            on_side
                .clone()
                .filter_map(|t| t.probability.map(|p| (p, t.inequality)))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .unwrap_or_else(|| {
                    let first = on_side.clone().next().expect("one term per side");
                    (1.0, first.inequality)
                })
        };
        let (omega, omega_by) = best(Side::Over);
        let (psi, psi_by) = best(Side::Under);
        Self {
            omega,
            psi,
            confidence: (1.0 - omega - psi).max(0.0),
            omega_by,
            psi_by,
            terms,
            degenerate: false,
        }
    }

    pub fn term(&self, inequality: InequalityKind, side: Side) -> Option<&BoundTerm> {
        self.terms
            .iter()
            .find(|t| t.inequality == inequality && t.side == side)
    }

    fn degenerate(set: InequalitySet) -> Self {
        let terms = set
            .iter()
            .flat_map(|kind| {
                [
                    BoundTerm::new(kind, Side::Over, 1.0),
                    BoundTerm {
                        inequality: kind,
                        side: Side::Under,
                        // pq = 0 never exceeds 1
                        probability: (kind != InequalityKind::Hoeffding).then_some(1.0),
                    },
                ]
            })
            .collect();
        let mut result = Self::from_terms(terms);
        result.degenerate = true;
        result
    }
}

/// A full bound evaluation request.
///
/// `rows` is ignored with replacement and required without.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundQuery {
    pub method: SamplingMethod,
    pub p: f64,
    pub rows: Option<u64>,
    pub k: u64,
    pub q: f64,
    pub inequalities: InequalitySet,
}

impl BoundQuery {
    pub fn new(method: SamplingMethod, p: f64, rows: Option<u64>, k: u64, q: f64) -> Self {
        Self {
            method,
            p,
            rows,
            k,
            q,
            inequalities: InequalitySet::default_for(method),
        }
    }

    pub fn from_population(pop: &PopulationSpec, design: &SampleDesign, q: f64) -> Self {
        Self::new(
            design.method(),
            pop.selectivity(),
            Some(pop.rows()),
            design.k(),
            q,
        )
    }

    pub fn with_inequalities(mut self, set: InequalitySet) -> Self {
        self.inequalities = set;
        self
    }

    /// Evaluates the query; an empty predicate (`p = 0`) yields a degenerate
    /// result with confidence 0 instead of a domain error.
    pub fn evaluate(&self) -> Result<BoundResult> {
        self.inequalities.check_for(self.method)?;
        let rows = match self.method {
            SamplingMethod::WithReplacement => None,
            SamplingMethod::WithoutReplacement => Some(self.rows.ok_or_else(|| {
                Error::usage("sampling without replacement needs the table row count")
            })?),
        };
        if self.p == 0.0 {
            check_k_q(self.k, self.q)?;
            if let Some(n) = rows {
                serfling_coefficients(self.k, n)?;
            }
            return Ok(BoundResult::degenerate(self.inequalities));
        }
        match rows {
            None => confidence_wr(self.p, self.k, self.q, self.inequalities),
            Some(n) => confidence_wor(self.p, self.k, n, self.q, self.inequalities),
        }
    }

    /// Shorthand for `evaluate()?.confidence`.
    pub fn confidence(&self) -> Result<f64> {
        self.evaluate().map(|r| r.confidence)
    }
}

pub(crate) fn check_args(p: f64, k: u64, q: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!(
            "selectivity p = {p} must lie in (0, 1]"
        )));
    }
    check_k_q(k, q)
}

fn check_k_q(k: u64, q: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::domain("sample size k must be at least 1"));
    }
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::domain(format!(
            "q = {q} must be a finite value >= 1"
        )));
    }
    Ok(())
}

/// Over-side deviation `p q - p` and under-side deviation `p - p / q` of the
/// sample mean from `p`.
pub(crate) fn deviation(p: f64, q: f64, side: Side) -> f64 {
    match side {
        Side::Over => p * (q - 1.0),
        Side::Under => p * (q - 1.0) / q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_operations() {
        let s: InequalitySet = [InequalityKind::Bernstein, InequalityKind::Chernoff]
            .into_iter()
            .collect();
        assert_eq!(s, InequalitySet::WITH_REPLACEMENT);
        assert!(InequalitySet::WITH_HOEFFDING.is_superset_of(s));
        assert_eq!(s.to_string(), "chernoff+bernstein");
        assert!(s.check_for(SamplingMethod::WithReplacement).is_ok());
        assert!(matches!(
            s.check_for(SamplingMethod::WithoutReplacement),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            InequalitySet::empty().check_for(SamplingMethod::WithReplacement),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn degenerate_query() {
        let r = BoundQuery::new(SamplingMethod::WithReplacement, 0.0, None, 1000, 2.0)
            .evaluate()
            .unwrap();
        assert!(r.degenerate);
        assert_eq!(r.confidence, 0.0);
        let r = BoundQuery::new(SamplingMethod::WithoutReplacement, 0.0, Some(100), 10, 2.0)
            .evaluate()
            .unwrap();
        assert!(r.degenerate);
        assert!(
            BoundQuery::new(SamplingMethod::WithoutReplacement, 0.0, Some(10), 10, 2.0)
                .evaluate()
                .is_err()
        );
    }

    #[test]
    fn wor_query_needs_rows() {
        let q = BoundQuery::new(SamplingMethod::WithoutReplacement, 0.1, None, 10, 2.0);
        assert!(matches!(q.evaluate(), Err(Error::Usage(_))));
    }

    #[test]
    fn from_population_uses_c_over_n() {
        let pop = PopulationSpec::new(1_000_000, 166).unwrap();
        let design = SampleDesign::with_replacement(100).unwrap();
        let q = BoundQuery::from_population(&pop, &design, 2.0);
        assert_eq!(q.p, 166.0 / 1e6);
        assert_eq!(q.inequalities, InequalitySet::WITH_REPLACEMENT);
    }
}
