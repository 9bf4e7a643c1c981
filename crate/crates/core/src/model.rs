//! Shared domain types: the table population, the sampling design and the
//! Q-error metric.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// A table of `rows` rows, `cardinality` of which satisfy the predicate.
///
/// Selectivity is always derived from the two integers; it is never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PopulationSpec {
    rows: u64,
    cardinality: u64,
}

impl PopulationSpec {
    pub fn new(rows: u64, cardinality: u64) -> Result<Self> {
        if rows == 0 {
            return Err(Error::domain("population must have at least one row"));
        }
        if cardinality > rows {
            return Err(Error::domain(format!(
                "cardinality {cardinality} exceeds row count {rows}"
            )));
        }
        Ok(Self { rows, cardinality })
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn cardinality(&self) -> u64 {
        self.cardinality
    }

    /// `C / n` at full double precision.
    pub fn selectivity(&self) -> f64 {
        self.cardinality as f64 / self.rows as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    WithReplacement,
    WithoutReplacement,
}

impl SamplingMethod {
    /// Short tag used in CLI flags and report columns.
    pub fn tag(self) -> &'static str {
        match self {
            SamplingMethod::WithReplacement => "wr",
            SamplingMethod::WithoutReplacement => "wor",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag.trim().to_ascii_lowercase().as_str() {
            "wr" => Ok(SamplingMethod::WithReplacement),
            "wor" => Ok(SamplingMethod::WithoutReplacement),
            other => Err(Error::usage(format!(
                "unknown sampling method '{other}' (expected wr or wor)"
            ))),
        }
    }
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// How `k` rows are drawn from the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SampleDesign {
    method: SamplingMethod,
    k: u64,
}

impl SampleDesign {
    pub fn with_replacement(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("sample size k must be at least 1"));
        }
        Ok(Self {
            method: SamplingMethod::WithReplacement,
            k,
        })
    }

    /// Without replacement the design is tied to a table size: `n >= 2` and
    /// `1 <= k < n`.
    pub fn without_replacement(k: u64, rows: u64) -> Result<Self> {
        check_without_replacement(k, rows)?;
        Ok(Self {
            method: SamplingMethod::WithoutReplacement,
            k,
        })
    }

    pub fn new(method: SamplingMethod, k: u64, rows: u64) -> Result<Self> {
        match method {
            SamplingMethod::WithReplacement => Self::with_replacement(k),
            SamplingMethod::WithoutReplacement => Self::without_replacement(k, rows),
        }
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Re-checks the design against a population; a without-replacement
    /// design built for one table may not fit another.
    pub fn check_against(&self, pop: &PopulationSpec) -> Result<()> {
        match self.method {
            SamplingMethod::WithReplacement => Ok(()),
            SamplingMethod::WithoutReplacement => check_without_replacement(self.k, pop.rows()),
        }
    }
}

pub(crate) fn check_without_replacement(k: u64, rows: u64) -> Result<()> {
    if rows < 2 {
        return Err(Error::domain(
            "sampling without replacement needs a table of at least 2 rows",
        ));
    }
    if k == 0 || k >= rows {
        return Err(Error::domain(format!(
            "sampling without replacement needs 1 <= k < n (got k = {k}, n = {rows})"
        )));
    }
    Ok(())
}

/// A Q-error value; always `>= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct QError(f64);

impl QError {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_perfect(self) -> bool {
        self.0 == 1.0
    }
}

impl fmt::Display for QError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// `max(T/E, E/T)` with both estimate and truth clamped to at least 1.
pub fn q_error(est: f64, truth: f64) -> Result<QError> {
    if !(est >= 0.0) || !(truth >= 0.0) {
        return Err(Error::domain(format!(
            "q-error needs non-negative inputs (est = {est}, truth = {truth})"
        )));
    }
    let e = est.max(1.0);
    let t = truth.max(1.0);
    Ok(QError((t / e).max(e / t)))
}

pub fn selectivity(pop: &PopulationSpec) -> f64 {
    pop.selectivity()
}

/// Bernoulli population variance `p (1 - p)`.
pub fn population_variance(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("selectivity {p} is outside [0, 1]")));
    }
    Ok(p * (1.0 - p))
}
