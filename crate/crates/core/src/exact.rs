//! Exact `P(Q-error <= q)` by direct summation of the sampling distribution.
//!
//! With replacement the sample hit count is `Binomial(k, C/n)`; without
//! replacement it is `Hypergeometric(n, C, k)`. This module owns the
//! estimator `est = n * hits / k` and the set of hit counts it accepts.
//! The bound modules never see it, which keeps this an independent oracle.
//!
//! Probability masses are evaluated in log space with Loader's saddle-point
//! expansion (Stirling-series error terms plus a stable deviance term). A
//! plain log-gamma difference loses about `1e-6` relative accuracy at
//! `n = 1e9`; the saddle-point form stays near machine precision.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{q_error, PopulationSpec, SampleDesign, SamplingMethod};

/// Terms below this fraction of the largest term in range are dropped.
const TAIL_CUTOFF: f64 = 1e-30;

/// The scale-up estimator `n * hits / k`.
pub fn scaled_estimate(rows: u64, k: u64, hits: u64) -> f64 {
    rows as f64 * hits as f64 / k as f64
}

/// Whether a sample with `hits` matching rows yields Q-error `<= q`.
pub fn is_admissible(pop: &PopulationSpec, k: u64, hits: u64, q: f64) -> bool {
    let est = scaled_estimate(pop.rows(), k, hits);
    q_error(est, pop.cardinality() as f64)
        .map(|e| e.value() <= q)
        .unwrap_or(false)
}

/// Inclusive range of hit counts whose estimate has Q-error `<= q`.
///
/// An empty range is always stored as `lo = 1, hi = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AdmissibleRange {
    pub lo: u64,
    pub hi: u64,
}

impl AdmissibleRange {
    pub const EMPTY: Self = Self { lo: 1, hi: 0 };

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn contains(&self, x: u64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn len(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    fn intersect(&self, lo: u64, hi: u64) -> Self {
        let r = Self {
            lo: self.lo.max(lo),
            hi: self.hi.min(hi),
        };
        if r.is_empty() {
            Self::EMPTY
        } else {
            r
        }
    }
}

/// Finds the hit counts in `[0, k]` accepted by the clamped Q-error test.
///
/// The closed-form bracket `[T k / (q n), T q k / n]` (with `T = max(C, 1)`)
/// is only a starting point; each end is then moved until it agrees with
/// [`q_error`] evaluated in floating point, so the range is exactly the set
/// that a simulation using the same metric would accept.
pub fn admissible_range(pop: &PopulationSpec, k: u64, q: f64) -> Result<AdmissibleRange> {
    if k == 0 {
        return Err(Error::domain("sample size k must be at least 1"));
    }
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::domain(format!(
            "q = {q} must be a finite value >= 1"
        )));
    }
    let n = pop.rows() as f64;
    let truth = (pop.cardinality() as f64).max(1.0);
    let kf = k as f64;
    let est = |x: u64| scaled_estimate(pop.rows(), k, x).max(1.0);
    // Each half of the Q-error test is monotone in x.
    let under_ok = |x: u64| truth / est(x) <= q;
    let over_ok = |x: u64| est(x) / truth <= q;
    let clip = |v: f64| -> u64 {
        if v.is_nan() || v <= 0.0 {
            0
        } else if v >= kf {
            k
        } else {
            v as u64
        }
    };

    let mut lo = if truth / q <= 1.0 {
        0
    } else {
        clip((truth * kf / (q * n)).ceil())
    };
    while lo < k && !under_ok(lo) {
        lo += 1;
    }
    while lo > 0 && under_ok(lo - 1) {
        lo -= 1;
    }
    if !under_ok(lo) {
        return Ok(AdmissibleRange::EMPTY);
    }

    let mut hi = clip((truth * q * kf / n).floor());
    while hi > 0 && !over_ok(hi) {
        hi -= 1;
    }
    while hi < k && over_ok(hi + 1) {
        hi += 1;
    }
    if !over_ok(hi) || lo > hi {
        return Ok(AdmissibleRange::EMPTY);
    }
    Ok(AdmissibleRange { lo, hi })
}

/// Exact probability that a sample drawn per `design` yields Q-error `<= q`.
pub fn exact_confidence(pop: &PopulationSpec, design: &SampleDesign, q: f64) -> Result<f64> {
    design.check_against(pop)?;
    let range = admissible_range(pop, design.k(), q)?;
    let dist = HitDistribution::for_design(pop, design);
    Ok(dist.mass(range).clamp(0.0, 1.0))
}

/// Distribution of the number of matching rows in a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitDistribution {
    /// `k` independent draws, each matching with probability `C / n`.
    Binomial { rows: u64, cardinality: u64, k: u64 },
    /// `k` distinct rows out of `n`, `C` of which match.
    Hypergeometric { rows: u64, cardinality: u64, k: u64 },
}

impl HitDistribution {
    pub fn for_design(pop: &PopulationSpec, design: &SampleDesign) -> Self {
        let (rows, cardinality, k) = (pop.rows(), pop.cardinality(), design.k());
        match design.method() {
            SamplingMethod::WithReplacement => Self::Binomial {
                rows,
                cardinality,
                k,
            },
            SamplingMethod::WithoutReplacement => Self::Hypergeometric {
                rows,
                cardinality,
                k,
            },
        }
    }

    /// Inclusive support `[lo, hi]`.
    pub fn support(&self) -> (u64, u64) {
        match *self {
            Self::Binomial {
                rows,
                cardinality,
                k,
            } => {
                if cardinality == 0 {
                    (0, 0)
                } else if cardinality == rows {
                    (k, k)
                } else {
                    (0, k)
                }
            }
            Self::Hypergeometric {
                rows,
                cardinality,
                k,
            } => (k.saturating_sub(rows - cardinality), k.min(cardinality)),
        }
    }

    fn mode(&self) -> u64 {
        let (lo, hi) = self.support();
        let m = match *self {
            Self::Binomial {
                rows,
                cardinality,
                k,
            } => ((k as f64 + 1.0) * cardinality as f64 / rows as f64).floor() as u64,
            Self::Hypergeometric {
                rows,
                cardinality,
                k,
            } => {
                ((k as f64 + 1.0) * (cardinality as f64 + 1.0) / (rows as f64 + 2.0)).floor() as u64
            }
        };
        m.clamp(lo, hi)
    }

    /// Natural log of the probability mass at `x`; `-inf` off the support.
    pub fn ln_pmf(&self, x: u64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return f64::NEG_INFINITY;
        }
        match *self {
            Self::Binomial {
                rows,
                cardinality,
                k,
            } => {
                let p = cardinality as f64 / rows as f64;
                let q = (rows - cardinality) as f64 / rows as f64;
                ln_binom_raw(x as f64, k as f64, p, q)
            }
            Self::Hypergeometric {
                rows,
                cardinality,
                k,
            } => {
                let p = k as f64 / rows as f64;
                let q = (rows - k) as f64 / rows as f64;
                let failures = rows - cardinality;
                ln_binom_raw(x as f64, cardinality as f64, p, q)
                    + ln_binom_raw((k - x) as f64, failures as f64, p, q)
                    - ln_binom_raw(k as f64, rows as f64, p, q)
            }
        }
    }

    pub fn pmf(&self, x: u64) -> f64 {
        self.ln_pmf(x).exp()
    }

    /// Total mass on `range`, walking outward from the largest term in
    /// range and stopping once terms fall below [`TAIL_CUTOFF`] of it.
    pub fn mass(&self, range: AdmissibleRange) -> f64 {
        let (lo, hi) = self.support();
        let range = range.intersect(lo, hi);
        if range.is_empty() {
            return 0.0;
        }
        let start = self.mode().clamp(range.lo, range.hi);
        let peak = self.pmf(start);
        if peak == 0.0 {
            return 0.0;
        }
        let cutoff = peak * TAIL_CUTOFF;
        let mut sum = NeumaierSum::default();
        sum.add(peak);
        let mut x = start;
        while x > range.lo {
            x -= 1;
            let term = self.pmf(x);
            sum.add(term);
            if term < cutoff {
                break;
            }
        }
        let mut x = start;
        while x < range.hi {
            x += 1;
            let term = self.pmf(x);
            sum.add(term);
            if term < cutoff {
                break;
            }
        }
        sum.value()
    }
}

/// Compensated summation.
#[derive(Debug, Default, Clone, Copy)]
struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)]` for integer `n`.
fn stirling_error(n: f64) -> f64 {
    // n = 0..=15
    const SMALL: [f64; 16] = [
        0.0,
        0.081_061_466_795_327_26,
        0.041_340_695_955_409_3,
        0.027_677_925_684_998_34,
        0.020_790_672_103_765_093,
        0.016_644_691_189_821_193,
        0.013_876_128_823_070_748,
        0.011_896_709_945_891_77,
        0.010_411_265_261_972_096,
        0.009_255_462_182_712_733,
        0.008_330_563_433_362_87,
        0.007_573_675_487_951_841,
        0.006_942_840_107_209_53,
        0.006_408_994_188_004_207,
        0.005_951_370_112_758_847_5,
        0.005_554_733_551_962_801,
    ];
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return SMALL[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated by series when the two
/// arguments are close.
fn deviance(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        if s.abs() < f64::MIN_POSITIVE {
            return s;
        }
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
    }
    x * (x / np).ln() + np - x
}

/// Log binomial mass `ln P(Bin(n, p) = x)` with `q = 1 - p` passed in
/// separately so callers can supply it without cancellation.
fn ln_binom_raw(x: f64, n: f64, p: f64, q: f64) -> f64 {
    if p == 0.0 {
        return if x == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    if x == 0.0 {
        if n == 0.0 {
            return 0.0;
        }
        return if p < 0.1 {
            -deviance(n, n * q) - n * p
        } else {
            n * q.ln()
        };
    }
    if x == n {
        return if q < 0.1 {
            -deviance(n, n * p) - n * q
        } else {
            n * p.ln()
        };
    }
    if x < 0.0 || x > n {
        return f64::NEG_INFINITY;
    }
    let lc = stirling_error(n)
        - stirling_error(x)
        - stirling_error(n - x)
        - deviance(x, n * p)
        - deviance(n - x, n * q);
    let lf = LN_2PI + x.ln() + (-x / n).ln_1p();
    lc - 0.5 * lf
}
