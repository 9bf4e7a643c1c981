//! Seeded Monte Carlo simulation of the sampling process.
//!
//! Trial `t` of a run with seed `s` draws from its own ChaCha8 stream
//! (`seed_from_u64(s)` with stream `t`), so results do not depend on how
//! trials are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::scaled_estimate;
use crate::model::{q_error, PopulationSpec, SampleDesign, SamplingMethod};

/// Identifies the generator and the per-trial derivation scheme. Bump the
/// suffix whenever either changes, since it invalidates stored fixtures.
pub const RNG_ALGORITHM: &str = "chacha8/seed_from_u64+stream=trial/v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub population: PopulationSpec,
    pub design: SampleDesign,
    pub q: f64,
    pub trials: u64,
    pub seed: u64,
    /// Keep every trial's Q-error in the summary (for histograms).
    pub keep_q_errors: bool,
}

impl SimulationConfig {
    pub fn new(
        population: PopulationSpec,
        design: SampleDesign,
        q: f64,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            population,
            design,
            q,
            trials,
            seed,
            keep_q_errors: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn keep_q_errors(mut self, keep: bool) -> Self {
        self.keep_q_errors = keep;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::domain("simulation needs at least one trial"));
        }
        if !(self.q >= 1.0) || !self.q.is_finite() {
            return Err(Error::domain(format!(
                "q = {} must be a finite value >= 1",
                self.q
            )));
        }
        self.design.check_against(&self.population)
    }
}

/// One simulated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub hits: u64,
    pub estimate: f64,
    pub q_error: f64,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub trials: u64,
    pub successes: u64,
    pub empirical_rate: f64,
    pub standard_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_errors: Option<Vec<f64>>,
    pub rng: &'static str,
}

impl SimulationSummary {
    fn from_counts(trials: u64, successes: u64, q_errors: Option<Vec<f64>>) -> Self {
        let rate = successes as f64 / trials as f64;
        Self {
            trials,
            successes,
            empirical_rate: rate,
            standard_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
            q_errors,
            rng: RNG_ALGORITHM,
        }
    }
}

/// The generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Number of matching rows among `k` rows drawn per `design`.
pub fn draw_hits<R: Rng + ?Sized>(rng: &mut R, pop: &PopulationSpec, design: &SampleDesign) -> u64 {
    let (n, c, k) = (pop.rows(), pop.cardinality(), design.k());
    match design.method() {
        SamplingMethod::WithReplacement => {
            if c == 0 {
                0
            } else if c == n {
                k
            } else {
                Binomial::new(k, c as f64 / n as f64)
                    .expect("0 < p < 1")
                    .sample(rng)
            }
        }
        SamplingMethod::WithoutReplacement => sequential_hypergeometric(rng, n, c, k),
    }
}

/// Draws `k` rows without replacement from `n` rows of which `c` match,
/// one conditional Bernoulli step at a time: the next row matches with
/// probability `remaining matches / remaining rows`. Memory use is
/// constant in `n`.
pub fn sequential_hypergeometric<R: Rng + ?Sized>(rng: &mut R, n: u64, c: u64, k: u64) -> u64 {
    debug_assert!(c <= n && k <= n);
    let mut rows_left = n;
    let mut hits_left = c;
    let mut hits = 0;
    for drawn in 0..k {
        if hits_left == 0 {
            break;
        }
        if hits_left == rows_left {
            // every remaining row matches
            hits += k - drawn;
            break;
        }
        if rng.random_range(0..rows_left) < hits_left {
            hits += 1;
            hits_left -= 1;
        }
        rows_left -= 1;
    }
    hits
}

pub fn run_trial(cfg: &SimulationConfig, trial: u64) -> TrialOutcome {
    let mut rng = trial_rng(cfg.seed, trial);
    let hits = draw_hits(&mut rng, &cfg.population, &cfg.design);
    let estimate = scaled_estimate(cfg.population.rows(), cfg.design.k(), hits);
    let q_error = q_error(estimate, cfg.population.cardinality() as f64)
        .expect("estimate and truth are non-negative")
        .value();
    TrialOutcome {
        trial,
        hits,
        estimate,
        q_error,
        success: q_error <= cfg.q,
    }
}

pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationSummary> {
    cfg.validate()?;
    if cfg.keep_q_errors {
        let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect();
        let successes = outcomes.iter().filter(|o| o.success).count() as u64;
        let q_errors = outcomes.into_iter().map(|o| o.q_error).collect();
        return Ok(SimulationSummary::from_counts(
            cfg.trials,
            successes,
            Some(q_errors),
        ));
    }
    let successes = (0..cfg.trials)
        .into_par_iter()
        .filter(|&t| run_trial(cfg, t).success)
        .count() as u64;
    Ok(SimulationSummary::from_counts(cfg.trials, successes, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_confidence;

    fn pop(n: u64, c: u64) -> PopulationSpec {
        PopulationSpec::new(n, c).unwrap()
    }

    #[test]
    fn deterministic_for_same_config() {
        let cfg = SimulationConfig::new(
            pop(10_000, 700),
            SampleDesign::without_replacement(300, 10_000).unwrap(),
            1.5,
            2000,
            42,
        )
        .unwrap()
        .keep_q_errors(true);
        let a = run_simulation(&cfg).unwrap();
        let b = run_simulation(&cfg).unwrap();
        assert_eq!(a, b);
        let sequential: u64 = (0..cfg.trials)
            .map(|t| u64::from(run_trial(&cfg, t).success))
            .sum();
        assert_eq!(a.successes, sequential);
        let other = run_simulation(&SimulationConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.q_errors, other.q_errors);
    }

    #[test]
    fn agrees_with_exact_binomial_tail() {
        let p = pop(1_000_000, 5000);
        let d = SampleDesign::with_replacement(1000).unwrap();
        let cfg = SimulationConfig::new(p, d, 2.0, 100_000, 7).unwrap();
        let s = run_simulation(&cfg).unwrap();
        let exact = exact_confidence(&p, &d, 2.0).unwrap();
        assert!(
            (s.empirical_rate - exact).abs() <= 3.0 * s.standard_error,
            "{s:?} vs {exact}"
        );
    }

    #[test]
    fn full_predicate_is_always_exact() {
        for d in [
            SampleDesign::with_replacement(17).unwrap(),
            SampleDesign::without_replacement(17, 50).unwrap(),
        ] {
            let cfg = SimulationConfig::new(pop(50, 50), d, 1.0, 100, 1).unwrap();
            assert_eq!(run_simulation(&cfg).unwrap().empirical_rate, 1.0);
        }
    }

    #[test]
    fn empty_predicate_clamps() {
        let cfg = SimulationConfig::new(
            pop(1_000_000, 0),
            SampleDesign::with_replacement(1000).unwrap(),
            2.0,
            100,
            3,
        )
        .unwrap();
        let s = run_simulation(&cfg).unwrap();
        assert_eq!(s.empirical_rate, 1.0);
        assert_eq!(s.standard_error, 0.0);
    }

    #[test]
    fn summary_arithmetic() {
        let s = SimulationSummary::from_counts(400, 100, None);
        assert_eq!(s.empirical_rate, 0.25);
        assert!((s.standard_error - (0.25f64 * 0.75 / 400.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sequential_hypergeometric_stays_in_support() {
        let mut rng = trial_rng(5, 0);
        for &(n, c, k) in &[
            (10u64, 9u64, 5u64),
            (10, 1, 9),
            (100, 50, 99),
            (7, 0, 3),
            (7, 7, 3),
        ] {
            for _ in 0..500 {
                let x = sequential_hypergeometric(&mut rng, n, c, k);
                assert!(x <= c && x <= k);
                assert!(k - x <= n - c);
            }
        }
    }

    #[test]
    fn sequential_hypergeometric_mean() {
        let (n, c, k) = (1000u64, 300u64, 100u64);
        let draws = 20_000;
        let mut rng = trial_rng(11, 0);
        let total: u64 = (0..draws)
            .map(|_| sequential_hypergeometric(&mut rng, n, c, k))
            .sum();
        let mean = total as f64 / draws as f64;
        let expected = k as f64 * c as f64 / n as f64;
        let var = expected * (1.0 - 0.3) * (n - k) as f64 / (n - 1) as f64;
        assert!((mean - expected).abs() < 5.0 * (var / draws as f64).sqrt());
    }

    #[test]
    fn rejects_invalid_configs() {
        let p = pop(100, 10);
        let d = SampleDesign::with_replacement(10).unwrap();
        assert!(SimulationConfig::new(p, d, 2.0, 0, 1).is_err());
        assert!(SimulationConfig::new(p, d, 0.5, 10, 1).is_err());
        let d = SampleDesign::without_replacement(150, 200).unwrap();
        assert!(SimulationConfig::new(p, d, 2.0, 10, 1).is_err());
    }
}
