//! Sample-based cardinality estimates annotated with a-priori bounds.

use std::collections::HashMap;

use rand::Rng;
use serde::Serialize;

use super::predicate::{true_cardinality, Predicate};
use super::table::TableData;
use crate::bounds::{BoundQuery, InequalitySet};
use crate::error::{Error, Result};
use crate::exact::scaled_estimate;
use crate::model::{q_error, SampleDesign, SamplingMethod};
use crate::montecarlo::{trial_rng, RNG_ALGORITHM};
use crate::solver::{q_at_confidence, Plan, PlanQuery};

/// Row indices for one sample of `design.k()` rows out of `n`.
///
/// Without replacement this is a partial Fisher-Yates shuffle over a
/// sparse map of swapped positions, so memory is `O(k)` whatever `n` is.
pub fn draw_sample_indices<R: Rng + ?Sized>(
    rng: &mut R,
    n: u64,
    design: &SampleDesign,
) -> Vec<u64> {
    let k = design.k();
    match design.method() {
        SamplingMethod::WithReplacement => (0..k).map(|_| rng.random_range(0..n)).collect(),
        SamplingMethod::WithoutReplacement => {
            let mut swapped: HashMap<u64, u64> = HashMap::with_capacity(k as usize);
            (0..k)
                .map(|i| {
                    let j = rng.random_range(i..n);
                    let at_j = swapped.get(&j).copied().unwrap_or(j);
                    let at_i = swapped.get(&i).copied().unwrap_or(i);
                    swapped.insert(j, at_i);
                    at_j
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRequest {
    pub method: SamplingMethod,
    pub k: u64,
    pub q_values: Vec<f64>,
    /// Also report the smallest `q` guaranteed at this confidence.
    pub target_confidence: Option<f64>,
    pub seed: u64,
    /// Evaluate the bounds at this selectivity and skip the full scan.
    pub assume_p: Option<f64>,
    pub inequalities: Option<InequalitySet>,
}

impl EstimateRequest {
    pub fn new(method: SamplingMethod, k: u64, seed: u64) -> Self {
        Self {
            method,
            k,
            q_values: vec![2.0],
            target_confidence: None,
            seed,
            assume_p: None,
            inequalities: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectivitySource {
    /// Full scan of the table.
    True,
    /// Supplied by the caller.
    Assumed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundAtQ {
    pub q: f64,
    /// Bound confidence at the selectivity in [`EstimateReport::p`].
    pub confidence: f64,
    /// Whether the realized Q-error is within `q`; absent without ground truth.
    pub within: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub rows: u64,
    pub method: SamplingMethod,
    pub k: u64,
    pub seed: u64,
    pub sample_hits: u64,
    pub estimate: f64,
    pub true_cardinality: Option<u64>,
    pub realized_q_error: Option<f64>,
    pub p: f64,
    pub p_source: SelectivitySource,
    pub inequalities: InequalitySet,
    pub bounds: Vec<BoundAtQ>,
    pub q_at_target: Option<Plan<f64>>,
    pub rng: &'static str,
}

/// Draws one seeded sample, scales the hit count to an estimate, and
/// attaches the bound confidence for each requested `q`.
pub fn estimate_with_bounds(
    table: &TableData,
    predicate: &Predicate,
    request: &EstimateRequest,
) -> Result<EstimateReport> {
    let n = table.row_count() as u64;
    if n == 0 {
        return Err(Error::domain("cannot sample from an empty table"));
    }
    let design = SampleDesign::new(request.method, request.k, n)?;
    let set = request
        .inequalities
        .unwrap_or_else(|| InequalitySet::default_for(request.method));
    set.check_for(request.method)?;
    for &q in &request.q_values {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::domain(format!(
                "q = {q} must be a finite value >= 1"
            )));
        }
    }
    let bound = predicate.bind(table)?;

    let (truth, p, p_source) = match request.assume_p {
        Some(p) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!(
                    "assumed selectivity {p} must lie in [0, 1]"
                )));
            }
            (None, p, SelectivitySource::Assumed)
        }
        None => {
            let c = true_cardinality(table, predicate)?;
            (Some(c), c as f64 / n as f64, SelectivitySource::True)
        }
    };

    let mut rng = trial_rng(request.seed, 0);
    let sample = draw_sample_indices(&mut rng, n, &design);
    let hits = sample
        .iter()
        .filter(|&&row| bound.matches(table, row as usize))
        .count() as u64;
    let estimate = scaled_estimate(n, design.k(), hits);
    let realized = truth
        .map(|c| q_error(estimate, c as f64).map(|e| e.value()))
        .transpose()?;

    let bounds = request
        .q_values
        .iter()
        .map(|&q| {
            let confidence = BoundQuery::new(request.method, p, Some(n), design.k(), q)
                .with_inequalities(set)
                .confidence()?;
            Ok(BoundAtQ {
                q,
                confidence,
                within: realized.map(|r| r <= q),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let q_at_target = request
        .target_confidence
        .map(|target| {
            let query = PlanQuery::new(request.method, p, Some(n), target)
                .with_k(design.k())
                .with_inequalities(set);
            q_at_confidence(&query)
        })
        .transpose()?;

    Ok(EstimateReport {
        rows: n,
        method: request.method,
        k: design.k(),
        seed: request.seed,
        sample_hits: hits,
        estimate,
        true_cardinality: truth,
        realized_q_error: realized,
        p,
        p_source,
        inequalities: set,
        bounds,
        q_at_target,
        rng: RNG_ALGORITHM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::exact_confidence;
    use crate::ingest::predicate::parse_predicate;
    use crate::ingest::table::Column;
    use crate::model::PopulationSpec;
    use proptest::prelude::*;
    use std::collections::HashSet;

    /// `n` rows with `id = 0..n`; `id < c` matches exactly `c` rows.
    fn id_table(n: i64) -> TableData {
        TableData::from_columns(vec!["id".into()], vec![Column::Integer((0..n).collect())]).unwrap()
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let t = id_table(1000);
        let p = parse_predicate("id < 200").unwrap();
        let req = EstimateRequest {
            q_values: vec![1.5, 2.0],
            target_confidence: Some(0.9),
            ..EstimateRequest::new(SamplingMethod::WithoutReplacement, 100, 17)
        };
        let a = estimate_with_bounds(&t, &p, &req).unwrap();
        let b = estimate_with_bounds(&t, &p, &req).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.true_cardinality, Some(200));
        assert_eq!(a.estimate, a.sample_hits as f64 * 10.0);
        assert!(a.bounds[1].confidence >= a.bounds[0].confidence);
        assert!(a.q_at_target.is_some());
    }

    #[test]
    fn empty_predicate_clamps_to_perfect() {
        let t = id_table(500);
        let p = parse_predicate("id < 0").unwrap();
        let r = estimate_with_bounds(
            &t,
            &p,
            &EstimateRequest::new(SamplingMethod::WithReplacement, 50, 1),
        )
        .unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.realized_q_error, Some(1.0));
        assert_eq!(r.bounds[0].confidence, 0.0);
    }

    #[test]
    fn without_replacement_sample_size_edge() {
        let t = id_table(100);
        let p = parse_predicate("id < 30").unwrap();
        let ok = EstimateRequest::new(SamplingMethod::WithoutReplacement, 99, 3);
        assert!(estimate_with_bounds(&t, &p, &ok).is_ok());
        let bad = EstimateRequest::new(SamplingMethod::WithoutReplacement, 100, 3);
        assert!(matches!(
            estimate_with_bounds(&t, &p, &bad),
            Err(Error::Domain(_))
        ));
        let wr = EstimateRequest::new(SamplingMethod::WithReplacement, 500, 3);
        assert!(estimate_with_bounds(&t, &p, &wr).is_ok());
    }

    #[test]
    fn assumed_selectivity_skips_ground_truth() {
        let t = id_table(1000);
        let p = parse_predicate("id < 200").unwrap();
        let req = EstimateRequest {
            assume_p: Some(0.5),
            ..EstimateRequest::new(SamplingMethod::WithReplacement, 100, 5)
        };
        let r = estimate_with_bounds(&t, &p, &req).unwrap();
        assert_eq!(r.p_source, SelectivitySource::Assumed);
        assert_eq!(r.true_cardinality, None);
        assert_eq!(r.realized_q_error, None);
        assert_eq!(r.bounds[0].within, None);
        let expected = BoundQuery::new(SamplingMethod::WithReplacement, 0.5, None, 100, 2.0)
            .confidence()
            .unwrap();
        assert_eq!(r.bounds[0].confidence, expected);
    }

    #[test]
    fn frequency_tracks_exact_confidence() {
        let t = id_table(1000);
        let p = parse_predicate("id < 200").unwrap();
        let seeds = 1000;
        let within = (0..seeds)
            .filter(|&s| {
                let req = EstimateRequest::new(SamplingMethod::WithoutReplacement, 100, s);
                estimate_with_bounds(&t, &p, &req).unwrap().bounds[0]
                    .within
                    .unwrap()
            })
            .count();
        let rate = within as f64 / seeds as f64;
        let pop = PopulationSpec::new(1000, 200).unwrap();
        let exact = exact_confidence(
            &pop,
            &SampleDesign::without_replacement(100, 1000).unwrap(),
            2.0,
        )
        .unwrap();
        let se = (exact * (1.0 - exact) / seeds as f64)
            .sqrt()
            .max(1.0 / seeds as f64);
        assert!((rate - exact).abs() <= 4.0 * se, "{rate} vs {exact}");
    }

    #[test]
    fn full_sample_without_replacement_is_a_permutation() {
        let design = SampleDesign::without_replacement(99, 100).unwrap();
        let mut rng = trial_rng(8, 0);
        let mut idx = draw_sample_indices(&mut rng, 100, &design);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 99);
        assert!(idx.iter().all(|&i| i < 100));
    }

    proptest! {
        #[test]
        fn without_replacement_never_repeats(n in 2u64..5_000_000_000, frac in 0.0f64..1.0, seed: u64) {
            let k = ((frac * (n - 1).min(2000) as f64) as u64).clamp(1, n - 1);
            let design = SampleDesign::without_replacement(k, n).unwrap();
            let mut rng = trial_rng(seed, 0);
            let idx = draw_sample_indices(&mut rng, n, &design);
            prop_assert_eq!(idx.len() as u64, k);
            let distinct: HashSet<u64> = idx.iter().copied().collect();
            prop_assert_eq!(distinct.len() as u64, k);
            prop_assert!(idx.iter().all(|&i| i < n));
        }
    }
}
