//! Machine-readable reports: the confidence table for `q = 2` over the
//! standard cardinalities, and grid sweeps of every bound term for external
//! plotting.
//!
//! CSV output is UTF-8 with LF line endings, a fixed header, and the
//! literal `NA` wherever a value does not apply.

use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{BoundQuery, BoundResult, InequalityKind, InequalitySet, Side};
use crate::error::{Error, Result};
use crate::exact::exact_confidence;
use crate::model::{PopulationSpec, SampleDesign, SamplingMethod};
use crate::montecarlo::{run_simulation, SimulationConfig};

pub const TABLE1_CARDINALITIES: [u64; 18] = [
    166, 333, 500, 666, 833, 1000, 1666, 3333, 5000, 6666, 8333, 10000, 166_666, 333_333, 500_000,
    666_666, 833_333, 1_000_000,
];
pub const TABLE1_SAMPLE_SIZES: [u64; 3] = [100, 1000, 10_000];
pub const TABLE1_ROWS: u64 = 1_000_000;
pub const TABLE1_Q: f64 = 2.0;

/// Two-decimal display used by the published table: anything above 0.995
/// prints as `1.00`.
pub fn round_for_table(value: f64) -> String {
    if value > 0.995 {
        "1.00".to_string()
    } else {
        format!("{value:.2}")
    }
}

/// Nine significant digits, trailing zeros trimmed. Switches to exponent
/// notation outside `[1e-4, 1e9)`.
pub fn format_sig9(value: f64) -> String {
    if !value.is_finite() {
        return "NA".to_string();
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let mag = value.abs();
    if !(1e-4..1e9).contains(&mag) {
        let s = format!("{value:.8e}");
        let (mantissa, exp) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{exp}");
    }
    let decimals = (8 - mag.log10().floor() as i32).max(0) as usize;
    let s = format!("{value:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn format_opt(value: Option<f64>) -> String {
    value.map_or_else(|| "NA".to_string(), format_sig9)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer");
    String::from_utf8(bytes).expect("csv output is UTF-8")
}

/// One cell: `None` when the configuration is invalid for this table size
/// (e.g. `k >= n` without replacement).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Cell {
    pub k: u64,
    pub method: SamplingMethod,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1Row {
    pub cardinality: u64,
    /// `None` when the cardinality exceeds the table size.
    pub p: Option<f64>,
    /// Ordered R@100, NR@100, R@1000, NR@1000, R@10000, NR@10000.
    pub cells: Vec<Table1Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub rows_in_table: u64,
    pub q: f64,
    pub rows: Vec<Table1Row>,
}

/// Confidence that the Q-error is at most `q`, with replacement (Chernoff
/// and Bernstein) and without (the two Serfling bounds), for each standard
/// cardinality and sample size.
pub fn table1(n: u64, q: f64) -> Result<Table1> {
    if n == 0 {
        return Err(Error::domain("table size must be at least 1"));
    }
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::domain(format!(
            "q = {q} must be a finite value >= 1"
        )));
    }
    let rows = TABLE1_CARDINALITIES
        .iter()
        .map(|&c| {
            let Ok(pop) = PopulationSpec::new(n, c) else {
                let cells = TABLE1_SAMPLE_SIZES
                    .iter()
                    .flat_map(|&k| {
                        [
                            SamplingMethod::WithReplacement,
                            SamplingMethod::WithoutReplacement,
                        ]
                        .map(|method| Table1Cell {
                            k,
                            method,
                            confidence: None,
                        })
                    })
                    .collect();
                return Table1Row {
                    cardinality: c,
                    p: None,
                    cells,
                };
            };
            let p = pop.selectivity();
            let mut cells = Vec::with_capacity(6);
            for &k in &TABLE1_SAMPLE_SIZES {
                for method in [
                    SamplingMethod::WithReplacement,
                    SamplingMethod::WithoutReplacement,
                ] {
                    let confidence = BoundQuery::new(method, p, Some(n), k, q).confidence().ok();
                    cells.push(Table1Cell {
                        k,
                        method,
                        confidence,
                    });
                }
            }
            Table1Row {
                cardinality: c,
                p: Some(p),
                cells,
            }
        })
        .collect();
    Ok(Table1 {
        rows_in_table: n,
        q,
        rows,
    })
}

impl Table1 {
    pub fn header() -> Vec<String> {
        let mut h = vec!["cardinality".to_string(), "p".to_string()];
        let labels: Vec<String> = TABLE1_SAMPLE_SIZES
            .iter()
            .flat_map(|k| [format!("r_{k}"), format!("nr_{k}")])
            .collect();
        h.extend(labels.iter().cloned());
        h.extend(labels.iter().map(|l| format!("{l}_rounded")));
        h
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(Self::header()).expect("in-memory writer");
        for row in &self.rows {
            let mut rec = vec![row.cardinality.to_string(), format_opt(row.p)];
            rec.extend(row.cells.iter().map(|c| format_opt(c.confidence)));
            rec.extend(row.cells.iter().map(|c| {
                c.confidence
                    .map_or_else(|| "NA".to_string(), round_for_table)
            }));
            w.write_record(&rec).expect("in-memory writer");
        }
        finish(w)
    }

    /// Fixed-width rendering with the two-decimal cells.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "Confidence that Q-error <= {} (n = {}; R = with replacement, NR = without)\n",
            format_sig9(self.q),
            self.rows_in_table
        );
        out.push_str(&format!("{:>9} {:>9}", "C", "p"));
        for k in TABLE1_SAMPLE_SIZES {
            out.push_str(&format!(
                " {:>8} {:>8}",
                format!("R@{k}"),
                format!("NR@{k}")
            ));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{:>9} {:>9}",
                row.cardinality,
                row.p
                    .map_or_else(|| "NA".to_string(), |p| format!("{p:.6}"))
            ));
            for c in &row.cells {
                let v = c
                    .confidence
                    .map_or_else(|| "NA".to_string(), round_for_table);
                out.push_str(&format!(" {v:>8}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Values along one grid axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Axis {
    List(Vec<f64>),
    Linear { start: f64, end: f64, count: usize },
    Log { start: f64, end: f64, count: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Axis::List(ref v) => v.clone(),
            Axis::Linear { start, end, count } => {
                spaced(start, end, count, |a, b, t| a + (b - a) * t)
            }
            Axis::Log { start, end, count } => spaced(start, end, count, |a, b, t| {
                (a.ln() + (b.ln() - a.ln()) * t).exp()
            }),
        }
    }

    /// Values rounded to integers, consecutive duplicates removed.
    fn integer_values(&self) -> Vec<u64> {
        let mut out: Vec<u64> = self
            .values()
            .into_iter()
            .map(|v| v.round() as u64)
            .collect();
        out.dedup();
        out
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        let range = |rest: &str| -> std::result::Result<(f64, f64, usize), String> {
            let parts: Vec<&str> = rest.split(':').map(str::trim).collect();
            let [a, b, n] = parts[..] else {
                return Err(format!("range `{text}` needs the form start:end:count"));
            };
            let a = parse_number(a)?;
            let b = parse_number(b)?;
            let n: usize = n.parse().map_err(|_| format!("bad point count `{n}`"))?;
            if n == 0 {
                return Err("a range needs at least one point".to_string());
            }
            Ok((a, b, n))
        };
        if let Some(rest) = text.strip_prefix("log:") {
            let (start, end, count) = range(rest)?;
            if !(start > 0.0 && end > 0.0) {
                return Err(format!("log range `{text}` needs positive endpoints"));
            }
            return Ok(Axis::Log { start, end, count });
        }
        if let Some(rest) = text.strip_prefix("lin:") {
            let (start, end, count) = range(rest)?;
            return Ok(Axis::Linear { start, end, count });
        }
        let values = text
            .split(',')
            .map(|v| parse_number(v.trim()))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Axis::List(values))
    }
}

fn spaced(a: f64, b: f64, count: usize, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count)
        .map(|i| {
            if i == count - 1 {
                b
            } else {
                f(a, b, i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// How the population axis is given.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PopulationAxis {
    /// Selectivities; each becomes `C = round(p n)`.
    Selectivity(Axis),
    Cardinality(Axis),
}

/// A sweep over methods, populations, table sizes, sample sizes and `q`.
///
/// Text form, one `key = value` per line, `#` starts a comment:
///
/// ```text
/// method = wr, wor
/// p = log:1e-4:1:50        # or: cardinality = 100,1000
/// n = 1000000              # default 1000000
/// k = 100, 1000, 10000
/// q = lin:1:10:91
/// ```
///
/// Values are comma lists, `lin:start:end:count`, or `log:start:end:count`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub methods: Vec<SamplingMethod>,
    pub population: PopulationAxis,
    pub n: Axis,
    pub k: Axis,
    pub q: Axis,
}

pub const DEFAULT_GRID_ROWS: u64 = 1_000_000;

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut methods = None;
        let mut population = None;
        let mut n = None;
        let mut k = None;
        let mut q = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, found `{line}`")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim();
            let already = |set: bool| {
                if set {
                    Err(err(format!("`{key}` given more than once")))
                } else {
                    Ok(())
                }
            };
            match key.as_str() {
                "method" => {
                    already(methods.is_some())?;
                    let parsed = value
                        .split(',')
                        .map(|m| SamplingMethod::from_tag(m.trim()))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| err(e.to_string()))?;
                    methods = Some(parsed);
                }
                "p" | "cardinality" => {
                    already(population.is_some())?;
                    let axis = Axis::parse(value).map_err(err)?;
                    population = Some(if key == "p" {
                        PopulationAxis::Selectivity(axis)
                    } else {
                        PopulationAxis::Cardinality(axis)
                    });
                }
                "n" => {
                    already(n.is_some())?;
                    n = Some(Axis::parse(value).map_err(err)?);
                }
                "k" => {
                    already(k.is_some())?;
                    k = Some(Axis::parse(value).map_err(err)?);
                }
                "q" => {
                    already(q.is_some())?;
                    q = Some(Axis::parse(value).map_err(err)?);
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            message: format!("grid needs a `{what}` axis"),
        };
        let spec = GridSpec {
            methods: methods.unwrap_or_else(|| vec![SamplingMethod::WithReplacement]),
            population: population.ok_or_else(|| missing("p` or `cardinality"))?,
            n: n.unwrap_or(Axis::List(vec![DEFAULT_GRID_ROWS as f64])),
            k: k.ok_or_else(|| missing("k"))?,
            q: q.ok_or_else(|| missing("q"))?,
        };
        if spec.methods.is_empty() {
            return Err(missing("method"));
        }
        Ok(spec)
    }
}

/// Optional extra columns for [`figure_series`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct SeriesOptions {
    pub with_exact: bool,
    /// `(trials, seed)` for a Monte Carlo column.
    pub simulation: Option<(u64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// Empty predicate: every bound is vacuous and the confidence is 0.
    Degenerate,
    /// Violates a precondition; only the coordinates are filled in.
    Invalid,
}

impl PointStatus {
    pub fn name(self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Degenerate => "degenerate",
            PointStatus::Invalid => "invalid",
        }
    }
}

/// Per-term columns, in output order.
pub const TERM_COLUMNS: [(InequalityKind, Side); 10] = [
    (InequalityKind::Chernoff, Side::Over),
    (InequalityKind::Chernoff, Side::Under),
    (InequalityKind::Bernstein, Side::Over),
    (InequalityKind::Bernstein, Side::Under),
    (InequalityKind::Hoeffding, Side::Over),
    (InequalityKind::Hoeffding, Side::Under),
    (InequalityKind::HoeffdingSerfling, Side::Over),
    (InequalityKind::HoeffdingSerfling, Side::Under),
    (InequalityKind::BernsteinSerfling, Side::Over),
    (InequalityKind::BernsteinSerfling, Side::Under),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRecord {
    pub method: SamplingMethod,
    pub n: u64,
    pub cardinality: u64,
    pub p: f64,
    pub k: u64,
    pub q: f64,
    pub status: PointStatus,
    /// Values aligned with [`TERM_COLUMNS`].
    pub terms: [Option<f64>; 10],
    /// Chernoff + Bernstein.
    pub confidence_wr: Option<f64>,
    /// Chernoff + Bernstein + Hoeffding.
    pub confidence_wr_hoeffding: Option<f64>,
    /// Hoeffding-Serfling + Bernstein-Serfling.
    pub confidence_wor: Option<f64>,
    pub exact: Option<f64>,
    pub sim_rate: Option<f64>,
    pub sim_se: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureSeries {
    pub records: Vec<SeriesRecord>,
}

struct GridPoint {
    method: SamplingMethod,
    n: u64,
    cardinality: Option<u64>,
    requested_p: f64,
    k: u64,
    q: f64,
}

/// Evaluates every point of the grid. Points are processed in parallel and
/// returned in grid order: method, population, n, k, q (q fastest).
pub fn figure_series(spec: &GridSpec, options: SeriesOptions) -> Result<FigureSeries> {
    if let Some((trials, _)) = options.simulation {
        if trials == 0 {
            return Err(Error::usage("simulation needs at least one trial"));
        }
    }
    let ns = spec.n.integer_values();
    let ks = spec.k.integer_values();
    let qs = spec.q.values();
    let pops: Vec<(Option<u64>, f64)> = match &spec.population {
        PopulationAxis::Selectivity(axis) => axis.values().into_iter().map(|p| (None, p)).collect(),
        PopulationAxis::Cardinality(axis) => axis
            .integer_values()
            .into_iter()
            .map(|c| (Some(c), f64::NAN))
            .collect(),
    };
    if ns.is_empty() || ks.is_empty() || qs.is_empty() || pops.is_empty() {
        return Err(Error::usage("every grid axis needs at least one value"));
    }
    let mut points = Vec::new();
    for &method in &spec.methods {
        for &(cardinality, requested_p) in &pops {
            for &n in &ns {
                for &k in &ks {
                    for &q in &qs {
                        points.push(GridPoint {
                            method,
                            n,
                            cardinality,
                            requested_p,
                            k,
                            q,
                        });
                    }
                }
            }
        }
    }
    let records = points
        .par_iter()
        .map(|pt| evaluate_point(pt, options))
        .collect();
    Ok(FigureSeries { records })
}

fn evaluate_point(pt: &GridPoint, options: SeriesOptions) -> SeriesRecord {
    let cardinality = pt.cardinality.unwrap_or_else(|| {
        if (0.0..=1.0).contains(&pt.requested_p) {
            (pt.requested_p * pt.n as f64).round() as u64
        } else {
            u64::MAX
        }
    });
    let mut rec = SeriesRecord {
        method: pt.method,
        n: pt.n,
        cardinality,
        p: if pt.n > 0 {
            cardinality as f64 / pt.n as f64
        } else {
            f64::NAN
        },
        k: pt.k,
        q: pt.q,
        status: PointStatus::Invalid,
        terms: [None; 10],
        confidence_wr: None,
        confidence_wr_hoeffding: None,
        confidence_wor: None,
        exact: None,
        sim_rate: None,
        sim_se: None,
        note: None,
    };
    if pt.cardinality.is_none() && !(0.0..=1.0).contains(&pt.requested_p) {
        rec.p = pt.requested_p;
        rec.note = Some(format!("selectivity {} outside [0, 1]", pt.requested_p));
        return rec;
    }
    let setup = PopulationSpec::new(pt.n, cardinality).and_then(|pop| {
        let design = SampleDesign::new(pt.method, pt.k, pt.n)?;
        design.check_against(&pop)?;
        Ok((pop, design))
    });
    let (pop, design) = match setup {
        Ok(v) => v,
        Err(e) => {
            rec.note = Some(e.to_string());
            return rec;
        }
    };
    let p = pop.selectivity();
    let eval = |set: InequalitySet| -> Result<BoundResult> {
        BoundQuery::new(pt.method, p, Some(pt.n), pt.k, pt.q)
            .with_inequalities(set)
            .evaluate()
    };
    let results: Result<Vec<BoundResult>> = match pt.method {
        SamplingMethod::WithReplacement => [
            InequalitySet::WITH_REPLACEMENT,
            InequalitySet::WITH_HOEFFDING,
        ]
        .into_iter()
        .map(eval)
        .collect(),
        SamplingMethod::WithoutReplacement => {
            eval(InequalitySet::WITHOUT_REPLACEMENT).map(|r| vec![r])
        }
    };
    let results = match results {
        Ok(r) => r,
        Err(e) => {
            rec.note = Some(e.to_string());
            return rec;
        }
    };
    let full = results.last().expect("one result per set");
    for (slot, &(kind, side)) in rec.terms.iter_mut().zip(TERM_COLUMNS.iter()) {
        *slot = full.term(kind, side).and_then(|t| t.probability);
    }
    match pt.method {
        SamplingMethod::WithReplacement => {
            rec.confidence_wr = Some(results[0].confidence);
            rec.confidence_wr_hoeffding = Some(results[1].confidence);
        }
        SamplingMethod::WithoutReplacement => rec.confidence_wor = Some(results[0].confidence),
    }
    rec.status = if full.degenerate {
        PointStatus::Degenerate
    } else {
        PointStatus::Ok
    };
    if options.with_exact {
        rec.exact = exact_confidence(&pop, &design, pt.q).ok();
    }
    if let Some((trials, seed)) = options.simulation {
        if let Ok(summary) =
            SimulationConfig::new(pop, design, pt.q, trials, seed).and_then(|c| run_simulation(&c))
        {
            rec.sim_rate = Some(summary.empirical_rate);
            rec.sim_se = Some(summary.standard_error);
        }
    }
    rec
}

impl FigureSeries {
    pub fn header() -> Vec<String> {
        let mut h: Vec<String> = ["method", "n", "cardinality", "p", "k", "q", "status"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        h.extend(
            TERM_COLUMNS
                .iter()
                .map(|(kind, side)| format!("{}_{}", kind.name(), side.name())),
        );
        h.extend(
            [
                "confidence_wr",
                "confidence_wr_hoeffding",
                "confidence_wor",
                "exact",
                "sim_rate",
                "sim_se",
                "note",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        h
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        w.write_record(Self::header()).expect("in-memory writer");
        for r in &self.records {
            let mut rec = vec![
                r.method.tag().to_string(),
                r.n.to_string(),
                r.cardinality.to_string(),
                format_sig9(r.p),
                r.k.to_string(),
                format_sig9(r.q),
                r.status.name().to_string(),
            ];
            rec.extend(r.terms.iter().map(|&t| format_opt(t)));
            rec.extend(
                [
                    r.confidence_wr,
                    r.confidence_wr_hoeffding,
                    r.confidence_wor,
                    r.exact,
                    r.sim_rate,
                    r.sim_se,
                ]
                .into_iter()
                .map(format_opt),
            );
            rec.push(r.note.clone().unwrap_or_else(|| "NA".to_string()));
            w.write_record(&rec).expect("in-memory writer");
        }
        finish(w)
    }
}
