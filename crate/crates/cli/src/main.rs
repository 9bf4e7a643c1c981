//! `qbound`: Q-error confidence bounds for sampling-based cardinality
//! estimation.
//!
//! Exit status: 0 on success (including unreachable planning targets),
//! 1 on usage or domain errors, 2 on I/O errors.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qbound_core::exact::{admissible_range, exact_confidence};
use qbound_core::ingest::{
    estimate_with_bounds, load_table, parse_predicate, ColumnType, EstimateRequest, LoadOptions,
};
use qbound_core::montecarlo::{run_simulation, SimulationConfig};
use qbound_core::reports::{figure_series, table1, GridSpec, SeriesOptions};
use qbound_core::solver::{min_sample_size, q_at_confidence, Plan, PlanQuery};
use qbound_core::{BoundQuery, Error, InequalitySet, PopulationSpec, SampleDesign, SamplingMethod};
use serde_json::json;

use output::{csv_lines, emit, meta, Format, Record, Report, Val};

#[derive(Parser, Debug)]
#[command(
    name = "qbound",
    version,
    about = "Q-error confidence bounds for random uniform sampling"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value = "text", global = true)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bound on P(Q-error <= q) for one configuration.
    Bound(BoundArgs),
    /// Smallest sample size whose bound reaches a confidence target.
    SolveK(SolveKArgs),
    /// Smallest q guaranteed at a confidence target for a fixed sample size.
    SolveQ(SolveQArgs),
    /// Exact P(Q-error <= q) by tail summation.
    Exact(ExactArgs),
    /// Seeded Monte Carlo estimate of P(Q-error <= q).
    Simulate(SimulateArgs),
    /// Confidence table for q = 2 over the standard cardinalities.
    Table1(Table1Args),
    /// Evaluate a parameter grid and write plot-ready CSV.
    Figures(FiguresArgs),
    /// Estimate a predicate's cardinality from a sample of a CSV table.
    Estimate(EstimateArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Method {
    Wr,
    Wor,
}

impl From<Method> for SamplingMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Wr => SamplingMethod::WithReplacement,
            Method::Wor => SamplingMethod::WithoutReplacement,
        }
    }
}

#[derive(Args, Debug)]
struct Population {
    /// Selectivity in [0, 1].
    #[arg(long, conflicts_with = "cardinality")]
    p: Option<f64>,
    /// Number of matching rows; needs --rows.
    #[arg(long, requires = "rows")]
    cardinality: Option<u64>,
    /// Table size; required without replacement.
    #[arg(long)]
    rows: Option<u64>,
}

impl Population {
    /// `(p, rows)` for the given method.
    fn resolve(&self, method: SamplingMethod) -> Result<(f64, Option<u64>), Error> {
        let (p, rows) = match (self.p, self.cardinality, self.rows) {
            (Some(p), None, rows) => (p, rows),
            (None, Some(c), Some(n)) => {
                let pop = PopulationSpec::new(n, c)?;
                (pop.selectivity(), Some(n))
            }
            _ => return Err(usage("give either --p or --cardinality with --rows")),
        };
        if method == SamplingMethod::WithoutReplacement && rows.is_none() {
            return Err(usage("--method wor needs --rows"));
        }
        Ok((p, rows))
    }
}

#[derive(Args, Debug)]
struct Inequalities {
    /// Add Hoeffding's inequality to the with-replacement bound.
    #[arg(long)]
    with_hoeffding: bool,
}

impl Inequalities {
    fn set(&self, method: SamplingMethod) -> Result<InequalitySet, Error> {
        match (self.with_hoeffding, method) {
            (false, m) => Ok(InequalitySet::default_for(m)),
            (true, SamplingMethod::WithReplacement) => Ok(InequalitySet::WITH_HOEFFDING),
            (true, SamplingMethod::WithoutReplacement) => {
                Err(usage("--with-hoeffding applies only to --method wr"))
            }
        }
    }
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    population: Population,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    q: f64,
    #[command(flatten)]
    inequalities: Inequalities,
}

#[derive(Args, Debug)]
struct SolveKArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    population: Population,
    #[arg(long)]
    q: f64,
    /// Target confidence in (0, 1).
    #[arg(long)]
    confidence: f64,
    #[arg(long, default_value_t = qbound_core::solver::DEFAULT_K_MAX)]
    k_max: u64,
    #[command(flatten)]
    inequalities: Inequalities,
}

#[derive(Args, Debug)]
struct SolveQArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[command(flatten)]
    population: Population,
    #[arg(long)]
    k: u64,
    /// Target confidence in (0, 1).
    #[arg(long)]
    confidence: f64,
    #[arg(long, default_value_t = qbound_core::solver::DEFAULT_Q_MAX)]
    q_max: f64,
    #[command(flatten)]
    inequalities: Inequalities,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    cardinality: u64,
    #[arg(long)]
    rows: u64,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    q: f64,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    cardinality: u64,
    #[arg(long)]
    rows: u64,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct Table1Args {
    #[arg(long, default_value_t = qbound_core::reports::TABLE1_ROWS)]
    rows: u64,
    #[arg(long, default_value_t = qbound_core::reports::TABLE1_Q)]
    q: f64,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FiguresArgs {
    /// Grid specification file (key = value lines).
    #[arg(long)]
    grid: PathBuf,
    /// Output directory; the series is written to `series.csv` inside it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    with_exact: bool,
    #[arg(long, requires = "trials")]
    with_simulation: bool,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    predicate: String,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    k: u64,
    /// Comma-separated q values.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    q: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the ground-truth scan and evaluate bounds at this selectivity.
    #[arg(long)]
    assume_p: Option<f64>,
    /// Also report the smallest q guaranteed at this confidence.
    #[arg(long)]
    confidence: Option<f64>,
    /// Field delimiter (single byte).
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// The first line is data, not column names.
    #[arg(long)]
    no_header: bool,
    /// Declared column type, `name:integer|real|text`; repeatable.
    #[arg(long = "type")]
    types: Vec<String>,
    #[command(flatten)]
    inequalities: Inequalities,
}

fn usage(msg: &str) -> Error {
    Error::Usage(msg.to_string())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let failed = e.use_stderr();
            let _ = e.print();
            return if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qbound: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let text = match &cli.command {
        Command::Bound(a) => bound(a)?.render(cli.format),
        Command::SolveK(a) => solve_k(a)?.render(cli.format),
        Command::SolveQ(a) => solve_q(a)?.render(cli.format),
        Command::Exact(a) => exact(a)?.render(cli.format),
        Command::Simulate(a) => simulate(a)?.render(cli.format),
        Command::Table1(a) => {
            let t = table1(a.rows, a.q)?;
            let rendered = match cli.format {
                Format::Text => t.to_text(),
                Format::Csv => t.to_csv(),
                Format::Json => pretty(&json!({
                    "query": { "rows": a.rows, "q": a.q },
                    "result": t,
                    "meta": meta(),
                })),
            };
            match &a.out {
                Some(path) => {
                    std::fs::write(path, rendered).map_err(|e| io_error(path, e))?;
                    String::new()
                }
                None => rendered,
            }
        }
        Command::Figures(a) => figures(a, cli.format)?,
        Command::Estimate(a) => estimate(a, cli.format)?,
    };
    emit(&text).map_err(|e| io_error(Path::new("<stdout>"), e))
}

fn pretty(v: &serde_json::Value) -> String {
    format!(
        "{}\n",
        serde_json::to_string_pretty(v).expect("serializable")
    )
}

fn query_record(method: SamplingMethod, p: f64, rows: Option<u64>, set: InequalitySet) -> Record {
    let mut r = Record::new();
    r.push("method", Val::Str(method.tag().into()))
        .push("p", Val::Num(p))
        .push("rows", Val::opt_int(rows))
        .push("inequalities", Val::Str(set.to_string()));
    r
}

fn bound(a: &BoundArgs) -> Result<Report, Error> {
    let method = a.method.into();
    let (p, rows) = a.population.resolve(method)?;
    let set = a.inequalities.set(method)?;
    let result = BoundQuery::new(method, p, rows, a.k, a.q)
        .with_inequalities(set)
        .evaluate()?;
    let mut query = query_record(method, p, rows, set);
    query.push("k", Val::Int(a.k)).push("q", Val::Num(a.q));
    let mut out = Record::new();
    out.push("confidence", Val::Num(result.confidence))
        .push("omega", Val::Num(result.omega))
        .push("psi", Val::Num(result.psi))
        .push("omega_by", Val::Str(result.omega_by.name().into()))
        .push("psi_by", Val::Str(result.psi_by.name().into()))
        .push("degenerate", Val::Bool(result.degenerate));
    Ok(Report {
        query,
        result: out,
        terms: result.terms,
    })
}

fn plan_record<T: Copy>(plan: &Plan<T>, name: &str, val: impl Fn(T) -> Val) -> Record {
    let mut r = Record::new();
    match *plan {
        Plan::Reached { value, confidence } => {
            r.push("unreachable", Val::Bool(false))
                .push(name, val(value))
                .push("confidence", Val::Num(confidence))
                .push("cap", Val::Na)
                .push("confidence_at_cap", Val::Na);
        }
        Plan::Unreachable {
            cap,
            confidence_at_cap,
        } => {
            r.push("unreachable", Val::Bool(true))
                .push(name, Val::Na)
                .push("confidence", Val::Na)
                .push("cap", val(cap))
                .push("confidence_at_cap", Val::Num(confidence_at_cap));
        }
    }
    r
}

fn solve_k(a: &SolveKArgs) -> Result<Report, Error> {
    let method = a.method.into();
    let (p, rows) = a.population.resolve(method)?;
    let set = a.inequalities.set(method)?;
    let query = PlanQuery::new(method, p, rows, a.confidence)
        .with_q(a.q)
        .with_k_max(a.k_max)
        .with_inequalities(set);
    let plan = min_sample_size(&query)?;
    let mut q = query_record(method, p, rows, set);
    q.push("q", Val::Num(a.q))
        .push("target_confidence", Val::Num(a.confidence))
        .push("k_max", Val::Int(a.k_max));
    Ok(Report {
        query: q,
        result: plan_record(&plan, "k", Val::Int),
        terms: Vec::new(),
    })
}

fn solve_q(a: &SolveQArgs) -> Result<Report, Error> {
    let method = a.method.into();
    let (p, rows) = a.population.resolve(method)?;
    let set = a.inequalities.set(method)?;
    let query = PlanQuery::new(method, p, rows, a.confidence)
        .with_k(a.k)
        .with_q_max(a.q_max)
        .with_inequalities(set);
    let plan = q_at_confidence(&query)?;
    let mut q = query_record(method, p, rows, set);
    q.push("k", Val::Int(a.k))
        .push("target_confidence", Val::Num(a.confidence))
        .push("q_max", Val::Num(a.q_max));
    Ok(Report {
        query: q,
        result: plan_record(&plan, "q", Val::Num),
        terms: Vec::new(),
    })
}

fn population_query(method: SamplingMethod, c: u64, n: u64, k: u64, q: f64) -> Record {
    let mut r = Record::new();
    r.push("method", Val::Str(method.tag().into()))
        .push("cardinality", Val::Int(c))
        .push("rows", Val::Int(n))
        .push("k", Val::Int(k))
        .push("q", Val::Num(q));
    r
}

fn exact(a: &ExactArgs) -> Result<Report, Error> {
    let method = a.method.into();
    let pop = PopulationSpec::new(a.rows, a.cardinality)?;
    let design = SampleDesign::new(method, a.k, a.rows)?;
    let confidence = exact_confidence(&pop, &design, a.q)?;
    let range = admissible_range(&pop, a.k, a.q)?;
    let bound = BoundQuery::from_population(&pop, &design, a.q).confidence()?;
    let mut r = Record::new();
    r.push("exact_confidence", Val::Num(confidence))
        .push("bound_confidence", Val::Num(bound))
        .push(
            "admissible_lo",
            if range.is_empty() {
                Val::Na
            } else {
                Val::Int(range.lo)
            },
        )
        .push(
            "admissible_hi",
            if range.is_empty() {
                Val::Na
            } else {
                Val::Int(range.hi)
            },
        );
    Ok(Report {
        query: population_query(method, a.cardinality, a.rows, a.k, a.q),
        result: r,
        terms: Vec::new(),
    })
}

fn simulate(a: &SimulateArgs) -> Result<Report, Error> {
    let method = a.method.into();
    let pop = PopulationSpec::new(a.rows, a.cardinality)?;
    let design = SampleDesign::new(method, a.k, a.rows)?;
    let summary = run_simulation(&SimulationConfig::new(pop, design, a.q, a.trials, a.seed)?)?;
    let mut q = population_query(method, a.cardinality, a.rows, a.k, a.q);
    q.push("trials", Val::Int(a.trials))
        .push("seed", Val::Int(a.seed));
    let mut r = Record::new();
    r.push("successes", Val::Int(summary.successes))
        .push("empirical_rate", Val::Num(summary.empirical_rate))
        .push("standard_error", Val::Num(summary.standard_error))
        .push("rng", Val::Str(summary.rng.into()));
    Ok(Report {
        query: q,
        result: r,
        terms: Vec::new(),
    })
}

fn figures(a: &FiguresArgs, format: Format) -> Result<String, Error> {
    let text = std::fs::read_to_string(&a.grid).map_err(|e| io_error(&a.grid, e))?;
    let spec: GridSpec = text.parse()?;
    let simulation = if a.with_simulation {
        Some((a.trials.expect("clap enforces --trials"), a.seed))
    } else {
        None
    };
    let series = figure_series(
        &spec,
        SeriesOptions {
            with_exact: a.with_exact,
            simulation,
        },
    )?;
    std::fs::create_dir_all(&a.out).map_err(|e| io_error(&a.out, e))?;
    let path = a.out.join("series.csv");
    std::fs::write(&path, series.to_csv()).map_err(|e| io_error(&path, e))?;
    let mut q = Record::new();
    q.push("grid", Val::Str(a.grid.display().to_string()))
        .push("with_exact", Val::Bool(a.with_exact))
        .push("trials", Val::opt_int(simulation.map(|s| s.0)))
        .push("seed", Val::Int(a.seed));
    let mut r = Record::new();
    r.push("path", Val::Str(path.display().to_string()))
        .push("records", Val::Int(series.records.len() as u64));
    Ok(Report {
        query: q,
        result: r,
        terms: Vec::new(),
    }
    .render(format))
}

fn estimate(a: &EstimateArgs, format: Format) -> Result<String, Error> {
    let method: SamplingMethod = a.method.into();
    let delimiter = match a.delimiter.as_bytes() {
        [b] => *b,
        b"\\t" => b'\t',
        _ => return Err(usage("--delimiter must be a single byte")),
    };
    let mut options = LoadOptions {
        delimiter,
        has_header: !a.no_header,
        ..LoadOptions::default()
    };
    for spec in &a.types {
        let (name, ty) = spec
            .rsplit_once(':')
            .ok_or_else(|| usage("--type expects name:integer|real|text"))?;
        options
            .type_hints
            .insert(name.to_string(), ColumnType::from_name(ty)?);
    }
    let set = a.inequalities.set(method)?;
    let table = load_table(&a.input, &options)?;
    let predicate = parse_predicate(&a.predicate)?;
    let request = EstimateRequest {
        q_values: a.q.clone(),
        target_confidence: a.confidence,
        assume_p: a.assume_p,
        inequalities: Some(set),
        ..EstimateRequest::new(method, a.k, a.seed)
    };
    let report = estimate_with_bounds(&table, &predicate, &request)?;

    let mut common = Record::new();
    common
        .push("rows", Val::Int(report.rows))
        .push("method", Val::Str(method.tag().into()))
        .push("k", Val::Int(report.k))
        .push("seed", Val::Int(report.seed))
        .push("sample_hits", Val::Int(report.sample_hits))
        .push("estimate", Val::Num(report.estimate))
        .push("true_cardinality", Val::opt_int(report.true_cardinality))
        .push("realized_q_error", Val::opt_num(report.realized_q_error))
        .push("p", Val::Num(report.p))
        .push(
            "p_source",
            Val::Str(
                match report.p_source {
                    qbound_core::ingest::SelectivitySource::True => "true",
                    qbound_core::ingest::SelectivitySource::Assumed => "assumed",
                }
                .into(),
            ),
        )
        .push("inequalities", Val::Str(report.inequalities.to_string()));
    if let Some(plan) = &report.q_at_target {
        let planned = plan_record(plan, "q_at_target", Val::Num);
        common.push("target_confidence", Val::opt_num(a.confidence));
        for (k, v) in planned.0 {
            let key = match k.as_str() {
                "q_at_target" => k,
                other => format!("target_{other}"),
            };
            common.push(key, v);
        }
    }
    let per_q = |b: &qbound_core::ingest::BoundAtQ| {
        let mut r = Record::new();
        r.push("q", Val::Num(b.q))
            .push("confidence", Val::Num(b.confidence))
            .push("within", b.within.map_or(Val::Na, Val::Bool));
        r
    };
    Ok(match format {
        Format::Text => {
            let mut out = String::new();
            for (k, v) in &common.0 {
                out.push_str(&format!("{k}: {}\n", v.display()));
            }
            out.push_str("bounds:\n");
            for b in &report.bounds {
                let r = per_q(b);
                let parts: Vec<String> =
                    r.0.iter()
                        .map(|(k, v)| format!("{k}={}", v.display()))
                        .collect();
                out.push_str(&format!("  {}\n", parts.join(" ")));
            }
            out
        }
        Format::Csv => {
            let rows: Vec<Record> = report
                .bounds
                .iter()
                .map(|b| {
                    let mut r = common.clone();
                    r.0.extend(per_q(b).0);
                    r
                })
                .collect();
            csv_lines(&rows)
        }
        Format::Json => pretty(&json!({
            "query": {
                "input": a.input.display().to_string(),
                "predicate": a.predicate,
                "method": method.tag(),
                "k": a.k,
                "q": a.q,
                "seed": a.seed,
                "assume_p": a.assume_p,
                "target_confidence": a.confidence,
            },
            "result": common.json(),
            "terms": report.bounds.iter().map(|b| per_q(b).json()).collect::<Vec<_>>(),
            "meta": meta(),
        })),
    })
}
