//! `covpair`: evaluate, integrate, invert, simulate and test the joint law of
//! two sample covariances. Every invocation prints one JSON record on stdout;
//! human-readable diagnostics go to stderr.
//!
//! Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 numerical
//! non-convergence (a best-effort record is still printed).

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use covpair::analytic::{
    cf_closed, cf_determinant, cf_reduced, cf_triple, density_general, density_n1, density_n2, density_n3, density_n4,
    marginal_density, CfQuery, Complex64, DensityQuery,
};
use covpair::inference::{equality_test, Alternative, SigmaSource, TestInput};
use covpair::numerics::{invert_cf, marginalize, quadrant_probability, QuadratureConfig, TruncationPolicy};
use covpair::simulation::{clt_check, cov_pair_stream, sample_cov_pair, QuadrantEstimate, SimulationPlan};
use covpair::{CovarianceStructure, Error};

const SCHEMA_VERSION: &str = "1";
const THREADS_ENV: &str = "COVPAIR_THREADS";

#[derive(Parser)]
#[command(name = "covpair", version, about = "Joint law of two sample covariances from a trivariate normal")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Joint density at (x, y)
    Density(DensityArgs),
    /// Characteristic function of the pair at (u, v)
    Cf(CfArgs),
    /// Characteristic function of (AB, AC, BC) sums at (u, v, w)
    Cf3(Cf3Args),
    /// P(X > x0, Y > y0) by adaptive quadrature
    Prob(ProbArgs),
    /// Marginal density of the first covariance, closed form and by quadrature
    Marginal(MarginalArgs),
    /// Density recovered by numerical inversion of the characteristic function
    Invert(InvertArgs),
    /// Monte Carlo from the generative model
    Simulate(SimulateArgs),
    /// Test of equal covariances with C from a CSV file
    Test(TestArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long, allow_hyphen_values = true)]
    sigma: f64,
    /// Number of observations
    #[arg(long)]
    n: u32,
}

#[derive(Args)]
struct QuadArgs {
    #[arg(long, default_value_t = 1e-9)]
    abs_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_subdivisions: usize,
    /// Density mass allowed outside the automatically sized integration square
    #[arg(long, default_value_t = 1e-10)]
    truncation_eps: f64,
    /// Fixed half-width of the integration square (overrides --truncation-eps)
    #[arg(long)]
    truncation_radius: Option<f64>,
    /// Side of the collapsed-coordinate square around singular points
    #[arg(long, default_value_t = 1e-3)]
    exclusion_radius: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityForm {
    General,
    Specialized,
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, value_enum, default_value_t = DensityForm::General)]
    form: DensityForm,
}

#[derive(Clone, Copy, ValueEnum)]
enum CfForm {
    Closed,
    Reduced,
    Determinant,
}

#[derive(Args)]
struct CfArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    u: f64,
    #[arg(long, allow_hyphen_values = true)]
    v: f64,
    #[arg(long, value_enum, default_value_t = CfForm::Closed)]
    form: CfForm,
}

#[derive(Args)]
struct Cf3Args {
    #[arg(long, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long, allow_hyphen_values = true)]
    sigma: f64,
    /// Number of observations
    #[arg(long, default_value_t = 1)]
    n: u32,
    #[arg(long, allow_hyphen_values = true)]
    u: f64,
    #[arg(long, allow_hyphen_values = true)]
    v: f64,
    #[arg(long, allow_hyphen_values = true)]
    w: f64,
}

#[derive(Args)]
struct ProbArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    y0: f64,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Args)]
struct MarginalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[command(flatten)]
    quad: QuadArgs,
}

#[derive(Args)]
struct InvertArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, default_value_t = 1e-9)]
    abs_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_subdivisions: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    y0: f64,
    /// Also compare the covariance of the standardized pair with its large-n limit
    #[arg(long)]
    clt: bool,
    /// Write every replication as a CSV row "g_ac,g_bc"
    #[arg(long)]
    emit_samples: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlternativeArg {
    TwoSided,
    Greater,
    Less,
}

#[derive(Args)]
struct TestArgs {
    /// CSV file with header "a,b,c"
    #[arg(long)]
    data: PathBuf,
    /// Known covariance of A and B; estimated from the data when omitted
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long, value_enum, default_value_t = AlternativeArg::TwoSided)]
    alternative: AlternativeArg,
}

enum Failure {
    Validation(String),
    Io(String),
    /// The payload is printed as the record's result.
    NonConvergence {
        message: String,
        payload: Value,
    },
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let message = err.to_string();
        if let Some(best) = err.best_estimate() {
            let payload = json!({
                "converged": false,
                "value": num(best.value),
                "error_estimate": num(best.error),
                "subdivisions": best.subdivisions,
            });
            return Failure::NonConvergence { message, payload };
        }
        match err {
            Error::NonFiniteSample { .. } => {
                Failure::NonConvergence { payload: json!({ "converged": false, "message": message }), message }
            }
            _ => Failure::Validation(message),
        }
    }
}

/// Rounds to 12 significant digits; non-finite values become null.
fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    // no negative zero in records
    json!(rounded + 0.0)
}

/// A possibly infinite value as `value` plus an `infinite` flag.
fn value_fields(x: f64) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("value".into(), num(x));
    m.insert("infinite".into(), json!(x.is_infinite()));
    m
}

fn structure(rho: f64, sigma: f64) -> Result<CovarianceStructure, Failure> {
    Ok(CovarianceStructure::new(rho, sigma)?)
}

fn model_params(m: &ModelArgs) -> Map<String, Value> {
    let mut p = Map::new();
    p.insert("rho".into(), json!(m.rho));
    p.insert("sigma".into(), json!(m.sigma));
    p.insert("n".into(), json!(m.n));
    p
}

fn check_n(n: u32) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::Validation("n must be at least 1".into()));
    }
    Ok(())
}

fn quad_config(q: &QuadArgs) -> Result<QuadratureConfig, Failure> {
    let cfg = QuadratureConfig {
        abs_tol: q.abs_tol,
        rel_tol: q.rel_tol,
        max_subdivisions: q.max_subdivisions,
        truncation: match q.truncation_radius {
            Some(r) => TruncationPolicy::Fixed(r),
            None => TruncationPolicy::Auto(q.truncation_eps),
        },
        singularity_exclusion_radius: q.exclusion_radius,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn quad_params(p: &mut Map<String, Value>, q: &QuadArgs) {
    p.insert("abs_tol".into(), json!(q.abs_tol));
    p.insert("rel_tol".into(), json!(q.rel_tol));
    p.insert("max_subdivisions".into(), json!(q.max_subdivisions));
    p.insert("truncation_eps".into(), json!(q.truncation_eps));
    p.insert("truncation_radius".into(), json!(q.truncation_radius));
    p.insert("exclusion_radius".into(), json!(q.exclusion_radius));
}

fn complex_fields(z: Complex64) -> Value {
    json!({ "re": num(z.re), "im": num(z.im), "modulus": num(z.norm()) })
}

type Outcome = Result<Value, Failure>;

fn cmd_density(a: &DensityArgs, params: &mut Map<String, Value>) -> Outcome {
    *params = model_params(&a.model);
    params.insert("x".into(), json!(a.x));
    params.insert("y".into(), json!(a.y));
    let form = match a.form {
        DensityForm::General => "general",
        DensityForm::Specialized => "specialized",
    };
    params.insert("form".into(), json!(form));
    check_n(a.model.n)?;
    let s = structure(a.model.rho, a.model.sigma)?;
    let q = DensityQuery::new(s, a.model.n, a.x, a.y)?;
    let (value, evaluator) = match (a.form, a.model.n) {
        (DensityForm::Specialized, 1) => (density_n1(&q), "n1"),
        (DensityForm::Specialized, 2) => (density_n2(&q), "n2"),
        (DensityForm::Specialized, 3) => (density_n3(&q), "n3"),
        (DensityForm::Specialized, 4) => (density_n4(&q), "n4"),
        _ => (density_general(&q), "general"),
    };
    let mut r = value_fields(value);
    r.insert("evaluator".into(), json!(evaluator));
    Ok(Value::Object(r))
}

fn cmd_cf(a: &CfArgs, params: &mut Map<String, Value>) -> Outcome {
    *params = model_params(&a.model);
    params.insert("u".into(), json!(a.u));
    params.insert("v".into(), json!(a.v));
    let form = match a.form {
        CfForm::Closed => "closed",
        CfForm::Reduced => "reduced",
        CfForm::Determinant => "determinant",
    };
    params.insert("form".into(), json!(form));
    check_n(a.model.n)?;
    let s = structure(a.model.rho, a.model.sigma)?;
    let q = CfQuery::new(s, a.model.n, a.u, a.v)?;
    let z = match a.form {
        CfForm::Closed => cf_closed(&q),
        CfForm::Reduced => cf_reduced(&q),
        CfForm::Determinant => cf_determinant(&q),
    };
    Ok(complex_fields(z))
}

fn cmd_cf3(a: &Cf3Args, params: &mut Map<String, Value>) -> Outcome {
    params.insert("rho".into(), json!(a.rho));
    params.insert("sigma".into(), json!(a.sigma));
    params.insert("n".into(), json!(a.n));
    params.insert("u".into(), json!(a.u));
    params.insert("v".into(), json!(a.v));
    params.insert("w".into(), json!(a.w));
    check_n(a.n)?;
    let s = structure(a.rho, a.sigma)?;
    Ok(complex_fields(cf_triple(&s, a.u, a.v, a.w).powu(a.n)))
}

fn cmd_prob(a: &ProbArgs, params: &mut Map<String, Value>) -> Outcome {
    *params = model_params(&a.model);
    params.insert("x0".into(), json!(a.x0));
    params.insert("y0".into(), json!(a.y0));
    quad_params(params, &a.quad);
    check_n(a.model.n)?;
    let s = structure(a.model.rho, a.model.sigma)?;
    let cfg = quad_config(&a.quad)?;
    let r = quadrant_probability(&s, a.model.n, a.x0, a.y0, &cfg)?;
    Ok(json!({
        "value": num(r.value),
        "raw_value": num(r.raw_value),
        "error_estimate": num(r.error_estimate),
        "subdivisions_used": r.subdivisions_used,
    }))
}

fn cmd_marginal(a: &MarginalArgs, params: &mut Map<String, Value>) -> Outcome {
    *params = model_params(&a.model);
    params.insert("x".into(), json!(a.x));
    quad_params(params, &a.quad);
    check_n(a.model.n)?;
    let s = structure(a.model.rho, a.model.sigma)?;
    let cfg = quad_config(&a.quad)?;
    let closed = marginal_density(&s, a.model.n, a.x)?;
    let numeric = marginalize(&s, a.model.n, a.x, &cfg)?;
    let mut r = value_fields(closed);
    let mut q = value_fields(numeric.value);
    q.insert("error_estimate".into(), num(numeric.error));
    q.insert("subdivisions".into(), json!(numeric.subdivisions));
    r.insert("quadrature".into(), Value::Object(q));
    Ok(Value::Object(r))
}

fn cmd_invert(a: &InvertArgs, params: &mut Map<String, Value>) -> Outcome {
    *params = model_params(&a.model);
    params.insert("x".into(), json!(a.x));
    params.insert("y".into(), json!(a.y));
    params.insert("abs_tol".into(), json!(a.abs_tol));
    params.insert("rel_tol".into(), json!(a.rel_tol));
    params.insert("max_subdivisions".into(), json!(a.max_subdivisions));
    check_n(a.model.n)?;
    let s = structure(a.model.rho, a.model.sigma)?;
    let cfg = QuadratureConfig {
        abs_tol: a.abs_tol,
        rel_tol: a.rel_tol,
        max_subdivisions: a.max_subdivisions,
        ..QuadratureConfig::default()
    };
    let e = invert_cf(&s, a.model.n, a.x, a.y, &cfg)?;
    let closed = density_general(&DensityQuery::new(s, a.model.n, a.x, a.y)?);
    Ok(json!({
        "value": num(e.value),
        "error_estimate": num(e.error),
        "subdivisions": e.subdivisions,
        "closed_form": num(closed),
    }))
}

struct PairSummary {
    hits: u64,
    sum_ac: f64,
    sum_bc: f64,
}

fn summarize<I: Iterator<Item = (f64, f64)>>(
    pairs: I,
    x0: f64,
    y0: f64,
    mut sink: impl FnMut(f64, f64) -> io::Result<()>,
) -> io::Result<PairSummary> {
    let mut s = PairSummary { hits: 0, sum_ac: 0.0, sum_bc: 0.0 };
    for (g_ac, g_bc) in pairs {
        sink(g_ac, g_bc)?;
        s.hits += u64::from(g_ac > x0 && g_bc > y0);
        s.sum_ac += g_ac;
        s.sum_bc += g_bc;
    }
    Ok(s)
}

fn write_samples(plan: &SimulationPlan, path: &Path, x0: f64, y0: f64) -> Result<PairSummary, Failure> {
    let io_err = |e: io::Error| Failure::Io(format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "g_ac,g_bc").map_err(io_err)?;
    let summary = summarize(cov_pair_stream(plan), x0, y0, |a, b| writeln!(out, "{a},{b}")).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    Ok(summary)
}

fn cmd_simulate(a: &SimulateArgs, params: &mut Map<String, Value>) -> Outcome {
    *params = model_params(&a.model);
    params.insert("reps".into(), json!(a.reps));
    params.insert("seed".into(), json!(a.seed));
    params.insert("x0".into(), json!(a.x0));
    params.insert("y0".into(), json!(a.y0));
    params.insert("clt".into(), json!(a.clt));
    params.insert("emit_samples".into(), json!(a.emit_samples.as_ref().map(|p| p.display().to_string())));
    check_n(a.model.n)?;
    if !(a.x0.is_finite() && a.y0.is_finite()) {
        return Err(Failure::Validation("quadrant corner must be finite".into()));
    }
    let s = structure(a.model.rho, a.model.sigma)?;
    let plan = SimulationPlan::new(s, a.model.n, a.reps, a.seed)?;
    let summary = match &a.emit_samples {
        Some(path) => write_samples(&plan, path, a.x0, a.y0)?,
        None => summarize(sample_cov_pair(&plan).into_iter(), a.x0, a.y0, |_, _| Ok(())).expect("no sink, no I/O"),
    };
    let q = QuadrantEstimate::from_counts(summary.hits, a.reps);
    let reps = a.reps as f64;
    let mut r = Map::new();
    r.insert("quadrant".into(), json!({ "estimate": num(q.estimate), "std_error": num(q.std_error), "hits": q.hits }));
    r.insert("seed".into(), json!(a.seed));
    r.insert("mean_g_ac".into(), num(summary.sum_ac / reps));
    r.insert("mean_g_bc".into(), num(summary.sum_bc / reps));
    if a.clt {
        let rows = clt_check(&s, &[a.model.n], a.reps, a.seed)?;
        let row = &rows[0];
        let mat = |m: [[f64; 2]; 2]| json!([[num(m[0][0]), num(m[0][1])], [num(m[1][0]), num(m[1][1])]]);
        r.insert(
            "clt".into(),
            json!({
                "empirical": mat(row.empirical),
                "limit": mat(row.limit),
                "std_error": mat(row.std_error),
                "max_deviation": num(row.max_deviation),
                "max_z": num(row.max_z),
            }),
        );
    }
    Ok(Value::Object(r))
}

fn read_observations(path: &Path) -> Result<Vec<(f64, f64, f64)>, Failure> {
    let file = File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let bad = |msg: String| Failure::Validation(format!("{}: {msg}", path.display()));
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["a", "b", "c"] {
        return Err(bad(format!("expected header a,b,c, found {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut obs = Vec::new();
    for (line, record) in reader.deserialize::<(f64, f64, f64)>().enumerate() {
        match record {
            Ok(t) => obs.push(t),
            Err(e) if e.is_io_error() => return Err(Failure::Io(format!("{}: {e}", path.display()))),
            Err(e) => return Err(bad(format!("row {}: {e}", line + 1))),
        }
    }
    Ok(obs)
}

fn cmd_test(a: &TestArgs, params: &mut Map<String, Value>) -> Outcome {
    let alternative = match a.alternative {
        AlternativeArg::TwoSided => Alternative::TwoSided,
        AlternativeArg::Greater => Alternative::Greater,
        AlternativeArg::Less => Alternative::Less,
    };
    let alt_name = match a.alternative {
        AlternativeArg::TwoSided => "two-sided",
        AlternativeArg::Greater => "greater",
        AlternativeArg::Less => "less",
    };
    params.insert("data".into(), json!(a.data.display().to_string()));
    params.insert("sigma".into(), json!(a.sigma));
    params.insert("alternative".into(), json!(alt_name));
    let observations = read_observations(&a.data)?;
    let r = equality_test(&TestInput { observations, sigma: a.sigma, alternative })?;
    let source = match r.sigma_source {
        SigmaSource::Supplied => "supplied",
        SigmaSource::Estimated => "estimated",
    };
    Ok(json!({
        "statistic": num(r.statistic),
        "n": r.n,
        "sigma_used": num(r.sigma_used),
        "sigma_source": source,
        "p_value": num(r.p_value),
        "alternative": alt_name,
    }))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Validation(format!("{THREADS_ENV}={raw:?} is not a non-negative integer")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Validation(format!("cannot size the worker pool: {e}")))?;
    }
    Ok(())
}

fn record(command: &str, params: Map<String, Value>, result: Value) -> String {
    json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "parameters": params,
        "result": result,
    })
    .to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut params = Map::new();
    let (name, outcome) = match configure_threads() {
        Err(f) => ("", Err(f)),
        Ok(()) => match &cli.command {
            Command::Density(a) => ("density", cmd_density(a, &mut params)),
            Command::Cf(a) => ("cf", cmd_cf(a, &mut params)),
            Command::Cf3(a) => ("cf3", cmd_cf3(a, &mut params)),
            Command::Prob(a) => ("prob", cmd_prob(a, &mut params)),
            Command::Marginal(a) => ("marginal", cmd_marginal(a, &mut params)),
            Command::Invert(a) => ("invert", cmd_invert(a, &mut params)),
            Command::Simulate(a) => ("simulate", cmd_simulate(a, &mut params)),
            Command::Test(a) => ("test", cmd_test(a, &mut params)),
        },
    };
    let stdout = io::stdout();
    match outcome {
        Ok(result) => {
            if writeln!(stdout.lock(), "{}", record(name, params, result)).is_err() {
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::NonConvergence { message, payload }) => {
            eprintln!("error: {message}");
            let _ = writeln!(stdout.lock(), "{}", record(name, params, payload));
            ExitCode::from(4)
        }
    }
}
