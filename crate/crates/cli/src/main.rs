//! Batch front end: reads CSV series or scenario files, runs the detector,
//! the least-squares baseline, the Monte Carlo harness, threshold
//! calibration, or the complexity bench, and writes machine-readable JSON
//! and CSV outputs.

// `!(x > 0.0)` guards reject NaN, which `x <= 0.0` would accept
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod ingest;

use std::path::{Path, PathBuf};
// the glob import below re-exports the library's one-parameter Result alias
use std::result::Result;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fdpv_core::memtrack::{self, TrackingAllocator};
use fdpv_core::*;
use ingest::{ingest_csv, IngestError, IngestMode};

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator::new();

const EXIT_CODE_HELP: &str = "Exit codes:
  0  run completed
  2  invalid usage or configuration
  3  I/O failure
  4  input parse failure (messages carry 1-based line numbers)
  5  infeasible or degenerate computation";

#[derive(Parser)]
#[command(
    name = "fdpv",
    version,
    about = "Offline change-point detection by filtered derivative with p-value pruning",
    after_help = EXIT_CODE_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect change points in a series read from CSV.
    Detect(DetectArgs),
    /// Segment a series with the penalized least-squares baseline.
    Plsc(PlscArgs),
    /// Run a Monte Carlo experiment described by a scenario file.
    Simulate(SimulateArgs),
    /// Print the Step-1 threshold for a given configuration as JSON.
    Calibrate(CalibrateArgs),
    /// Measure wall time and peak memory across input sizes.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Mean,
    Variance,
    Slope,
    Intercept,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Target {
        match t {
            TargetArg::Mean => Target::Mean,
            TargetArg::Variance => Target::Variance,
            TargetArg::Slope => Target::Slope,
            TargetArg::Intercept => Target::Intercept,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CalibrationArg {
    /// Exceedance-equation root on the standardized trace (holds the level).
    FiniteSample,
    /// The asymptotic closed-form normalizers.
    TheoremLiteral,
}

impl From<CalibrationArg> for Calibration {
    fn from(c: CalibrationArg) -> Calibration {
        match c {
            CalibrationArg::FiniteSample => Calibration::FiniteSample,
            CalibrationArg::TheoremLiteral => Calibration::TheoremLiteral,
        }
    }
}

#[derive(Args)]
struct DetectArgs {
    /// Input CSV: one value per line, or x,y rows for slope/intercept.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    target: TargetArg,
    /// Sliding half-window A.
    #[arg(long)]
    window: usize,
    /// Step-1 level p1*.
    #[arg(long, default_value_t = 0.05)]
    p1: f64,
    /// Step-2 cutoff p2*.
    #[arg(long, default_value_t = 1e-4)]
    p2: f64,
    /// Known noise scale sigma (mean/slope/intercept targets).
    #[arg(long)]
    sigma: Option<f64>,
    /// Known scale nu of the squared-deviation sequence (variance target).
    #[arg(long)]
    nu: Option<f64>,
    /// Known slope a (intercept target).
    #[arg(long)]
    slope: Option<f64>,
    /// Sampling step, for regression targets fed a one-column file.
    #[arg(long)]
    delta: Option<f64>,
    /// Two-sided Step-2 p-values.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    two_sided: bool,
    #[arg(long, value_enum, default_value_t = CalibrationArg::FiniteSample)]
    calibration: CalibrationArg,
    /// Where to write the segmentation JSON ("-" for stdout).
    #[arg(long, default_value = "-")]
    output: String,
    /// Optional two-column CSV dump of the trace.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct PlscArgs {
    /// Input CSV, one value per line.
    #[arg(long)]
    input: PathBuf,
    /// Largest number of change points considered.
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    /// Minimal segment length.
    #[arg(long, default_value_t = 2)]
    min_seg: usize,
    /// Penalty rule selecting K.
    #[arg(long, value_enum, default_value_t = PenaltyArg::Bic)]
    penalty: PenaltyArg,
    /// Per-change penalty value, required with --penalty fixed.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value = "-")]
    output: String,
    /// Optional CSV dump of the residual curve K,J(K).
    #[arg(long)]
    curve_out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PenaltyArg {
    Bic,
    Slope,
    Fixed,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Fdpv)]
    method: MethodArg,
    /// Override the scenario's replication count.
    #[arg(long, short = 'M')]
    replications: Option<usize>,
    /// Override the scenario's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// K_max for the baseline method.
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    /// Minimal segment length for the baseline method.
    #[arg(long, default_value_t = 2)]
    min_seg: usize,
    #[arg(long, default_value = "-")]
    output: String,
    /// Optional per-replication CSV.
    #[arg(long)]
    per_rep_out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Fdpv,
    Plsc,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Series length the threshold is calibrated for.
    #[arg(long)]
    n: usize,
    /// Sliding half-window A.
    #[arg(long)]
    window: usize,
    #[arg(long, default_value_t = 0.05)]
    p1: f64,
    #[arg(long, value_enum, default_value_t = TargetArg::Mean)]
    target: TargetArg,
    /// Trace scale: sigma (mean/slope/intercept) or nu (variance).
    #[arg(long)]
    scale: f64,
    /// Sampling step (slope target).
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = CalibrationArg::FiniteSample)]
    calibration: CalibrationArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated ascending input sizes for the detector.
    #[arg(long, default_value = "100000,200000,400000")]
    sizes: String,
    #[arg(long, value_enum, default_value_t = TargetArg::Mean)]
    target: TargetArg,
    /// Window rule: "sqrt" or "fixed:<A>".
    #[arg(long, default_value = "sqrt")]
    window_rule: String,
    /// Also run the quadratic baseline.
    #[arg(long)]
    with_plsc: bool,
    /// Comma-separated ascending sizes for the baseline.
    #[arg(long, default_value = "2000,4000,8000")]
    plsc_sizes: String,
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    /// Timing repetitions per size (the median is reported).
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "-")]
    output: String,
}

// ---------------------------------------------------------------------------
// Error-to-exit-code mapping
// ---------------------------------------------------------------------------

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
    fn io(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
    fn parse(message: impl Into<String>) -> Self {
        Failure { code: 4, message: message.into() }
    }
    fn compute(message: impl Into<String>) -> Self {
        Failure { code: 5, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::WindowTooLarge { .. }
            | Error::MissingCovariate { .. }
            | Error::DegenerateWindow { .. }
            | Error::Domain(_)
            | Error::InvalidSpec(_)
            | Error::InfeasibleConfig(_) => 2,
            Error::NonFinite { .. } | Error::EmptySeries => 4,
            Error::SegmentTooShort { .. }
            | Error::DegenerateVariance(_)
            | Error::DegenerateDesign
            | Error::KMismatch { .. } => 5,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Failure {
        match e {
            IngestError::Io(_) => Failure::io(e.to_string()),
            IngestError::Parse { .. } => Failure::parse(e.to_string()),
        }
    }
}

fn write_output(target: &str, content: &str) -> Result<(), Failure> {
    if target == "-" {
        println!("{content}");
        Ok(())
    } else {
        std::fs::write(target, content).map_err(|e| Failure::io(format!("cannot write {target}: {e}")))
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    std::fs::write(path, content)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Subcommand drivers
// ---------------------------------------------------------------------------

fn load_series(
    input: &Path,
    target: Target,
    delta: Option<f64>,
) -> Result<TimeSeries, Failure> {
    if !target.needs_regression() {
        return Ok(ingest_csv(input, IngestMode::Univariate)?);
    }
    match delta {
        // one-column file plus an explicit sampling step
        Some(d) => {
            let series = ingest_csv(input, IngestMode::Univariate)?;
            TimeSeries::regression(series.values().to_vec(), d).map_err(Failure::from)
        }
        None => Ok(ingest_csv(input, IngestMode::Regression)?),
    }
}

fn run_detect(args: DetectArgs) -> Result<(), Failure> {
    let target: Target = args.target.into();
    let series = load_series(&args.input, target, args.delta)?;
    let mut spec = DetectorSpec::new(target, args.window).with_levels(args.p1, args.p2);
    spec.two_sided_step2 = args.two_sided;
    spec.calibration = args.calibration.into();
    match target {
        Target::Variance => {
            if let Some(nu) = args.nu {
                spec.scale = Nuisance::Known(nu);
            }
        }
        _ => {
            if let Some(sigma) = args.sigma {
                spec.scale = Nuisance::Known(sigma);
            }
        }
    }
    if let Some(a) = args.slope {
        spec.intercept_slope = Nuisance::Known(a);
    }
    let result = fdpv(&series, &spec)?;
    if let Some(path) = &args.trace_out {
        write_file(path, &result.trace.to_csv())?;
    }
    write_output(&args.output, &result.segmentation.to_json())
}

fn run_plsc(args: PlscArgs) -> Result<(), Failure> {
    let series = ingest_csv(&args.input, IngestMode::Univariate)?;
    let penalty = match args.penalty {
        PenaltyArg::Bic => Penalty::Bic,
        PenaltyArg::Slope => Penalty::SlopeHeuristic,
        PenaltyArg::Fixed => {
            let beta = args
                .beta
                .ok_or_else(|| Failure::config("--penalty fixed requires --beta"))?;
            Penalty::Fixed(beta)
        }
    };
    let result = plsc_segment(&series, args.kmax, args.min_seg, penalty)?;
    if let Some(path) = &args.curve_out {
        let mut csv = String::from("K,J\n");
        for (k, j) in result.j_curve() {
            csv.push_str(&format!("{k},{j}\n"));
        }
        write_file(path, &csv)?;
    }
    write_output(&args.output, &result.segmentation.to_json())
}

fn run_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| Failure::io(format!("cannot read {}: {e}", args.scenario.display())))?;
    let scenario = Scenario::from_toml_str(&text)?;
    let m = args.replications.unwrap_or(scenario.m);
    let seed = args.seed.unwrap_or(scenario.seed);
    let method = match args.method {
        MethodArg::Fdpv => Method::Fdpv,
        MethodArg::Plsc => Method::Plsc {
            k_max: args.kmax,
            min_seg: args.min_seg,
            penalty: Penalty::Bic,
        },
    };
    let (report, outcomes) = monte_carlo_detailed(&method, &scenario, m, seed)?;
    if let Some(path) = &args.per_rep_out {
        let mut csv = String::from("rep,k_hat,mise,change_point_se,wall_time_s\n");
        for o in &outcomes {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                o.rep,
                o.k_hat,
                o.mise,
                o.change_point_se.map_or(String::new(), |v| v.to_string()),
                o.wall_time_s
            ));
        }
        write_file(path, &csv)?;
    }
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::compute(format!("report serialization: {e}")))?;
    write_output(&args.output, &json)
}

fn run_calibrate(args: CalibrateArgs) -> Result<(), Failure> {
    let target: Target = args.target.into();
    let mut spec = DetectorSpec::new(target, args.window);
    spec.level1 = args.p1;
    spec.calibration = args.calibration.into();
    let thr = critical_value(&spec, args.n, args.scale, args.delta)?;
    let doc = serde_json::json!({
        "target": target.as_str(),
        "n": args.n,
        "window": args.window,
        "p1": args.p1,
        "scale": args.scale,
        "calibration": match spec.calibration {
            Calibration::FiniteSample => "finite-sample",
            Calibration::TheoremLiteral => "theorem-literal",
        },
        "gumbel_x": thr.gumbel_x,
        "normalizer": thr.normalizer,
        "critical_value": thr.critical_value,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    Ok(())
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, Failure> {
    let sizes: Vec<usize> = text
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::config(format!("bad size list `{text}`: {e}")))?;
    if sizes.is_empty() || !sizes.windows(2).all(|w| w[0] < w[1]) {
        return Err(Failure::config("sizes must be ascending and non-empty"));
    }
    Ok(sizes)
}

fn window_for(rule: &str, n: usize) -> Result<usize, Failure> {
    if rule == "sqrt" {
        return Ok((n as f64).sqrt().ceil() as usize);
    }
    if let Some(rest) = rule.strip_prefix("fixed:") {
        return rest
            .parse::<usize>()
            .map_err(|e| Failure::config(format!("bad window rule `{rule}`: {e}")));
    }
    Err(Failure::config(format!(
        "unknown window rule `{rule}` (expected `sqrt` or `fixed:<A>`)"
    )))
}

fn bench_series(target: Target, n: usize, seed: u64) -> Result<TimeSeries, Failure> {
    let params = if target.needs_regression() {
        SegmentParams::Regression { slopes: vec![1.0], intercepts: vec![0.0] }
    } else {
        SegmentParams::Mean(vec![0.0])
    };
    let spec = PiecewiseSpec {
        n,
        change_points: vec![],
        params,
        noise_sd: 1.0,
        delta: 1.0,
    };
    let series = if target.needs_regression() {
        gen_piecewise_regression(&spec, seed)?
    } else {
        gen_piecewise_mean(&spec, seed)?
    };
    Ok(series)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn log_slope(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| (p.0 as f64).ln()).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxy: f64 = points
        .iter()
        .map(|p| ((p.0 as f64).ln() - mx) * (p.1.ln() - my))
        .sum();
    let sxx: f64 = points
        .iter()
        .map(|p| ((p.0 as f64).ln() - mx) * ((p.0 as f64).ln() - mx))
        .sum();
    Some(sxy / sxx)
}

fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    let target: Target = args.target.into();
    let sizes = parse_sizes(&args.sizes)?;
    let reps = args.reps.max(1);

    let mut rows = Vec::new();
    let mut time_points = Vec::new();
    let mut peaks = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let window = window_for(&args.window_rule, n)?;
        let spec = DetectorSpec::new(target, window).with_known_scale(1.0);
        let series = bench_series(target, n, args.seed.wrapping_add(i as u64))?;
        let mut times = Vec::new();
        let mut peak = 0u64;
        for _ in 0..reps {
            memtrack::reset_peak();
            let t0 = Instant::now();
            let out = fdpv(&series, &spec)?;
            times.push(t0.elapsed().as_secs_f64());
            peak = peak.max(memtrack::peak_bytes().unwrap_or(0));
            std::hint::black_box(&out.segmentation);
        }
        let seconds = median(times);
        rows.push(serde_json::json!({
            "n": n, "window": window, "seconds": seconds, "peak_bytes": peak,
        }));
        time_points.push((n, seconds));
        peaks.push(peak);
    }
    let detector = serde_json::json!({
        "target": target.as_str(),
        "rows": rows,
        "time_exponent": log_slope(&time_points),
        "memory_ratio": if peaks.len() >= 2 && peaks[0] > 0 {
            Some(*peaks.last().unwrap() as f64 / peaks[0] as f64)
        } else {
            None
        },
    });

    let baseline = if args.with_plsc {
        let sizes = parse_sizes(&args.plsc_sizes)?;
        let mut rows = Vec::new();
        let mut time_points = Vec::new();
        for (i, &n) in sizes.iter().enumerate() {
            let series = bench_series(Target::Mean, n, args.seed.wrapping_add(1000 + i as u64))?;
            let mut times = Vec::new();
            let mut peak = 0u64;
            for _ in 0..reps {
                memtrack::reset_peak();
                let t0 = Instant::now();
                let out = plsc_segment(&series, args.kmax, 2, Penalty::Bic)?;
                times.push(t0.elapsed().as_secs_f64());
                peak = peak.max(memtrack::peak_bytes().unwrap_or(0));
                std::hint::black_box(&out.selected_k);
            }
            let seconds = median(times);
            rows.push(serde_json::json!({
                "n": n, "k_max": args.kmax, "seconds": seconds, "peak_bytes": peak,
                // what a full n-by-n segment-cost matrix would occupy
                "naive_cost_matrix_bytes": (n as u64) * (n as u64) * 8,
            }));
            time_points.push((n, seconds));
        }
        serde_json::json!({
            "rows": rows,
            "time_exponent": log_slope(&time_points),
        })
    } else {
        serde_json::Value::Null
    };

    let doc = serde_json::json!({
        "seed": args.seed,
        "timing_reps": reps,
        "detector": detector,
        "baseline": baseline,
    });
    write_output(
        &args.output,
        &serde_json::to_string_pretty(&doc).expect("json"),
    )
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("FDPV_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Detect(args) => run_detect(args),
        Command::Plsc(args) => run_plsc(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Calibrate(args) => run_calibrate(args),
        Command::Bench(args) => run_bench(args),
    };
    if let Err(failure) = outcome {
        eprintln!("error: {}", failure.message);
        std::process::exit(failure.code);
    }
}
