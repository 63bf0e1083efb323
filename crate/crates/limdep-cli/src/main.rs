//! Command-line front end: dataset analysis, synthetic population
//! summaries, contour search, and the Monte-Carlo identity suite.
//!
//! Exit codes: 2 usage, 3 data errors, 4 modeling errors; `verify`
//! additionally exits 1 when an enforced identity check fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use limdep::composer::{self, SweepGrid};
use limdep::data::{self, CsvOptions};
use limdep::exec::Mode;
use limdep::learners::{LearnerKind, LearnerSpec};
use limdep::stats;
use limdep::synth::{
    self,
    verify::{verify_identities, VerifyOptions},
    ContourOptions, Preset, SyntheticSpec,
};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_MODELING: u8 = 4;

#[derive(Parser)]
#[command(
    name = "limdep",
    version,
    about = "Two-component modeling and diagnostics for zero-inflated prediction targets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the single and two-component models on a CSV dataset and write
    /// the benchmark report plus sweep data.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic population and print its moments.
    Simulate(SimulateArgs),
    /// Required component-model quality contour on a synthetic population.
    Contour(ContourArgs),
    /// Run the Monte-Carlo identity suite; nonzero exit on any failure.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    target: String,
    /// Dataset label for the report (defaults to the file stem).
    #[arg(long)]
    name: Option<String>,
    /// Seed for the split and the learners.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = LearnerArg::Forest)]
    learner: LearnerArg,
    /// Number of trees in the forest.
    #[arg(long, default_value_t = 500)]
    trees: usize,
    /// Minimum rows per leaf.
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    /// Feature-subset size per split (learner-dependent default).
    #[arg(long)]
    mtry: Option<usize>,
    /// Training fraction.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Stratify the split by the occurrence component.
    #[arg(long, default_value_t = false)]
    stratify: bool,
    /// Adjustment-factor grid as start:stop:step.
    #[arg(long, default_value = "0:2:0.05")]
    sweep_grid: String,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep CSV path; defaults to "<out>.sweep.csv" when --out is given.
    #[arg(long)]
    sweep_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    Forest,
    ConstantMean,
    Linear,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    process: ProcessArgs,
    /// Rows to draw (overrides the spec's n).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Moments JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optionally persist the drawn population as CSV.
    #[arg(long)]
    dump_csv: Option<PathBuf>,
}

#[derive(Args)]
struct ContourArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Product correlation the pseudo-models must reach.
    #[arg(long, default_value_t = 0.3)]
    target_cor: f64,
    /// Occurrence-quality grid as start:stop:step.
    #[arg(long, default_value = "0.1:1.0:0.05")]
    grid: String,
    /// Bisection tolerance on the achieved correlation (>= 1e-3).
    #[arg(long, default_value_t = 0.005)]
    tol: f64,
    /// Contour CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    process: ProcessArgs,
    /// Population size for the suite.
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every tolerance (testing hook).
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
    /// Report JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProcessArgs {
    /// Bundled generating process: REGIME-STRONG or REGIME-WEAK.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// JSON spec file describing the generating process.
    #[arg(long)]
    spec: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: format!("usage: {}", message.into()),
        }
    }

    fn data(err: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_DATA,
            message: format!("data: {err}"),
        }
    }

    fn modeling(err: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_MODELING,
            message: format!("modeling: {err}"),
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => run_analyze(&args),
        Command::Simulate(args) => run_simulate(&args),
        Command::Contour(args) => run_contour(&args),
        Command::Verify(args) => run_verify(&args),
    };
    match result {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

/// LIMDEP_THREADS caps the rayon pool; unset means rayon's default.
fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Ok(value) = std::env::var("LIMDEP_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn parse_triple(text: &str, what: &str) -> Result<(f64, f64, f64), Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Failure::usage(format!(
            "{what} must be start:stop:step, got '{text}'"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::usage(format!("{what} must be numeric, got '{text}'")))?;
    if !(nums[2] > 0.0) || nums[1] < nums[0] {
        return Err(Failure::usage(format!("{what} range '{text}' is empty")));
    }
    Ok((nums[0], nums[1], nums[2]))
}

fn load_spec(process: &ProcessArgs) -> Result<SyntheticSpec, Failure> {
    match (&process.preset, &process.spec) {
        (Some(name), None) => {
            let preset = Preset::from_str(name).map_err(|e| Failure::usage(e.to_string()))?;
            Ok(preset.spec())
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(Failure::data)?;
            SyntheticSpec::from_json(&text).map_err(Failure::data)
        }
        (None, None) => Err(Failure::usage("one of --preset or --spec is required")),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    }
}

fn write_or_print(out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(Failure::data),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn run_analyze(args: &AnalyzeArgs) -> Result<ExitCode, Failure> {
    if !(args.split > 0.0 && args.split < 1.0) {
        return Err(Failure::usage("--split must lie strictly between 0 and 1"));
    }
    let (start, stop, step) = parse_triple(&args.sweep_grid, "--sweep-grid")?;
    let grid = SweepGrid { start, stop, step };

    let options = CsvOptions {
        name: args.name.clone(),
    };
    let dataset = data::load_csv(&args.data, &args.target, &options).map_err(Failure::data)?;
    let view = data::decompose(&dataset);
    let split = data::split_with_options(&dataset, args.split, args.seed, args.stratify)
        .map_err(Failure::data)?;

    let learner = LearnerSpec {
        kind: match args.learner {
            LearnerArg::Forest => LearnerKind::Forest,
            LearnerArg::ConstantMean => LearnerKind::ConstantMean,
            LearnerArg::Linear => LearnerKind::LinearLeastSquares,
        },
        n_trees: args.trees,
        mtry: args.mtry,
        min_leaf: args.min_leaf,
        seed: args.seed,
        ..LearnerSpec::default()
    };

    let train_view = {
        let train_y: Vec<f64> = split
            .train_rows
            .iter()
            .map(|&i| dataset.target()[i])
            .collect();
        let train_features = dataset.features.select_rows(&split.train_rows);
        limdep::data::TabularDataset::new(dataset.name.clone(), train_features, train_y)
            .map_err(Failure::data)?
    };
    let train_components = data::decompose(&train_view);
    let pipeline = composer::fit_pipeline(&train_view, &train_components, &learner)
        .map_err(Failure::modeling)?;
    let report = composer::summary_report(&dataset, &view, &split, &pipeline, &grid, args.split)
        .map_err(Failure::modeling)?;

    let json = serde_json::to_string_pretty(&report).map_err(Failure::modeling)?;
    write_or_print(&args.out, &json)?;

    let sweep_out = args.sweep_out.clone().or_else(|| {
        args.out
            .as_ref()
            .map(|p| with_suffix(p, ".sweep.csv"))
    });
    if let Some(path) = sweep_out {
        let mut csv = String::from("s_ad,correlation\n");
        for (s, c) in report.sweep.grid.iter().zip(&report.sweep.correlations) {
            csv.push_str(&format!("{s},{c}\n"));
        }
        std::fs::write(path, csv).map_err(Failure::data)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

#[derive(Serialize)]
struct PopulationSummary {
    n: usize,
    seed: u64,
    zero_share: f64,
    mean_p: f64,
    mean_mu_cond: f64,
    snr_y: f64,
    snr_a: f64,
    snr_c: f64,
    psi: f64,
    cor_p_composite: f64,
    cor_mu_composite: f64,
    cor_y_c: f64,
}

fn run_simulate(args: &SimulateArgs) -> Result<ExitCode, Failure> {
    if args.n == Some(0) {
        return Err(Failure::usage("--n must be positive"));
    }
    let mut spec = load_spec(&args.process)?;
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let population = synth::generate(&spec).map_err(Failure::data)?;
    let sample = population.latents();
    let mix = stats::snr_mixture(&sample).map_err(Failure::modeling)?;
    let mu_pos: Vec<f64> = population
        .mu
        .iter()
        .zip(&population.c)
        .filter(|(_, &c)| c > 0.0)
        .map(|(&m, _)| m)
        .collect();
    let summary = PopulationSummary {
        n: population.n(),
        seed: spec.seed,
        zero_share: 1.0 - stats::mean(&population.c),
        mean_p: stats::mean(&population.p),
        mean_mu_cond: stats::mean(&mu_pos),
        snr_y: mix.snr_y,
        snr_a: mix.snr_a,
        snr_c: mix.snr_c,
        psi: mix.psi,
        cor_p_composite: stats::pearson(&population.p, &population.zeta)
            .map_err(Failure::modeling)?,
        cor_mu_composite: stats::pearson(&population.mu, &population.zeta)
            .map_err(Failure::modeling)?,
        cor_y_c: stats::pearson(&population.y, &population.c).map_err(Failure::modeling)?,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(Failure::modeling)?;
    write_or_print(&args.out, &json)?;

    if let Some(path) = &args.dump_csv {
        let d = population.spec.d;
        let mut csv = String::new();
        for j in 0..d {
            csv.push_str(&format!("x{j},"));
        }
        csv.push_str("p,mu,c,a,y\n");
        for i in 0..population.n() {
            for j in 0..d {
                csv.push_str(&format!("{},", population.features.value(i, j)));
            }
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                population.p[i], population.mu[i], population.c[i], population.a[i],
                population.y[i]
            ));
        }
        std::fs::write(path, csv).map_err(Failure::data)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_contour(args: &ContourArgs) -> Result<ExitCode, Failure> {
    if args.tol < 1e-3 {
        return Err(Failure::usage(
            "--tol below the Monte-Carlo resolution guard of 1e-3",
        ));
    }
    if args.n == Some(0) {
        return Err(Failure::usage("--n must be positive"));
    }
    if !(0.0..1.0).contains(&args.target_cor) {
        return Err(Failure::usage("--target-cor must lie in [0, 1)"));
    }
    let (start, stop, step) = parse_triple(&args.grid, "--grid")?;
    let mut spec = load_spec(&args.process)?;
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let population = synth::generate(&spec).map_err(Failure::data)?;
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let options = ContourOptions {
        target_cor: args.target_cor,
        r_p_grid: (0..count).map(|i| start + i as f64 * step).collect(),
        tolerance: args.tol,
        seed: spec.seed,
        ..ContourOptions::default()
    };
    let points = synth::required_correlation_contour(&population, &options, Mode::default())
        .map_err(Failure::modeling)?;
    let mut csv = String::from("r_p,r_mu,achieved_cor,feasible\n");
    for pt in &points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            pt.r_p, pt.r_mu, pt.achieved_cor, pt.feasible
        ));
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv).map_err(Failure::data)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: &VerifyArgs) -> Result<ExitCode, Failure> {
    if args.n == 0 {
        return Err(Failure::usage("--n must be positive"));
    }
    let spec = match (&args.process.preset, &args.process.spec) {
        (None, None) => Preset::RegimeWeak.spec(),
        _ => load_spec(&args.process)?,
    };
    let options = VerifyOptions {
        n: Some(args.n),
        seed: args.seed,
        tolerance_scale: args.tol_scale,
    };
    let report =
        verify_identities(&spec, &options, Mode::default()).map_err(Failure::modeling)?;
    for check in &report.checks {
        let status = if check.pass { "pass" } else { "FAIL" };
        let kind = if check.enforced { "" } else { " (informational)" };
        println!(
            "{status}{kind} {name}: measured {measured:+.3e}, tolerance {tolerance:.3e}",
            name = check.name,
            measured = check.measured,
            tolerance = check.tolerance,
        );
    }
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    if let Some(path) = &args.out {
        let json = serde_json::to_string_pretty(&report).map_err(Failure::modeling)?;
        std::fs::write(path, json).map_err(Failure::data)?;
    }
    if report.pass {
        println!("all enforced identity checks passed (n = {})", report.n);
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "{} enforced identity check(s) failed",
            report.failed_checks().count()
        );
        Ok(ExitCode::FAILURE)
    }
}
