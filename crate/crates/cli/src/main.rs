//! Command line for delay-margin analysis and simulation of
//! average-consensus networks.
//!
//! Four commands: `bounds` (spectral margins), `simulate` (integrate one
//! scenario), `sweep` (locate the empirical critical delay), `crosscheck`
//! (closed forms vs the numeric pipeline). Scenarios are TOML files; see
//! the `scenarios/` directory at the repository root.

mod scenario;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use delay_consensus::bounds::{
    closed_form_margins, margin_constant_uniform, margin_report, margin_timevarying_nonuniform,
    margin_timevarying_uniform, BoundsError, GraphFamily,
};
use delay_consensus::sim::{
    average_drift, classify, empirical_critical_delay, grid_sweep, randomized_bounded_family,
    simulate, uniform_constant_family, SimError, SweepConfig,
};
use delay_consensus::{spectral_summary, AgentGraph, DelayPartition, NormMode, SpectralError};
use scenario::{FamilySpec, Scenario};

#[derive(Parser)]
#[command(
    name = "delay-consensus",
    version,
    about = "Delay margins and simulation for average-consensus networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Directory for reports and CSV output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Norm applied to sub-Laplacian products in the non-uniform
    /// time-varying margin.
    #[arg(long, global = true, value_enum, default_value_t = NormModeArg::Radius)]
    norm_mode: NormModeArg,

    /// Delay class assumed undelayed for the delay-independent verdict.
    #[arg(long, global = true)]
    zero_class: Option<usize>,

    /// Benchmark family, as an alternative to a scenario file.
    #[arg(long, global = true, value_enum)]
    family: Option<FamilyArg>,

    /// Agent count N, or an inclusive range A..B for crosscheck.
    #[arg(long, global = true)]
    n: Option<String>,

    /// Uniform edge weight of the benchmark family.
    #[arg(long, global = true, default_value_t = 1.0)]
    delta: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the spectral summary and every delay margin.
    Bounds,
    /// Integrate the delayed dynamics of a scenario and classify it.
    Simulate,
    /// Scan a delay interval, then bisect the empirical stability boundary.
    Sweep,
    /// Compare closed-form family margins against the numeric pipeline.
    Crosscheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormModeArg {
    Radius,
    TwoNorm,
}

impl From<NormModeArg> for NormMode {
    fn from(arg: NormModeArg) -> Self {
        match arg {
            NormModeArg::Radius => NormMode::SpectralRadius,
            NormModeArg::TwoNorm => NormMode::OperatorTwoNorm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Complete,
    Loop,
}

impl From<FamilyArg> for GraphFamily {
    fn from(arg: FamilyArg) -> Self {
        match arg {
            FamilyArg::Complete => GraphFamily::Complete,
            FamilyArg::Loop => GraphFamily::Loop,
        }
    }
}

struct AppError {
    code: u8,
    name: &'static str,
    message: String,
}

impl AppError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            name: "Usage",
            message: message.into(),
        }
    }
}

impl From<SpectralError> for AppError {
    fn from(err: SpectralError) -> Self {
        match err {
            SpectralError::GraphDisconnected => Self {
                code: 2,
                name: "GraphDisconnected",
                message: "the delay margins require a connected communication graph".into(),
            },
            other => Self {
                code: 1,
                name: "Spectral",
                message: other.to_string(),
            },
        }
    }
}

impl From<BoundsError> for AppError {
    fn from(err: BoundsError) -> Self {
        match err {
            BoundsError::Spectral(inner) => inner.into(),
            other => Self {
                code: 1,
                name: "Bounds",
                message: other.to_string(),
            },
        }
    }
}

impl From<SimError> for AppError {
    fn from(err: SimError) -> Self {
        match err {
            SimError::StepTooLarge { .. } => Self {
                code: 3,
                name: "StepTooLarge",
                message: err.to_string(),
            },
            SimError::NoSignChange { .. } => Self {
                code: 4,
                name: "NoSignChange",
                message: err.to_string(),
            },
            other => Self {
                code: 1,
                name: "Simulation",
                message: other.to_string(),
            },
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {} {}: {}", err.code, err.name, err.message);
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: &Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Bounds => cmd_bounds(cli),
        Command::Simulate => cmd_simulate(cli),
        Command::Sweep => cmd_sweep(cli),
        Command::Crosscheck => cmd_crosscheck(cli),
    }
}

fn load_scenario(cli: &Cli) -> Result<Scenario, AppError> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| AppError::usage("this command needs --scenario <file>"))?;
    scenario::load(path).map_err(AppError::usage)
}

fn graph_from_args(cli: &Cli) -> Result<AgentGraph, AppError> {
    if cli.scenario.is_some() {
        let sc = load_scenario(cli)?;
        return sc.graph().map_err(|e| AppError {
            code: 1,
            name: "Graph",
            message: e.to_string(),
        });
    }
    let family = cli
        .family
        .ok_or_else(|| AppError::usage("need --scenario <file> or --family with --n"))?;
    let (lo, hi) = parse_n(cli)?;
    if lo != hi {
        return Err(AppError::usage("this command needs a single --n value"));
    }
    build_family(family.into(), lo, cli.delta)
}

fn build_family(family: GraphFamily, n: usize, delta: f64) -> Result<AgentGraph, AppError> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(AppError::usage("--delta must be positive"));
    }
    let built = match family {
        GraphFamily::Complete => AgentGraph::complete(n, 1, delta, DelayPartition::PerEdge),
        GraphFamily::Loop => AgentGraph::ring(n, 1, delta, DelayPartition::PerEdge),
    };
    built.map_err(|e| AppError {
        code: 1,
        name: "Graph",
        message: e.to_string(),
    })
}

fn parse_n(cli: &Cli) -> Result<(usize, usize), AppError> {
    let spec = cli
        .n
        .as_ref()
        .ok_or_else(|| AppError::usage("need --n <N> (or --n A..B)"))?;
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo = lo
            .parse()
            .map_err(|_| AppError::usage(format!("bad --n range start `{lo}`")))?;
        let hi = hi
            .parse()
            .map_err(|_| AppError::usage(format!("bad --n range end `{hi}`")))?;
        if lo > hi {
            return Err(AppError::usage("--n range must be increasing"));
        }
        Ok((lo, hi))
    } else {
        let n = spec
            .parse()
            .map_err(|_| AppError::usage(format!("bad --n value `{spec}`")))?;
        Ok((n, n))
    }
}

fn write_out(dir: &Path, file: &str, contents: &str) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::usage(format!("cannot create out dir: {e}")))?;
    fs::write(dir.join(file), contents)
        .map_err(|e| AppError::usage(format!("cannot write {file}: {e}")))
}

fn cmd_bounds(cli: &Cli) -> Result<(), AppError> {
    let g = graph_from_args(cli)?;
    let summary = spectral_summary(&g)?;
    // Decay-rate curve at eleven evenly spaced rates up to the norm.
    let rates: Vec<f64> = (0..=10)
        .map(|k| summary.norm_delta * k as f64 / 10.0)
        .collect();
    let report = margin_report(&g, cli.norm_mode.into(), &rates, cli.zero_class)?;
    let text = report.to_text();
    print!("{text}");
    if let Some(dir) = &cli.out {
        write_out(dir, "margins.txt", &text)?;
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli) -> Result<(), AppError> {
    let sc = load_scenario(cli)?;
    let g = sc.graph().map_err(|e| AppError {
        code: 1,
        name: "Graph",
        message: e.to_string(),
    })?;
    let signals = sc.signals();
    let initial = sc
        .initial_condition()
        .ok_or_else(|| AppError::usage("scenario needs an [initial] section"))?;
    let sim = sc
        .simulation
        .as_ref()
        .ok_or_else(|| AppError::usage("scenario needs a [simulation] section"))?;

    let tr = simulate(&g, &signals, &initial, sim.horizon, sim.h_step)?;
    let verdict = classify(
        &tr,
        sim.conv_tol,
        sim.div_factor * tr.initial_disagreement(),
    );

    let mut text = String::new();
    text.push_str(&format!("classification = {:?}\n", verdict.classification));
    text.push_str(&format!(
        "final_disagreement = {}\n",
        verdict.final_disagreement
    ));
    match verdict.time_to_tolerance {
        Some(t) => text.push_str(&format!("time_to_tolerance = {t}\n")),
        None => text.push_str("time_to_tolerance = none\n"),
    }
    text.push_str(&format!("average_drift = {}\n", average_drift(&tr)));
    print!("{text}");

    if let Some(dir) = &cli.out {
        write_out(dir, "verdict.txt", &text)?;
        let mut csv = Vec::new();
        tr.write_csv_strided(&mut csv, sim.csv_stride)
            .map_err(|e| AppError::usage(format!("cannot render CSV: {e}")))?;
        fs::create_dir_all(dir)
            .map_err(|e| AppError::usage(format!("cannot create out dir: {e}")))?;
        fs::write(dir.join("trajectory.csv"), csv)
            .map_err(|e| AppError::usage(format!("cannot write trajectory.csv: {e}")))?;
    }
    Ok(())
}

fn cmd_sweep(cli: &Cli) -> Result<(), AppError> {
    let sc = load_scenario(cli)?;
    let g = sc.graph().map_err(|e| AppError {
        code: 1,
        name: "Graph",
        message: e.to_string(),
    })?;
    let initial = sc
        .initial_condition()
        .ok_or_else(|| AppError::usage("scenario needs an [initial] section"))?;
    let sim = sc
        .simulation
        .as_ref()
        .ok_or_else(|| AppError::usage("scenario needs a [simulation] section"))?;
    let sweep = sc
        .sweep
        .as_ref()
        .ok_or_else(|| AppError::usage("scenario needs a [sweep] section"))?;

    let cfg = SweepConfig {
        horizon: sweep.horizon.unwrap_or(sim.horizon),
        h_step: sim.h_step,
        conv_tol: sim.conv_tol,
        div_factor: sim.div_factor,
        runs_per_point: sweep.runs_per_point,
        seed: sweep.seed,
        bisection_iters: 12,
    };
    let r = g.num_classes();
    let interval = (sweep.lo, sweep.hi);

    let (rows, critical) = match sweep.family {
        FamilySpec::UniformConstant => {
            let family = uniform_constant_family(r);
            (
                grid_sweep(&g, &initial, &family, interval, sweep.points, &cfg)?,
                empirical_critical_delay(&g, &initial, &family, interval, &cfg)?,
            )
        }
        FamilySpec::UniformRandom => {
            let family = randomized_bounded_family(r, true);
            (
                grid_sweep(&g, &initial, &family, interval, sweep.points, &cfg)?,
                empirical_critical_delay(&g, &initial, &family, interval, &cfg)?,
            )
        }
        FamilySpec::PerClassRandom => {
            let family = randomized_bounded_family(r, false);
            (
                grid_sweep(&g, &initial, &family, interval, sweep.points, &cfg)?,
                empirical_critical_delay(&g, &initial, &family, interval, &cfg)?,
            )
        }
    };

    let mut csv = String::from("tau,verdict,final_disagreement\n");
    for (tau, verdict) in &rows {
        csv.push_str(&format!(
            "{tau},{:?},{}\n",
            verdict.classification, verdict.final_disagreement
        ));
    }
    print!("{csv}");
    println!("critical = {critical}");
    if let Some(dir) = &cli.out {
        write_out(dir, "sweep.csv", &csv)?;
        write_out(dir, "critical.txt", &format!("critical = {critical}\n"))?;
    }
    Ok(())
}

fn cmd_crosscheck(cli: &Cli) -> Result<(), AppError> {
    let family_arg = cli
        .family
        .ok_or_else(|| AppError::usage("crosscheck needs --family complete|loop"))?;
    let family: GraphFamily = family_arg.into();
    let (lo, hi) = parse_n(cli)?;

    let mut csv = String::from("family,n,delta,max_rel_error,status\n");
    let mut worst: f64 = 0.0;
    let mut failed = false;
    for n in lo..=hi {
        let g = build_family(family, n, cli.delta)?;
        let summary = spectral_summary(&g)?;
        let closed = closed_form_margins(family, n, cli.delta)?;
        let numeric = [
            margin_constant_uniform(&summary),
            margin_timevarying_uniform(&summary),
            margin_constant_uniform(&summary),
            margin_timevarying_nonuniform(&g, NormMode::SpectralRadius)?,
        ];
        let reference = [
            closed.constant_uniform,
            closed.timevarying_uniform,
            closed.constant_nonuniform,
            closed.timevarying_nonuniform,
        ];
        let mut max_rel: f64 = 0.0;
        for (num, re) in numeric.iter().zip(&reference) {
            max_rel = max_rel.max((num - re).abs() / re.abs());
        }
        worst = worst.max(max_rel);
        let status = if max_rel < 1e-9 { "pass" } else { "fail" };
        failed |= max_rel >= 1e-9;
        csv.push_str(&format!(
            "{family},{n},{},{max_rel:e},{status}\n",
            cli.delta
        ));
    }
    print!("{csv}");
    println!("max_rel_error = {worst:e}");
    if let Some(dir) = &cli.out {
        write_out(dir, "crosscheck.csv", &csv)?;
    }
    if failed {
        return Err(AppError {
            code: 5,
            name: "CrosscheckMismatch",
            message: format!("numeric margins deviate from closed forms by {worst:e} (> 1e-9)"),
        });
    }
    Ok(())
}
