//! `rodlat`: hard-rod lattice experiments from the command line.
//!
//! Exit codes: 0 success, 1 configuration/validation error, 2 runtime
//! failure.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rodlat::lattice::{BoundaryCondition, BoxSpec, Containment};
use rodlat_cli::config::{parse_config_file, RunConfig};
use rodlat_cli::plot::{render_svg, PlotOptions, Series};
use rodlat_cli::run::{analyze_run, coarsegrain_trace, run_experiment, Summary};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rodlat", version, about = "Hard rods on the square lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment from a JSON config (or a manifest).
    Simulate(SimulateArgs),
    /// Exactly enumerate a small box and print its partition polynomial.
    Enumerate(EnumerateArgs),
    /// Coarse-grain a configuration trace into spin fields and contours.
    Coarsegrain(CoarsegrainArgs),
    /// Recompute the summary of an existing run directory from its CSVs.
    Analyze(AnalyzeArgs),
    /// Render diagnostic SVG plots from summaries or contour histograms.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON run config; a run manifest also works (its config is reused).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of chains.
    #[arg(long)]
    chains: Option<u32>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write gzip configuration traces alongside the measurements.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Box side.
    #[arg(long = "l", visible_alias = "L")]
    l: i32,
    #[arg(long)]
    k: i32,
    #[arg(long, default_value = "open")]
    bc: String,
    #[arg(long, default_value = "center-in-box")]
    containment: String,
    /// Raise the candidate-position guard (may be very slow).
    #[arg(long)]
    max_positions: Option<usize>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoarsegrainArgs {
    /// Input trace (trace_chainNNNN.txt.gz from `simulate --trace`).
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run directory holding manifest.json and measurement CSVs.
    #[arg(long)]
    run: PathBuf,
    /// Rewrite summary.json in place (default prints to stdout).
    #[arg(long)]
    write: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Plot kind: m-vs-z, event-decay, correlation, contour-hist.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    out: PathBuf,
    /// Input files: summary.json files, or contour_hist.csv for contour-hist.
    inputs: Vec<PathBuf>,
}

/// Errors before any computation starts (bad flags, bad config, bad
/// preconditions) exit 1; failures during a run exit 2.
enum CliError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Enumerate(args) => enumerate(args).map_err(CliError::Validation),
        Command::Coarsegrain(args) => {
            coarsegrain_trace(&args.trace, &args.out).map_err(CliError::Runtime)
        }
        Command::Analyze(args) => analyze(args).map_err(CliError::Runtime),
        Command::Plot(args) => plot(args).map_err(CliError::Validation),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut config: RunConfig =
        parse_config_file(&args.config).map_err(|e| CliError::Validation(e.into()))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(chains) = args.chains {
        config.chains = chains;
    }
    if let Some(out) = args.out {
        config.output_dir = out;
    }
    if args.trace {
        config.trace = true;
    }
    // Re-validate after overrides.
    rodlat_cli::config::validate(&config).map_err(|e| CliError::Validation(e.into()))?;
    let summary = run_experiment(&config).map_err(CliError::Runtime)?;
    print_summary_line(&summary);
    Ok(())
}

fn print_summary_line(summary: &Summary) {
    println!(
        "done: {} chains x {} frames; rho = {:.6} +- {:.6}, M = {:.4} +- {:.4} -> {}",
        summary.chains,
        summary.frames_per_chain,
        summary.rho.mean,
        summary.rho.se,
        summary.m.mean,
        summary.m.se,
        summary.config.output_dir.display()
    );
}

fn parse_bc(s: &str) -> Result<BoundaryCondition> {
    match s {
        "open" => Ok(BoundaryCondition::Open),
        "plus" => Ok(BoundaryCondition::Plus),
        "minus" => Ok(BoundaryCondition::Minus),
        other => bail!("unknown bc `{other}`, expected one of open, plus, minus"),
    }
}

fn parse_containment(s: &str) -> Result<Containment> {
    match s {
        "center-in-box" => Ok(Containment::CenterInBox),
        "fully-contained" => Ok(Containment::FullyContained),
        other => {
            bail!("unknown containment `{other}`, expected one of center-in-box, fully-contained")
        }
    }
}

fn enumerate(args: EnumerateArgs) -> Result<()> {
    let bc = parse_bc(&args.bc)?;
    let containment = parse_containment(&args.containment)?;
    let spec = BoxSpec::square(args.l, args.k, containment, bc)?;
    let limit = args
        .max_positions
        .unwrap_or(rodlat::oracle::DEFAULT_POSITION_LIMIT);
    if limit > rodlat::oracle::DEFAULT_POSITION_LIMIT {
        eprintln!(
            "warning: raising the position guard to {limit}; enumeration may take \
             exponential time"
        );
    }
    let poly = rodlat::oracle::partition_polynomial_with_limit(&spec, limit)?;
    let json = serde_json::json!({
        "schema_version": rodlat_cli::SCHEMA_VERSION,
        "L": args.l,
        "k": args.k,
        "bc": args.bc,
        "containment": args.containment,
        "coefficients": poly.coefficients,
    });
    let text = serde_json::to_string_pretty(&json)?;
    match args.out {
        Some(path) => std::fs::write(&path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let summary = analyze_run(&args.run)?;
    let text = serde_json::to_string_pretty(&summary)?;
    if args.write {
        std::fs::write(args.run.join("summary.json"), text)?;
        print_summary_line(&summary);
    } else {
        println!("{text}");
    }
    Ok(())
}

fn read_summary(path: &PathBuf) -> Result<Summary> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a summary", path.display()))
}

fn plot(args: PlotArgs) -> Result<()> {
    if args.inputs.is_empty() {
        bail!("no input files");
    }
    let svg = match args.kind.as_str() {
        "m-vs-z" => {
            let mut points = Vec::new();
            for path in &args.inputs {
                let s = read_summary(path)?;
                points.push((s.config.z, s.m.mean, s.m.se));
            }
            render_svg(
                &[Series {
                    label: "M".into(),
                    points,
                }],
                &PlotOptions {
                    title: "Order parameter vs activity".into(),
                    x_label: "z".into(),
                    y_label: "M".into(),
                    ..Default::default()
                },
            )?
        }
        "event-decay" => {
            let mut points = Vec::new();
            for path in &args.inputs {
                let s = read_summary(path)?;
                if s.events.is_empty() {
                    bail!("{} has no event windows", path.display());
                }
                // Average the windows of one run; they share the frames.
                let p = s.events.iter().map(|e| e.p.mean).sum::<f64>() / s.events.len() as f64;
                let se = s.events.iter().map(|e| e.p.se * e.p.se).sum::<f64>().sqrt()
                    / s.events.len() as f64;
                let zk2 = s.config.z * (s.config.k * s.config.k) as f64;
                points.push((zk2, p, se));
            }
            render_svg(
                &[Series {
                    label: "P(E-)".into(),
                    points,
                }],
                &PlotOptions {
                    title: "Opposite-orientation window probability".into(),
                    x_label: "z k^2".into(),
                    y_label: "P".into(),
                    log_y: true,
                    ..Default::default()
                },
            )?
        }
        "correlation" => {
            if args.inputs.len() != 1 {
                bail!("correlation plots take exactly one summary");
            }
            let s = read_summary(&args.inputs[0])?;
            let points: Vec<(f64, f64, f64)> = s
                .correlations
                .iter()
                .map(|c| (c.separation as f64, c.truncated, c.se))
                .collect();
            render_svg(
                &[Series {
                    label: "truncated".into(),
                    points,
                }],
                &PlotOptions {
                    title: "Truncated pair correlation".into(),
                    x_label: "separation (sites)".into(),
                    y_label: "<n n> - rho^2".into(),
                    ..Default::default()
                },
            )?
        }
        "contour-hist" => {
            if args.inputs.len() != 1 {
                bail!("contour-hist plots take exactly one contour_hist.csv");
            }
            let text = std::fs::read_to_string(&args.inputs[0])?;
            let mut points = Vec::new();
            for line in text.lines().skip(1) {
                if line.is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 4 {
                    bail!("bad contour_hist row: {line}");
                }
                let p: f64 = f[2].parse()?;
                if p > 0.0 {
                    points.push((f[0].parse()?, p, f[3].parse()?));
                }
            }
            render_svg(
                &[Series {
                    label: "P(size)".into(),
                    points,
                }],
                &PlotOptions {
                    title: "Contour size distribution".into(),
                    x_label: "contour size (tiles)".into(),
                    y_label: "host probability".into(),
                    log_y: true,
                    ..Default::default()
                },
            )?
        }
        other => bail!(
            "unknown plot kind `{other}`, expected one of m-vs-z, event-decay, \
             correlation, contour-hist"
        ),
    };
    std::fs::write(&args.out, svg)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    println!("wrote {}", args.out.display());
    Ok(())
}
