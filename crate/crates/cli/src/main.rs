//! Command-line runner for the adaptive tracking simulator.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use adaptrack_core::config::{load_config, preset, preset_names, ConfigDocument};
use adaptrack_core::sim::{
    compare_runs, run_scenario, Algorithm, CompareMetric, ComparisonReport, RobotScenario,
};
use adaptrack_core::trace_io::{emit_metrics, emit_trace, format_float};

#[derive(Parser)]
#[command(
    name = "adaptrack",
    about = "Discrete-time least-squares adaptive state tracking with multi-robot collision avoidance",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write trace.csv, metrics.json, scenario.toml.
    Run(RunArgs),
    /// Run two scenario arms differing in one knob and write paired outputs.
    Compare(CompareArgs),
    /// Parse and validate a scenario config file.
    Validate {
        /// Scenario config file (TOML).
        #[arg(long)]
        config: PathBuf,
    },
    /// List the built-in scenario presets.
    Presets,
}

#[derive(Args)]
struct ScenarioSelector {
    /// Scenario config file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see `presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Override the number of simulation steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Record the Lyapunov monitor column (needs nominal parameters).
    #[arg(long)]
    theta_star_known: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    selector: ScenarioSelector,
    /// Adaptation algorithm override: ls or gradient.
    #[arg(long)]
    algorithm: Option<String>,
    /// Collision avoidance override: on or off.
    #[arg(long)]
    ca: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    selector: ScenarioSelector,
    /// Either one value applied to both arms, or two comma-separated
    /// values, e.g. `ls,gradient`.
    #[arg(long)]
    algorithm: Option<String>,
    /// Either one value or two comma-separated values, e.g. `on,off`.
    #[arg(long)]
    ca: Option<String>,
    /// Per-step series to pair: tracking-error-norm, epsilon-norm, or
    /// min-surface-distance.
    #[arg(long, default_value = "tracking-error-norm")]
    metric: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Validate { config } => cmd_validate(&config),
        Command::Presets => cmd_presets(),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_algorithm(name: &str) -> Result<Algorithm> {
    match name {
        "ls" => Ok(Algorithm::Ls),
        "gradient" => Ok(Algorithm::Gradient),
        other => bail!("unknown algorithm `{other}` (expected ls or gradient)"),
    }
}

fn parse_ca(name: &str) -> Result<bool> {
    match name {
        "on" => Ok(true),
        "off" => Ok(false),
        other => bail!("unknown collision-avoidance mode `{other}` (expected on or off)"),
    }
}

enum Loaded {
    Scenario(Box<RobotScenario>),
    Usage,
}

fn load_scenario(selector: &ScenarioSelector) -> Result<Loaded> {
    let mut scenario = match (&selector.config, &selector.preset) {
        (Some(path), None) => {
            load_config(path).with_context(|| format!("loading {}", path.display()))?
        }
        (None, Some(name)) => match preset(name) {
            Ok(s) => s,
            Err(err) => {
                // unknown preset is a usage error
                eprintln!("error: {err}");
                return Ok(Loaded::Usage);
            }
        },
        (None, None) => {
            eprintln!("error: give either --config PATH or --preset NAME");
            return Ok(Loaded::Usage);
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    if let Some(steps) = selector.steps {
        scenario.run.steps = steps;
    }
    if selector.theta_star_known {
        scenario.run.theta_star_known = true;
    }
    Ok(Loaded::Scenario(Box::new(scenario)))
}

fn print_warnings(scenario: &RobotScenario) -> Result<()> {
    let resolved = scenario.resolve().context("scenario validation")?;
    for warning in &resolved.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let mut scenario = match load_scenario(&args.selector)? {
        Loaded::Scenario(s) => *s,
        Loaded::Usage => return Ok(ExitCode::from(2)),
    };
    if let Some(algorithm) = &args.algorithm {
        scenario.adaptation.algorithm = parse_algorithm(algorithm)?;
    }
    if let Some(ca) = &args.ca {
        scenario.collision.enabled = parse_ca(ca)?;
    }
    print_warnings(&scenario)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let (trace, metrics) = run_scenario(&scenario)?;
    emit_trace(&trace, &args.out.join("trace.csv"))?;
    emit_metrics(&metrics, &args.out.join("metrics.json"))?;
    let doc = ConfigDocument::from_scenario(&scenario);
    std::fs::write(args.out.join("scenario.toml"), doc.to_toml()?)?;

    println!(
        "ran {} steps x {} robots in {:.3}s; min surface distance {:.4} m; outputs in {}",
        metrics.steps,
        metrics.robots,
        metrics.wall_clock_s,
        metrics.min_surface_distance,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn split_arms(value: Option<&str>) -> (Option<String>, Option<String>, bool) {
    match value {
        None => (None, None, false),
        Some(v) => match v.split_once(',') {
            Some((a, b)) => (Some(a.trim().to_string()), Some(b.trim().to_string()), true),
            None => (Some(v.to_string()), Some(v.to_string()), false),
        },
    }
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let base = match load_scenario(&args.selector)? {
        Loaded::Scenario(s) => *s,
        Loaded::Usage => return Ok(ExitCode::from(2)),
    };
    let metric = CompareMetric::parse(&args.metric)?;

    let (algo_a, algo_b, algo_pair) = split_arms(args.algorithm.as_deref());
    let (ca_a, ca_b, ca_pair) = split_arms(args.ca.as_deref());
    if algo_pair == ca_pair {
        bail!("compare needs exactly one paired axis, e.g. --algorithm ls,gradient or --ca on,off");
    }

    let arm = |algo: Option<&String>, ca: Option<&String>| -> Result<RobotScenario> {
        let mut s = base.clone();
        if let Some(a) = algo {
            s.adaptation.algorithm = parse_algorithm(a)?;
        }
        if let Some(c) = ca {
            s.collision.enabled = parse_ca(c)?;
        }
        Ok(s)
    };
    let scenario_a = arm(algo_a.as_ref(), ca_a.as_ref())?;
    let scenario_b = arm(algo_b.as_ref(), ca_b.as_ref())?;
    print_warnings(&scenario_a)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let (report, trace_a, trace_b) = compare_runs(&scenario_a, &scenario_b, metric)?;
    emit_trace(&trace_a, &args.out.join("trace_a.csv"))?;
    emit_trace(&trace_b, &args.out.join("trace_b.csv"))?;
    emit_metrics(&report.metrics_a, &args.out.join("metrics_a.json"))?;
    emit_metrics(&report.metrics_b, &args.out.join("metrics_b.json"))?;
    write_comparison(&report, &args.out)?;

    println!(
        "compared on {}: final {} (a) vs {} (b); convergence step {:?} (a) vs {:?} (b); outputs in {}",
        report.metric,
        format_float(report.final_a),
        format_float(report.final_b),
        report.convergence_step_a,
        report.convergence_step_b,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn write_comparison(report: &ComparisonReport, out: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_path(out.join("compare.csv"))?;
    writer.write_record([
        "step".to_string(),
        format!("{}_a", report.metric),
        format!("{}_b", report.metric),
        "delta".to_string(),
    ])?;
    for (step, (a, b)) in report.series_a.iter().zip(&report.series_b).enumerate() {
        writer.write_record([
            step.to_string(),
            format_float(*a),
            format_float(*b),
            format_float(a - b),
        ])?;
    }
    writer.flush()?;

    let summary = serde_json::json!({
        "metric": report.metric,
        "final_a": report.final_a,
        "final_b": report.final_b,
        "final_delta": report.final_a - report.final_b,
        "convergence_step_a": report.convergence_step_a,
        "convergence_step_b": report.convergence_step_b,
    });
    std::fs::write(
        out.join("compare.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn cmd_validate(config: &Path) -> Result<ExitCode> {
    match load_config(config) {
        Ok(scenario) => {
            print_warnings(&scenario)?;
            println!(
                "{} is valid: {} robots, {} steps, algorithm {}",
                config.display(),
                scenario.robots.len(),
                scenario.run.steps,
                scenario.adaptation.algorithm
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(err) => {
            eprintln!("invalid config {}: {err}", config.display());
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_presets() -> Result<ExitCode> {
    for (name, description) in preset_names() {
        println!("{name}: {description}");
    }
    println!("(paper-3robot is an alias for paper-3robot-ls)");
    Ok(ExitCode::SUCCESS)
}
