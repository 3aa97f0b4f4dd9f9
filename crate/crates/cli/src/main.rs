use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use contassure::gsn::Issue;
use contassure::pipeline::{self, ConfigSource, ExitStatus, PipelineConfig, PollOutcome, Watcher};

/// Default config file looked up in the working directory.
const DEFAULT_CONFIG: &str = "contassure.conf";

#[derive(Parser)]
#[command(
    name = "contassure",
    version,
    about = "Verify DTMC properties and maintain a traceable GSN assurance argument"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Config file of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Model file, or a directory holding one model/property pair.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Property file (defaults to the model path with `.props`).
    #[arg(long, global = true)]
    props: Option<PathBuf>,
    /// Output directory (defaults to the model's directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Constant override, repeatable.
    #[arg(long = "const", value_name = "NAME=VALUE", global = true)]
    constants: Vec<String>,
    /// Relative convergence threshold of the iterative solver.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Iteration limit of the iterative solver.
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Solver: `gauss-seidel` or `jacobi`.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Abort the state-space build beyond this many states.
    #[arg(long, global = true)]
    max_states: Option<usize>,
    /// Watch poll interval in milliseconds.
    #[arg(long, global = true)]
    poll_ms: Option<u64>,
    /// Description templates file.
    #[arg(long, global = true)]
    templates: Option<PathBuf>,
    /// Also write a Graphviz rendering of the argument.
    #[arg(long, global = true)]
    dot: bool,
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Verify all properties and write the results file.
    Check,
    /// Verify and (re)generate the argument, merging with an existing one.
    Generate,
    /// Re-run `generate` whenever the model or property file changes.
    Watch {
        /// Stop after this many cycles.
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Apply monitor logs to the argument.
    Ingest {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
    /// Classify goals after a change.
    Impact {
        /// Evolution package directory; changes are detected from the
        /// input files when omitted.
        #[arg(long)]
        package: Option<PathBuf>,
        /// Verify the current inputs to separate invalid from valid goals.
        #[arg(long)]
        recheck: bool,
    },
    /// Plan evidence regeneration from the last impact report.
    Plan,
    /// Apply fresh results to the planned goals.
    Apply {
        /// Use these results instead of re-verifying.
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

fn config(args: &CommonArgs) -> Result<PipelineConfig> {
    let file = match &args.config {
        Some(p) => {
            ConfigSource::load(p).with_context(|| format!("reading config {}", p.display()))?
        }
        None if std::path::Path::new(DEFAULT_CONFIG).is_file() => {
            ConfigSource::load(std::path::Path::new(DEFAULT_CONFIG))?
        }
        None => ConfigSource::default(),
    };
    let flags = ConfigSource {
        model: args.model.clone(),
        props: args.props.clone(),
        out: args.out.clone(),
        constants: args
            .constants
            .iter()
            .map(|c| pipeline::parse_assignment(c))
            .collect::<Result<_, _>>()?,
        epsilon: args.epsilon,
        max_iters: args.max_iters,
        method: args
            .method
            .as_deref()
            .map(pipeline::parse_method)
            .transpose()?,
        max_states: args.max_states,
        poll_ms: args.poll_ms,
        templates: args.templates.clone(),
        dot: args.dot.then_some(true),
    };
    Ok(file.overlay(flags).resolve()?)
}

fn report_issues(issues: &[Issue]) {
    for i in issues {
        eprintln!("{i}");
    }
}

fn run(cli: Cli) -> Result<ExitStatus> {
    let cfg = config(&cli.common)?;
    match cli.command {
        Command::Check => {
            let out = pipeline::cmd_check(&cfg)?;
            let width = out.results.iter().map(|r| r.name.len()).max().unwrap_or(0);
            for r in &out.results {
                let note = if r.marginal { "  (marginal)" } else { "" };
                println!("{:width$}  {}{note}", r.name, r.summary());
            }
            eprintln!("results written to {}", out.results_path.display());
            Ok(out.status)
        }
        Command::Generate => {
            let out = pipeline::cmd_generate(&cfg)?;
            report_issues(&out.issues);
            println!("{}", out.summary());
            Ok(ExitStatus::Success)
        }
        Command::Watch { cycles } => {
            let mut w = Watcher::new(cfg)?;
            eprintln!(
                "watching {} and {} every {} ms",
                w.config().model.display(),
                w.config().props.display(),
                w.config().poll_interval.as_millis()
            );
            w.run(|outcome| {
                if let Some(line) = outcome.log_line() {
                    match outcome {
                        PollOutcome::Failed { error, .. } => {
                            log::error!("{line}");
                            log::debug!("{error}");
                        }
                        _ => log::info!("{line}"),
                    }
                }
                let done = matches!(outcome, PollOutcome::Cycle { number, .. } | PollOutcome::Failed { number, .. }
                    if cycles.is_some_and(|c| *number >= c));
                !done
            });
            Ok(ExitStatus::Success)
        }
        Command::Ingest { logs } => {
            let report = pipeline::cmd_ingest(&cfg, &logs)?;
            for o in &report.outcomes {
                let goal = o.goal.as_deref().unwrap_or("-");
                println!("{}\t{}\t{goal}\t{}", o.timestamp, o.monitor_id, o.action);
            }
            if report.unmatched > 0 {
                log::warn!("{} event(s) matched no goal", report.unmatched);
            }
            Ok(ExitStatus::Success)
        }
        Command::Impact { package, recheck } => {
            let report = pipeline::cmd_impact(&cfg, package.as_deref(), recheck)?;
            print!("{}", report.to_text());
            Ok(ExitStatus::Success)
        }
        Command::Plan => {
            let plan = pipeline::cmd_plan(&cfg)?;
            if plan.entries.is_empty() {
                println!("nothing to regenerate");
            }
            print!("{}", plan.to_text());
            Ok(ExitStatus::Success)
        }
        Command::Apply { results } => {
            let out = pipeline::cmd_apply(&cfg, results.as_deref())?;
            println!(
                "argument v{}: {} goal(s) regenerated, {} left for review",
                out.argument.version,
                out.applied.len(),
                out.skipped.len()
            );
            for g in &out.skipped {
                println!("review: {g}");
            }
            Ok(ExitStatus::Success)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .format_target(false)
        .init();
    match run(cli) {
        Ok(status) => ExitCode::from(status.code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ExitStatus::Error.code() as u8)
        }
    }
}
