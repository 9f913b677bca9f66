//! `ratdyn`: runs one experiment from a JSON config and writes a JSON report
//! (plus optional CSV plot data).

mod commands;
mod config;
mod exit;
mod plot;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;

use commands::Outcome;
use config::ExperimentConfig;
use exit::{Failure, Kind};

/// Output layout version; bump on incompatible changes.
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Iterate a point.
    Orbit,
    /// Empirical measures of one orbit and their accumulation report.
    Empirical,
    /// Law of empirical measures and the finite E_k probe.
    Law,
    /// Periodic orbits of a given period.
    Periodic,
    /// Close a nearly returning orbit into a periodic one.
    Close,
    /// One periodic orbit approximating a convex combination of cycles.
    Transit,
    /// Postcritical orbits and the strictly-pcf certificate.
    Pcf,
    /// Rank of the critical-relation Jacobian.
    Rank,
    /// Parabolic parameters of a family.
    Parabolic,
    /// Full parameter chain from a strictly pcf map.
    Scenario,
    /// Law statistics over a disk of parameters.
    Probe,
}

#[derive(Debug, Parser)]
#[command(name = "ratdyn", version, about = "Experiments on rational maps of the Riemann sphere")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config field: dotted key and JSON value, e.g. params.period=3.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every sampler (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write CSV plot data here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long, env = "RATDYN_WORKERS")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&Failure::usage(e.to_string())),
    };
    match run(&cli) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(f)) | Err(f) => fail(&f),
    }
}

fn fail(f: &Failure) -> ExitCode {
    eprintln!("{}", f.to_json());
    ExitCode::from(f.kind.code() as u8)
}

/// Returns the undecided outcome, if any, after the outputs are written.
fn run(cli: &Cli) -> Result<Option<Failure>, Failure> {
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(p) = &cli.out {
        overrides.push(format!("out={}", serde_json::Value::String(p.display().to_string())));
    }
    if let Some(p) = &cli.csv {
        overrides.push(format!("csv={}", serde_json::Value::String(p.display().to_string())));
    }
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    let workers = cli.workers.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Failure::usage(format!("worker pool: {e}")))?;
    let outcome = pool.install(|| dispatch(cli.command, &cfg))?;
    write_outputs(cli.command, &cfg, &outcome)?;
    Ok(outcome.undecided.map(|m| Failure { kind: Kind::Undecided, message: m }))
}

fn dispatch(command: Command, cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    match command {
        Command::Orbit => commands::orbit(cfg),
        Command::Empirical => commands::empirical(cfg),
        Command::Law => commands::law(cfg),
        Command::Periodic => commands::periodic(cfg),
        Command::Close => commands::close(cfg),
        Command::Transit => commands::transit(cfg),
        Command::Pcf => commands::pcf(cfg),
        Command::Rank => commands::rank(cfg),
        Command::Parabolic => commands::parabolic(cfg),
        Command::Scenario => commands::scenario(cfg),
        Command::Probe => commands::probe(cfg),
    }
}

fn write_outputs(command: Command, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<(), Failure> {
    let name = command.to_possible_value().expect("named command").get_name().to_string();
    let resolved = cfg.resolved(&outcome.params);
    let report = json!({
        "tool": "ratdyn",
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": SCHEMA_VERSION,
        "command": name,
        "config_hash": config::hash(&json!({ "command": name, "config": resolved })),
        "config": resolved,
        "result": outcome.result,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    let io = |p: &str, e: std::io::Error| Failure::usage(format!("writing {p}: {e}"));
    match &cfg.out {
        Some(p) => std::fs::write(p, text).map_err(|e| io(p, e))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| io("stdout", e))?,
    }
    if let Some(p) = &cfg.csv {
        let file = std::fs::File::create(p).map_err(|e| io(p, e))?;
        plot::emit(&outcome.table, "csv", file)?;
    }
    Ok(())
}
