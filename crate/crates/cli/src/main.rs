use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pokimd::simnet::{RunSummary, Scenario, ScenarioConfig};
use pokimd_cli::{
    energy_document, load_config, render_energy, render_list, render_summary, render_trace,
    run_repetitions, Overrides,
};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_MISMATCH: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pokimd",
    version,
    about = "Run access-control scenarios for an implant, its patient card and the hospital server"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and compare its outcome with the expected one.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name; see --list.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the event trace here as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the implant energy report here as JSON.
    #[arg(long)]
    energy_report: Option<PathBuf>,
    /// TOML file with any of: scenario, seed, ts_ms, iris_ber, cache_size, repetitions.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Bit error rate of the iris scan in emergency access.
    #[arg(long)]
    iris_ber: Option<f64>,
    /// Freshness window for timestamps, in milliseconds.
    #[arg(long)]
    ts_ms: Option<u32>,
    /// Number of emergency keys cached on the patient card.
    #[arg(long)]
    cache_size: Option<usize>,
    /// List scenarios with the property each one demonstrates.
    #[arg(long)]
    list: bool,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn run(args: RunArgs) -> anyhow::Result<ExitCode> {
    if args.list {
        print!("{}", render_list());
        return Ok(ExitCode::SUCCESS);
    }
    let scenario = match args
        .scenario
        .as_deref()
        .map(str::parse::<Scenario>)
        .transpose()
    {
        Ok(s) => s,
        Err(e) => {
            eprint!("known scenarios:\n{}", render_list());
            return Ok(usage(e));
        }
    };
    let base = match &args.config {
        Some(path) => match load_config(path) {
            Ok(c) => c,
            Err(e) => return Ok(usage(e)),
        },
        None => ScenarioConfig::default(),
    };
    let config = Overrides {
        scenario,
        seed: args.seed,
        ts_ms: args.ts_ms,
        iris_ber: args.iris_ber,
        cache_size: args.cache_size,
        repetitions: args.repetitions,
    }
    .apply(base);
    if let Err(e) = config.validate() {
        return Ok(usage(e));
    }

    let reports = run_repetitions(&config).context("simulation failed")?;
    let summary = RunSummary::new(&config, &reports);
    if let Some(path) = &args.trace {
        std::fs::write(path, render_trace(&reports))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.energy_report {
        let doc = energy_document(&config, &reports);
        std::fs::write(path, render_energy(&doc))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", render_summary(&config, &reports, &summary));
    Ok(if summary.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_MISMATCH)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args).unwrap_or_else(|e| {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_MISMATCH)
        }),
    }
}
