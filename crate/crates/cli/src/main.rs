use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use d2d_relay::policy::PolicyMode;
use d2d_relay_cli::experiment::list_files;
use d2d_relay_cli::{run_experiment, Experiment, Kind, Overrides};

/// Simulations and stability analysis for D2D relay-assisted uplink networks.
#[derive(Debug, Parser)]
#[command(name = "d2d-relay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One arrival rate, one mode, every seed.
    Run(Common),
    /// Every (mode, rate, seed) of the `[sweep]` table.
    Sweep(Common),
    /// Bisection on the largest stabilizable symmetric rate.
    Capacity(Common),
    /// Stability-region membership over an arrival grid.
    Region(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed; repeat for several. Replaces `seeds` from the file.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<PolicyMode>,
    /// Horizon in slots.
    #[arg(long)]
    slots: Option<u64>,
    /// Symmetric arrival rate in packets per slot.
    #[arg(long)]
    arrival_rate: Option<f64>,
    /// Worker threads for parallel runs.
    #[arg(long, env = "D2D_RELAY_THREADS")]
    threads: Option<usize>,
}

fn parse_mode(s: &str) -> Result<PolicyMode, String> {
    s.parse()
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::Run(c) => (Kind::Run, c),
        Command::Sweep(c) => (Kind::Sweep, c),
        Command::Capacity(c) => (Kind::Capacity, c),
        Command::Region(c) => (Kind::Region, c),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let overrides = Overrides {
        kind: Some(kind),
        seeds: common.seeds,
        out: common.out,
        mode: common.mode,
        slots: common.slots,
        arrival_rate: common.arrival_rate,
    };
    let exp = Experiment::load(&common.config, &overrides)?;
    eprintln!("# resolved configuration\n{}", exp.to_toml());
    let outcome = run_experiment(&exp)?;
    for (mode, b) in &outcome.brackets {
        println!("{mode}: capacity in [{}, {}]", b.lo, b.hi);
    }
    if let Some((inside, outside)) = outcome.region {
        println!("region: {inside} inside, {outside} outside");
    }
    for row in &outcome.summary {
        println!(
            "{} lambda={} seed={}: {} mean_backlog={:.1} throughput={:.2}",
            row.mode, row.lambda, row.seed, row.verdict, row.mean_backlog, row.throughput
        );
    }
    list_files(std::io::stdout().lock(), &outcome.files)?;
    Ok(())
}
