//! `permfix`: reproducible runs of the fixed-point experiments.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::config::{Flags, Settings};
use crate::report::{Format, Session};

#[derive(Parser, Debug)]
#[command(name = "permfix", version, about = "Fixed points of random permutations against Poisson(1)")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Single size, inclusive range `a..b`, or comma list.
    #[arg(long, global = true)]
    n: Option<String>,
    /// Same syntax as `--n`; takes precedence over it.
    #[arg(long = "n-range", global = true)]
    n_range: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
    #[arg(long, global = true)]
    horizon: Option<u64>,
    /// Decimal digits for enclosures of e and 1/e.
    #[arg(long, global = true)]
    digits: Option<u32>,
    /// Worker threads for replicas.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value = "permfix-out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// JSON file; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Exact laws, distances, brackets and rates.
    Exact,
    /// The function p and the kernels built from it.
    Kernel,
    /// Cycle-type chain and its projection on the fixed-point count.
    Project,
    /// Monotone coupling simulator.
    Couple,
    /// Bernoulli-product and ascent/peak couplings.
    Alt,
    /// Moments, Gram matrix and coefficient systems.
    Moments,
    /// Everything above with default ranges.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Exact => "exact",
            Command::Kernel => "kernel",
            Command::Project => "project",
            Command::Couple => "couple",
            Command::Alt => "alt",
            Command::Moments => "moments",
            Command::All => "all",
        }
    }
}

fn run_one(cmd: Command, flags: &Flags, session: &mut Session) -> Result<(String, Option<u64>)> {
    let settings = Settings::resolve(cmd.name(), flags)?;
    let hash = report::config_hash(&settings)?;
    let seed = settings.seed;
    match cmd {
        Command::Exact => commands::exact(&settings, session)?,
        Command::Kernel => commands::kernel(&settings, session)?,
        Command::Project => commands::project(&settings, session)?,
        Command::Couple => commands::couple(&settings, session)?,
        Command::Alt => commands::alt(&settings, session)?,
        Command::Moments => commands::moments(&settings, session)?,
        Command::All => unreachable!("handled by the caller"),
    }
    Ok((hash, seed))
}

fn run(cli: Cli) -> Result<bool> {
    let flags = Flags {
        n: cli.n_range.or(cli.n),
        seed: cli.seed,
        replicas: cli.replicas,
        horizon: cli.horizon,
        digits: cli.digits,
        jobs: cli.jobs,
        config: cli.config,
    };
    if let Some(j) = flags.jobs.filter(|&j| j > 0) {
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global()?;
    }
    let start = Instant::now();
    let mut session = Session::new(&cli.out, cli.format)?;
    let (hash, seed) = if cli.command == Command::All {
        let mut hashes = Vec::new();
        for cmd in [Command::Exact, Command::Kernel, Command::Project, Command::Couple, Command::Alt, Command::Moments] {
            let t = Instant::now();
            let mut sub = Session::new(&cli.out.join(cmd.name()), cli.format)?;
            let (h, s) = run_one(cmd, &flags, &mut sub)?;
            let record = sub.finish(cmd.name(), h.clone(), s, t.elapsed().as_millis())?;
            print_record(&record);
            session.absorb(record);
            hashes.push(h);
        }
        (report::config_hash(&hashes)?, flags.seed)
    } else {
        run_one(cli.command, &flags, &mut session)?
    };
    let record = session.finish(cli.command.name(), hash, seed, start.elapsed().as_millis())?;
    if cli.command != Command::All {
        print_record(&record);
    }
    println!("{}: {}", cli.command.name(), if record.passed() { "all checks pass" } else { "some checks FAIL" });
    Ok(record.passed())
}

fn print_record(record: &report::ReportRecord) {
    for c in &record.verdicts {
        println!("{:<14} {:<40} {}", record.command, c.check, c.verdict.as_str());
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
