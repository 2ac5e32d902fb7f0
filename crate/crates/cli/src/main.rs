//! `shoplab`: generate instances, run auctions, solve for and verify
//! autobidding equilibria, and measure the price of anarchy.
//!
//! Exit codes: 0 success or PASS, 2 FAIL, 3 INCONCLUSIVE or NON_CONVERGED,
//! 1 for usage, I/O and parse errors.

mod commands;
mod goldens;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shoplab_core::Mechanism;

#[derive(Parser, Debug)]
#[command(name = "shoplab", version, about = "Sponsored-shopping autobidding laboratory")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Override the instance's payment rule.
    #[arg(long, global = true, value_parser = parse_mechanism)]
    pub mechanism: Option<Mechanism>,
    /// Let GSP items be priced by their owner's own lower-ranked items.
    #[arg(long, global = true)]
    pub self_pricing: bool,
    #[arg(long, global = true, env = "SHOPLAB_SEED")]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub eps0: Option<f64>,
    #[arg(long, global = true)]
    pub eps_decay: Option<f64>,
    #[arg(long, global = true)]
    pub stages: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub damping: Option<f64>,
    /// Verification tolerance (value units); fixed-point tolerance for `solve`.
    #[arg(long, global = true)]
    pub tol: Option<String>,
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Arith::Rational)]
    pub arith: Arith,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    pub format: Format,
}

impl Global {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Arith {
    Float,
    Rational,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Human,
}

fn parse_mechanism(s: &str) -> Result<Mechanism, String> {
    s.parse::<Mechanism>().map_err(|e| e.to_string())
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write an instance: `example1`, `tightness K=100 eps=0.001`, or
    /// `random n=2 items=1..3 K=3 value_max=10 ctr=random cap=4 [strict] [count=N]`.
    Gen {
        #[arg(required = true, num_args = 1..)]
        spec: Vec<String>,
    },
    /// Allocate and price one auction.
    Run {
        instance: PathBuf,
        /// Comma-separated multipliers (default: all ones).
        #[arg(long, conflicts_with = "alpha_file")]
        alpha: Option<String>,
        #[arg(long)]
        alpha_file: Option<PathBuf>,
        /// `first`, `random` (uses --seed) or `favor:<bidder id>`.
        #[arg(long, default_value = "first")]
        tie_rule: String,
    },
    /// Search for an equilibrium with the smoothed fixed-point solver.
    Solve {
        instance: PathBuf,
        /// Solver configuration file (JSON, `SolverConfig` field names).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Full solver report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Iteration diagnostics (JSON lines).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Check a candidate, or search a multiplier grid when none is given.
    Verify {
        instance: PathBuf,
        candidate: Option<PathBuf>,
        /// Grid resolution for the exhaustive search.
        #[arg(long, default_value_t = 8)]
        grid: usize,
        /// Cap on valid allocations enumerated per grid point.
        #[arg(long, default_value_t = 50_000)]
        limit: usize,
    },
    /// PoA report for a verified candidate, or a seeded sweep.
    Poa {
        instance: Option<PathBuf>,
        candidate: Option<PathBuf>,
        /// Number of seeded random instances to solve and measure.
        #[arg(long, conflicts_with_all = ["instance", "candidate"])]
        sweep: Option<u64>,
        #[arg(long, default_value_t = 3)]
        max_bidders: usize,
        #[arg(long, default_value_t = 3)]
        max_items: usize,
        #[arg(long, default_value_t = 4)]
        max_slots: usize,
        #[arg(long, default_value = "4")]
        cap: String,
    },
    /// Replay the reference examples and compare with the expected numbers.
    Goldens,
}

/// Outcome of a command, mapped onto the exit code.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Fail,
    Inconclusive,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.global.workers {
        Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build() {
            Ok(pool) => pool.install(|| commands::dispatch(&cli)),
            Err(e) => Err(shoplab_core::Error::invalid(format!("cannot start {w} workers: {e}"))),
        },
        None => commands::dispatch(&cli),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Fail) => ExitCode::from(2),
        Ok(Status::Inconclusive) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
