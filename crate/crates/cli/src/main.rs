//! `crn`: analyze reaction networks, solve truncated chains, simulate, and
//! check node balance of copies against complex balance.

mod commands;
mod inputs;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "crn", version, about = "Reaction network analysis toolkit")]
pub struct Cli {
    /// Relative tolerance for balance equations.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Absolute tolerance for balance equations.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol_abs: f64,
    /// Write the JSON report to this file (`-` for stdout).
    #[arg(long, global = true)]
    pub json_out: Option<PathBuf>,
    /// Suppress the human-readable summary.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Structural invariants: linkage classes, reversibility, deficiency.
    Analyze {
        file: PathBuf,
        /// Also analyze the auxiliary network with one extra species per complex.
        #[arg(long)]
        auxiliary: bool,
    },
    /// Exact stationary distributions of a finite chain.
    Stationary(StationaryArgs),
    /// Gillespie simulation with time-weighted occupancy.
    Simulate(SimulateArgs),
    /// Enumerate copies in a box and check their node balance.
    Copies(CopiesArgs),
    /// Check one of the copy/complex-balance equivalences.
    Verify(VerifyArgs),
    /// Check stationarity and complex balance of a measure or a state.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
pub struct StationaryArgs {
    pub file: PathBuf,
    /// Truncate to the box [0, N]^n.
    #[arg(long = "box", group = "domain")]
    pub box_max: Option<i64>,
    /// Truncate to the states listed in a CSV file (header row, one state per row).
    #[arg(long, group = "domain")]
    pub states: Option<PathBuf>,
    /// Chain on the union of all copies with images in [0, N]^n.
    #[arg(long, group = "domain")]
    pub union_copies: Option<i64>,
    /// Solve every closed class instead of the largest one.
    #[arg(long)]
    pub solve_all_classes: bool,
    /// Also solve terminal classes that leak through the truncation boundary,
    /// discarding the leaking transitions.
    #[arg(long)]
    pub reflect: bool,
    #[arg(long, value_enum, default_value_t = Method::Gth)]
    pub method: Method,
    /// Write π as CSV (species columns, class, pi).
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum Method {
    Gth,
    Lu,
    Power,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    pub file: PathBuf,
    /// Initial state, comma separated.
    #[arg(long)]
    pub x0: String,
    #[arg(long)]
    pub t_end: f64,
    /// RNG seed; generated and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    pub burn_in: f64,
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    /// Write the occupancy histogram as CSV.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Theorem {
    /// Injective copies / all copies / complex balance, for any kinetics.
    Any,
    /// One active injective node-balanced copy for a product-form measure.
    Single,
    /// Translates f + v of one copy over a box or the probe grid.
    Translations,
    /// Injective copies meeting the cube [0, M1]^n.
    Cube,
}

#[derive(Args, Debug, Clone)]
pub struct TheoremArgs {
    /// Measure: `product:c=1,1`, `table:FILE.csv` or `stationary:N`.
    #[arg(long)]
    pub measure: Option<String>,
    /// Shorthand for `--measure product:c=...`.
    #[arg(long)]
    pub c: Option<String>,
    /// Box side for copy enumeration and complex-balance checks.
    #[arg(long = "box", default_value_t = 6)]
    pub box_max: i64,
    #[arg(long, default_value_t = 4)]
    pub m1: i64,
    /// Use the probe grid {0..d}^n for translations.
    #[arg(long)]
    pub probe_grid: bool,
    /// Translation box side in full mode (default 2d + 2).
    #[arg(long)]
    pub side: Option<i64>,
    /// Copy offsets per linkage class: classes separated by `;`, coordinates by `,`.
    #[arg(long)]
    pub offsets: Option<String>,
    /// Per-reaction rate table CSV (`reaction,x1..xn,rate`) replacing the kinetics.
    #[arg(long)]
    pub rates: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CopiesArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub injective_only: bool,
    #[arg(long, value_enum)]
    pub theorem: Option<Theorem>,
    #[command(flatten)]
    pub opts: TheoremArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub file: PathBuf,
    #[arg(long, value_enum)]
    pub theorem: Theorem,
    #[command(flatten)]
    pub opts: TheoremArgs,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub measure: Option<String>,
    /// Domain box side for measure checks.
    #[arg(long = "box", default_value_t = 10)]
    pub box_max: i64,
    /// Check only stationarity of the measure.
    #[arg(long)]
    pub stationary_only: bool,
    /// Deterministic state to check for complex balance, comma separated.
    #[arg(long)]
    pub state: Option<String>,
    /// Search for a complex balanced state of the deterministic system.
    #[arg(long)]
    pub find_state: bool,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("CRN_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("CRN_THREADS must be a positive integer"))?;
        if n == 0 {
            anyhow::bail!("CRN_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match commands::run(&cli) {
        Ok(outcome) => {
            if let Err(e) = report::emit(&cli, &outcome) {
                eprintln!("error: {e:#}");
                return ExitCode::from(1);
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
