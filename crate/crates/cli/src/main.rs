use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "genflow", version, about = "Fat-path solvers for generalized flows and market equilibria")]
struct Cli {
    /// Worker threads when several input files are given (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Add wall time to the report (makes output nondeterministic).
    #[arg(long, global = true)]
    timing: bool,
    /// Run the solver's internal invariant sweeps and report them.
    #[arg(long, global = true)]
    check_invariants: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact symmetric solve of a linear-gain instance.
    SolveLinear {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Check the conservative-labeling certificate and include the verdict.
        #[arg(long)]
        certificate: bool,
    },
    /// ε-approximate symmetric solve of a concave instance.
    SolveConcave {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        eps: f64,
        /// Per-phase CSV, to the given file or to stderr.
        #[arg(long, num_args = 0..=1, value_name = "PATH")]
        trace: Option<Option<PathBuf>>,
    },
    /// Maximize the excess at a sink subject to e_i >= 0 elsewhere.
    SolveSink {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// 1-based sink node.
        #[arg(long)]
        sink: usize,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
        /// Upper bound on |e_t| (default d_t U).
        #[arg(long)]
        ustar: Option<String>,
        /// Use the exact linear solver (linear gains only; ignores --eps).
        #[arg(long)]
        exact: bool,
    },
    /// Linear Fisher market (or price discrimination with concave utilities).
    Fisher {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-7)]
        eps: f64,
        /// Recover the exact rational equilibrium (linear utilities).
        #[arg(long)]
        exact: bool,
    },
    /// Arrow-Debreu Nash bargaining market.
    Adnb {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-7)]
        eps: f64,
        #[arg(long)]
        exact: bool,
    },
    /// Compare the solver against an independent reference.
    Verify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum)]
        against: Reference,
        /// Secant segments per concave arc.
        #[arg(long, default_value_t = 64)]
        segments: usize,
        /// Accuracy of the concave solve.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        /// Domain clipping at minus-infinity ends of immense arcs.
        #[arg(long, default_value_t = 1e-4)]
        clip: f64,
    },
    /// Seeded random instance.
    Gen {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write this many consecutive seeds into --out instead of stdout.
        #[arg(long)]
        count: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Reference {
    Lp,
    Pwl,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    Linear,
    Concave,
    Fisher,
    Adnb,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    ExitCode::from(commands::run(cli))
}
