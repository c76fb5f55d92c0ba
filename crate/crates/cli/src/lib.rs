//! Command-line front end: network files, measures, couplings, bounds and sweeps.

pub mod commands;
pub mod error;
pub mod expr;
pub mod netfile;
pub mod pmffile;
pub mod report;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "maxleak", version, about = "Maximal leakage of discrete channels and Bayesian networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command that reads a network file.
#[derive(Debug, Clone, clap::Args)]
pub struct NetArgs {
    /// Network file (JSON).
    pub path: PathBuf,
    /// Template parameter, `name=value`; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
    /// Cap on enumerated joint states.
    #[arg(long, default_value_t = maxleak::bayes_net::DEFAULT_STATE_LIMIT)]
    pub state_limit: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Theorem2,
    Corollary1,
    Recursive,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CoupleMode {
    /// Exact LP optimum with a witness.
    Lp,
    /// Four-marginal mixture construction.
    N4,
    /// Simultaneous coupling of joint PMFs.
    Simul,
    /// Closed-form minimal coupling chosen automatically.
    Closed,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a network file.
    Validate {
        #[command(flatten)]
        net: NetArgs,
    },
    /// Leakage measures of node channels.
    Measures {
        #[command(flatten)]
        net: NetArgs,
        /// Only this node.
        #[arg(long)]
        node: Option<String>,
        #[arg(long)]
        csv: bool,
    },
    /// Upper bounds on the leakage of a target set, with the exact value.
    Bound {
        #[command(flatten)]
        net: NetArgs,
        /// Source node; defaults to the file's source.
        #[arg(long)]
        source: Option<String>,
        /// Comma-separated target nodes; defaults to every non-source node.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::All)]
        method: MethodArg,
        /// Check every bound against the exact value; exit 1 on a violation.
        #[arg(long)]
        compare_exact: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Build and verify a coupling of a PMF family.
    Couple {
        /// PMF family file (JSON).
        path: PathBuf,
        #[arg(long, value_enum)]
        mode: CoupleMode,
        /// Cap on materialized atoms.
        #[arg(long, default_value_t = 1_000_000)]
        max_atoms: usize,
    },
    /// Bounds and exact values over a parameter range, as CSV.
    Sweep {
        #[command(flatten)]
        net: NetArgs,
        /// Parameter to vary.
        #[arg(long)]
        param: String,
        /// `start:end:step`, inclusive, exact values.
        #[arg(long)]
        range: String,
        #[arg(long)]
        source: Option<String>,
        #[arg(long, value_delimiter = ',')]
        targets: Vec<String>,
    },
    /// Rewrite a network file in canonical form.
    Format {
        #[command(flatten)]
        net: NetArgs,
    },
    /// Print a random network in canonical form.
    Generate {
        #[arg(long)]
        seed: u64,
        /// Upper limit on the node count, including the source.
        #[arg(long, default_value_t = 5)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        alphabet: usize,
    },
}

/// Runs one command, writing its report to `out`; returns the exit status.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Validate { net } => commands::validate(&net, out),
        Command::Measures { net, node, csv } => commands::measures(&net, node.as_deref(), csv, out),
        Command::Bound {
            net,
            source,
            targets,
            method,
            compare_exact,
            csv,
        } => commands::bound(
            &net,
            &commands::BoundOptions {
                source,
                targets,
                method,
                compare_exact,
                csv,
            },
            out,
        ),
        Command::Couple { path, mode, max_atoms } => commands::couple(&path, mode, max_atoms, out),
        Command::Sweep {
            net,
            param,
            range,
            source,
            targets,
        } => commands::sweep(&net, &param, &range, source.as_deref(), &targets, out),
        Command::Format { net } => commands::format(&net, out),
        Command::Generate { seed, nodes, alphabet } => commands::generate(seed, nodes, alphabet, out),
    }
}
