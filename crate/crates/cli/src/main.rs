//! `crowdspec`: validate, normalize, analyse, run and check crowd specifications.
//!
//! Exit codes: 0 holds or clean, 1 fails or invalid, 2 inconclusive, 3 error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "crowdspec", version, about = "Specify, run and check digital crowds")]
pub struct Cli {
    /// Machine-readable output (the default).
    #[arg(long, global = true, conflicts_with = "text")]
    pub json: bool,
    /// Human-readable output.
    #[arg(long, global = true)]
    pub text: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Strict,
    Liberal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Conflict {
    Halt,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TopologyArg {
    Single,
    Chained,
    Isolated,
}

/// Options shared by everything that loads and executes a specification.
#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// Round budget.
    #[arg(long, env = "CROWDSPEC_MAX_ROUNDS", default_value_t = 1000)]
    pub max_rounds: usize,
    /// Rounds between a `<>` consequence and its assertion.
    #[arg(long, default_value_t = 1)]
    pub delay: usize,
    #[arg(long, value_enum, default_value_t = Conflict::Halt)]
    pub conflict: Conflict,
    /// Collapse received-then-sent chains to a sent outer operator.
    #[arg(long)]
    pub compat_eq1_row2: bool,
    /// Add missing content/context counterparts instead of rejecting the file.
    #[arg(long)]
    pub fix_duality: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and lint `.crowd` and `.props` files.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Liberal)]
        mode: Mode,
        #[arg(long)]
        fix_duality: bool,
    },
    /// Collapse nested message chains in a formula or file.
    Normalize {
        /// A `.crowd` or `.props` file.
        #[arg(required_unless_present = "formula", conflicts_with = "formula")]
        path: Option<PathBuf>,
        #[arg(long)]
        formula: Option<String>,
        #[arg(long)]
        compat_eq1_row2: bool,
    },
    /// Neighbourhood of an agent with one witness path per member.
    Reach {
        path: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long)]
        fix_duality: bool,
    },
    /// Execute a specification and print its trace.
    Run {
        path: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run a specification and check properties on its trace.
    Check {
        path: PathBuf,
        #[arg(long, required_unless_present = "props")]
        subject: Option<String>,
        /// Property text.
        #[arg(long, required_unless_present = "props", conflicts_with = "props")]
        prop: Option<String>,
        /// A `.props` file; each property names its own subject.
        #[arg(long)]
        props: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Liberal)]
        mode: Mode,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Build, run and check the case studies.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// A seeker delegating a search to its neighbourhood.
    Nemo {
        #[arg(long, default_value_t = 5)]
        size: usize,
        /// Comma-separated indices of able crowd members.
        #[arg(long, value_delimiter = ',')]
        able: Vec<usize>,
        #[arg(long, value_enum, default_value_t = TopologyArg::Single)]
        topology: TopologyArg,
        /// Print the generated specification instead of checking it.
        #[arg(long)]
        emit: bool,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Fragments of software tested by a crowd under confidentiality.
    Testers {
        #[arg(long, default_value_t = 3)]
        fragments: usize,
        #[arg(long, default_value_t = 9)]
        crowd: usize,
        /// A comma-separated fragment set implying the whole; repeatable.
        /// Defaults to all fragments.
        #[arg(long = "whole", value_parser = parse_set)]
        whole: Vec<Vec<usize>>,
        /// Deem every applicant safe.
        #[arg(long)]
        no_safety: bool,
        /// Testers starts out believing `whole`.
        #[arg(long)]
        failsafe: bool,
        #[arg(long)]
        emit: bool,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Both case studies over a grid of sizes, in parallel.
    Grid {
        #[command(flatten)]
        engine: EngineArgs,
    },
}

fn parse_set(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
