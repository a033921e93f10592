//! `cph`: JSON front end for the `cph-core` analyses.
//!
//! Reports go to stdout, notes and errors to stderr. Exit codes: 0 success,
//! 2 parse, 3 precondition, 4 convergence, 5 structure.

mod commands;
mod input;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cph_core::Error;

use crate::input::{read_input, TolOverrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("structure error: {0}")]
    Structure(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Structure(_) => 5,
            CliError::Core(e) => match e {
                Error::Convergence { .. } => 4,
                Error::Structure(_) => 5,
                Error::Dimension(_)
                | Error::NotHermitian { .. }
                | Error::NotPsd { .. }
                | Error::Singular { .. }
                | Error::InvalidTolerance(_)
                | Error::Precondition(_) => 3,
            },
        }
    }
}

#[derive(Parser)]
#[command(name = "cph", version, about = "Analyse completely positive maps given by Kraus families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Input JSON document.
    file: PathBuf,
    /// Seed for randomized witness searches.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "X")]
    tol_herm: Option<f64>,
    #[arg(long, value_name = "X")]
    tol_psd: Option<f64>,
    #[arg(long, value_name = "X")]
    tol_eig: Option<f64>,
    #[arg(long, value_name = "X")]
    tol_conv: Option<f64>,
    #[arg(long, value_name = "N")]
    max_iter: Option<usize>,
}

impl Common {
    fn overrides(&self) -> TolOverrides {
        TolOverrides {
            herm_tol: self.tol_herm,
            psd_tol: self.tol_psd,
            eig_tol: self.tol_eig,
            conv_tol: self.tol_conv,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Contraction, Riesz decomposition of I, P_ac bounds and invariant states.
    AnalyzeCpmap {
        #[command(flatten)]
        common: Common,
    },
    /// Canonical form, P_ac and invariant vectors of a sub-Markov matrix.
    AnalyzeMarkov {
        #[command(flatten)]
        common: Common,
        /// Include the induced Kraus family in the report.
        #[arg(long)]
        emit_kraus: bool,
        /// Run the general P_ac bounds on the induced family and compare.
        #[arg(long)]
        verify_general: bool,
    },
    /// Similarity to a contraction, a C.0 contraction and a strict contraction.
    Similarity {
        #[command(flatten)]
        common: Common,
    },
    /// Truncated isometric dilation of a row contraction.
    Dilate {
        #[command(flatten)]
        common: Common,
        /// Number of Fock levels.
        #[arg(long)]
        levels: usize,
        /// Include the defect operator and the dilation in the report.
        #[arg(long)]
        emit_matrices: bool,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::AnalyzeCpmap { common }
            | Command::AnalyzeMarkov { common, .. }
            | Command::Similarity { common }
            | Command::Dilate { common, .. } => common,
        }
    }
}

fn run(command: &Command) -> Result<commands::Outcome, CliError> {
    let common = command.common();
    let input = read_input(&common.file)?;
    let tol = common.overrides().over(input.tolerances).resolve()?;
    let seed = common.seed;
    match command {
        Command::AnalyzeCpmap { .. } => commands::analyze_cpmap(&input, &tol, seed),
        Command::AnalyzeMarkov {
            emit_kraus,
            verify_general,
            ..
        } => commands::analyze_markov(&input, &tol, seed, *emit_kraus, *verify_general),
        Command::Similarity { .. } => commands::similarity(&input, &tol, seed),
        Command::Dilate {
            levels, emit_matrices, ..
        } => commands::dilate(&input, &tol, seed, *levels, *emit_matrices),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match run(&cli.command) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(report::render(&outcome.report).as_bytes()).is_err() {
        return ExitCode::FAILURE;
    }
    match outcome.failure {
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        None => ExitCode::SUCCESS,
    }
}
