//! Command-line front end for `edmp-core`.

pub mod commands;
pub mod error;
pub mod io;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use edmp_core::oracle_gen::suite::VerifyConfig;
use edmp_core::TolerancePolicy;

use crate::commands::StructureKind;
use crate::error::CliError;
use crate::io::Format;

#[derive(Debug, Parser)]
#[command(
    name = "edmp",
    version,
    about = "Entry perturbations of unit spherical Euclidean distance matrices"
)]
pub struct Cli {
    /// Relative eigenvalue cutoff for ranks and pseudoinverses.
    #[arg(long, global = true, env = "EDMP_TOL", value_name = "REL")]
    pub tol: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Profile of a distance matrix (rank, sphericity, radius, w, Gale sizes).
    Analyze {
        /// CSV or JSON matrix file.
        file: PathBuf,
    },
    /// Full report for one entry (1-based, k < l) of a unit spherical EDM.
    Entry {
        file: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
    },
    /// CSV sweep of t over the yielding interval widened by a margin.
    Sweep {
        file: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 101)]
        num: usize,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        margin: f64,
    },
    /// Generate random instances and run every cross-check on them.
    Verify {
        #[arg(long, default_value_t = 25, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        nmax: usize,
        /// Distort the closed form so that the run must fail.
        #[arg(long)]
        corrupt: bool,
    },
    /// Print a generated unit spherical EDM.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = StructureKind::Generic)]
        structure: StructureKind,
        /// Distinguished entry of a structured instance (1-based).
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        l: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

/// Output of a successful dispatch and the exit code to use.
pub struct Outcome {
    pub stdout: String,
    pub code: u8,
}

pub fn tolerances(rank_rel: Option<f64>) -> Result<TolerancePolicy, CliError> {
    let base = TolerancePolicy::default();
    match rank_rel {
        None => Ok(base),
        Some(r) => TolerancePolicy::new(r, base.psd_abs_scale, base.recon_rel, base.parallel_rel)
            .map_err(|e| CliError::Usage(format!("bad tolerance: {e}"))),
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let tol = tolerances(cli.tol)?;
    let done = |stdout: String| Ok(Outcome { stdout, code: 0 });
    match cli.command {
        Command::Analyze { file } => done(commands::analyze(&file, &tol)?),
        Command::Entry { file, k, l } => done(commands::entry(&file, k, l, &tol)?),
        Command::Sweep {
            file,
            k,
            l,
            num,
            margin,
        } => done(commands::sweep(&file, k, l, num, margin, &tol)?),
        Command::Verify {
            count,
            seed,
            nmax,
            corrupt,
        } => {
            let (stdout, passed) = commands::verify(VerifyConfig {
                count: count as usize,
                seed,
                nmax,
                corrupt,
            })?;
            Ok(Outcome {
                stdout,
                code: if passed { 0 } else { 1 },
            })
        }
        Command::Gen {
            n,
            r,
            structure,
            k,
            l,
            seed,
            format,
        } => done(commands::gen(n, r, structure, k, l, seed, format)?),
    }
}
