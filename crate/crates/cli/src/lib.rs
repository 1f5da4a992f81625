//! Command-line front end for `csx-core`.
//!
//! `csx verify|simplex|dominance|simulate|fixed-points|report <model-file> [flags]`
//!
//! Exit codes: 0 success, 1 usage/IO/format error, 2 conditions not
//! established, 3 surface gaps above 1% of directions, 4 orbit overflow.

pub mod commands;
pub mod modelfile;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use csx_core::CsxError;

use commands::{SimplexArgs, EXIT_OK, EXIT_OVERFLOW, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "csx", version, about = "Modified carrying simplex analysis for competitive maps")]
pub struct Cli {
    /// Worker threads (1 gives bitwise-reproducible output).
    #[arg(long, global = true, env = "CSX_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the existence conditions for the simplex.
    Verify {
        model: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        /// Report sampled passes as inconclusive.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        json: bool,
    },
    /// Compute the simplex as a radial surface and export it.
    Simplex {
        model: PathBuf,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
        /// Compute even when the conditions are not established.
        #[arg(long)]
        force: bool,
    },
    /// Vanishing and dominant species from nullcline geometry.
    Dominance {
        model: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Iterate the map and classify the ω-limit.
    Simulate {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Origin, axial and interior fixed points with stability.
    FixedPoints {
        model: PathBuf,
        #[arg(long, default_value_t = 6)]
        seeds: usize,
        #[arg(long)]
        json: bool,
    },
    /// Full analysis written as one JSON document.
    Report {
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        force: bool,
        /// Include wall-clock timings (makes the output non-reproducible).
        #[arg(long)]
        timings: bool,
    },
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CsxError>() {
        Some(CsxError::Overflow { .. }) => EXIT_OVERFLOW,
        _ => EXIT_USAGE,
    }
}

pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // Ignored if a pool already exists (e.g. repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let result = match cli.command {
        Command::Verify { model, resolution, strict, json } => commands::cmd_verify(&model, resolution, strict, json),
        Command::Simplex { model, resolution, out, format, force } => commands::cmd_simplex(
            &model,
            SimplexArgs { resolution, out, format, force },
        ),
        Command::Dominance { model, json } => commands::cmd_dominance(&model, json),
        Command::Simulate { model, x0, steps, out } => commands::cmd_simulate(&model, &x0, steps, out.as_deref()),
        Command::FixedPoints { model, seeds, json } => commands::cmd_fixed_points(&model, seeds, json),
        Command::Report { model, out, resolution, force, timings } => {
            commands::cmd_report(&model, out.as_deref(), resolution, force, timings)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {:#}", e);
            exit_code_for(&e)
        }
    }
}
