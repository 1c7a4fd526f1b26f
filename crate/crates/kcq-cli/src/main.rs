//! Command-line front end for the conditional-quantification pipeline.
//!
//! Exit codes: 0 success, 2 configuration/validation error, 3 compute error,
//! 4 degenerate likelihood.

mod commands;
mod config;
mod csvio;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kcq::Error;

#[derive(Parser)]
#[command(
    name = "kcq",
    version,
    about = "Conditional uncertainty quantification for nonlinear structural dynamics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the offline response database from a config file.
    Offline {
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. --set n=200 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Database output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Online stage: condition a database on a measurement record.
    Quantify {
        /// Database directory produced by `offline` or `mc-reference`.
        #[arg(long)]
        db: PathBuf,
        /// Measurement CSV with header `step,time,<sensor>,...`.
        #[arg(long)]
        measurements: PathBuf,
        /// Response label, e.g. disp_dof0 or disp_x3.
        #[arg(long)]
        qoi: String,
        /// Time steps to quantify at, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<usize>,
        /// Number of key conditions retained per step.
        #[arg(long = "n-k", default_value_t = 1)]
        n_k: usize,
        #[arg(long, default_value_t = 400)]
        grid_points: usize,
        /// Sensor noise standard deviations, one per sensor column.
        #[arg(long, value_delimiter = ',', required = true)]
        noise_sd: Vec<f64>,
        /// Sensor noise means (default zero).
        #[arg(long, value_delimiter = ',')]
        noise_mean: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a pseudo-random reference database for validation.
    McReference {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare non-conditional statistics of two databases at given steps.
    Compare {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        qoi: String,
        #[arg(long, value_delimiter = ',', required = true)]
        steps: Vec<usize>,
        #[arg(long, default_value_t = 400)]
        grid_points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a bundled end-to-end example (sdof or beam).
    Example {
        /// Example name: sdof or beam.
        name: String,
        /// full (complete sample counts) or desk (minutes on a laptop).
        #[arg(long, default_value = "desk")]
        scale: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::DegenerateLikelihood { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Offline { config, set, out } => commands::cmd_offline(config, set, out),
        Command::Quantify {
            db,
            measurements,
            qoi,
            steps,
            n_k,
            grid_points,
            noise_sd,
            noise_mean,
            out,
        } => commands::cmd_quantify(
            db,
            measurements,
            qoi,
            steps,
            *n_k,
            *grid_points,
            noise_sd.clone(),
            noise_mean.clone(),
            out,
        ),
        Command::McReference {
            config,
            set,
            n_mc,
            seed,
            out,
        } => commands::cmd_mc_reference(config, set, *n_mc, *seed, out),
        Command::Compare {
            db,
            reference,
            qoi,
            steps,
            grid_points,
            out,
        } => commands::cmd_compare(db, reference, qoi, steps, *grid_points, out),
        Command::Example { name, scale, out } => commands::cmd_example(name, scale, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
