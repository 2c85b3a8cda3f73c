//! `uwno`: dataset generation, training, evaluation, transform checks,
//! the spectral-bias demo and plotting.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "uwno", version, about = "U-Net enhanced wavelet neural operator toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Problem {
    Poisson,
    Advection,
    AdvectionSpaceTime,
    Burgers,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Test,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Line,
    Heatmap,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset container.
    GenData {
        #[arg(long, value_enum)]
        problem: Problem,
        /// Number of samples.
        #[arg(long)]
        n: usize,
        /// Grid points per axis (spatial points for space-time advection).
        #[arg(long)]
        resolution: usize,
        /// Falls back to UWNO_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Advection final time.
        #[arg(long, default_value_t = config::DEFAULT_T_FINAL)]
        t_final: f64,
        /// Burgers viscosity.
        #[arg(long, default_value_t = config::DEFAULT_NU)]
        nu: f64,
        /// Time points for space-time advection.
        #[arg(long, default_value_t = config::DEFAULT_NT)]
        nt: usize,
        /// Time step for space-time advection.
        #[arg(long, default_value_t = config::DEFAULT_DT)]
        dt: f64,
    },
    /// Train a model from a JSON run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides train.epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Print one line per epoch.
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitName::Test)]
        split: SplitName,
        /// Per-sample CSV; defaults to `<checkpoint>.<split>-errors.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to the batch size recorded in the checkpoint.
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Randomized roundtrip, energy and linearity checks of the DWT.
    DwtCheck {
        #[arg(long, default_value = "db6")]
        wavelet: String,
        /// Signal length; `HxW` runs the 2-D transform.
        #[arg(long, default_value = "1024")]
        length: String,
        #[arg(long, default_value_t = 8)]
        level: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    /// Fit sin 2x + sin 7x + sin 16x with a tanh FNN and track the residual spectrum.
    BiasDemo {
        #[arg(long, value_enum)]
        adaptive: OnOff,
        #[arg(long, default_value_t = 3000)]
        epochs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Threshold on the frequency-16 residual.
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
    },
    /// Render a CSV as an SVG line plot or heatmap.
    Plot {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = PlotKind::Line)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    uwno_core::alloc::retain_freed_memory();
    let result = match cli.command {
        Command::GenData {
            problem,
            n,
            resolution,
            seed,
            out,
            t_final,
            nu,
            nt,
            dt,
        } => commands::gen_data(problem, n, resolution, seed, &out, t_final, nu, nt, dt),
        Command::Train {
            config,
            seed,
            epochs,
            verbose,
        } => commands::train(&config, seed, epochs, verbose),
        Command::Eval {
            checkpoint,
            data,
            split,
            out,
            batch_size,
        } => commands::eval(&checkpoint, &data, split, out, batch_size),
        Command::DwtCheck {
            wavelet,
            length,
            level,
            trials,
            seed,
            tolerance,
        } => commands::dwt_check(&wavelet, &length, level, trials, seed, tolerance),
        Command::BiasDemo {
            adaptive,
            epochs,
            seed,
            out,
            threshold,
        } => commands::bias_demo(adaptive == OnOff::On, epochs, seed, &out, threshold),
        Command::Plot { data, kind, out, title } => commands::plot(&data, kind, &out, title),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
