//! `soliton`: eigenvalue counts, perturbation campaigns and diffusion-limit
//! checks for box potentials.
//!
//! Exit codes: 0 success, 2 a scientific check failed, 64 usage error,
//! 65 infeasible configuration, 74 I/O failure.

mod commands;
mod error;
mod output;
mod settings;

use clap::{Args, Parser, Subcommand};
use error::{CliError, EXIT_USAGE};
use settings::{EqArg, ModeArg, NoiseArg, Settings};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "soliton", version, about = "Soliton content of box potentials under random perturbations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Discrete eigenvalues and their counts.
    Spectrum(CommonArgs),
    /// First-order corrections against the direct re-solve, or creation at a critical point.
    Perturb(CommonArgs),
    /// Moments of the rapidly oscillating system along an epsilon ladder.
    Converge(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long, value_enum)]
    eq: Option<EqArg>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated noise amplitudes for the scaling fits.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    sigma_ladder: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated, strictly decreasing epsilon ladder.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    paths: Option<usize>,
    /// Grid steps on [0, R] for the limit system.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    noise: Option<NoiseArg>,
    #[arg(long)]
    zeta_re: Option<f64>,
    #[arg(long)]
    zeta_im: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// JSON config file, run manifest or JSON summary.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> Result<Settings, CliError> {
        let flags = Settings {
            eq: self.eq,
            q: self.q,
            r: self.r,
            sigma: self.sigma,
            sigma_ladder: self.sigma_ladder.clone(),
            alpha: self.alpha,
            epsilon: self.epsilon.clone(),
            paths: self.paths,
            steps: self.steps,
            seed: self.seed,
            tol: self.tol,
            mode: self.mode,
            noise: self.noise,
            zeta_re: self.zeta_re,
            zeta_im: self.zeta_im,
        };
        let file = match &self.config {
            Some(p) => Settings::from_file(p)?,
            None => Settings::default(),
        };
        Ok(file.overlay(flags))
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Spectrum(a) => commands::spectrum(&a.settings()?, &a.out),
        Command::Perturb(a) => commands::perturb(&a.settings()?, &a.out),
        Command::Converge(a) => commands::converge(&a.settings()?, &a.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(error::EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("soliton: {e}");
            e.exit_code()
        }
    }
}
