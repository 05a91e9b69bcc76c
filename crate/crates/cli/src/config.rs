use anyhow::{ensure, Result};
use clap::ValueEnum;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Settings shared by every subcommand.
#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    pub tol: f64,
    pub fd_step: f64,
    pub seed: u64,
    pub output_format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { tol: 1e-9, fd_step: 1e-5, seed: 0, output_format: OutputFormat::Json }
    }
}

impl RunConfig {
    pub fn new(tol: f64, fd_step: f64, seed: u64, output_format: OutputFormat) -> Result<Self> {
        ensure!(tol.is_finite() && tol > 0.0, "--tol must be positive, got {tol}");
        ensure!(fd_step.is_finite() && fd_step > 0.0, "--fd-step must be positive, got {fd_step}");
        Ok(Self { tol, fd_step, seed, output_format })
    }
}
