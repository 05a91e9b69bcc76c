//! `kahlerkit`: every verification as a subcommand, reports on stdout.
//!
//! Exit codes: 0 pass, 1 verdict failed, 2 usage or input error.

mod commands;
mod config;
mod input;
mod suite;

use std::io::Write;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kahlerkit::cubics::CubicMetric;

use commands::{FlowArgs, GlueArgs, Report};
use config::{OutputFormat, RunConfig};

#[derive(Parser)]
#[command(name = "kahlerkit", version, about = "Numerical checks for momentum maps, gradient flows, Kähler gluing and binary cubics")]
struct Cli {
    /// Tolerance for pass/fail verdicts.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Finite-difference step.
    #[arg(long, global = true, default_value_t = 1e-5)]
    fd_step: f64,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Polar factorization g = k·exp(iξ) of an invertible matrix.
    Cartan {
        /// Matrix as nested [re, im] rows, or @file.
        #[arg(long)]
        matrix: String,
    },
    /// Momentum map of a linear representation at a point.
    Moment {
        #[arg(long, default_value = "su2")]
        rep: String,
        #[arg(long)]
        point: String,
    },
    /// Gradient flow of a momentum component.
    Flow {
        #[command(subcommand)]
        action: FlowCommand,
    },
    /// Orbital convexity certificate for a ball along one flow line.
    Convexity {
        #[command(flatten)]
        flow: FlowOpts,
        #[arg(long)]
        radius: f64,
        /// Ball centre; defaults to the origin.
        #[arg(long)]
        center: Option<String>,
    },
    /// Extension of an equivariant map to the complexified group.
    Extend {
        /// identity, discriminant-scale, or {"coefficients": [[re, im], ...]} (inline or @file).
        #[arg(long, default_value = "discriminant-scale")]
        map: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        /// Use the identity on C^n with the defining action instead of the cubics space.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Gluing of a potential to the flat one near the origin.
    Glue {
        #[command(subcommand)]
        action: GlueCommand,
    },
    /// Binary cubic forms under SL(2, C).
    Cubics {
        #[command(subcommand)]
        action: CubicsCommand,
    },
    /// Seeded battery over all modules.
    Suite {
        /// Scales the number of random configurations per check.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
}

#[derive(Args)]
struct FlowOpts {
    #[arg(long, default_value = "su2")]
    rep: String,
    /// Real coefficients of ξ in the representation's Lie basis.
    #[arg(long)]
    xi: String,
    #[arg(long)]
    point: String,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    tmin: f64,
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    tmax: f64,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
}

impl FlowOpts {
    fn args(&self) -> FlowArgs<'_> {
        FlowArgs {
            rep: &self.rep,
            xi: &self.xi,
            point: &self.point,
            tmin: self.tmin,
            tmax: self.tmax,
            samples: self.samples,
        }
    }
}

#[derive(Subcommand)]
enum FlowCommand {
    /// Samples of t, coordinates, phi and radius2.
    Trace {
        #[command(flatten)]
        flow: FlowOpts,
    },
    /// Checks that phi is nondecreasing with dphi/dt = |grad phi|^2.
    Monotonicity {
        #[command(flatten)]
        flow: FlowOpts,
    },
}

#[derive(Args)]
struct GlueOpts {
    /// flat, fs, or a radial profile as JSON (inline or @file).
    #[arg(long, default_value = "fs")]
    potential: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// c2 or bump.
    #[arg(long, default_value = "c2")]
    cutoff: String,
    #[arg(long, default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

impl GlueOpts {
    fn args(&self) -> GlueArgs<'_> {
        GlueArgs { potential: &self.potential, dim: self.dim, cutoff: &self.cutoff, grid: self.grid }
    }
}

#[derive(Subcommand)]
enum GlueCommand {
    /// Certificate for one λ.
    Verify {
        #[command(flatten)]
        glue: GlueOpts,
        #[arg(long)]
        lambda: f64,
        /// Write per-point minimum eigenvalues here as CSV.
        #[arg(long)]
        points_csv: Option<String>,
    },
    /// Largest admissible λ in a range, by bisection.
    Threshold {
        #[command(flatten)]
        glue: GlueOpts,
        #[arg(long, default_value_t = 0.01)]
        lambda_min: f64,
        #[arg(long, default_value_t = 0.5)]
        lambda_max: f64,
        #[arg(long, default_value_t = 12)]
        iterations: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Binomial,
    Monomial,
}

#[derive(Subcommand)]
enum CubicsCommand {
    /// Root multiplicities and factorization type.
    Classify {
        /// Coefficients of x³, x²y, xy², y³ as [re, im] pairs.
        #[arg(long)]
        form: String,
    },
    Stabilizer {
        #[arg(long)]
        form: String,
    },
    /// The order-three matrix fixing x²y + ε²y³.
    Aeps {
        /// Real number or [re, im].
        #[arg(long, allow_negative_numbers = true)]
        eps: String,
    },
    /// Two bundle points with a common image.
    SliceDemo {
        #[arg(long, allow_negative_numbers = true)]
        eps: String,
    },
    /// Orthogonal complement of the orbit tangent space.
    Complement {
        #[arg(long)]
        form: String,
        #[arg(long, value_enum, default_value_t = Metric::Binomial)]
        metric: Metric,
    },
}

fn run(cli: Cli) -> Result<Report> {
    let cfg = RunConfig::new(cli.tol, cli.fd_step, cli.seed, cli.output)?;
    let json_only = |name: &str| -> Result<()> {
        if cfg.output_format == OutputFormat::Csv {
            bail!("{name} has no CSV output");
        }
        Ok(())
    };
    match cli.command {
        Command::Cartan { matrix } => {
            json_only("cartan")?;
            commands::cartan(&cfg, &matrix)
        }
        Command::Moment { rep, point } => commands::moment(&cfg, &rep, &point),
        Command::Flow { action: FlowCommand::Trace { flow } } => commands::flow_trace(&cfg, &flow.args()),
        Command::Flow { action: FlowCommand::Monotonicity { flow } } => {
            json_only("flow monotonicity")?;
            commands::flow_monotonicity(&cfg, &flow.args())
        }
        Command::Convexity { flow, radius, center } => {
            json_only("convexity")?;
            commands::convexity(&flow.args(), radius, center.as_deref())
        }
        Command::Extend { map, g, point, radius, dim } => {
            json_only("extend")?;
            commands::extend(&cfg, &map, &g, &point, radius, dim)
        }
        Command::Glue { action } => {
            json_only("glue")?;
            match action {
                GlueCommand::Verify { glue, lambda, points_csv } => {
                    commands::glue_verify(&cfg, &glue.args(), lambda, glue.eps, points_csv.as_deref())
                }
                GlueCommand::Threshold { glue, lambda_min, lambda_max, iterations } => {
                    commands::glue_threshold(&glue.args(), glue.eps, (lambda_min, lambda_max), iterations)
                }
            }
        }
        Command::Cubics { action } => {
            json_only("cubics")?;
            match action {
                CubicsCommand::Classify { form } => commands::cubics_classify(&form),
                CubicsCommand::Stabilizer { form } => commands::cubics_stabilizer(&form),
                CubicsCommand::Aeps { eps } => commands::cubics_aeps(&cfg, &eps),
                CubicsCommand::SliceDemo { eps } => commands::cubics_slice_demo(&cfg, &eps),
                CubicsCommand::Complement { form, metric } => {
                    let metric = match metric {
                        Metric::Binomial => CubicMetric::Binomial,
                        Metric::Monomial => CubicMetric::Monomial,
                    };
                    commands::cubics_complement(&form, metric)
                }
            }
        }
        Command::Suite { scale, grid } => {
            if !(scale > 0.0 && scale.is_finite()) {
                bail!("--scale must be positive");
            }
            let report = suite::run(suite::SuiteOptions { seed: cfg.seed, scale, glue_grid: grid })?;
            match cfg.output_format {
                OutputFormat::Csv => Ok(Report { body: report.to_csv(), pass: report.pass() }),
                OutputFormat::Json => Report::json(&report, report.pass()),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(report.body.as_bytes()).is_err() {
                return ExitCode::from(2);
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
