mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

/// Optimal transport and synthetic Ricci curvature probes on finite
/// metric-measure spaces.
#[derive(Parser)]
#[command(name = "ricci-transport", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Output {
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV artifact path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct Trials {
    /// `auto:COUNT` for seeded random bumps, or a JSON file of
    /// `[[mu0, mu1], ...]` measure tables.
    #[arg(long, default_value = "auto:20")]
    pub pairs: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..=10))]
    pub depth: u64,
    /// Skip the direct-plan geodesic and test the glued geodesic only.
    #[arg(long)]
    pub glued_only: bool,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum Gradient {
    Descending,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Exact W2 distance and optimal plan.
    W2 {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu0: PathBuf,
        #[arg(long)]
        mu1: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Glued midpoint geodesic at dyadic times.
    Geodesic {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu0: PathBuf,
        #[arg(long)]
        mu1: PathBuf,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..=10))]
        depth: u64,
        #[command(flatten)]
        output: Output,
    },
    /// U_nu(mu) for one or more entropy functions.
    Entropy {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long = "U", required = true)]
        u: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
    /// Membership of U in DC_N.
    DcCheck {
        #[arg(long = "U")]
        u: String,
        #[arg(long = "N", value_parser = commands::parse_dimension)]
        n: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Nonnegative N-Ricci probe over trial pairs.
    ProbeNricci {
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "N", value_parser = commands::parse_dimension)]
        n: f64,
        /// Family members; defaults to U_N, shannon and r^2.
        #[arg(long = "U")]
        u: Vec<String>,
        #[command(flatten)]
        trials: Trials,
        #[command(flatten)]
        output: Output,
    },
    /// inf-Ricci lower bound probe over trial pairs.
    ProbeInfRicci {
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "K", allow_hyphen_values = true)]
        k: f64,
        /// Family members; defaults to shannon.
        #[arg(long = "U")]
        u: Vec<String>,
        #[command(flatten)]
        trials: Trials,
        #[command(flatten)]
        output: Output,
    },
    /// Bishop-Gromov ball growth.
    BishopGromov {
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "N", value_parser = commands::parse_dimension)]
        n: f64,
        /// Center ids; every point when absent.
        #[arg(long, value_delimiter = ',')]
        centers: Vec<String>,
        /// Increasing radii; 16 half-level radii up to the diameter when absent.
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// HWI inequality against the reference measure.
    Hwi {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long = "U", default_value = "shannon")]
        u: String,
        #[arg(long, allow_hyphen_values = true)]
        lambda: f64,
        /// Also probe convexity along the geodesic to nu at this depth.
        #[arg(long, default_value_t = 0)]
        depth: u64,
        #[arg(long)]
        radius: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Log-Sobolev inequality.
    Lsi {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long = "K")]
        k: f64,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, value_enum, default_value = "descending")]
        gradient: Gradient,
        #[command(flatten)]
        output: Output,
    },
    /// Talagrand transport inequality.
    Talagrand {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long = "K")]
        k: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Poincare inequality.
    Poincare {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long = "K")]
        k: f64,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, value_enum, default_value = "descending")]
        gradient: Gradient,
        #[command(flatten)]
        output: Output,
    },
    /// Sobolev inequality for N > 2.
    Sobolev {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        f: PathBuf,
        #[arg(long = "N", value_parser = commands::parse_dimension)]
        n: f64,
        #[arg(long)]
        radius: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Bonnet-Myers diameter bound.
    BonnetMyers {
        #[arg(long)]
        space: PathBuf,
        #[arg(long = "N", value_parser = commands::parse_dimension)]
        n: f64,
        #[arg(long = "K")]
        k: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Mollify a measure and check the kernel invariants.
    Mollify {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        mu: PathBuf,
        #[arg(long)]
        delta: f64,
        /// Entropy functions for the contraction check.
        #[arg(long = "U", default_values = ["shannon"])]
        u: Vec<String>,
        #[command(flatten)]
        output: Output,
    },
    /// W2 distortion of a point map against its GH bound.
    GhDistort {
        #[arg(long)]
        source: PathBuf,
        /// Target space; with --stride the canonical coarsening is used instead.
        #[arg(long, requires = "map", conflicts_with = "stride")]
        target: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long, default_value = "auto:20")]
        pairs: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Quotient by a group of isometries.
    Quotient {
        #[arg(long)]
        space: PathBuf,
        /// Generator file `{id: image_id}`.
        #[arg(long)]
        generator: Vec<PathBuf>,
        /// Index rotation by this many points.
        #[arg(long)]
        rotation: Vec<usize>,
        #[arg(long, requires = "mu1")]
        mu0: Option<PathBuf>,
        #[arg(long, requires = "mu0")]
        mu1: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Curvature defects along a sequence converging to a limit space.
    Stability {
        #[arg(long)]
        limit: PathBuf,
        /// `SPACE:MAP`, in sequence order.
        #[arg(long, required = true)]
        member: Vec<String>,
        #[arg(long = "N", value_parser = commands::parse_dimension)]
        n: f64,
        #[arg(long = "U")]
        u: Vec<String>,
        #[arg(long, default_value_t = 10)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..=10))]
        depth: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Weighted line checks.
    #[command(subcommand)]
    Smooth1d(Smooth1d),
}

#[derive(Subcommand)]
enum Smooth1d {
    /// Ric_N over the grid.
    Ricci {
        #[arg(long)]
        line: PathBuf,
        #[arg(long = "N", value_parser = commands::parse_dimension)]
        n: f64,
        /// Lower bound to test against.
        #[arg(long = "K", default_value_t = 0.0, allow_hyphen_values = true)]
        k: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Entropy along the monotone-rearrangement geodesic.
    Geodesic {
        #[arg(long)]
        line: PathBuf,
        #[arg(long)]
        rho0: PathBuf,
        #[arg(long)]
        rho1: PathBuf,
        #[arg(long = "U", default_value = "shannon")]
        u: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 16)]
        steps: usize,
        #[arg(long, default_value_t = 1e-4)]
        budget: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Second variation formula against a finite difference.
    Hessian {
        #[arg(long)]
        line: PathBuf,
        #[arg(long = "U", default_value = "shannon")]
        u: String,
        #[arg(long)]
        phi: PathBuf,
        /// Density file; the reference density when absent.
        #[arg(long)]
        rho: Option<PathBuf>,
        #[arg(long)]
        step: Option<f64>,
        #[command(flatten)]
        output: Output,
    },
    /// Angle between two geodesics issuing from mu.
    Angle {
        #[arg(long)]
        line: PathBuf,
        #[arg(long)]
        phi0: PathBuf,
        #[arg(long)]
        phi1: PathBuf,
        #[arg(long)]
        mu: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("RICCI_TRANSPORT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().with_context(|| format!("RICCI_TRANSPORT_THREADS = {value:?}"))?;
    if threads == 0 {
        bail!("RICCI_TRANSPORT_THREADS must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn dispatch(command: Command) -> Result<(&'static str, report::Outcome, Output)> {
    use commands as c;
    Ok(match command {
        Command::W2 { space, mu0, mu1, output } => ("w2", c::w2(&space, &mu0, &mu1)?, output),
        Command::Geodesic { space, mu0, mu1, depth, output } => {
            ("geodesic", c::geodesic(&space, &mu0, &mu1, depth as usize)?, output)
        }
        Command::Entropy { space, mu, u, output } => ("entropy", c::entropy(&space, &mu, &u)?, output),
        Command::DcCheck { u, n, output } => ("dc-check", c::dc_check(&u, n)?, output),
        Command::ProbeNricci { space, n, u, trials, output } => {
            ("probe-nricci", c::probe_nricci(&space, n, &u, &trials)?, output)
        }
        Command::ProbeInfRicci { space, k, u, trials, output } => {
            ("probe-inf-ricci", c::probe_inf_ricci(&space, k, &u, &trials)?, output)
        }
        Command::BishopGromov { space, n, centers, radii, output } => {
            ("bishop-gromov", c::bishop_gromov(&space, n, &centers, &radii)?, output)
        }
        Command::Hwi { space, mu, u, lambda, depth, radius, output } => {
            ("hwi", c::hwi(&space, &mu, &u, lambda, depth as usize, radius)?, output)
        }
        Command::Lsi { space, f, k, radius, gradient, output } => {
            ("lsi", c::lsi(&space, &f, k, radius, gradient)?, output)
        }
        Command::Talagrand { space, mu, k, output } => ("talagrand", c::talagrand(&space, &mu, k)?, output),
        Command::Poincare { space, f, k, radius, gradient, output } => {
            ("poincare", c::poincare(&space, &f, k, radius, gradient)?, output)
        }
        Command::Sobolev { space, f, n, radius, output } => ("sobolev", c::sobolev(&space, &f, n, radius)?, output),
        Command::BonnetMyers { space, n, k, output } => ("bonnet-myers", c::bonnet_myers(&space, n, k)?, output),
        Command::Mollify { space, mu, delta, u, output } => ("mollify", c::mollify(&space, &mu, delta, &u)?, output),
        Command::GhDistort { source, target, map, stride, pairs, seed, output } => {
            ("gh-distort", c::gh_distort(&source, target.as_deref(), map.as_deref(), stride, &pairs, seed)?, output)
        }
        Command::Quotient { space, generator, rotation, mu0, mu1, output } => {
            ("quotient", c::quotient(&space, &generator, &rotation, mu0.as_deref().zip(mu1.as_deref()))?, output)
        }
        Command::Stability { limit, member, n, u, pairs, seed, depth, output } => {
            ("stability", c::stability(&limit, &member, n, &u, pairs, seed, depth as usize)?, output)
        }
        Command::Smooth1d(verb) => match verb {
            Smooth1d::Ricci { line, n, k, output } => ("smooth1d ricci", c::line_ricci(&line, n, k)?, output),
            Smooth1d::Geodesic { line, rho0, rho1, u, lambda, steps, budget, output } => {
                ("smooth1d geodesic", c::line_geodesic(&line, &rho0, &rho1, &u, lambda, steps, budget)?, output)
            }
            Smooth1d::Hessian { line, u, phi, rho, step, output } => {
                ("smooth1d hessian", c::line_hessian(&line, &u, &phi, rho.as_deref(), step)?, output)
            }
            Smooth1d::Angle { line, phi0, phi1, mu, output } => {
                ("smooth1d angle", c::line_angle(&line, &phi0, &phi1, mu.as_deref())?, output)
            }
        },
    })
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let (name, outcome, output) = dispatch(cli.command)?;
    report::emit(name, &outcome, output.out.as_deref(), output.csv.as_ref())?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
