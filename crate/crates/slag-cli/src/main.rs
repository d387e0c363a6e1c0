//! `slag`: command-line front end for the split SLAG toolkit.
//!
//! Exit codes: 0 when every check passes, 1 when a mathematical predicate
//! fails (the report carries a witness), 2 for input or usage errors.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use io::{CliError, Format};

#[derive(Parser, Debug)]
#[command(
    name = "slag",
    version,
    about = "Split special Lagrangian checks over the double numbers"
)]
struct Cli {
    /// Output format: a JSON report, or CSV plot data.
    #[arg(long, value_enum, default_value = "json", global = true)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Absolute tolerance for predicates.
    #[arg(long, env = "SLAG_TOL", default_value_t = slag_core::DEFAULT_TOL, global = true)]
    tol: f64,
    /// Worker threads for node and sample parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PictureArg {
    X,
    Null,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Legendre,
    Printed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PhaseFixture {
    Hyperbola,
    Flat,
    Timelike,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Predicates, dz and phase of one plane.
    Plane {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Canonical angles of a plane, or a seeded construct-then-recover sweep.
    Canonical {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Graph predicates for `y = Ax` or `v = Bu`, or the odd-symmetric-function sweep.
    GraphTest {
        #[arg(long, value_enum, default_value = "x")]
        picture: PictureArg,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Number of random symmetric matrices for the sweep.
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long, default_value_t = 6)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cayley transform of an x-picture graph, or the seeded equivalence sweep.
    Cayley {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long, default_value_t = 5)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Seeded random space-like positive planes against `Re dz ≥ 1`.
    SampleMealy {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Slack in the inequality and the equality band.
        #[arg(long, default_value_t = 1e-9)]
        eps: f64,
    },
    /// Split SLAG residual of a potential on a grid over its box.
    Residual {
        #[arg(long, value_enum)]
        picture: PictureArg,
        #[arg(long)]
        potential: PathBuf,
        /// Nodes per axis.
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
    /// Annulus volume and the perturbation family `g + εη`.
    VolumeExp {
        #[arg(long)]
        g: Option<PathBuf>,
        #[arg(long)]
        eta: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.025, 0.05, 0.1])]
        eps: Vec<f64>,
        /// Intervals per axis for the perturbation family (even).
        #[arg(long, default_value_t = 60)]
        grid: usize,
        /// Intervals per axis on the annulus (even).
        #[arg(long, default_value_t = 200)]
        annulus_grid: usize,
    },
    /// Optimal transport: 1-D rearrangement, discrete matching, or the graph check.
    Transport {
        #[command(subcommand)]
        mode: Option<TransportMode>,
    },
    /// Holomorphic curves in `C²` carried to split SLAG surfaces in `D²`.
    Holo2d {
        #[command(subcommand)]
        mode: Option<Holo2dMode>,
    },
    /// Deformation residuals with the refinement table.
    Deform {
        #[arg(long)]
        g: Option<PathBuf>,
        #[arg(long)]
        gdot: Option<PathBuf>,
        /// Intervals per axis on the coarse grid; the fine grid halves the spacing.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long = "box", value_delimiter = ',', default_values_t = [0.5, 1.5])]
        bounds: Vec<f64>,
    },
    /// Phase gradient against mean curvature on explicit surfaces.
    PhaseGrad {
        #[arg(long, value_enum)]
        fixture: Option<PhaseFixture>,
        /// Intervals along the first parameter on the coarsest level.
        #[arg(long, default_value_t = 12)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Exterior algebra checks: the two `dz` routes, or the Ricci-flat conditions.
    FormsCheck {
        #[command(subcommand)]
        mode: Option<FormsMode>,
    },
    /// `Δφ + det Hess φ` for twisted normal bundle potentials.
    Appc {
        #[arg(long)]
        u: Option<PathBuf>,
        #[arg(long)]
        h: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        grid: usize,
    },
    /// The singular example with root-found `k`.
    Pogorelov {
        #[arg(long)]
        k: Option<f64>,
        #[arg(long, value_enum, default_value = "legendre")]
        variant: VariantArg,
        /// Nodes per axis in the `v`-plane.
        #[arg(long, default_value_t = 40)]
        grid: usize,
        /// Bound on the largest `|Im dz|`.
        #[arg(long, default_value_t = 1e-6)]
        max_residual: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum TransportMode {
    /// Monotone rearrangement between two sampled densities.
    #[command(name = "1d")]
    OneD {
        #[arg(long)]
        source: Option<PathBuf>,
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Exact matching of point clouds, or a seeded sweep against exhaustive search.
    Discrete {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        sweep: Option<usize>,
        #[arg(long, default_value_t = 8)]
        max_n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The graph of `∇g` against `Φ = ρ du·e + ρ̃ dv·ē` with unit densities.
    Kmw {
        #[arg(long)]
        g: Option<PathBuf>,
        #[arg(long, default_value_t = 11)]
        grid: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum Holo2dMode {
    /// The coordinate change and the form identity.
    Identity,
    /// A polynomial curve from JSON, or the quarter-square curve.
    Curve {
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Complex lines against graph tests on the slope lattice `a, b = −1.3 + 0.37·i`.
    Plane {
        #[arg(long, default_value_t = 8)]
        lattice: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum FormsMode {
    /// `dz` by determinant and by expansion on seeded random bases.
    Dz {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3])]
        n: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The product-of-curves data and an `ε`-perturbed `ω`.
    Ricci {
        #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-2, 1e-1])]
        eps: Vec<f64>,
    },
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Plane { .. } => "plane",
        Command::Canonical { .. } => "canonical",
        Command::GraphTest { .. } => "graph-test",
        Command::Cayley { .. } => "cayley",
        Command::SampleMealy { .. } => "sample-mealy",
        Command::Residual { .. } => "residual",
        Command::VolumeExp { .. } => "volume-exp",
        Command::Transport { .. } => "transport",
        Command::Holo2d { .. } => "holo2d",
        Command::Deform { .. } => "deform",
        Command::PhaseGrad { .. } => "phase-grad",
        Command::FormsCheck { .. } => "forms-check",
        Command::Appc { .. } => "appc",
        Command::Pogorelov { .. } => "pogorelov",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("slag: {e}");
            return ExitCode::from(2);
        }
    }
    if !(cli.tol >= 0.0) {
        eprintln!("slag: tolerance must be non-negative, got {}", cli.tol);
        return ExitCode::from(2);
    }
    let name = command_name(&cli.command);
    let outcome = match commands::dispatch(&cli.command, cli.tol) {
        Ok(o) => o,
        Err(CliError::Input(m)) => {
            eprintln!("slag {name}: {m}");
            return ExitCode::from(2);
        }
        Err(CliError::Math(e)) => {
            eprintln!("slag {name}: {e}");
            io::Outcome::new(false, serde_json::json!({ "error": e.to_string() }))
        }
    };
    let written = io::render(name, &outcome, cli.format).and_then(|b| io::emit(&b, &cli.out));
    if let Err(e) = written {
        eprintln!("slag {name}: {e}");
        return ExitCode::from(2);
    }
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
