//! `dstab`: block D-stability analysis and decentralized integral control tools.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes shared by all commands.
pub mod exit {
    pub const OK: u8 = 0;
    pub const INPUT: u8 = 1;
    pub const FALSIFIED: u8 = 2;
    pub const UNBOUNDED: u8 = 3;
    pub const DIVERGED: u8 = 4;
}

#[derive(Parser, Debug)]
#[command(
    name = "dstab",
    version,
    about = "Block D-stability and low-gain decentralized integral control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sufficient conditions and sampled block D-stability of a matrix.
    Analyze(AnalyzeArgs),
    /// Probe uniform boundedness of ‖P_D D‖ along scaling rays.
    Probe(ProbeArgs),
    /// DC gains of a plant, and -Gu K with its D-stability verdict when K is given.
    Dcgain(DcgainArgs),
    /// Upper tuning gain ε* over all loop configurations.
    EpsStar(EpsStarArgs),
    /// Simulate the closed loop under a connection schedule.
    Simulate(SimulateArgs),
    /// Decompose a power-law scaling family into permutation, bounded and ordered parts.
    Decompose(DecomposeArgs),
    /// Sample D-stability of random perturbations A + B with ‖B‖ ≤ mu.
    Perturb(PerturbArgs),
    /// D-stability and boundedness of a principal submatrix and its Schur complement.
    Inherit(InheritArgs),
}

#[derive(Args, Debug, Clone)]
struct OutputArg {
    /// Write the JSON result here instead of stdout.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SamplingArgs {
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum NormArg {
    Spectral,
    One,
}

#[derive(Args, Debug, Clone)]
struct ProbeFlags {
    #[arg(long, default_value_t = 64)]
    directions: usize,
    #[arg(long, default_value_t = 14.0)]
    tmax: f64,
    #[arg(long, default_value_t = 56)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampling budget for the D-stability pre-check.
    #[arg(long, default_value_t = 2000)]
    budget: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Tail slope of ln‖P_D D‖ above which growth counts as unbounded.
    #[arg(long, default_value_t = 0.1)]
    slope_tol: f64,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[command(flatten)]
    probe: ProbeFlags,
    #[arg(long, value_enum, default_value_t = NormArg::Spectral)]
    norm: NormArg,
    /// Lyapunov right-hand side Q (`identity` or a matrix file).
    #[arg(long, default_value = "identity")]
    q: String,
    /// Include the per-ray value tables.
    #[arg(long)]
    rays: bool,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug)]
struct DcgainArgs {
    #[arg(long)]
    plant: PathBuf,
    #[arg(long = "K")]
    k: Option<PathBuf>,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug)]
struct EpsStarArgs {
    #[arg(long)]
    plant: PathBuf,
    #[arg(long = "K")]
    k: PathBuf,
    /// `identity` or a matrix file (n x n).
    #[arg(long = "Qf", default_value = "identity")]
    qf: String,
    /// `identity` or a matrix file (p x p); restricted to each configuration's outputs.
    #[arg(long = "Qs", default_value = "identity")]
    qs: String,
    #[command(flatten)]
    probe: ProbeFlags,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    family: PathBuf,
    /// Sample points for the reconstruction and ordering checks.
    #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 100.0, 1000.0, 10000.0])]
    k: Vec<f64>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug)]
struct PerturbArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[command(flatten)]
    sampling: SamplingArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args, Debug)]
struct InheritArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// One-based block indices, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    alpha: Vec<usize>,
    #[command(flatten)]
    probe: ProbeFlags,
    #[command(flatten)]
    out: OutputArg,
}

fn configure_threads() {
    if let Ok(v) = std::env::var("DSTAB_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            Ok(_) => {}
            Err(_) => eprintln!("warning: ignoring DSTAB_THREADS={v:?}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match cli.command {
        Command::Analyze(a) => commands::analyze(a),
        Command::Probe(a) => commands::probe(a),
        Command::Dcgain(a) => commands::dcgain(a),
        Command::EpsStar(a) => commands::eps_star(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Perturb(a) => commands::perturb(a),
        Command::Inherit(a) => commands::inherit(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::INPUT)
        }
    }
}
