//! `fracstep` command-line experiment runner.
//!
//! Exit codes: 0 success, 2 validation failure, 3 property violation,
//! 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::Failure;

#[derive(Parser)]
#[command(name = "fracstep", version, about = "Discrete Caputo kernels, Gronwall bounds and subdiffusion runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel tables.
    Kernels {
        #[command(subcommand)]
        action: KernelsCommand,
    },
    /// Check A1/A2 on a kernel table and A3 on its mesh (JSON).
    Audit(AuditArgs),
    /// Randomised checks of the discrete Gronwall bounds.
    Gronwall {
        #[command(subcommand)]
        action: GronwallCommand,
    },
    /// Solve a single-mode or 1D finite-difference problem (CSV).
    Solve(SolveArgs),
    /// Halving study of a single-mode problem (CSV plus aligned table).
    Converge(ConvergeArgs),
    /// Evaluate the Mittag-Leffler function E_alpha(z) (CSV).
    Mlf(MlfArgs),
    /// Sum-of-exponentials approximations.
    Soe {
        #[command(subcommand)]
        action: SoeCommand,
    },
}

#[derive(Subcommand)]
enum KernelsCommand {
    /// Write the kernel `A` or its complementary kernel `P` as `n,lag,value` CSV.
    Dump(DumpArgs),
}

#[derive(Subcommand)]
enum GronwallCommand {
    /// Draw sequences satisfying the hypotheses and check the bounds (JSON).
    Verify(GronwallArgs),
}

#[derive(Subcommand)]
enum SoeCommand {
    /// Build and certify an approximation of omega_{1-alpha} (JSON).
    Build(SoeArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DumpArgs {
    /// l1, fast-l1, alikhanov, bdf2 or bdf2-recombined.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Mesh spec: uniform:N,T | graded:N,gamma,T | random:N,rho,seed | file:PATH.
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// SOE tolerance for fast-l1.
    #[arg(long)]
    pub soe_eps: Option<f64>,
    /// `a` for the kernel, `p` for the complementary kernel.
    #[arg(long)]
    pub table: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with default values for any flag.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AuditArgs {
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub soe_eps: Option<f64>,
    /// Claimed A2 constant; defaults to the scheme's known value.
    #[arg(long)]
    pub pi_a: Option<f64>,
    /// Step-ratio bound for A3.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GronwallArgs {
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub soe_eps: Option<f64>,
    /// quadratic, linear or both.
    #[arg(long)]
    pub form: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Lambda, the bound on the sum of the coefficients; `<= 0` selects the simple branch.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// A2 constant used in the bound; defaults to the scheme's value or the audited estimate.
    #[arg(long)]
    pub pi_a: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SolveArgs {
    /// single-mode or fd.
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Eigenvalue of the single mode.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Initial value (single mode) or amplitude of the initial profile (fd).
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<f64>,
    /// zero, manufactured or oscillating (fd only).
    #[arg(long)]
    pub forcing: Option<String>,
    /// Exponent of the manufactured solution `u0 + t^sigma`.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Amplitude of the oscillating source.
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
    /// Interior grid points (fd).
    #[arg(long)]
    pub m: Option<usize>,
    /// Domain length (fd).
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub soe_eps: Option<f64>,
    /// direct or soe; soe is the default for fast-l1.
    #[arg(long)]
    pub history: Option<String>,
    /// A2 constant for the stability envelope (fd).
    #[arg(long)]
    pub pi_a: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub scheme: Option<String>,
    /// Mesh family; its step count is replaced by each entry of `--Ns`.
    #[arg(long)]
    pub mesh: Option<String>,
    /// Grading exponent of a graded family, or `auto` for (2 - alpha) / alpha.
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Relaxation solution `E_alpha(-lambda t^alpha)` instead of the smooth `1 + t^sigma`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub singular: Option<bool>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Comma-separated step counts.
    #[arg(long = "Ns", alias = "ns")]
    #[serde(rename = "Ns")]
    pub ns: Option<String>,
    #[arg(long)]
    pub soe_eps: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MlfArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Comma-separated arguments.
    #[arg(long, allow_hyphen_values = true)]
    pub z: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SoeArgs {
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Smallest argument of the certified window.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Node budget.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Kernels { action: KernelsCommand::Dump(a) } => commands::kernels_dump(a),
        Command::Audit(a) => commands::audit(a),
        Command::Gronwall { action: GronwallCommand::Verify(a) } => commands::gronwall_verify(a),
        Command::Solve(a) => commands::solve(a),
        Command::Converge(a) => commands::converge(a),
        Command::Mlf(a) => commands::mlf(a),
        Command::Soe { action: SoeCommand::Build(a) } => commands::soe_build(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fracstep: {f}");
            ExitCode::from(f.code)
        }
    }
}
