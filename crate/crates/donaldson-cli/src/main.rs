mod commands;
mod config;

use clap::{Parser, Subcommand};

/// Solver for the Donaldson equation on flat tori: Dirichlet solves,
/// epsilon-geodesics in the space of volume forms, and verification suites.
#[derive(Parser)]
#[command(name = "donaldson", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve Q(D^2 Phi) = f for the configured problem and verify the result.
    Solve {
        /// Run configuration (TOML).
        #[arg(long)]
        config: std::path::PathBuf,
        /// Output directory; overrides the config's output block.
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Solve the perturbed geodesic equation Q(D^2 Phi) = eps.
    Geodesic {
        /// Run configuration (TOML); the rhs block is ignored.
        #[arg(long)]
        config: std::path::PathBuf,
        /// Single perturbation parameter.
        #[arg(long)]
        eps: Option<f64>,
        /// Comma-separated decreasing list of perturbation parameters.
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<std::path::PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        /// Suite name: `lemmas` or `solution`.
        #[arg(long)]
        suite: String,
        /// Trials per randomized suite (lemmas only).
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// RNG seed for the randomized suites.
        #[arg(long)]
        seed: Option<u64>,
        /// Solution dump (DNFD) for `--suite solution`.
        dump: Option<std::path::PathBuf>,
        /// Run configuration the dump was produced from.
        config_path: Option<std::path::PathBuf>,
    },
}

/// Exit codes: 0 success, 1 solver failure, 2 solve ok but verification
/// failed, 64 configuration/usage error.
fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve { config, out } => commands::cmd_solve(&config, out.as_deref()),
        Command::Geodesic { config, eps, eps_list, out } => {
            commands::cmd_geodesic(&config, eps, eps_list, out.as_deref())
        }
        Command::Verify { suite, trials, seed, dump, config_path } => {
            commands::cmd_verify(&suite, trials, seed, dump.as_deref(), config_path.as_deref())
        }
    };
    std::process::exit(code);
}
