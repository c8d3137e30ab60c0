use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rgcluster_cli::{execute, Command, Overrides};

#[derive(Parser)]
#[command(
    name = "rgcluster",
    version,
    about = "Block-spin renormalization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override `caps.p_max` (largest cluster order).
    #[arg(long, global = true)]
    p_max: Option<usize>,

    /// Override `caps.n_max` (largest link count).
    #[arg(long, global = true)]
    n_max: Option<usize>,

    /// Override `caps.q_cap` (largest polymer support).
    #[arg(long, global = true)]
    q_cap: Option<usize>,

    /// Direction file for `linearize`.
    #[arg(long, global = true)]
    direction: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Check the kernel axioms exhaustively.
    ValidateKernel,
    /// Brute-force J', W and the Jacobian.
    Exact,
    /// Polymer/cluster expansion with per-order residuals.
    Expand,
    /// Kotecky-Preiss certificate.
    KpCheck,
    /// Closed-form bounds report.
    Bounds,
    /// Jacobian entries grouped by image distance.
    BandProfile,
    /// Apply the linearization to a direction and compare with its majorant.
    Linearize,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::ValidateKernel => Command::ValidateKernel,
            Sub::Exact => Command::Exact,
            Sub::Expand => Command::Expand,
            Sub::KpCheck => Command::KpCheck,
            Sub::Bounds => Command::Bounds,
            Sub::BandProfile => Command::BandProfile,
            Sub::Linearize => Command::Linearize,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Some(config) = cli.config.as_deref() else {
        eprintln!("error: --config is required");
        return ExitCode::from(2);
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let overrides = Overrides {
        p_max: cli.p_max,
        n_max: cli.n_max,
        q_cap: cli.q_cap,
    };
    match execute(
        cli.command.into(),
        config,
        cli.out.as_deref(),
        overrides,
        cli.direction.as_deref(),
    ) {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
