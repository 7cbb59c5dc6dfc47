use clap::{Parser, Subcommand};
use laplab::cli::{execute, reproduce, Command, Outcome};
use laplab::config::RunConfig;
use laplab::{LabError, Result};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Limiting-absorption laboratory for discretized Schrodinger operators.
#[derive(Parser)]
#[command(name = "laplab", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to run.output_dir from the config.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Potential id overriding the config, e.g. inverse_power:eps=1,mu=1.
    #[arg(long, global = true)]
    potential: Option<String>,
    /// Worker threads (also LAPLAB_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the hypotheses on the potential and report the constants.
    Check,
    /// Limiting-absorption sweep over energies and shrinking mu.
    Lap {
        /// Run even if the hypotheses fail.
        #[arg(long)]
        force: bool,
    },
    /// Step through the regularized-resolvent argument for one test function.
    ProofTrace,
    /// Kato smoothness probe for a weight.
    Smooth {
        /// Override the hypothesis gate and the domination cap.
        #[arg(long)]
        force: bool,
        /// lmax, one, zero or scaled_lmax:<factor>.
        #[arg(long)]
        weight: Option<String>,
    },
    /// Compare banded solvers against dense linear algebra (small grids).
    OracleTest,
    /// Two-grid order check of the discrete commutators.
    CommutatorTest,
    /// Write the operators in COO form and the weights as CSV.
    Export,
    /// Rerun an archived output directory and compare byte for byte.
    Reproduce { dir: PathBuf },
}

fn run(cli: Cli) -> Result<Outcome> {
    let command = match cli.cmd {
        Cmd::Reproduce { dir } => return reproduce(&dir),
        Cmd::Check => Command::Check,
        Cmd::Lap { force } => Command::Lap { force },
        Cmd::ProofTrace => Command::ProofTrace,
        Cmd::Smooth { force, weight } => Command::Smooth { force, weight },
        Cmd::OracleTest => Command::OracleTest,
        Cmd::CommutatorTest => Command::CommutatorTest,
        Cmd::Export => Command::Export,
    };
    let path = cli.config.ok_or_else(|| LabError::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(p) = cli.potential {
        cfg.potential.id = p;
    }
    if cli.threads.is_some() {
        cfg.run.threads = cli.threads;
    }
    let out = cli.output.unwrap_or_else(|| PathBuf::from(&cfg.run.output_dir));
    execute(&command, &cfg, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(o) => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", o.summary);
            for f in &o.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("laplab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
