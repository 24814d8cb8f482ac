use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use herglotz::report::{self, CommandError, ExitStatus, RunArtifacts, XSource};

/// Delayed higher-order Herglotz problems from JSON problem files.
#[derive(Parser, Debug)]
#[command(name = "herglotz", version, about)]
struct Cli {
    /// Directory for CSV tables, summary.txt and plot.gp.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the file against the schema and the problem hypotheses.
    Validate { file: PathBuf },
    /// Integrate z along a given x.
    Simulate {
        file: PathBuf,
        /// CSV path, or `expr:<e1>;<e2>…` in t; defaults to x ≡ x(a).
        #[arg(long)]
        x_from: Option<XSource>,
        /// Also integrate by the method of steps and compare.
        #[arg(long)]
        check_reduction: bool,
    },
    /// Find an extremal by direct transcription.
    Solve { file: PathBuf },
    /// Euler–Lagrange and transversality residuals along a given x.
    ElCheck {
        file: PathBuf,
        #[arg(long)]
        x_from: XSource,
    },
    /// Semi-invariance residuals EQ1/EQ2 for the file's group.
    Invariance {
        file: PathBuf,
        #[arg(long)]
        x_from: Option<XSource>,
    },
    /// Noether currents; runs the solver when no trajectory is given.
    Currents {
        file: PathBuf,
        #[arg(long)]
        x_from: Option<XSource>,
    },
}

fn run(cli: &Cli) -> Result<RunArtifacts, CommandError> {
    match &cli.command {
        Command::Validate { file } => Ok(report::cmd_validate(&report::load_path(file)?)),
        Command::Simulate {
            file,
            x_from,
            check_reduction,
        } => report::cmd_simulate(&report::load_path(file)?, x_from.as_ref(), *check_reduction),
        Command::Solve { file } => report::cmd_solve(&report::load_path(file)?),
        Command::ElCheck { file, x_from } => {
            report::cmd_el_check(&report::load_path(file)?, Some(x_from))
        }
        Command::Invariance { file, x_from } => {
            report::cmd_invariance(&report::load_path(file)?, x_from.as_ref())
        }
        Command::Currents { file, x_from } => {
            report::cmd_currents(&report::load_path(file)?, x_from.as_ref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() {
                ExitStatus::Usage.code()
            } else {
                0
            };
            return ExitCode::from(code as u8);
        }
    };
    if let Some(threads) = std::env::var("HERGLOTZ_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("warning: HERGLOTZ_THREADS ignored: {e}");
        }
    }
    match run(&cli) {
        Ok(artifacts) => {
            print!("{}", artifacts.summary);
            if let Some(dir) = &cli.out {
                if let Err(e) = artifacts.write_to(dir) {
                    eprintln!("error: cannot write {}: {e}", dir.display());
                    return ExitCode::from(ExitStatus::Usage.code() as u8);
                }
            }
            ExitCode::from(artifacts.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status.code() as u8)
        }
    }
}
