use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rabi_thermal_cli::{execute, RunArgs};

/// Exit status when the run finished but raised invariant warnings; 2 is
/// taken by argument errors.
const WARNING_EXIT: u8 = 3;

/// Finite-temperature quantum Rabi dynamics.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one method, or all of them with `--method compare-all`.
    #[command(allow_negative_numbers = true)]
    Run(RunArgs),
}

fn main() -> ExitCode {
    let Cli {
        command: Command::Run(args),
    } = Cli::parse();
    let result = args.resolve().and_then(|cfg| Ok((execute(&cfg)?, cfg.allow_warnings)));
    match result {
        Ok((report, allow)) => {
            let mut out = std::io::stdout().lock();
            // A closed pipe (e.g. `| head`) is not an error for the run itself.
            out.write_all(report.stdout.as_bytes()).and_then(|()| out.flush()).ok();
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if report.warnings.is_empty() || allow {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "error: {} warning(s); pass --allow-warnings to accept",
                    report.warnings.len()
                );
                ExitCode::from(WARNING_EXIT)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
