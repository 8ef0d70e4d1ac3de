use clap::{Parser, Subcommand};
use dnncov_cli::{cmd_plan, cmd_render, cmd_simulate, cmd_validate, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Plan, simulate and render layered coverage formations.
#[derive(Parser)]
#[command(name = "dnncov", version)]
struct Cli {
    /// Output directory, overriding the scenario's `output.dir`.
    #[arg(long, global = true, env = "DNNCOV_OUT_DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the graph and desired positions; write plan.json.
    Plan { scenario: PathBuf },
    /// Fly the team; write trajectory.csv and metrics.json.
    Simulate { scenario: PathBuf, plan: PathBuf },
    /// Draw SVG snapshots of a logged run.
    Render {
        trajectory: PathBuf,
        scenario: PathBuf,
        /// Snapshot times in seconds; defaults to the scenario's frame times.
        #[arg(long, num_args = 0.., value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Check a scenario without simulating it.
    Validate { scenario: PathBuf },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Plan { scenario } => {
            let outcome = cmd_plan(&scenario, out)?;
            print!("{}", outcome.summary);
            println!("wrote {}", outcome.path.display());
        }
        Command::Simulate { scenario, plan } => {
            let outcome = cmd_simulate(&scenario, &plan, out)?;
            print!("{}", outcome.report);
            println!("wrote {}", outcome.trajectory.display());
            println!("wrote {}", outcome.metrics_path.display());
        }
        Command::Render {
            trajectory,
            scenario,
            times,
        } => {
            for path in cmd_render(&trajectory, &scenario, times.as_deref(), out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Validate { scenario } => print!("{}", cmd_validate(&scenario)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
