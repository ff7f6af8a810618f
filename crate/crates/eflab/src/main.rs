use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use eflab::{Command, RunError, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "eflab", version, about = "Radial solutions of coupled Lane-Emden systems in Fowler variables")]
struct Cli {
    command: Command,
    /// Scenario config (JSON), or a manifest from an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random initial states; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<eflab::Report, RunError> {
    let cfg = ScenarioConfig::from_file(&cli.config)?.resolve(cli.command, cli.out, cli.seed)?;
    eflab::run(&cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(report)) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", report.summary);
            ExitCode::SUCCESS
        }
        Ok(Err(e)) => {
            eprintln!("eflab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("eflab: internal error (panic)");
            ExitCode::from(2)
        }
    }
}
