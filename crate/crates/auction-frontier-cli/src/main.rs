use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use auction_frontier_cli::args::Cli;
use auction_frontier_cli::output::OUT_DIR_ENV;
use auction_frontier_cli::CliError;
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = cli.run_config()?;
    let out_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let written = auction_frontier_cli::run(&cfg, out_dir.as_deref()).with_context(|| format!("running {}", cfg.command.name()))?;
    if let Some(p) = written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}
