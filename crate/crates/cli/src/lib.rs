//! Command implementations behind the `clustcv` binary.

pub mod args;
pub mod commands;
pub mod datasets;
pub mod output;
pub mod verify;

use std::io::Write;

use args::Cli;

/// Run a parsed command line, writing to `--output` or stdout.
pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n >= 1, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let text = commands::run(&cli.command, cli.format)?;
    match &cli.output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
