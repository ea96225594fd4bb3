use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    let cli = woz::cli::Cli::parse();
    let default = if cli.verbose { "woz=debug" } else { "woz=warn" };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| default.into()))
        .with_writer(std::io::stderr)
        .init();

    let outcome = woz::cli::run(cli);
    print!("{}", outcome.stdout);
    let _ = std::io::stdout().flush();
    if !outcome.stderr.is_empty() {
        eprintln!("woz: {}", outcome.stderr.trim_end());
    }
    ExitCode::from(outcome.code as u8)
}
