use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod manifest;

use args::{Cli, Command};

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or invalid configuration: exit 2.
    Usage(String),
    /// Anything that goes wrong while computing or writing results: exit 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<wavefront::error::Error> for Failure {
    fn from(e: wavefront::error::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(1);
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    let result = pool.install(|| match &cli.command {
        Command::ValiditySweep(a) => commands::validity_sweep(a, &argv),
        Command::Bench(a) => commands::bench(a, &argv),
        Command::Estimate(a) => commands::estimate(a),
        Command::Boundaries(a) => commands::boundaries(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
