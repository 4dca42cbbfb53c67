mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

/// Failures of a command, split by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, paths or configuration. Exit status 2.
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] salcnn::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use salcnn::Error;
        match self {
            CliError::Usage(_) | CliError::Core(Error::Config(_) | Error::Argument(_)) => 2,
            CliError::Core(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = args::Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
