use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use clpm_cli::{run, Cli, UsageError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(usage) = e.downcast_ref::<UsageError>() {
                let mut cmd = Cli::command();
                cmd.build();
                let sub = cmd
                    .find_subcommand_mut(cli.command.name())
                    .expect("subcommand exists");
                sub.error(clap::error::ErrorKind::MissingRequiredArgument, usage)
                    .exit();
            }
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
