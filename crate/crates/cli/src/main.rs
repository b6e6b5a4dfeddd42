mod args;
mod commands;
mod plot;

use std::process::ExitCode;

use clap::Parser;
use rfphate::{Error, ErrorClass};

use args::{Cli, Command};

/// Exit status per failure family. Usage errors exit with clap's 2.
fn exit_code(e: &Error) -> u8 {
    if matches!(e, Error::RowCountMismatch { .. }) {
        return 7;
    }
    match e.class() {
        ErrorClass::Io => 3,
        ErrorClass::Parse => 4,
        ErrorClass::Validation => 5,
        ErrorClass::Numeric => 6,
    }
}

fn tag(e: &Error) -> &'static str {
    if matches!(e, Error::RowCountMismatch { .. }) {
        return "rows";
    }
    match e.class() {
        ErrorClass::Io => "io",
        ErrorClass::Parse => "parse",
        ErrorClass::Validation => "validation",
        ErrorClass::Numeric => "numeric",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Embed(a) => commands::embed(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Noise(a) => commands::noise(a),
        Command::Importance(a) => commands::importance_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("rfphate: {} error: {msg}", tag(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
