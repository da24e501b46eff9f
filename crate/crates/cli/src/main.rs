// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::UsageError;

fn main() -> ExitCode {
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for invalid input, 2 for failures while running.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(err) = cause.downcast_ref::<syncpersist::Error>() {
            use syncpersist::Error::*;
            return match err {
                InvalidParameter(_)
                | InvalidGraph(_)
                | Parse(_)
                | NotSymmetric(_)
                | Lambda2Undefined
                | AlphaBelowThreshold(_) => 1,
                _ => 2,
            };
        }
    }
    2
}
