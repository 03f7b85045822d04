//! `lyraline` batch front end.
//!
//! Exit codes: 0 success, 2 invalid input (bad flags, unreadable or
//! malformed files, schema violations), 3 degenerate numerics (zero-norm
//! streams, infeasible alignments).

mod args;
mod commands;
mod io;
mod pipeline;
mod report;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

fn exit_code(err: &anyhow::Error) -> u8 {
    let degenerate = err
        .chain()
        .filter_map(|e| e.downcast_ref::<lyraline::Error>())
        .any(lyraline::Error::is_degenerate);
    if degenerate {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LYRALINE_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
