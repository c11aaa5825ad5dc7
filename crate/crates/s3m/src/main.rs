use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use s3m::cli::Cli;
use s3m::commands::{run, Io};
use s3m::config::SEED_ENV;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let stderr = io::stderr();
    let (mut out, mut err) = (stdout.lock(), stderr.lock());
    let mut io = Io {
        env_seed: std::env::var(SEED_ENV).ok(),
        out: &mut out,
        err: &mut err,
    };
    match run(cli, &mut io) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::FAILURE
        }
    }
}
