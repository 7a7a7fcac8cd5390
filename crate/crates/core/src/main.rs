use std::io;
use std::process::ExitCode;

use clap::Parser;
use gotcha::cli::{run, Cli, Io};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut out = io::stdout();
    match run(cli, &mut Io { input: &mut input, out: &mut out }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gotcha: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
