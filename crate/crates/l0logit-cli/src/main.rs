//! `l0logit` binary: gen | screen | solve | bench.
//!
//! Exit codes: 0 success (including limit-reached-with-incumbent), 1 usage
//! error, 2 numerical or I/O failure.

use clap::error::ErrorKind;
use clap::Parser;
use l0logit_cli::commands::{self, Cli, Command};

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Gen(args) => commands::cmd_gen(args),
        Command::Screen(args) => commands::cmd_screen(args),
        Command::Solve(args) => commands::cmd_solve(args),
        Command::Bench(args) => commands::cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn main() {
    std::process::exit(run());
}
