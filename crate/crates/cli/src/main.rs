use std::process::ExitCode;

use clap::Parser;

use alloc_dichotomy_cli::{describe, execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.run_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.print_config {
        print!("{}", config.canonical_text());
        return ExitCode::SUCCESS;
    }
    let runs = match execute(&config) {
        Ok(runs) => runs,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut complete = true;
    for run in &runs {
        println!("{}", describe(run));
        for (seed, err) in run.result.failures() {
            eprintln!("seed {seed} ({}) failed: {err}", run.algorithm);
            complete = false;
        }
    }
    if complete {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
