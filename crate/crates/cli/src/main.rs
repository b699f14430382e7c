mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use mgnet::ErrorKind;

use args::{Cli, Command};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a, &argv),
        Command::Project(a) => commands::project(a, &argv),
        Command::Train(a) => commands::train_one(a, &argv),
        Command::Cv(a) => commands::cv(a, &argv),
        Command::Grid(a) => commands::grid(a, &argv),
        Command::Ablate(a) => commands::ablate(a, &argv),
        Command::ExportEmbeddings(a) => commands::export_embeddings(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.kind() == ErrorKind::Usage {
                eprintln!("For more information, try '--help'.");
            }
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            })
        }
    }
}
