//! Command-line surface for the benchmark: dataset generation, training,
//! dataset transforms, evaluation and the one-command reproduction
//! pipeline. Every command is a pure function of its flags, config file
//! and input files.

mod commands;
mod flags;
mod repro;

use std::process::ExitCode;

/// Errors mapped onto the process exit codes: usage 1, format/IO 2,
/// acceptance-check failure 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(rrcb::Error),
    Check(String),
}

impl From<rrcb::Error> for CliError {
    fn from(e: rrcb::Error) -> CliError {
        CliError::Data(e)
    }
}

pub type CliResult = Result<(), CliError>;

const USAGE: &str = "\
rrcb - tri-fingertip cube manipulation benchmark

usage: rrcb <command> [--flag value ...]

commands:
  gen-data   --task push|lift --quality expert|mixed --episodes N --out PATH
             [--seed S] [--config PATH]
  train      --algo bc|crr|awac|cql|iql|td3bc --dataset PATH --out PATH
             [--seed S] [--config PATH] [--history H]
  filter     --dataset PATH --out PATH [--init-frac F] [--seed S] [--config PATH]
  augment    --dataset PATH --out PATH --k 1|2|3
  stack      --dataset PATH --out PATH --history H
  evaluate   --policies LIST --combos LIST --out DIR [--robots N] [--goals N]
             [--seed S] [--jobs N] [--config PATH]
  repro      --out DIR [--scale tiny|small|default] [--seed S] [--check]
             [--config PATH]

The RRCB_SEED environment variable supplies the seed when --seed is absent.
Exit codes: 0 success, 1 usage, 2 format/IO, 3 acceptance-check failure.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}\n\n{USAGE}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(CliError::Check(msg)) => {
            eprintln!("acceptance check failed: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(args: &[String]) -> CliResult {
    let Some(cmd) = args.first() else {
        return Err(CliError::Usage("missing command".into()));
    };
    let rest = &args[1..];
    match cmd.as_str() {
        "gen-data" => commands::gen_data(rest),
        "train" => commands::train(rest),
        "filter" => commands::filter(rest),
        "augment" => commands::augment(rest),
        "stack" => commands::stack(rest),
        "evaluate" => commands::evaluate(rest),
        "repro" => repro::run(rest),
        "help" | "--help" | "-h" => {
            println!("{USAGE}");
            Ok(())
        }
        other => Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
}
