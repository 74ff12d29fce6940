#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use config::{RunConfig, UsageError};

const USAGE: u8 = 1;
const DATA: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE),
            };
        }
    };
    let cfg = match RunConfig::resolve(&cli.command) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    if let Some(missing) = cfg.inputs.iter().find(|p| !p.exists()) {
        eprintln!("error: {} does not exist", missing.display());
        return ExitCode::from(DATA);
    }
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a, &cfg),
        Command::Project(a) => commands::project_scan(a, &cfg),
        Command::Normals(a) => commands::normals(a, &cfg),
        Command::Postprocess(a) => commands::postprocess(a, &cfg),
        Command::Eval(a) => commands::eval(a, &cfg),
        Command::OcclusionStats(a) => commands::occlusion(a, &cfg),
        Command::Bench(a) => commands::bench_cmd(a, &cfg),
        Command::Render(a) => commands::render(a, &cfg),
        Command::Selftest(a) => commands::selftest(a, &cfg),
    };
    match result {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Flag values rejected after parsing are usage errors; problems with file
/// contents, including out-of-range values inside them, are data errors.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.chain().any(|c| c.is::<UsageError>()) {
        USAGE
    } else {
        DATA
    }
}
