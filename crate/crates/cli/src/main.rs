use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evr_cli::{execute, Command, Options, Profile};

/// Economically viable randomness: protocol runs, lemma suites and CPNE certification.
#[derive(Parser)]
#[command(name = "evr", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario's rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the JSON output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run instances with n < 3 or outside the decentralization bound.
    #[arg(long, global = true)]
    allow_unsafe: bool,
    /// Overrides the scenario's group_profile.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Full protocol run; writes the chain trace.
    Run,
    /// Exhaustive coalition-proof equilibrium search.
    Certify,
    /// Checks each lemma's conclusion over its deviation family.
    Lemmas,
    /// Known-answer vectors for the sharing and VRF layers.
    Vectors,
    /// One distributed key generation, with any configured dealer faults.
    DkgDemo,
    /// VRF evaluation per round, direct and by threshold.
    VrfDemo,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = match cli.command {
        Cmd::Run => Command::Run,
        Cmd::Certify => Command::Certify,
        Cmd::Lemmas => Command::Lemmas,
        Cmd::Vectors => Command::Vectors,
        Cmd::DkgDemo => Command::DkgDemo,
        Cmd::VrfDemo => Command::VrfDemo,
    };
    let opts = Options { config: cli.config, seed: cli.seed, allow_unsafe: cli.allow_unsafe, profile: cli.profile };
    match execute(cmd, &opts) {
        Ok(report) => {
            let mut text = serde_json::to_string_pretty(&report.body).expect("serializes");
            text.push('\n');
            let written = match &cli.out {
                Some(path) => std::fs::write(path, text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(4);
            }
            eprintln!("{}", report.summary);
            if report.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("check failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
