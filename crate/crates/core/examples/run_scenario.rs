//! Run a bundled scenario through the command layer without spawning the
//! binary. Usage: `cargo run --example run_scenario -- [scenario.json] [command]`.

use clap::Parser;
use hjreduce::cli::{execute, load_scenario, Cli};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/calogero.json").into());
    let command = args.next().unwrap_or_else(|| "verify".into());
    let cli = Cli::try_parse_from(["hjreduce", command.as_str(), path.as_str()])?;
    let prepared = load_scenario(std::path::Path::new(&path))?.prepare()?;
    let outcome = execute(&cli.command, &prepared)?;
    println!("{}", serde_json::to_string_pretty(&outcome.report)?);
    println!("pass: {}", outcome.pass);
    Ok(())
}
