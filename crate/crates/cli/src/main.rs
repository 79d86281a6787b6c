use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use harmneg_cli::{Artifacts, CliResult, ExperimentConfig, Mode, Runner};

#[derive(Parser)]
#[command(name = "harmneg", version, about = "Logarithmic negativity of disordered harmonic lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config entry, e.g. `--set ensemble.N=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact negativity plus both bounds for every realization.
    Negativity(Common),
    /// Product and h bounds only.
    Bounds(Common),
    /// Area-law sweep over box sides and N.
    Sweep(Common),
    /// Closed-form vs brute-force ensemble energies.
    Energy(Common),
    /// Eigencorrelator decay fit and area-law constant.
    DecayFit(Common),
    /// Analytic negativity against the truncated Fock oracle.
    OracleCheck(Common),
    /// Whatever `mode` the config selects.
    Run(Common),
}

fn execute(command: Command) -> CliResult<()> {
    let (common, mode) = match command {
        Command::Negativity(c) => (c, Some(Mode::Exact)),
        Command::Bounds(c) => (c, Some(Mode::BoundsOnly)),
        Command::Sweep(c) => (c, Some(Mode::Sweep)),
        Command::DecayFit(c) => (c, Some(Mode::DecayFit)),
        Command::OracleCheck(c) => (c, Some(Mode::OracleCheck)),
        Command::Run(c) => (c, None),
        Command::Energy(c) => {
            let runner = Runner::new(ExperimentConfig::load(&c.config, &c.overrides)?);
            return emit(&runner, runner.energy_table()?);
        }
    };
    let mut overrides = common.overrides;
    if let Some(mode) = mode {
        let name = serde_json::to_value(mode).expect("mode serializes");
        overrides.push(format!("mode={name}"));
    }
    let runner = Runner::new(ExperimentConfig::load(&common.config, &overrides)?);
    let artifacts = runner.run()?;
    emit(&runner, artifacts)
}

fn emit(runner: &Runner, artifacts: Artifacts) -> CliResult<()> {
    let out = &runner.config().output;
    artifacts.write(&out.dir, &out.prefix)?;
    println!("{}", serde_json::to_string_pretty(&artifacts.summary).expect("summary is valid JSON"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
