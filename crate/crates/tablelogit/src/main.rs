use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tablelogit::output::Artifacts;
use tablelogit::{run, CliError, Command, RunConfig, RunFlags};
use tablelogit_core::simulation::SyntheticSpec;

#[derive(Parser)]
#[command(name = "tablelogit", version, about = "Logistic regression supervised by contingency tables")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check tables against the dataset and the identifiability condition.
    Validate(RunFlags),
    /// Fit the model on the given covariates.
    Fit(RunFlags),
    /// Forward stepwise selection over candidate covariates.
    Select(RunFlags),
    /// Per-row probabilities appended to the input rows.
    Predict(RunFlags),
    /// Weighted group rates for the classifier and the threshold rule.
    Aggregate(RunFlags),
    /// Bootstrap confidence intervals for the group rates.
    Bootstrap(RunFlags),
    /// Simulation study comparing methods on generated tables.
    Simulate(RunFlags),
    /// Rows for the ODn / VL scatter plot.
    PlotData(RunFlags),
    /// Write a synthetic dataset and its manifest.
    Synth(SynthArgs),
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 705)]
    n: usize,
    /// Rows with CD4 left missing.
    #[arg(long, default_value_t = 24)]
    missing: usize,
    #[arg(long, default_value_t = 0)]
    noise: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "synthetic")]
    name: String,
    #[arg(long)]
    out: PathBuf,
}

fn synth(args: &SynthArgs) -> tablelogit::Result<()> {
    let spec = SyntheticSpec {
        n: args.n,
        missing_cd4: args.missing,
        noise_covariates: args.noise,
        seed: args.seed,
        ..SyntheticSpec::default()
    };
    let (_, csv, manifest) = tablelogit::synth::files(&spec)?;
    let artifacts = Artifacts {
        files: vec![
            (format!("{}.csv", args.name), csv),
            (format!("{}.manifest.toml", args.name), manifest.into_bytes()),
        ],
    };
    artifacts.write(&args.out)?;
    Ok(())
}

fn execute(cli: &Cli) -> tablelogit::Result<()> {
    let (command, flags) = match &cli.command {
        Cmd::Validate(f) => (Command::Validate, f),
        Cmd::Fit(f) => (Command::Fit, f),
        Cmd::Select(f) => (Command::Select, f),
        Cmd::Predict(f) => (Command::Predict, f),
        Cmd::Aggregate(f) => (Command::Aggregate, f),
        Cmd::Bootstrap(f) => (Command::Bootstrap, f),
        Cmd::Simulate(f) => (Command::Simulate, f),
        Cmd::PlotData(f) => (Command::PlotData, f),
        Cmd::Synth(args) => return synth(args),
    };
    let cfg = RunConfig::resolve(flags)?;
    let outcome = run(command, &cfg)?;
    for p in outcome.artifacts.write(&cfg.out)? {
        log::info!("wrote {}", p.display());
    }
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn report(e: &CliError) -> ExitCode {
    let record = e.record();
    eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
    ExitCode::from(record.exit_code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&CliError::Config(e.to_string().trim_end().to_string())),
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
