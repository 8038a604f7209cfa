use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use statelp_cli::{execute, validate, CliError, Overrides, RunConfig, Verb};

#[derive(Parser, Debug)]
#[command(name = "statelp", version, about = "State-dependent local projections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// TOML run configuration
    #[arg(long, short)]
    config: PathBuf,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the config and data, list usable sample sizes per horizon
    Validate(Common),
    /// Build the state variables
    States(Common),
    /// Identify the spending shock
    Identify(Common),
    /// Estimate impulse responses
    Irf(Common),
    /// Estimate cumulative multipliers by LP-IV
    Multiplier(Common),
    /// Run every configured stage
    RunAll(Common),
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(&common.config)?;
    Overrides {
        seed: common.seed,
        out: common.out.clone(),
        threads: common.threads,
    }
    .apply(&mut config);
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (verb, common) = match cli.command {
        Command::Validate(c) => {
            let config = load(&c)?;
            let report = validate(&config);
            for (dep, sizes) in &report.sample_sizes {
                let list: Vec<String> = sizes.iter().map(usize::to_string).collect();
                println!("sample {dep}: {}", list.join(" "));
            }
            for d in &report.diagnostics {
                println!("{d}");
            }
            if report.has_errors() {
                return Err(CliError::Config(format!("{} problem(s) found", report.diagnostics.len())));
            }
            return Ok(());
        }
        Command::States(c) => (Verb::States, c),
        Command::Identify(c) => (Verb::Identify, c),
        Command::Irf(c) => (Verb::Irf, c),
        Command::Multiplier(c) => (Verb::Multiplier, c),
        Command::RunAll(c) => (Verb::RunAll, c),
    };
    let config = load(&common)?;
    let manifest = execute(verb, config, common.threads)?;
    println!("wrote {} files (config {})", manifest.outputs.len() + 1, &manifest.config_hash[..12]);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
