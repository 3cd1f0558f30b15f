use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use morse_flow::app::{self, AppError, EXIT_VALIDATION};
use morse_flow::config::{DemoName, RunConfig};

#[derive(Parser)]
#[command(name = "morse-flow", version, about = "Spectral flow of elliptic operators along sublevel sets")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the scenario described by a JSON configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs a built-in scenario.
    Demo {
        name: DemoName,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Prints the configuration of a built-in scenario.
    ShowDemo { name: DemoName },
}

fn execute(cli: Cli) -> Result<i32, AppError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Invalid { field: "threads", message: e.to_string() })?;
    }
    let mut config = match cli.command {
        Command::Run { config, out } => {
            let mut c = RunConfig::load(&config)?;
            if let Some(out) = out {
                c.output_dir = out;
            }
            c
        }
        Command::Demo { name, out } => RunConfig { output_dir: out, ..RunConfig::demo(name) },
        Command::ShowDemo { name } => {
            let c = RunConfig::demo(name);
            println!("{}", serde_json::to_string_pretty(&c)?);
            return Ok(0);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let outcome = app::run(&config)?;
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    for f in &outcome.failures {
        eprintln!("numerical failure: {f}");
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION as u8 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
