use clap::{Parser, Subcommand};
use ris_lab::harness::{load_config, run_to_dir, Config, ExperimentName};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "ris-lab", version, about = "RIS link-level simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or all experiments and write one CSV per experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Experiment to run; defaults to the config's, or all of them.
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        /// Output directory; defaults to the config's `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; results do not depend on this.
        #[arg(long, env = "RIS_LAB_THREADS")]
        threads: Option<usize>,
    },
    /// Parse and validate a configuration without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

fn prepare(
    config: &PathBuf,
    experiment: Option<String>,
    seed: Option<u64>,
    trials: Option<u64>,
) -> Result<Config, Failure> {
    let mut cfg = load_config(config).map_err(|e| Failure::Validation(e.to_string()))?;
    if let Some(name) = experiment {
        let name: ExperimentName = name.parse().map_err(|e: ris_lab::Error| Failure::Validation(e.to_string()))?;
        cfg.experiment.name = Some(name);
    }
    if let Some(seed) = seed {
        cfg.experiment.seed = seed;
    }
    if let Some(trials) = trials {
        cfg.experiment.trials = i64::try_from(trials)
            .map_err(|_| Failure::Validation(format!("--trials {trials} is too large")))?;
    }
    cfg.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = prepare(&config, None, None, None)?;
            let names: Vec<&str> = cfg.selected().iter().map(|e| e.as_str()).collect();
            println!("{}: ok ({})", config.display(), names.join(", "));
            Ok(())
        }
        Command::Run {
            config,
            experiment,
            seed,
            trials,
            out,
            threads,
        } => {
            let cfg = prepare(&config, experiment, seed, trials)?;
            let out = out.unwrap_or_else(|| cfg.experiment.output_dir.clone());
            let names = cfg.selected();
            let run = || run_to_dir(&cfg, &names, &out).map_err(|e| Failure::Runtime(e.to_string()));
            let written = match threads {
                Some(0) => return Err(Failure::Validation("--threads must be at least 1".into())),
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Failure::Runtime(e.to_string()))?
                    .install(run)?,
                None => run()?,
            };
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
