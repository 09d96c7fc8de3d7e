use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use meanlab_cli::{resolve_out_dir, run, write_outputs, CliError, ExperimentConfig};
use meanlab_core::fixtures::list_fixtures;

#[derive(Parser)]
#[command(name = "meanlab", version, about = "Mean equicontinuity, spectra and Delone classification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: config `output_dir`, then $MEANLAB_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long)]
        threads: Option<usize>,
        /// Window sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        schedule: Option<Vec<f64>>,
    },
    /// List built-in fixtures.
    List {
        /// Keep fixtures whose name contains this string.
        #[arg(default_value = "")]
        filter: String,
        #[arg(long)]
        json: bool,
    },
}

fn run_command(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    schedule: Option<Vec<f64>>,
) -> Result<(), CliError> {
    let text =
        std::fs::read_to_string(&config).map_err(|e| CliError::Config(format!("reading {}: {e}", config.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(sizes) = schedule {
        let spec = cfg.system_spec().ok_or_else(|| CliError::Config("no system given".into()))?;
        let s = meanlab_core::make_system(&spec).map_err(|e| CliError::Config(e.to_string()))?;
        let default = meanlab_cli::run::default_schedule(cfg.kind, &spec, &s);
        cfg.override_schedule(sizes, &default)?;
    }
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let dir = resolve_out_dir(out.as_deref(), cfg.output_dir.as_deref());
    let result = run(&cfg)?;
    let written = write_outputs(&dir, &result)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out, threads, schedule } => run_command(config, seed, out, threads, schedule),
        Command::List { filter, json } => {
            let all = list_fixtures(&filter);
            if json {
                println!("{}", serde_json::to_string_pretty(&all).expect("fixtures serialize"));
            } else {
                for f in all {
                    let class = serde_json::to_value(f.known_class).expect("serializes");
                    println!("{:<28} {:<18} {}", f.name, class.as_str().unwrap_or(""), f.observables.len());
                }
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("meanlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
