//! `fedmod` command line: run experiments and compare result directories.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fedmod_core::harness::{self, parse_seed_range, Algorithm, ExperimentConfig, SchedulerKind};

#[derive(Parser)]
#[command(
    name = "fedmod",
    version,
    about = "Decentralized federated learning over a UAV relay network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Fedmod,
    Star,
    Hfl,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchedulerArg {
    P1p2,
    Random,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment TOML file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset (see `fedmod presets`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive seed range such as `1..5`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, value_enum)]
    algorithm: Option<AlgorithmArg>,
    #[arg(long, value_enum)]
    scheduler: Option<SchedulerArg>,
    /// Full dissemination every N iterations.
    #[arg(long)]
    dissemination_period: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Combine cluster models as an unweighted sum over the total sample count.
    #[arg(long)]
    strict_eq9: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its result directory.
    Run(RunArgs),
    /// Compare result directories; the exit code flags metrics the first one loses.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// Also write the aligned per-row table to this CSV file.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// List preset names.
    Presets,
}

/// Exit status for errors, above any metric bitmask `compare` can produce.
const ERROR_EXIT: u8 = 128;

fn build_config(args: RunArgs) -> fedmod_core::Result<ExperimentConfig> {
    let mut cfg = match (args.config, args.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => harness::preset(&name)?,
        (None, None) => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    if let Some(range) = args.seeds {
        cfg.seeds = parse_seed_range(&range)?;
    }
    if let Some(a) = args.algorithm {
        cfg.algorithm = match a {
            AlgorithmArg::Fedmod => Algorithm::Fedmod,
            AlgorithmArg::Star => Algorithm::Star,
            AlgorithmArg::Hfl => Algorithm::Hfl,
        };
    }
    if let Some(s) = args.scheduler {
        cfg.scheduler = match s {
            SchedulerArg::P1p2 => SchedulerKind::P1p2,
            SchedulerArg::Random => SchedulerKind::Random,
        };
    }
    if let Some(p) = args.dissemination_period {
        cfg.dissemination_period = p;
    }
    if let Some(o) = args.out {
        cfg.out_dir = o;
    }
    if args.strict_eq9 {
        cfg.strict_global_rule();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FEDMOD_LOG", "warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let result = build_config(args).and_then(|cfg| harness::run(&cfg).map(|s| (cfg, s)));
            match result {
                Ok((cfg, summary)) => {
                    println!("wrote {}", cfg.out_dir.display());
                    for (name, m) in &summary.metrics {
                        println!("{name:<18} {:.6} (sd {:.6})", m.mean, m.sd);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(ERROR_EXIT)
                }
            }
        }
        Command::Compare { dirs, table } => match harness::compare(&dirs) {
            Ok(c) => {
                print!("{}", c.metrics_report());
                if let Some(path) = table {
                    let written = c.table_csv().and_then(|csv| {
                        std::fs::write(&path, csv).map_err(|e| fedmod_core::Error::Io { path, source: e })
                    });
                    if let Err(e) = written {
                        eprintln!("error: {e}");
                        return ExitCode::from(ERROR_EXIT);
                    }
                }
                // 0 when the first directory wins or ties every metric
                ExitCode::from(u8::try_from(c.exit_code()).unwrap_or(ERROR_EXIT - 1))
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(ERROR_EXIT)
            }
        },
        Command::Presets => {
            for name in harness::PRESET_NAMES {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
    }
}
