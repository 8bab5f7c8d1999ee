use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cccf::retrieval::BenchMode;
use cccf_cli::commands::{self, CliError, CliResult};
use cccf_cli::RunConfig;

#[derive(Parser)]
#[command(name = "cccf", version, about = "Compositional binary codes for recommendation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value configuration file
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. `--set g=4`
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a rating dump and write a per-user train/test split
    Prepare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit MF factors, train a model and save it
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Iteration log CSV (default: `<model>.log.csv`)
        #[arg(long)]
        log: Option<PathBuf>,
        /// Include wall-clock seconds in the log
        #[arg(long)]
        timings: bool,
    },
    /// NDCG report of a saved model on a test file
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Report CSV (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top-k items for one user
    Retrieve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long, short = 'k', default_value_t = 10)]
        k: usize,
        /// Float weights instead of the integer fast path
        #[arg(long, conflicts_with = "fast")]
        exact: bool,
        /// Integer-weight fast path (the default)
        #[arg(long)]
        fast: bool,
        /// Keep the user's training items among the candidates
        #[arg(long)]
        include_train: bool,
    },
    /// Time full top-k scans
    Bench {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated: cccf-fast, cccf-exact, float-mf, dcf-flat
        #[arg(long, value_delimiter = ',', default_value = "cccf-fast,cccf-exact,float-mf,dcf-flat")]
        modes: Vec<String>,
        /// Number of users to query (default: all)
        #[arg(long)]
        users: Option<usize>,
        #[arg(long, short = 'k', default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate the configured grid over several splits
    Experiment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| CliError::new("io", format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = RunConfig::load(cli.common.config.as_deref(), &cli.common.set)?;
    if let Some(n) = cfg.thread_count()? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::new("config", e.to_string()))?;
    }
    match cli.command {
        Command::Prepare { input, out_dir } => {
            let (train, test) = commands::prepare(&input, &out_dir, &cfg)?;
            println!("{}\n{}", train.display(), test.display());
        }
        Command::Train {
            train,
            model,
            log,
            timings,
        } => {
            let log = log.unwrap_or_else(|| {
                let mut p = model.clone().into_os_string();
                p.push(".log.csv");
                p.into()
            });
            commands::train_model(&train, &model, &log, timings, &cfg)?;
        }
        Command::Evaluate { model, test, out } => {
            let mut w = output(&out)?;
            commands::evaluate_model(&model, &test, &cfg, &mut w)?;
            w.flush()?;
        }
        Command::Retrieve {
            model,
            user,
            k,
            exact,
            fast: _,
            include_train,
        } => {
            let mut w = output(&None)?;
            commands::retrieve(&model, &user, k, !exact, include_train, &cfg, &mut w)?;
            w.flush()?;
        }
        Command::Bench {
            model,
            modes,
            users,
            k,
            out,
        } => {
            let modes = modes
                .iter()
                .map(|m| m.trim().parse::<BenchMode>())
                .collect::<Result<Vec<_>, _>>()?;
            let mut w = output(&out)?;
            commands::bench(&model, &modes, users, k, &cfg, &mut w)?;
            w.flush()?;
        }
        Command::Experiment { input, out } => {
            let mut w = output(&out)?;
            commands::experiment(&input, &cfg, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
