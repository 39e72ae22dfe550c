use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use vcrb_lab::explain::{extract_paths, interaction_matrix, order_k_interactions};
use vcrb_lab::gbdt::GbdtModel;
use vcrb_lab::pipeline::{dry_run_counts, Run, RunConfig, Stage};
use vcrb_lab::Error;

#[derive(Parser)]
#[command(name = "vcrb-lab", version, about = "Pattern extraction, walk-forward classification and interaction analysis for tick data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// All stages in order, reusing intact cached stages.
    Run {
        #[command(flatten)]
        common: Common,
        /// Recompute every stage.
        #[arg(long)]
        force: bool,
    },
    /// Load or generate tick streams.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Pattern extraction per batch.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Print event counts per range and write nothing.
        #[arg(long)]
        dry_run: bool,
    },
    Label {
        #[command(flatten)]
        common: Common,
    },
    Features {
        #[command(flatten)]
        common: Common,
    },
    /// Walk-forward tuning, feature selection and scoring.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Interaction matrices and ranking distances. With `--model`, only the
    /// path-based matrix of that model file is written.
    Explain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write the matrix restricted to paths with exactly K features.
        #[arg(long, value_name = "K", requires = "model")]
        order: Option<usize>,
    },
    Backtest {
        #[command(flatten)]
        common: Common,
    },
    /// Statistical tests over the stored metrics.
    Stats {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stage(common: &Common, stage: Stage) -> Result<(), Error> {
    let mut run = Run::open(load_config(common)?)?;
    run.run_stage(stage)
}

fn explain_model(model: &Path, out: &Path, order: Option<usize>) -> Result<(), Error> {
    let m = GbdtModel::load(model)?;
    let paths = extract_paths(&m, None)?;
    let stem = model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let dir = out.join("explain");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
    let write = |name: String, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })
    };
    write(format!("{stem}_paths.tsv"), interaction_matrix(&m.feature_names, &paths).to_tsv())?;
    if let Some(k) = order {
        if k == 0 {
            return Err(Error::InvalidConfig("--order starts at 1".into()));
        }
        write(format!("{stem}_order{k}.tsv"), order_k_interactions(&m.feature_names, &paths, k).to_tsv())?;
    }
    log::info!("{} paths from {} trees", paths.len(), m.trees.len());
    Ok(())
}

fn dispatch(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run { common, force } => {
            let mut run = Run::open(load_config(&common)?)?;
            run.run_all(!force)
        }
        Command::Ingest { common } => stage(&common, Stage::Ingest),
        Command::Extract { common, dry_run: true } => {
            for (symbol, method, n) in dry_run_counts(&load_config(&common)?)? {
                println!("{symbol}\t{method}\t{n}");
            }
            Ok(())
        }
        Command::Extract { common, .. } => stage(&common, Stage::Extract),
        Command::Label { common } => stage(&common, Stage::Label),
        Command::Features { common } => stage(&common, Stage::Features),
        Command::Train { common } => stage(&common, Stage::Train),
        Command::Explain {
            common,
            model: Some(model),
            order,
        } => {
            let out = match (&common.out, &common.config) {
                (Some(o), _) => o.clone(),
                (None, Some(_)) => load_config(&common)?.out_dir,
                (None, None) => return Err(Error::InvalidConfig("--model needs --out or --config".into())),
            };
            explain_model(&model, &out, order)
        }
        Command::Explain { common, .. } => stage(&common, Stage::Explain),
        Command::Backtest { common } => stage(&common, Stage::Backtest),
        Command::Stats { common } => stage(&common, Stage::Stats),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
