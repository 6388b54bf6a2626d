use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pixgan::experiment::{
    cmd_evaluate, cmd_sample, cmd_sweep, cmd_train, ExperimentConfig, OverlayMode, Precision, SampleOptions,
};
use pixgan::train::checkpoint_scalar;
use pixgan::{Error, Result};

#[derive(Parser)]
#[command(name = "pixgan", version, about = "GAN training under sparse pixel constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Regularization weight override.
    #[arg(long)]
    lambda: Option<f64>,
    /// Extra `key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model, scoring validation every epoch.
    Train(Common),
    /// Score a checkpoint on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train every (lambda, seed) pair and aggregate medians.
    Sweep(Common),
    /// Draw samples for one constraint file and render overlays.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Constraint file in PIXCON format.
        #[arg(long)]
        constraints: PathBuf,
        #[arg(short = 'n', long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Mark only the constrained pixel instead of a 3x3 block.
        #[arg(long)]
        pure_pixel: bool,
    },
}

fn load_config(c: &Common, sweep: bool) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &c.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(kv.as_str(), "expected KEY=VALUE"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = c.seed {
        cfg.train.seed = s;
        if sweep {
            cfg.seeds = vec![s];
        }
    }
    if let Some(l) = c.lambda {
        cfg.train.lambda = l;
        if sweep {
            cfg.lambdas = vec![l];
        }
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

macro_rules! by_precision {
    ($p:expr, $f:ident ( $($arg:expr),* )) => {
        match $p {
            Precision::F32 => $f::<f32>($($arg),*),
            Precision::F64 => $f::<f64>($($arg),*),
        }
    };
}

fn checkpoint_precision(path: &Path) -> Result<Precision> {
    let name = checkpoint_scalar(path)?;
    Precision::parse(&name).ok_or_else(|| Error::Checkpoint {
        path: path.to_path_buf(),
        msg: format!("unknown scalar type `{name}`"),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = load_config(&c, false)?;
            let s = by_precision!(cfg.precision, cmd_train(&cfg))?;
            for e in &s.epochs {
                println!("{e}");
            }
            let b = s.best();
            println!(
                "best epoch {} (fid {:.4}, mse {:.4}) in {}",
                s.best_epoch,
                b.fid,
                b.mse,
                s.dir.display()
            );
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = load_config(&common, false)?;
            let rep = by_precision!(checkpoint_precision(&checkpoint)?, cmd_evaluate(&cfg, &checkpoint))?;
            if let Some((a, b)) = &rep.backend_mismatch {
                eprintln!("warning: FID backend mismatch (training {a}, evaluation {b})");
            }
            for r in &rep.records {
                println!("{r}");
            }
        }
        Command::Sweep(c) => {
            let cfg = load_config(&c, true)?;
            let s = by_precision!(cfg.precision, cmd_sweep(&cfg))?;
            for m in &s.medians {
                println!(
                    "lambda {}: {} ok, {} failed, median fid {:.4}, median mse {:.4}",
                    m.lambda, m.ok, m.failed, m.fid, m.mse
                );
            }
        }
        Command::Sample {
            checkpoint,
            constraints,
            n,
            eps,
            seed,
            out,
            pure_pixel,
        } => {
            let opts = SampleOptions {
                n,
                eps,
                mode: if pure_pixel { OverlayMode::PurePixel } else { OverlayMode::Block },
                seed,
            };
            let rep = by_precision!(
                checkpoint_precision(&checkpoint)?,
                cmd_sample(&checkpoint, &constraints, &opts, &out)
            )?;
            for (i, f) in rep.fractions.iter().enumerate() {
                println!("sample {i}: satisfied {f:.4}");
            }
            if let Some(d) = rep.diversity {
                println!("diversity {d:.6e}");
            }
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Parse { .. } => 2,
        Error::NonFinite { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
