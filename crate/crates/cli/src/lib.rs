//! Experiment runner for the set autoencoder.
//!
//! Each subcommand resolves a [`config::RunConfig`], runs, and writes CSV
//! tables, a checkpoint where relevant, and `manifest.json` into `--out`.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use clap::{Parser, Subcommand};
use pisa_core::checkpoint::Checkpoint;
use serde_json::{Map, Value};

use config::{locate_checkpoint, resolve, Flags, RunConfig};
use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "pisa", version, about = "Train and evaluate permutation-invariant set autoencoders")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an autoencoder on random sets.
    Train(Flags),
    /// Evaluate a trained checkpoint on a fresh seeded batch.
    Eval(Flags),
    /// Decode along straight lines between pairs of latents.
    Interpolate(Flags),
    /// Train the four ablation variants under one budget.
    Ablate(Flags),
    /// Train the multi-agent fusion system.
    FusionTrain(Flags),
    /// Roll out a trained fusion system on fresh worlds.
    FusionEval(Flags),
}

/// Loads a checkpoint and resolves the config on top of its echo.
fn with_checkpoint(name: &str, flags: &Flags) -> Result<(RunConfig, Checkpoint, std::path::PathBuf)> {
    let path = locate_checkpoint(flags)?;
    let ckpt = Checkpoint::load(&path).map_err(|e| CliError::checkpoint(&path, e))?;
    let base = match serde_json::from_str::<Value>(&ckpt.config_echo) {
        Ok(Value::Object(m)) => m,
        _ if ckpt.config_echo.is_empty() => Map::new(),
        _ => return Err(CliError::Usage(format!("{}: config echo is not a JSON object", path.display()))),
    };
    let mut cfg = resolve(name, Some(base), flags)?;
    cfg.checkpoint = Some(path.clone());
    Ok((cfg, ckpt, path))
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train(f) => {
            commands::train::cmd_train(&resolve("train", None, f)?)?;
        }
        Command::Eval(f) => {
            let (cfg, ckpt, path) = with_checkpoint("eval", f)?;
            let model = commands::train::load_model(&cfg, &ckpt, &path)?;
            commands::train::cmd_eval(&cfg, &model)?;
        }
        Command::Interpolate(f) => {
            let (cfg, ckpt, path) = with_checkpoint("interpolate", f)?;
            let model = commands::train::load_model(&cfg, &ckpt, &path)?;
            commands::interpolate::cmd_interpolate(&cfg, &model)?;
        }
        Command::Ablate(f) => {
            commands::train::cmd_ablate(&resolve("ablate", None, f)?)?;
        }
        Command::FusionTrain(f) => {
            commands::fusion::cmd_fusion_train(&resolve("fusion-train", None, f)?)?;
        }
        Command::FusionEval(f) => {
            let (cfg, ckpt, path) = with_checkpoint("fusion-eval", f)?;
            let sys = commands::fusion::load_system(&cfg, &ckpt, &path)?;
            commands::fusion::cmd_fusion_eval(&cfg, &sys)?;
        }
    }
    Ok(())
}
