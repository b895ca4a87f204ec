//! Run configuration: a JSON document, optionally a checkpoint's echoed
//! config underneath it, and same-named command-line flags on top.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use pisa_core::fusion::{FusionTrainConfig, WorldConfig, OBJECT_DIM};
use pisa_core::model::{EncoderKind, PisaConfig};
use pisa_core::train::ReconLoss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Encoder {
    Keyed,
    InputOrder,
    Deepset,
}

impl From<Encoder> for EncoderKind {
    fn from(e: Encoder) -> Self {
        match e {
            Encoder::Keyed => EncoderKind::Keyed,
            Encoder::InputOrder => EncoderKind::InputOrder,
            Encoder::Deepset => EncoderKind::DeepSet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Recon {
    Correspondence,
    Hungarian,
}

impl From<Recon> for ReconLoss {
    fn from(r: Recon) -> Self {
        match r {
            Recon::Correspondence => ReconLoss::Correspondence,
            Recon::Hungarian => ReconLoss::Hungarian,
        }
    }
}

fn d_dx() -> usize {
    6
}
fn d_dz() -> usize {
    96
}
fn d_n_max() -> usize {
    16
}
fn d_batch() -> usize {
    64
}
fn d_steps() -> usize {
    50_000
}
fn d_lr() -> f64 {
    1e-3
}
fn d_eval_batch() -> usize {
    1024
}
fn d_eval_every() -> usize {
    1000
}
fn d_grid_k() -> usize {
    100
}
fn d_trials() -> usize {
    100
}
fn d_interp_n() -> usize {
    8
}
fn d_encoder() -> Encoder {
    Encoder::Keyed
}
fn d_recon() -> Recon {
    Recon::Correspondence
}
fn d_agents() -> usize {
    7
}
fn d_objects() -> usize {
    10
}
fn d_comm() -> f64 {
    0.5
}
fn d_obs() -> f64 {
    0.4
}
fn d_filter_hidden() -> Vec<usize> {
    vec![64, 64]
}
fn d_eval_worlds() -> usize {
    100
}
fn d_rollout_every() -> usize {
    2
}
fn d_out() -> PathBuf {
    PathBuf::from("out")
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: u64,
    #[serde(default = "d_dx")]
    pub dx: usize,
    #[serde(default = "d_dz")]
    pub dz: usize,
    #[serde(default = "d_n_max")]
    pub n_max: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_steps")]
    pub steps: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_eval_batch")]
    pub eval_batch: usize,
    /// Training steps between metric rows.
    #[serde(default = "d_eval_every")]
    pub eval_every: usize,
    /// Seed of the held-out evaluation data; derived from `seed` when absent.
    #[serde(default)]
    pub eval_seed: Option<u64>,
    /// Interpolation grid points.
    #[serde(default = "d_grid_k")]
    pub grid_k: usize,
    #[serde(default = "d_trials")]
    pub interp_trials: usize,
    /// Cardinality of interpolated sets.
    #[serde(default = "d_interp_n")]
    pub interp_n: usize,
    #[serde(default = "d_encoder")]
    pub encoder: Encoder,
    #[serde(default = "d_recon")]
    pub recon: Recon,
    #[serde(default = "d_agents")]
    pub n_agents: usize,
    #[serde(default = "d_objects")]
    pub n_objects: usize,
    #[serde(default = "d_comm")]
    pub comm_radius: f64,
    #[serde(default = "d_obs")]
    pub obs_radius: f64,
    #[serde(default = "d_filter_hidden")]
    pub filter_hidden: Vec<usize>,
    /// Fusion rounds at evaluation; each world's diameter when absent.
    #[serde(default)]
    pub layers: Option<usize>,
    #[serde(default = "d_eval_worlds")]
    pub eval_worlds: usize,
    #[serde(default)]
    pub pretrain_steps: usize,
    #[serde(default = "d_rollout_every")]
    pub rollout_every: usize,
    #[serde(default = "d_batch")]
    pub pair_batch: usize,
    #[serde(default = "d_out")]
    pub out: PathBuf,
    /// Defaults to `<out>/checkpoint.pisa`.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

/// Keys that locate files rather than describe the run; kept out of checkpoint echoes.
pub const LOCATION_KEYS: [&str; 2] = ["out", "checkpoint"];

/// Command-line overrides. Each flag shares its name with a config field.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Flags {
    /// JSON config file; flags override its fields.
    #[arg(long, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[arg(long, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<usize>,
    #[arg(long, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dz: Option<usize>,
    #[arg(long, alias = "n_max")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[arg(long, alias = "batch_size")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[arg(long, value_name = "N")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long, alias = "eval_batch")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_batch: Option<usize>,
    #[arg(long, alias = "eval_every")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_every: Option<usize>,
    #[arg(long, alias = "eval_seed")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_seed: Option<u64>,
    #[arg(long, alias = "grid_k")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_k: Option<usize>,
    #[arg(long, alias = "interp_trials")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interp_trials: Option<usize>,
    #[arg(long, alias = "interp_n")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interp_n: Option<usize>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoder: Option<Encoder>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recon: Option<Recon>,
    #[arg(long, alias = "n_agents")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_agents: Option<usize>,
    #[arg(long, alias = "n_objects")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_objects: Option<usize>,
    #[arg(long, alias = "comm_radius")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comm_radius: Option<f64>,
    #[arg(long, alias = "obs_radius")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obs_radius: Option<f64>,
    /// Comma-separated hidden widths of the duplicate filter.
    #[arg(long, alias = "filter_hidden", value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_hidden: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    #[arg(long, alias = "eval_worlds")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_worlds: Option<usize>,
    #[arg(long, alias = "pretrain_steps")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain_steps: Option<usize>,
    #[arg(long, alias = "rollout_every")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rollout_every: Option<usize>,
    #[arg(long, alias = "pair_batch")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_batch: Option<usize>,
    #[arg(long, value_name = "DIR")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

/// Reads a JSON config file; it must hold a single object.
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Usage(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Usage(format!("{}: {e}", path.display()))),
    }
}

/// Layers, lowest first: `base` (a checkpoint echo), the experiment name,
/// the config file, then the flags.
pub fn resolve(experiment: &str, base: Option<Map<String, Value>>, flags: &Flags) -> Result<RunConfig> {
    let mut merged = base.unwrap_or_default();
    merged.insert("experiment".into(), Value::String(experiment.into()));
    if let Some(path) = &flags.config {
        merged.extend(read_config_file(path)?);
    }
    match serde_json::to_value(flags)? {
        Value::Object(m) => merged.extend(m),
        _ => unreachable!("flags serialize to an object"),
    }
    let cfg: RunConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// The checkpoint a command reads, found before the rest of the config is resolved.
pub fn locate_checkpoint(flags: &Flags) -> Result<PathBuf> {
    if let Some(p) = &flags.checkpoint {
        return Ok(p.clone());
    }
    let file = match &flags.config {
        Some(path) => read_config_file(path)?,
        None => Map::new(),
    };
    if let Some(Value::String(p)) = file.get("checkpoint") {
        return Ok(PathBuf::from(p));
    }
    let out = match (&flags.out, file.get("out")) {
        (Some(o), _) => o.clone(),
        (None, Some(Value::String(o))) => PathBuf::from(o),
        _ => d_out(),
    };
    Ok(out.join("checkpoint.pisa"))
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dx", self.dx),
            ("dz", self.dz),
            ("n_max", self.n_max),
            ("batch_size", self.batch_size),
            ("eval_batch", self.eval_batch),
            ("eval_every", self.eval_every),
            ("interp_trials", self.interp_trials),
            ("interp_n", self.interp_n),
            ("n_agents", self.n_agents),
            ("eval_worlds", self.eval_worlds),
            ("rollout_every", self.rollout_every),
            ("pair_batch", self.pair_batch),
        ] {
            if v == 0 {
                return Err(usage(format!("{name} must be positive")));
            }
        }
        if self.experiment.is_empty() {
            return Err(usage("experiment must not be empty"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(usage(format!("lr must be a positive number, got {}", self.lr)));
        }
        if self.grid_k < 2 {
            return Err(usage(format!("grid_k must be at least 2, got {}", self.grid_k)));
        }
        for (name, r) in [("comm_radius", self.comm_radius), ("obs_radius", self.obs_radius)] {
            if !(r.is_finite() && r > 0.0) {
                return Err(usage(format!("{name} must be a positive number, got {r}")));
            }
        }
        if self.filter_hidden.iter().any(|&h| h == 0) {
            return Err(usage("filter_hidden widths must be positive"));
        }
        Ok(())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out.join("checkpoint.pisa"))
    }

    pub fn eval_seed(&self) -> u64 {
        self.eval_seed.unwrap_or_else(|| derive_seed(self.seed, Stream::Eval))
    }

    pub fn pisa_config(&self) -> PisaConfig {
        PisaConfig::new(self.dx, self.dz, self.n_max).with_encoder(self.encoder.into())
    }

    pub fn world_config(&self) -> WorldConfig {
        WorldConfig {
            n_agents: self.n_agents,
            n_objects: self.n_objects,
            comm_radius: self.comm_radius,
            obs_radius: self.obs_radius,
            ..WorldConfig::default()
        }
    }

    /// Fusion objects have a fixed width, and every object must fit in one set.
    pub fn check_fusion(&self) -> Result<()> {
        if self.dx != OBJECT_DIM {
            return Err(usage(format!("fusion objects have {OBJECT_DIM} features, but dx is {}", self.dx)));
        }
        if self.n_objects > self.n_max {
            return Err(usage(format!("n_objects {} exceeds n_max {}", self.n_objects, self.n_max)));
        }
        Ok(())
    }

    pub fn check_interpolate(&self) -> Result<()> {
        if self.interp_n > self.n_max {
            return Err(usage(format!("interp_n {} exceeds n_max {}", self.interp_n, self.n_max)));
        }
        Ok(())
    }

    pub fn fusion_train_config(&self) -> FusionTrainConfig {
        FusionTrainConfig {
            world: self.world_config(),
            steps: self.steps,
            batch_size: self.batch_size,
            pair_batch: self.pair_batch,
            lr: self.lr,
            rollout_every: self.rollout_every,
            pretrain_steps: self.pretrain_steps,
            seed: derive_seed(self.seed, Stream::FusionWorlds),
            ..FusionTrainConfig::default()
        }
    }

    /// The JSON stored inside checkpoints: everything but file locations.
    pub fn echo(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            for k in LOCATION_KEYS {
                m.remove(k);
            }
        }
        v.to_string()
    }
}

/// Independent random streams carved out of the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Data = 2,
    Eval = 3,
    Interpolate = 4,
    FusionWorlds = 5,
    FilterInit = 6,
    FusionEval = 7,
}

pub fn derive_seed(seed: u64, stream: Stream) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[derive(clap::Parser)]
    struct Probe {
        #[command(flatten)]
        flags: Flags,
    }

    fn parse(args: &[&str]) -> Flags {
        use clap::Parser;
        Probe::try_parse_from(std::iter::once("probe").chain(args.iter().copied())).unwrap().flags
    }

    #[test]
    fn seed_is_mandatory() {
        let err = resolve("train", None, &Flags::default()).unwrap_err();
        assert!(matches!(err, CliError::Usage(ref m) if m.contains("seed")), "{err}");
    }

    #[test]
    fn flags_beat_file_beats_base() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 1, "dz": 48, "steps": 10}"#).unwrap();
        let mut base = Map::new();
        base.insert("dz".into(), 24.into());
        base.insert("lr".into(), 0.5.into());
        base.insert("experiment".into(), "old".into());
        let flags = parse(&["--config", path.to_str().unwrap(), "--steps", "3"]);
        let cfg = resolve("eval", Some(base), &flags).unwrap();
        assert_eq!((cfg.seed, cfg.dz, cfg.steps, cfg.lr), (1, 48, 3, 0.5));
        assert_eq!(cfg.experiment, "eval");
        assert_eq!(cfg.n_max, 16);
    }

    #[test]
    fn every_config_field_has_a_flag() {
        let cfg = resolve("x", None, &parse(&["--seed", "0"])).unwrap();
        let Value::Object(fields) = serde_json::to_value(&cfg).unwrap() else { panic!() };
        let cmd = Probe::command();
        let longs: Vec<String> = cmd.get_arguments().filter_map(|a| a.get_long().map(|l| l.replace('-', "_"))).collect();
        for k in fields.keys() {
            assert!(longs.contains(k), "no flag for {k}");
        }
    }

    #[test]
    fn underscore_aliases_parse() {
        let f = parse(&["--batch_size", "8", "--n-max", "4", "--filter-hidden", "3,5", "--encoder", "input_order"]);
        assert_eq!(f.batch_size, Some(8));
        assert_eq!(f.n_max, Some(4));
        assert_eq!(f.filter_hidden, Some(vec![3, 5]));
        assert_eq!(f.encoder, Some(Encoder::InputOrder));
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for args in [
            &["--seed", "0", "--dz", "0"][..],
            &["--seed", "0", "--lr=-1"],
            &["--seed", "0", "--grid-k", "1"],
            &["--seed", "0", "--filter-hidden", "4,0"],
        ] {
            assert!(matches!(resolve("train", None, &parse(args)), Err(CliError::Usage(_))), "{args:?}");
        }
        let cfg = resolve("x", None, &parse(&["--seed", "0", "--interp-n", "17", "--n-objects", "20"])).unwrap();
        assert!(matches!(cfg.check_interpolate(), Err(CliError::Usage(_))));
        assert!(matches!(cfg.check_fusion(), Err(CliError::Usage(_))));
        let cfg = resolve("x", None, &parse(&["--seed", "0", "--dx", "3"])).unwrap();
        assert!(matches!(cfg.check_fusion(), Err(CliError::Usage(_))));
    }

    #[test]
    fn unknown_file_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"seed": 1, "dzz": 4}"#).unwrap();
        let flags = Flags {
            config: Some(path),
            ..Flags::default()
        };
        assert!(matches!(resolve("train", None, &flags), Err(CliError::Usage(_))));
    }

    #[test]
    fn echo_omits_locations_and_round_trips() {
        let cfg = resolve("train", None, &parse(&["--seed", "9", "--out", "/tmp/x"])).unwrap();
        let Value::Object(echo) = serde_json::from_str(&cfg.echo()).unwrap() else { panic!() };
        assert!(!echo.contains_key("out"));
        let back = resolve("train", Some(echo), &Flags::default()).unwrap();
        assert_eq!(back.seed, 9);
        assert_eq!(back.out, PathBuf::from("out"));
    }

    #[test]
    fn streams_differ() {
        let a = derive_seed(0, Stream::Init);
        assert_ne!(a, derive_seed(0, Stream::Data));
        assert_ne!(a, derive_seed(1, Stream::Init));
        assert_eq!(a, derive_seed(0, Stream::Init));
    }

    #[test]
    fn checkpoint_location_follows_out() {
        let f = parse(&["--out", "runs/a"]);
        assert_eq!(locate_checkpoint(&f).unwrap(), PathBuf::from("runs/a/checkpoint.pisa"));
        let f = parse(&["--out", "runs/a", "--checkpoint", "c.pisa"]);
        assert_eq!(locate_checkpoint(&f).unwrap(), PathBuf::from("c.pisa"));
    }
}
