use std::path::Path;

use pisa_core::checkpoint::Checkpoint;
use pisa_core::fusion::{evaluate_fusion, FilterParams, FusionEvalReport, FusionStepStats, FusionSystem, FusionTrainer, OBJECT_DIM};
use pisa_core::model::PisaModel;
use pisa_core::FusionSystem32;
use serde_json::json;

use crate::config::{derive_seed, RunConfig, Stream};
use crate::error::{CliError, Result};
use crate::output::{num, opt, status, write_manifest, Table};

const PISA_PREFIX: &str = "pisa.";
const FILTER_PREFIX: &str = "filter.";

/// Freshly initialized autoencoder and duplicate filter.
pub fn init_system(cfg: &RunConfig) -> Result<FusionSystem32> {
    cfg.check_fusion()?;
    Ok(FusionSystem {
        pisa: PisaModel::new(cfg.pisa_config(), derive_seed(cfg.seed, Stream::Init))?,
        filter: FilterParams::new(OBJECT_DIM, &cfg.filter_hidden, derive_seed(cfg.seed, Stream::FilterInit)),
    })
}

pub fn load_system(cfg: &RunConfig, ckpt: &Checkpoint, path: &Path) -> Result<FusionSystem32> {
    let mut sys = init_system(cfg)?;
    let wrap = |e| CliError::checkpoint(path, e);
    ckpt.restore_prefixed(PISA_PREFIX, &mut sys.pisa.params).map_err(wrap)?;
    ckpt.restore_prefixed(FILTER_PREFIX, &mut sys.filter.params).map_err(wrap)?;
    Ok(sys)
}

pub fn cmd_fusion_train(cfg: &RunConfig) -> Result<FusionSystem32> {
    let mut trainer = FusionTrainer::new(init_system(cfg)?, cfg.fusion_train_config());
    trainer.pretrain(cfg.pretrain_steps)?;
    let mut t = Table::create(cfg.out.join("fusion_train.csv"), &["step", "loss_mse", "loss_size", "filter_bce", "status"])?;
    let mut last = FusionStepStats::default();
    for step in 1..=cfg.steps {
        last = trainer.step()?;
        if step % cfg.eval_every == 0 || step == cfg.steps {
            t.row(&[
                step.to_string(),
                num(last.loss_mse),
                num(last.loss_size),
                opt(last.filter_bce),
                status(&[("filter_bce", last.filter_bce.is_none())]),
            ])?;
            eprintln!(
                "[{}] step {step:>6}  mse {:.5}  size {:.5}  filter_bce {}",
                cfg.experiment,
                last.loss_mse,
                last.loss_size,
                last.filter_bce.map_or("undefined".into(), |b| format!("{b:.3e}"))
            );
        }
    }
    let csv = t.finish()?;
    let sys = trainer.system;
    let path = cfg.checkpoint_path();
    if let Some(parent) = path.parent() {
        crate::output::ensure_dir(parent)?;
    }
    Checkpoint::from_stores(&[(PISA_PREFIX, &sys.pisa.params), (FILTER_PREFIX, &sys.filter.params)], cfg.echo())
        .save(&path)
        .map_err(|e| CliError::checkpoint(&path, e))?;
    write_manifest(
        cfg,
        "fusion-train",
        &[csv, path],
        json!({ "steps": cfg.steps, "loss_mse": last.loss_mse, "loss_size": last.loss_size, "filter_bce": last.filter_bce }),
    )?;
    Ok(sys)
}

pub fn cmd_fusion_eval(cfg: &RunConfig, sys: &FusionSystem32) -> Result<FusionEvalReport> {
    cfg.check_fusion()?;
    let seed = cfg.eval_seed.unwrap_or_else(|| derive_seed(cfg.seed, Stream::FusionEval));
    let report = evaluate_fusion(sys, &cfg.world_config(), cfg.eval_worlds, cfg.layers, seed)?;

    let mut t = Table::create(cfg.out.join("fusion_eval.csv"), &["world", "agent", "layer", "coverage", "corr", "status"])?;
    for r in &report.rows {
        t.row(&[
            r.world.to_string(),
            r.agent.to_string(),
            r.layer.to_string(),
            num(r.coverage),
            opt(r.corr),
            status(&[("corr", r.corr.is_none())]),
        ])?;
    }
    let rows = t.finish()?;

    let mut t = Table::create(
        cfg.out.join("fusion_summary.csv"),
        &["worlds", "final_coverage", "final_corr", "filter_accuracy", "filter_pairs", "ae_corr", "status"],
    )?;
    t.row(&[
        cfg.eval_worlds.to_string(),
        num(report.final_coverage),
        opt(report.final_corr),
        opt(report.filter_accuracy),
        report.filter_pairs.to_string(),
        opt(report.ae_corr),
        status(&[
            ("final_corr", report.final_corr.is_none()),
            ("filter_accuracy", report.filter_accuracy.is_none()),
            ("ae_corr", report.ae_corr.is_none()),
        ]),
    ])?;
    let summary = t.finish()?;
    eprintln!(
        "[{}] coverage {:.4}  corr {}  filter_acc {}",
        cfg.experiment,
        report.final_coverage,
        report.final_corr.map_or("undefined".into(), |c| format!("{c:.5}")),
        report.filter_accuracy.map_or("undefined".into(), |a| format!("{a:.5}"))
    );
    write_manifest(
        cfg,
        "fusion-eval",
        &[rows, summary],
        json!({
            "final_coverage": report.final_coverage,
            "final_corr": report.final_corr,
            "filter_accuracy": report.filter_accuracy,
            "filter_pairs": report.filter_pairs,
            "ae_corr": report.ae_corr,
        }),
    )?;
    Ok(report)
}
