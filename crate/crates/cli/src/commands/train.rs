use std::path::Path;

use pisa_core::checkpoint::Checkpoint;
use pisa_core::data::{sample_set, SetBatch};
use pisa_core::metrics::{evaluate, EvalReport, Matching};
use pisa_core::model::PisaModel;
use pisa_core::set::ElementSet;
use pisa_core::tape::Tape;
use pisa_core::train::{batch_loss, ReconLoss, Trainer};
use pisa_core::PisaModel32;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{derive_seed, Encoder, Recon, RunConfig, Stream};
use crate::error::{CliError, Result};
use crate::output::{num, opt, status, write_manifest, Table};

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub step: usize,
    /// Teacher-forced losses on the evaluation batch.
    pub loss_mse: f64,
    pub loss_size: f64,
    pub eval_corr: Option<f64>,
    pub card_acc: f64,
}

pub struct TrainOutcome {
    pub model: PisaModel32,
    pub rows: Vec<MetricRow>,
    pub final_eval: EvalReport,
}

/// The held-out batch every evaluation of this config uses.
pub fn eval_batch(cfg: &RunConfig) -> SetBatch<f32> {
    SetBatch::generate(cfg.eval_seed(), cfg.eval_batch, cfg.dx, 0..=cfg.n_max)
}

/// Hungarian-trained models emit elements in no particular order, so they
/// are scored with Hungarian matching; all others by key.
pub fn natural_matching(recon: Recon) -> Matching {
    match recon {
        Recon::Correspondence => Matching::KeyCorrespondence,
        Recon::Hungarian => Matching::Hungarian,
    }
}

pub fn measure(model: &PisaModel32, step: usize, sets: &[&ElementSet<f32>], recon: Recon) -> Result<(MetricRow, EvalReport)> {
    let (loss_mse, loss_size) = {
        let input = model.prepare(sets)?;
        let mut tape = Tape::with_params(&model.params);
        let l = batch_loss(model, &mut tape, &input, ReconLoss::from(recon))?;
        (f64::from(tape.scalar(l.mse)), f64::from(tape.scalar(l.size)))
    };
    let report = evaluate(model, sets, natural_matching(recon))?;
    let row = MetricRow {
        step,
        loss_mse,
        loss_size,
        eval_corr: report.correlation,
        card_acc: report.card_acc,
    };
    Ok((row, report))
}

/// Trains on a seeded stream of random sets, measuring at step 0, every
/// `eval_every` steps and at the end.
pub fn train_model(cfg: &RunConfig, mut on_row: impl FnMut(&MetricRow)) -> Result<TrainOutcome> {
    let model = PisaModel::new(cfg.pisa_config(), derive_seed(cfg.seed, Stream::Init))?;
    let mut trainer = Trainer::new(model, cfg.lr as f32, cfg.recon.into());
    let mut data = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::Data));
    let held_out = eval_batch(cfg);
    let held_refs = held_out.refs();

    let (row, mut report) = measure(&trainer.model, 0, &held_refs, cfg.recon)?;
    on_row(&row);
    let mut rows = vec![row];
    for step in 1..=cfg.steps {
        let batch: Vec<ElementSet<f32>> = (0..cfg.batch_size).map(|_| sample_set(&mut data, cfg.dx, 0, cfg.n_max)).collect();
        trainer.step(&batch.iter().collect::<Vec<_>>())?;
        if step % cfg.eval_every == 0 || step == cfg.steps {
            let (row, r) = measure(&trainer.model, step, &held_refs, cfg.recon)?;
            on_row(&row);
            rows.push(row);
            report = r;
        }
    }
    Ok(TrainOutcome {
        model: trainer.model,
        rows,
        final_eval: report,
    })
}

pub fn write_train_csv(path: &Path, rows: &[MetricRow]) -> Result<std::path::PathBuf> {
    let mut t = Table::create(path.to_path_buf(), &["step", "loss_mse", "loss_size", "eval_corr", "card_acc", "status"])?;
    for r in rows {
        t.row(&[
            r.step.to_string(),
            num(r.loss_mse),
            num(r.loss_size),
            opt(r.eval_corr),
            num(r.card_acc),
            status(&[("eval_corr", r.eval_corr.is_none())]),
        ])?;
    }
    t.finish()
}

fn log_row(tag: &str, r: &MetricRow) {
    eprintln!(
        "[{tag}] step {:>6}  mse {:.5}  size {:.5}  corr {}  card_acc {:.4}",
        r.step,
        r.loss_mse,
        r.loss_size,
        r.eval_corr.map_or("undefined".into(), |c| format!("{c:.5}")),
        r.card_acc
    );
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let outcome = train_model(cfg, |r| log_row(&cfg.experiment, r))?;
    let csv = write_train_csv(&cfg.out.join("train_metrics.csv"), &outcome.rows)?;
    let ckpt_path = cfg.checkpoint_path();
    if let Some(parent) = ckpt_path.parent() {
        crate::output::ensure_dir(parent)?;
    }
    Checkpoint::from_store(&outcome.model.params, cfg.echo())
        .save(&ckpt_path)
        .map_err(|e| CliError::checkpoint(&ckpt_path, e))?;
    let last = outcome.rows.last().expect("step 0 is always measured");
    write_manifest(
        cfg,
        "train",
        &[csv, ckpt_path],
        json!({ "step": last.step, "eval_corr": last.eval_corr, "card_acc": last.card_acc }),
    )?;
    Ok(outcome)
}

/// Rebuilds the model a checkpoint was trained as.
pub fn load_model(cfg: &RunConfig, ckpt: &Checkpoint, path: &Path) -> Result<PisaModel32> {
    let mut model = PisaModel::new(cfg.pisa_config(), 0)?;
    ckpt.restore_into(&mut model.params).map_err(|e| CliError::checkpoint(path, e))?;
    Ok(model)
}

pub fn cmd_eval(cfg: &RunConfig, model: &PisaModel32) -> Result<EvalReport> {
    let batch = eval_batch(cfg);
    let report = evaluate(model, &batch.refs(), natural_matching(cfg.recon))?;

    let mut t = Table::create(
        cfg.out.join("eval_summary.csv"),
        &["sets", "corr", "mse_mean", "mse_sum", "card_acc", "matched_pairs", "status"],
    )?;
    t.row(&[
        batch.len().to_string(),
        opt(report.correlation),
        num(report.mse_mean),
        num(report.mse_sum),
        num(report.card_acc),
        report.matched_pairs.to_string(),
        status(&[("corr", report.correlation.is_none())]),
    ])?;
    let summary = t.finish()?;

    let mut t = Table::create(cfg.out.join("eval_per_cardinality.csv"), &["n", "sets", "corr", "card_acc", "status"])?;
    for r in &report.per_cardinality {
        t.row(&[
            r.n.to_string(),
            r.sets.to_string(),
            opt(r.correlation),
            num(r.card_acc),
            status(&[("corr", r.correlation.is_none())]),
        ])?;
    }
    let per_n = t.finish()?;
    eprintln!(
        "[{}] corr {}  mse_mean {:.6}  card_acc {:.4}",
        cfg.experiment,
        report.correlation.map_or("undefined".into(), |c| format!("{c:.6}")),
        report.mse_mean,
        report.card_acc
    );
    write_manifest(
        cfg,
        "eval",
        &[summary, per_n],
        json!({ "corr": report.correlation, "mse_mean": report.mse_mean, "mse_sum": report.mse_sum, "card_acc": report.card_acc }),
    )?;
    Ok(report)
}

/// The four ablation variants: name, encoder, reconstruction loss.
pub const VARIANTS: [(&str, Encoder, Recon); 4] = [
    ("pisa", Encoder::Keyed, Recon::Correspondence),
    ("no_rho", Encoder::InputOrder, Recon::Correspondence),
    ("hungarian", Encoder::Keyed, Recon::Hungarian),
    ("deepset", Encoder::Deepset, Recon::Correspondence),
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: &'static str,
    /// Under the variant's own matching.
    pub corr: Option<f64>,
    pub corr_hungarian: Option<f64>,
    pub mse_mean: f64,
    pub card_acc: f64,
}

pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::new();
    let mut curves = Table::create(cfg.out.join("ablation_curves.csv"), &["variant", "step", "loss_mse", "eval_corr", "status"])?;
    for (name, encoder, recon) in VARIANTS {
        let vcfg = RunConfig {
            encoder,
            recon,
            ..cfg.clone()
        };
        let outcome = train_model(&vcfg, |r| log_row(name, r))?;
        for r in &outcome.rows {
            curves.row(&[
                name.into(),
                r.step.to_string(),
                num(r.loss_mse),
                opt(r.eval_corr),
                status(&[("eval_corr", r.eval_corr.is_none())]),
            ])?;
        }
        let batch = eval_batch(&vcfg);
        let hung = evaluate(&outcome.model, &batch.refs(), Matching::Hungarian)?;
        rows.push(AblationRow {
            variant: name,
            corr: outcome.final_eval.correlation,
            corr_hungarian: hung.correlation,
            mse_mean: outcome.final_eval.mse_mean,
            card_acc: outcome.final_eval.card_acc,
        });
    }
    let curves = curves.finish()?;

    let mut t = Table::create(
        cfg.out.join("ablation.csv"),
        &["variant", "encoder", "recon", "corr", "corr_hungarian", "mse_mean", "card_acc", "status"],
    )?;
    for (r, (_, encoder, recon)) in rows.iter().zip(VARIANTS) {
        t.row(&[
            r.variant.into(),
            serde_json::to_value(encoder)?.as_str().unwrap_or_default().into(),
            serde_json::to_value(recon)?.as_str().unwrap_or_default().into(),
            opt(r.corr),
            opt(r.corr_hungarian),
            num(r.mse_mean),
            num(r.card_acc),
            status(&[("corr", r.corr.is_none()), ("corr_hungarian", r.corr_hungarian.is_none())]),
        ])?;
    }
    let table = t.finish()?;
    let results: serde_json::Map<String, serde_json::Value> = rows.iter().map(|r| (r.variant.to_string(), json!(r.corr))).collect();
    write_manifest(cfg, "ablate", &[table, curves], serde_json::Value::Object(results))?;
    Ok(rows)
}
