use pisa_core::data::sample_set;
use pisa_core::interpolate::{interpolate_decode, min_assignment_length, InterpolationTrace};
use pisa_core::set::ElementSet;
use pisa_core::PisaModel32;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{derive_seed, RunConfig, Stream};
use crate::error::Result;
use crate::output::{num, opt, status, write_manifest, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub arc_length: f64,
    /// Minimum assignment length between the two input sets.
    pub baseline: f64,
    /// `None` when the baseline is zero.
    pub ratio: Option<f64>,
    /// Arc length on a grid with half the step.
    pub arc_length_fine: f64,
    /// Whether the trace endpoints equal direct decodes of `z0` and `z1`.
    pub endpoints_match: bool,
}

/// Interpolates between the encodings of `x0` and `x1` (equal sizes) on a `k`-point grid.
pub fn interpolation_trial(
    model: &PisaModel32,
    trial: usize,
    x0: &ElementSet<f32>,
    x1: &ElementSet<f32>,
    k: usize,
) -> Result<(TrialRow, InterpolationTrace<f32>)> {
    let n = x0.len();
    let z0 = model.encode(x0, 0)?;
    let z1 = model.encode(x1, 0)?;
    let trace = interpolate_decode(model, &z0, &z1, k, Some(n))?;
    let fine = interpolate_decode(model, &z0, &z1, 2 * k - 1, Some(n))?;
    let arc_length = trace.arc_length()?;
    let baseline = min_assignment_length(x0, x1)?;
    let endpoints_match = trace.sets[0] == model.decode(&z0, Some(n))? && trace.sets[k - 1] == model.decode(&z1, Some(n))?;
    let row = TrialRow {
        trial,
        arc_length,
        baseline,
        ratio: (baseline > 0.0).then(|| arc_length / baseline),
        arc_length_fine: fine.arc_length()?,
        endpoints_match,
    };
    Ok((row, trace))
}

pub fn cmd_interpolate(cfg: &RunConfig, model: &PisaModel32) -> Result<Vec<TrialRow>> {
    cfg.check_interpolate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stream::Interpolate));
    let n = cfg.interp_n;
    let mut rows = Vec::with_capacity(cfg.interp_trials);
    let mut table = Table::create(
        cfg.out.join("interpolate.csv"),
        &["trial", "arc_length", "baseline", "ratio", "arc_length_fine", "endpoints_match", "status"],
    )?;
    let mut trace_table = None;
    for trial in 0..cfg.interp_trials {
        let x0 = sample_set(&mut rng, cfg.dx, n, n);
        let x1 = sample_set(&mut rng, cfg.dx, n, n);
        let (row, trace) = interpolation_trial(model, trial, &x0, &x1, cfg.grid_k)?;
        table.row(&[
            trial.to_string(),
            num(row.arc_length),
            num(row.baseline),
            opt(row.ratio),
            num(row.arc_length_fine),
            u8::from(row.endpoints_match).to_string(),
            status(&[("ratio", row.ratio.is_none())]),
        ])?;
        if trial == 0 {
            trace_table = Some(write_trace(cfg, &x0, &x1, &trace)?);
        }
        rows.push(row);
    }
    let table = table.finish()?;

    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let mean_ratio = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
    eprintln!(
        "[{}] {} trials  mean ratio {}",
        cfg.experiment,
        rows.len(),
        mean_ratio.map_or("undefined".into(), |r| format!("{r:.4}"))
    );
    let mut outputs = vec![table];
    outputs.extend(trace_table);
    write_manifest(
        cfg,
        "interpolate",
        &outputs,
        json!({
            "trials": rows.len(),
            "mean_ratio": mean_ratio,
            "all_endpoints_match": rows.iter().all(|r| r.endpoints_match),
        }),
    )?;
    Ok(rows)
}

/// Trial 0 in full: the two input sets, then the decoded set at every alpha.
fn write_trace(cfg: &RunConfig, x0: &ElementSet<f32>, x1: &ElementSet<f32>, trace: &InterpolationTrace<f32>) -> Result<std::path::PathBuf> {
    let mut header = vec!["kind".to_string(), "alpha".into(), "element".into()];
    header.extend((0..cfg.dx).map(|f| format!("x{f}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::create(cfg.out.join("interpolate_trace.csv"), &header)?;
    let mut put = |kind: &str, alpha: f64, set: &ElementSet<f32>| -> Result<()> {
        for (i, e) in set.iter().enumerate() {
            let mut rec = vec![kind.to_string(), num(alpha), i.to_string()];
            rec.extend(e.iter().map(|&v| num(f64::from(v))));
            t.row(&rec)?;
        }
        Ok(())
    };
    put("input", 0.0, x0)?;
    put("input", 1.0, x1)?;
    for (a, s) in trace.alphas.iter().zip(&trace.sets) {
        put("decoded", *a, s)?;
    }
    t.finish()
}
