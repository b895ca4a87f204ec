//! Reconstruction metrics: pooled Pearson correlation, MSE in both
//! conventions, cardinality accuracy and a per-cardinality breakdown.

use crate::assignment::assign_rectangular;
use crate::error::{Error, Result};
use crate::losses::sq_cost_matrix;
use crate::model::PisaModel;
use crate::scalar::Scalar;
use crate::set::ElementSet;
use crate::tape::Tape;

/// Pearson correlation of two equally long samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!("correlation needs equal lengths, got {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Undefined("correlation of fewer than two values"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined("correlation with zero variance"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Fraction of sets whose predicted cardinality is exact.
pub fn cardinality_accuracy(true_n: &[usize], predicted: &[usize]) -> f64 {
    if true_n.is_empty() {
        return 1.0;
    }
    let hits = true_n.iter().zip(predicted).filter(|(a, b)| a == b).count();
    hits as f64 / true_n.len() as f64
}

/// How decoded elements are paired with ground truth for the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Matching {
    /// Output key `i` against the input assigned key `i`.
    #[default]
    KeyCorrespondence,
    /// Minimum squared-distance assignment.
    Hungarian,
}

/// Correlation for the sets of one cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct CardinalityRow {
    pub n: usize,
    pub sets: usize,
    pub correlation: Option<f64>,
    pub card_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Pooled over every matched (element, feature) scalar; `None` when undefined.
    pub correlation: Option<f64>,
    /// Mean squared error per matched scalar.
    pub mse_mean: f64,
    /// Squared error summed over the matched elements of a set, averaged over sets.
    pub mse_sum: f64,
    pub card_acc: f64,
    pub per_cardinality: Vec<CardinalityRow>,
    pub matched_pairs: usize,
}

/// Evaluates reconstruction at the predicted cardinality.
///
/// Decoded sets are compared on `min(n, n̂)` matched pairs; with
/// [`Matching::KeyCorrespondence`] these are the first keys.
pub fn evaluate<T: Scalar>(model: &PisaModel<T>, sets: &[&ElementSet<T>], matching: Matching) -> Result<EvalReport> {
    const CHUNK: usize = 256;
    let n_max = model.config.n_max;
    let dx = model.config.dx;
    let mut truth_all = Vec::new();
    let mut pred_all = Vec::new();
    let mut by_n: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); n_max + 1];
    let mut sets_by_n = vec![0usize; n_max + 1];
    let mut hits_by_n = vec![0usize; n_max + 1];
    let mut true_counts = Vec::with_capacity(sets.len());
    let mut pred_counts = Vec::with_capacity(sets.len());
    let mut sq_sum_total = 0.0;
    let mut pairs_total = 0usize;

    for chunk in sets.chunks(CHUNK) {
        let input = model.prepare(chunk)?;
        let mut tape = Tape::with_params(&model.params);
        let z = model.encode_tape(&mut tape, &input)?;
        let raw = model.cardinality_tape(&mut tape, z)?;
        let n_hat: Vec<usize> = tape.value(raw).iter().map(|&r| model.round_cardinality(r)).collect();
        let out = model.decode_tape(&mut tape, z, &n_hat)?;
        let pv = tape.value(out);

        let (mut at_true, mut at_pred) = (0usize, 0usize);
        for (b, &n) in input.counts.iter().enumerate() {
            let m = n_hat[b];
            let truth = &input.rows[at_true * dx..(at_true + n) * dx];
            let pred = &pv[at_pred * dx..(at_pred + m) * dx];
            let pairs: Vec<(usize, usize)> = match matching {
                Matching::KeyCorrespondence => (0..n.min(m)).map(|i| (i, i)).collect(),
                Matching::Hungarian => {
                    let t = ElementSet::from_flat(dx, truth.to_vec())?;
                    let p = ElementSet::from_flat(dx, pred.to_vec())?;
                    assign_rectangular(&sq_cost_matrix(&t, &p), m)?
                }
            };
            let bucket = &mut by_n[n.min(n_max)];
            for (i, j) in pairs.iter().copied() {
                for f in 0..dx {
                    let t = truth[i * dx + f].as_f64();
                    let p = pred[j * dx + f].as_f64();
                    truth_all.push(t);
                    pred_all.push(p);
                    bucket.0.push(t);
                    bucket.1.push(p);
                    sq_sum_total += (t - p) * (t - p);
                }
            }
            pairs_total += pairs.len();
            sets_by_n[n.min(n_max)] += 1;
            if m == n {
                hits_by_n[n.min(n_max)] += 1;
            }
            true_counts.push(n);
            pred_counts.push(m);
            at_true += n;
            at_pred += m;
        }
    }

    let scalars = truth_all.len();
    let per_cardinality = (0..=n_max)
        .map(|n| CardinalityRow {
            n,
            sets: sets_by_n[n],
            correlation: pearson(&by_n[n].0, &by_n[n].1).ok(),
            card_acc: if sets_by_n[n] == 0 { 0.0 } else { hits_by_n[n] as f64 / sets_by_n[n] as f64 },
        })
        .collect();
    Ok(EvalReport {
        correlation: pearson(&truth_all, &pred_all).ok(),
        mse_mean: if scalars == 0 { 0.0 } else { sq_sum_total / scalars as f64 },
        mse_sum: if sets.is_empty() { 0.0 } else { sq_sum_total / sets.len() as f64 },
        card_acc: cardinality_accuracy(&true_counts, &pred_counts),
        per_cardinality,
        matched_pairs: pairs_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SetBatch;
    use crate::model::PisaConfig;

    #[test]
    fn correlation_examples() {
        let a = [0.3, -1.0, 2.5, 4.0];
        assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);

        // textbook formula on (1,2,3) vs (1,2,4): means 2 and 7/3,
        // Σdxdy = 3, Σdx² = 2, Σdy² = 14/3, r = 3/√(28/3)
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 3.0 / (28.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn correlation_errors() {
        assert!(matches!(pearson(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::Undefined(_))));
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn correlation_is_affine_invariant() {
        let a = [0.5, 1.5, -2.0, 3.25, 0.0];
        let b = [1.0, 1.1, -1.5, 2.0, 0.3];
        let r = pearson(&a, &b).unwrap();
        let sa: Vec<f64> = a.iter().map(|v| 3.0 * v + 7.0).collect();
        let sb: Vec<f64> = b.iter().map(|v| 3.0 * v + 7.0).collect();
        assert!((pearson(&sa, &sb).unwrap() - r).abs() < 1e-9);
    }

    #[test]
    fn cardinality_accuracy_examples() {
        assert_eq!(cardinality_accuracy(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(cardinality_accuracy(&[1, 2], &[0, 0]), 0.0);
        assert_eq!(cardinality_accuracy(&[1, 2, 3, 4], &[1, 2, 3, 5]), 0.75);
    }

    #[test]
    fn evaluation_covers_every_cardinality() {
        let m = PisaModel::<f32>::new(PisaConfig::new(3, 16, 5), 0).unwrap();
        let batch = SetBatch::<f32>::generate(0, 40, 3, 0..=5);
        let report = evaluate(&m, &batch.refs(), Matching::KeyCorrespondence).unwrap();
        assert_eq!(report.per_cardinality.len(), 6);
        assert_eq!(report.per_cardinality.iter().map(|r| r.sets).sum::<usize>(), 40);
        assert!(report.per_cardinality[0].correlation.is_none());
        assert!((0.0..=1.0).contains(&report.card_acc));
    }
}
