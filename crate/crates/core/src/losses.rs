//! Reconstruction and cardinality losses, plus matching-based set losses.
//!
//! The autoencoder trains with [`correspondence_mse`] (targets fixed by the
//! key assignment) and [`size_loss`]. [`hungarian_loss`] and
//! [`chamfer_loss`] need no correspondence and back the ablation and the
//! metrics.

use crate::assignment::{hungarian, Assignment};
use crate::error::{dim_err, Error, Result};
use crate::model::{KeyAssignment, LatentState, PisaModel};
use crate::scalar::Scalar;
use crate::set::{sq_dist, ElementSet};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Mean squared error between `x_hat` (in key order) and the inputs that were
/// assigned those keys, averaged over elements and features.
pub fn correspondence_mse<T: Scalar>(x: &ElementSet<T>, x_hat: &ElementSet<T>, keys: &KeyAssignment) -> Result<T> {
    if x.len() != x_hat.len() || keys.len() != x.len() {
        return Err(Error::Contract(format!(
            "correspondence_mse needs equal sizes, got |X| = {}, |X̂| = {}, {} keys",
            x.len(),
            x_hat.len(),
            keys.len()
        )));
    }
    if x.dim() != x_hat.dim() {
        return Err(dim_err("correspondence_mse", x.dim(), x_hat.dim()));
    }
    if x.is_empty() {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    for (i, &k) in keys.keys().iter().enumerate() {
        if k == 0 || k > x_hat.len() {
            return Err(Error::Contract(format!("key {k} outside 1..={}", x_hat.len())));
        }
        total += sq_dist(x.get(i), x_hat.get(k - 1));
    }
    Ok(total / T::from_usize_lossy(x.len() * x.dim()))
}

/// `mean((pred − target)²)` on the tape.
pub fn mse_tape<T: Scalar>(tape: &mut Tape<'_, T>, pred: Var, target: Var) -> Result<Var> {
    let d = tape.sub(pred, target)?;
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}

/// `(n − raw)²` for one set.
pub fn size_loss<T: Scalar>(n: usize, raw: T) -> T {
    let d = T::from_usize_lossy(n) - raw;
    d * d
}

/// [`size_loss`] evaluated through the model's cardinality head.
pub fn size_loss_of<T: Scalar>(n: usize, z: &LatentState<T>, model: &PisaModel<T>) -> Result<T> {
    Ok(size_loss(n, model.cardinality_raw(z)?))
}

/// Batch mean of `(n_b − raw_b)²` on the tape; `raw` is `[B × 1]`.
pub fn size_loss_tape<T: Scalar>(tape: &mut Tape<'_, T>, raw: Var, counts: &[usize]) -> Result<Var> {
    let target = tape.constant(Tensor::matrix(
        counts.len(),
        1,
        counts.iter().map(|&n| T::from_usize_lossy(n)).collect(),
    )?);
    mse_tape(tape, raw, target)
}

/// Squared-distance cost matrix, rows from `a`, columns from `b`.
pub fn sq_cost_matrix<T: Scalar>(a: &ElementSet<T>, b: &ElementSet<T>) -> Vec<Vec<f64>> {
    a.iter().map(|x| b.iter().map(|y| sq_dist(x, y).as_f64()).collect()).collect()
}

/// Minimum-cost matching of targets (rows) to predictions (columns).
pub fn hungarian_match<T: Scalar>(x: &ElementSet<T>, x_hat: &ElementSet<T>) -> Result<Assignment> {
    if x.len() != x_hat.len() {
        return Err(Error::Contract(format!("hungarian_loss needs equal sizes, got {} and {}", x.len(), x_hat.len())));
    }
    if x.dim() != x_hat.dim() {
        return Err(dim_err("hungarian_loss", x.dim(), x_hat.dim()));
    }
    hungarian(&sq_cost_matrix(x, x_hat))
}

/// `min_P ||P·X − X̂||²`, summed over matched pairs.
pub fn hungarian_loss<T: Scalar>(x: &ElementSet<T>, x_hat: &ElementSet<T>) -> Result<T> {
    let a = hungarian_match(x, x_hat)?;
    Ok(a.pairs().map(|(i, j)| sq_dist(x.get(i), x_hat.get(j))).sum())
}

/// Targets permuted so that row `j` is the ground-truth element matched to
/// prediction `j`. The matching is a constant for differentiation.
pub fn hungarian_targets<T: Scalar>(x: &ElementSet<T>, x_hat: &ElementSet<T>) -> Result<ElementSet<T>> {
    let a = hungarian_match(x, x_hat)?;
    let mut col_to_row = vec![0; a.len()];
    for (i, j) in a.pairs() {
        col_to_row[j] = i;
    }
    Ok(x.permuted(&col_to_row))
}

/// [`hungarian_loss`] on the tape; `x_hat` is `[n × dx]`.
pub fn hungarian_loss_tape<T: Scalar>(tape: &mut Tape<'_, T>, x: &ElementSet<T>, x_hat: Var) -> Result<Var> {
    let pred = ElementSet::from_flat(x.dim(), tape.value(x_hat).to_vec())?;
    let target = hungarian_targets(x, &pred)?;
    let t = tape.constant(Tensor::matrix(target.len(), x.dim(), target.as_flat().to_vec())?);
    let d = tape.sub(x_hat, t)?;
    let sq = tape.square(d);
    Ok(tape.sum(sq))
}

fn nearest<T: Scalar>(p: &[T], set: &ElementSet<T>) -> (usize, T) {
    set.iter()
        .enumerate()
        .map(|(i, q)| (i, sq_dist(p, q)))
        .fold((0, T::infinity()), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Symmetric nearest-neighbour squared distance between two nonempty sets.
pub fn chamfer_loss<T: Scalar>(x: &ElementSet<T>, x_hat: &ElementSet<T>) -> Result<T> {
    if x.is_empty() || x_hat.is_empty() {
        return Err(Error::Contract("chamfer_loss needs nonempty sets".into()));
    }
    if x.dim() != x_hat.dim() {
        return Err(dim_err("chamfer_loss", x.dim(), x_hat.dim()));
    }
    let forward: T = x.iter().map(|p| nearest(p, x_hat).1).sum();
    let backward: T = x_hat.iter().map(|q| nearest(q, x).1).sum();
    Ok(forward + backward)
}

/// [`chamfer_loss`] on the tape with constant targets `x`; nearest
/// neighbours are chosen on the current values and held fixed.
pub fn chamfer_loss_tape<T: Scalar>(tape: &mut Tape<'_, T>, x: &ElementSet<T>, x_hat: Var) -> Result<Var> {
    let pred = ElementSet::from_flat(x.dim(), tape.value(x_hat).to_vec())?;
    if x.is_empty() || pred.is_empty() {
        return Err(Error::Contract("chamfer_loss needs nonempty sets".into()));
    }
    let dx = x.dim();
    let to_pred: Vec<usize> = x.iter().map(|p| nearest(p, &pred).0).collect();
    let to_target: Vec<usize> = pred.iter().map(|q| nearest(q, x).0).collect();

    let xt = tape.constant(Tensor::matrix(x.len(), dx, x.as_flat().to_vec())?);
    let picked = tape.gather_rows(x_hat, &to_pred)?;
    let d1 = tape.sub(xt, picked)?;
    let s1 = tape.square(d1);
    let s1 = tape.sum(s1);

    let nn = x.permuted(&to_target);
    let nt = tape.constant(Tensor::matrix(nn.len(), dx, nn.as_flat().to_vec())?);
    let d2 = tape.sub(x_hat, nt)?;
    let s2 = tape.square(d2);
    let s2 = tape.sum(s2);
    tape.add(s1, s2)
}

/// `L_mse + L_size` for one set: reconstruction under key correspondence plus
/// the cardinality error of `z`.
pub fn total_loss<T: Scalar>(
    x: &ElementSet<T>,
    z: &LatentState<T>,
    x_hat: &ElementSet<T>,
    keys: &KeyAssignment,
    model: &PisaModel<T>,
) -> Result<T> {
    Ok(correspondence_mse(x, x_hat, keys)? + size_loss_of(x.len(), z, model)?)
}
