//! Latent interpolation traces and their arc length.

use crate::assignment::hungarian;
use crate::error::{Error, Result};
use crate::model::{LatentState, PisaModel};
use crate::scalar::Scalar;
use crate::set::{sq_dist, ElementSet};

/// Decoded sets along the straight line between two latents.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationTrace<T> {
    /// Ascending, from 0 to 1.
    pub alphas: Vec<f64>,
    /// Decoded set per alpha, in key order.
    pub sets: Vec<ElementSet<T>>,
}

/// Decodes `(1 − α)·z0 + α·z1` on a uniform grid of `k` points.
pub fn interpolate_decode<T: Scalar>(
    model: &PisaModel<T>,
    z0: &LatentState<T>,
    z1: &LatentState<T>,
    k: usize,
    forced_n: Option<usize>,
) -> Result<InterpolationTrace<T>> {
    if k < 2 {
        return Err(Error::Contract(format!("interpolation needs at least 2 grid points, got {k}")));
    }
    let alphas: Vec<f64> = (0..k).map(|i| i as f64 / (k - 1) as f64).collect();
    let latents: Vec<LatentState<T>> = alphas
        .iter()
        .map(|&a| {
            // exact endpoints, independent of lerp rounding
            if a == 0.0 {
                Ok(LatentState::from_vec(z0.z.clone()))
            } else if a == 1.0 {
                Ok(LatentState::from_vec(z1.z.clone()))
            } else {
                z0.lerp(z1, T::lit(a))
            }
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&LatentState<T>> = latents.iter().collect();
    let forced = forced_n.map(|n| vec![n; k]);
    let sets = model.decode_batch(&refs, forced.as_deref())?;
    Ok(InterpolationTrace { alphas, sets })
}

impl<T: Scalar> InterpolationTrace<T> {
    fn fixed_cardinality(&self) -> Result<usize> {
        let n = self.sets.first().map_or(0, |s| s.len());
        if self.sets.iter().any(|s| s.len() != n) {
            return Err(Error::Contract("cardinality drifts along the trace; decode with a forced cardinality".into()));
        }
        Ok(n)
    }

    /// Piecewise-linear path length summed over elements, matched by key.
    pub fn arc_length(&self) -> Result<f64> {
        let n = self.fixed_cardinality()?;
        let mut total = 0.0;
        for w in self.sets.windows(2) {
            for i in 0..n {
                total += sq_dist(w[0].get(i), w[1].get(i)).as_f64().sqrt();
            }
        }
        Ok(total)
    }

    /// Minimum assignment length between the decoded endpoints.
    pub fn endpoint_baseline(&self) -> Result<f64> {
        self.fixed_cardinality()?;
        match (self.sets.first(), self.sets.last()) {
            (Some(a), Some(b)) => min_assignment_length(a, b),
            _ => Ok(0.0),
        }
    }
}

/// Total Euclidean distance of the cheapest one-to-one matching.
pub fn min_assignment_length<T: Scalar>(x0: &ElementSet<T>, x1: &ElementSet<T>) -> Result<f64> {
    if x0.len() != x1.len() {
        return Err(Error::Contract(format!("min_assignment_length needs equal sizes, got {} and {}", x0.len(), x1.len())));
    }
    let cost: Vec<Vec<f64>> = x0
        .iter()
        .map(|a| x1.iter().map(|b| sq_dist(a, b).as_f64().sqrt()).collect())
        .collect();
    Ok(hungarian(&cost)?.cost)
}
