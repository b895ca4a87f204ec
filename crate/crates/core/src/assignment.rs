//! Minimum-cost assignment (Hungarian / Kuhn-Munkres, O(n³)).

use crate::error::{Error, Result};

/// A matching of rows to columns and its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `row_to_col[i]` is the column matched with row `i`.
    pub row_to_col: Vec<usize>,
    /// Sum of the matched costs, accumulated in row order.
    pub cost: f64,
}

impl Assignment {
    pub fn len(&self) -> usize {
        self.row_to_col.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_to_col.is_empty()
    }

    /// Pairs `(row, col)` in row order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col.iter().copied().enumerate()
    }
}

/// Solves the square assignment problem exactly.
///
/// `cost` must be `n × n` with finite entries. Rows are inserted in index
/// order, so among equal-cost optima the result is deterministic.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    let n = cost.len();
    if let Some(bad) = cost.iter().position(|r| r.len() != n) {
        return Err(Error::Contract(format!(
            "hungarian needs a square matrix; row {bad} has {} entries for {n} rows",
            cost[bad].len()
        )));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Contract("hungarian needs finite costs".into()));
    }
    let row_to_col = solve(n, |i, j| cost[i][j]);
    let total = row_to_col.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok(Assignment { row_to_col, cost: total })
}

/// Minimum-cost matching of `min(rows, cols)` pairs in a rectangular matrix
/// (zero-padded to square). Only real pairs are returned, as `(row, col)`.
pub fn assign_rectangular(cost: &[Vec<f64>], cols: usize) -> Result<Vec<(usize, usize)>> {
    let rows = cost.len();
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::Contract("ragged cost matrix".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Contract("assignment needs finite costs".into()));
    }
    let n = rows.max(cols);
    let p = solve(n, |i, j| if i < rows && j < cols { cost[i][j] } else { 0.0 });
    Ok(p.into_iter()
        .enumerate()
        .filter(|&(i, j)| i < rows && j < cols)
        .collect())
}

/// Shortest augmenting path with dual potentials (1-based internally).
fn solve(n: usize, c: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    // p[j]: row matched to column j (0 = none); way[j]: previous column on the path
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}
