use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, Result};
use crate::nn::Mlp;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::set::ElementSet;
use crate::tape::{sigmoid, Tape, Var};
use crate::tensor::Tensor;

use super::TaggedSet;

/// Pairs with symmetrized probability above this are merged.
pub const DUPLICATE_THRESHOLD: f64 = 0.5;

/// Pairwise classifier `g: (a ‖ b) → logit` deciding whether two
/// reconstructed objects are the same.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams<T> {
    pub params: ParamStore<T>,
    pub g: Mlp,
    pub dx: usize,
}

impl<T: Scalar> FilterParams<T> {
    /// `hidden` lists the hidden widths between the `2·dx` input and the logit.
    pub fn new(dx: usize, hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut widths = vec![2 * dx];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let g = Mlp::init(&mut params, "g", &widths, &mut rng);
        Self { params, g, dx }
    }

    /// Logits for `[P × 2dx]` concatenated pairs.
    pub fn logits_tape(&self, tape: &mut Tape<'_, T>, pairs: Var) -> Result<Var> {
        self.g.forward(tape, pairs)
    }

    /// `g(a_i ‖ b_i)` for each row pair.
    pub fn logits(&self, pairs: &[T]) -> Result<Vec<T>> {
        let width = 2 * self.dx;
        if pairs.len() % width != 0 {
            return Err(dim_err("filter logits", format!("rows of width {width}"), pairs.len()));
        }
        let mut tape = Tape::with_params(&self.params);
        let x = tape.constant(Tensor::matrix(pairs.len() / width, width, pairs.to_vec())?);
        let out = self.logits_tape(&mut tape, x)?;
        Ok(tape.value(out).to_vec())
    }

    /// Symmetrized probabilities for pairs given as concatenated `2·dx` rows.
    pub fn symmetric_probs(&self, pairs: &[Vec<T>]) -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        let dx = self.dx;
        let mut rows = Vec::with_capacity(pairs.len() * 4 * dx);
        for r in pairs {
            if r.len() != 2 * dx {
                return Err(dim_err("symmetric_probs", 2 * dx, r.len()));
            }
            rows.extend_from_slice(r);
        }
        for r in pairs {
            rows.extend_from_slice(&r[dx..]);
            rows.extend_from_slice(&r[..dx]);
        }
        let l = self.logits(&rows)?;
        let k = pairs.len();
        Ok((0..k)
            .map(|i| 0.5 * (sigmoid(l[i]).as_f64() + sigmoid(l[k + i]).as_f64()))
            .collect())
    }

    /// Symmetrized duplicate probability for every ordered pair of `elems`:
    /// `p[i][j] = (σ(g(e_i ‖ e_j)) + σ(g(e_j ‖ e_i))) / 2`.
    pub fn pair_matrix(&self, elems: &ElementSet<T>) -> Result<Vec<Vec<f64>>> {
        if elems.dim() != self.dx {
            return Err(dim_err("filter", self.dx, elems.dim()));
        }
        let m = elems.len();
        let mut rows = Vec::with_capacity(m * m * 2 * self.dx);
        for i in 0..m {
            for j in 0..m {
                rows.extend_from_slice(elems.get(i));
                rows.extend_from_slice(elems.get(j));
            }
        }
        let logits = if m == 0 { Vec::new() } else { self.logits(&rows)? };
        let prob = |i: usize, j: usize| sigmoid(logits[i * m + j]).as_f64();
        Ok((0..m)
            .map(|i| (0..m).map(|j| 0.5 * (prob(i, j) + prob(j, i))).collect())
            .collect())
    }
}

/// Symmetrized probability that `a` and `b` are the same object.
pub fn pair_same_prob<T: Scalar>(a: &[T], b: &[T], filter: &FilterParams<T>) -> Result<f64> {
    if a.len() != filter.dx || b.len() != filter.dx {
        return Err(dim_err("pair_same_prob", filter.dx, a.len().max(b.len())));
    }
    let mut rows = a.to_vec();
    rows.extend_from_slice(b);
    rows.extend_from_slice(b);
    rows.extend_from_slice(a);
    let l = filter.logits(&rows)?;
    Ok(0.5 * (sigmoid(l[0]).as_f64() + sigmoid(l[1]).as_f64()))
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Keeps the smaller index as root.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Merges several sets, collapsing elements the filter judges identical.
///
/// Elements are linked when their symmetrized probability exceeds
/// [`DUPLICATE_THRESHOLD`]; each connected component keeps the element that
/// comes first (lowest set index, then lowest position). If more than `n_max`
/// components remain, the largest ones are kept. Output follows the order of
/// the kept representatives.
pub fn filter_union<T: Scalar>(sets: &[&TaggedSet<T>], filter: &FilterParams<T>, n_max: usize) -> Result<TaggedSet<T>> {
    let mut all = ElementSet::empty(filter.dx);
    let mut ids = Vec::new();
    for s in sets {
        if s.set.dim() != filter.dx {
            return Err(dim_err("filter_union", filter.dx, s.set.dim()));
        }
        for (e, id) in s.set.iter().zip(&s.ids) {
            all.push(e)?;
            ids.push(*id);
        }
    }
    let m = all.len();
    let p = filter.pair_matrix(&all)?;
    let mut ds = DisjointSets::new(m);
    for i in 0..m {
        for j in i + 1..m {
            if p[i][j] > DUPLICATE_THRESHOLD {
                ds.union(i, j);
            }
        }
    }
    let mut size = vec![0usize; m];
    for i in 0..m {
        size[ds.find(i)] += 1;
    }
    // roots are component minima, i.e. the representatives
    let mut reps: Vec<usize> = (0..m).filter(|&i| ds.find(i) == i).collect();
    if reps.len() > n_max {
        reps.sort_by(|&a, &b| size[b].cmp(&size[a]).then(a.cmp(&b)));
        reps.truncate(n_max);
        reps.sort_unstable();
    }
    let mut out = TaggedSet::empty(filter.dx);
    for r in reps {
        out.set.push(all.get(r))?;
        out.ids.push(ids[r]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_set;

    /// A hand-built filter: logit = 20 − 1000·Σ|a_k − b_k|, from relu
    /// features over ±(a − b).
    fn sharp_filter(dx: usize) -> FilterParams<f64> {
        let mut f = FilterParams::<f64>::new(dx, &[2 * dx], 0);
        let ids: Vec<_> = f.params.ids().collect();
        // layer 0: rows ±(e_k, −e_k)
        let mut w0 = vec![0.0; 2 * dx * 2 * dx];
        for k in 0..dx {
            w0[(2 * k) * 2 * dx + k] = 1.0;
            w0[(2 * k) * 2 * dx + dx + k] = -1.0;
            w0[(2 * k + 1) * 2 * dx + k] = -1.0;
            w0[(2 * k + 1) * 2 * dx + dx + k] = 1.0;
        }
        f.params.get_mut(ids[0]).data_mut().copy_from_slice(&w0);
        f.params.get_mut(ids[1]).data_mut().fill(0.0);
        // layer 1: logit = 20 − 1000·Σ|a_k − b_k|
        f.params.get_mut(ids[2]).data_mut().fill(-1000.0);
        f.params.get_mut(ids[3]).data_mut().fill(20.0);
        f
    }

    fn tagged(set: ElementSet<f64>, first_id: usize) -> TaggedSet<f64> {
        let ids = (first_id..first_id + set.len()).map(Some).collect();
        TaggedSet { set, ids }
    }

    #[test]
    fn untrained_probability_is_in_open_unit_interval() {
        let f = FilterParams::<f64>::new(3, &[16], 7);
        let p = pair_same_prob(&[0.1, 0.2, 0.3], &[-1.0, 0.5, 2.0], &f).unwrap();
        assert!(p > 0.0 && p < 1.0);
        let q = pair_same_prob(&[-1.0, 0.5, 2.0], &[0.1, 0.2, 0.3], &f).unwrap();
        assert!((p - q).abs() < 1e-15);
    }

    #[test]
    fn single_distinct_set_is_unchanged() {
        let f = sharp_filter(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = tagged(sample_set(&mut rng, 3, 6, 6), 0);
        assert_eq!(filter_union(&[&s], &f, 16).unwrap(), s);
    }

    #[test]
    fn two_copies_collapse_to_one() {
        let f = sharp_filter(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = tagged(sample_set(&mut rng, 3, 5, 5), 0);
        let out = filter_union(&[&s, &s], &f, 16).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn noisy_copies_keep_first_representatives() {
        let f = sharp_filter(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let base: ElementSet<f64> = sample_set(&mut rng, 4, 4, 4);
        let noisy = |rng: &mut ChaCha8Rng| {
            let noise: ElementSet<f64> = sample_set(rng, 4, 4, 4);
            let data = base.as_flat().iter().zip(noise.as_flat()).map(|(a, n)| a + 1e-3 * n).collect();
            tagged(ElementSet::from_flat(4, data).unwrap(), 0)
        };
        let copies: Vec<_> = (0..3).map(|_| noisy(&mut rng)).collect();
        let refs: Vec<_> = copies.iter().collect();
        let out = filter_union(&refs, &f, 16).unwrap();
        assert_eq!(out.set.len(), 4);
        assert_eq!(out, copies[0]);
        for (o, b) in out.set.iter().zip(base.iter()) {
            assert!(o.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-2));
        }
    }

    #[test]
    fn disjoint_sets_are_concatenated_and_capped() {
        let f = sharp_filter(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = tagged(sample_set(&mut rng, 2, 3, 3), 0);
        let b = tagged(sample_set(&mut rng, 2, 4, 4), 3);
        let out = filter_union(&[&a, &b], &f, 16).unwrap();
        assert_eq!(out.set, a.set.union(&b.set).unwrap());
        assert_eq!(out.ids, (0..7).map(Some).collect::<Vec<_>>());

        // cap at 4: the duplicated element of `a` forms the largest component
        let dup = tagged(ElementSet::from_flat(2, a.set.get(2).to_vec()).unwrap(), 2);
        let capped = filter_union(&[&a, &b, &dup], &f, 4).unwrap();
        assert_eq!(capped.set.len(), 4);
        assert!(capped.ids.contains(&Some(2)));
        assert_eq!(capped.ids, vec![Some(0), Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn union_is_idempotent() {
        let f = FilterParams::<f64>::new(3, &[8], 11);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = tagged(sample_set(&mut rng, 3, 5, 5), 0);
        let b = tagged(sample_set(&mut rng, 3, 5, 5), 5);
        let once = filter_union(&[&a, &b], &f, 16).unwrap();
        let twice = filter_union(&[&once], &f, 16).unwrap();
        assert_eq!(once, twice);
    }
}
