use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{evaluate, pearson, Matching};
use crate::model::{LatentState, PisaModel};
use crate::scalar::Scalar;
use crate::set::{sq_dist, ElementSet};

use super::filter::{filter_union, FilterParams, DUPLICATE_THRESHOLD};
use super::world::{generate_world, World, WorldConfig};
use super::TaggedSet;

/// An object counts as recovered when some element is within this of it in
/// every feature.
pub const COVERAGE_TOLERANCE: f64 = 0.1;

/// The shared set autoencoder and duplicate filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionSystem<T> {
    pub pisa: PisaModel<T>,
    pub filter: FilterParams<T>,
}

/// One agent after one round.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBelief<T> {
    pub layer: usize,
    /// The set this agent encoded in this round.
    pub encoded: TaggedSet<T>,
    pub z: LatentState<T>,
    /// `decode(z)` at the predicted cardinality; what neighbours receive.
    pub belief: TaggedSet<T>,
}

/// `layers[l][i]` is agent `i` after round `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout<T> {
    pub layers: Vec<Vec<AgentBelief<T>>>,
}

impl<T: Scalar> Rollout<T> {
    /// Decoded sets agent `i` merges in round `l ≥ 1`: its own, then its
    /// neighbours' in ascending order.
    pub fn incoming<'r>(&'r self, world: &World<T>, l: usize, i: usize) -> Vec<&'r TaggedSet<T>> {
        let prev = &self.layers[l - 1];
        std::iter::once(i)
            .chain(world.comm[i].iter().copied())
            .map(|j| &prev[j].belief)
            .collect()
    }
}

/// Decodes latents at their predicted cardinality; output `k` inherits the id
/// of the source element that held key `k + 1`.
fn decode_tagged<T: Scalar>(
    pisa: &PisaModel<T>,
    zs: &[&LatentState<T>],
    sources: &[&TaggedSet<T>],
) -> Result<Vec<TaggedSet<T>>> {
    let decoded = pisa.decode_batch(zs, None)?;
    decoded
        .into_iter()
        .zip(sources)
        .map(|(set, src)| {
            let order = pisa.keys_for(&src.set)?.elements_by_key();
            let ids = (0..set.len()).map(|k| order.get(k).and_then(|&e| src.ids[e])).collect();
            Ok(TaggedSet { set, ids })
        })
        .collect()
}

fn encode_and_decode<T: Scalar>(sys: &FusionSystem<T>, layer: usize, encoded: Vec<TaggedSet<T>>) -> Result<Vec<AgentBelief<T>>> {
    let sets: Vec<&ElementSet<T>> = encoded.iter().map(|t| &t.set).collect();
    let zs = sys.pisa.encode_batch(&sets)?;
    let z_refs: Vec<&LatentState<T>> = zs.iter().collect();
    let src_refs: Vec<&TaggedSet<T>> = encoded.iter().collect();
    let beliefs = decode_tagged(&sys.pisa, &z_refs, &src_refs)?;
    Ok(encoded
        .into_iter()
        .zip(zs)
        .zip(beliefs)
        .map(|((encoded, z), belief)| AgentBelief { layer, encoded, z, belief })
        .collect())
}

/// One round for one agent: decode every incoming latent, merge, re-encode.
///
/// Returns the new latent and the merged set that was encoded.
pub fn fusion_layer<T: Scalar>(incoming: &[&LatentState<T>], sys: &FusionSystem<T>) -> Result<(LatentState<T>, ElementSet<T>)> {
    if incoming.is_empty() {
        return Err(Error::Contract("fusion_layer needs at least the agent's own latent".into()));
    }
    let decoded: Vec<TaggedSet<T>> = sys
        .pisa
        .decode_batch(incoming, None)?
        .into_iter()
        .map(TaggedSet::untagged)
        .collect();
    let refs: Vec<&TaggedSet<T>> = decoded.iter().collect();
    let merged = filter_union(&refs, &sys.filter, sys.pisa.config.n_max)?;
    let z = sys.pisa.encode(&merged.set, 0)?;
    Ok((z, merged.set))
}

/// Round 0 encodes local observations; rounds `1..=layers` merge the
/// decoded latents of each agent and its communication neighbours.
pub fn fusion_rollout<T: Scalar>(world: &World<T>, layers: usize, sys: &FusionSystem<T>) -> Result<Rollout<T>> {
    let n = world.n_agents();
    let local: Vec<TaggedSet<T>> = (0..n).map(|i| world.local_observe(i)).collect();
    let mut out = Rollout {
        layers: vec![encode_and_decode(sys, 0, local)?],
    };
    for l in 1..=layers {
        let merged = (0..n)
            .map(|i| filter_union(&out.incoming(world, l, i), &sys.filter, sys.pisa.config.n_max))
            .collect::<Result<Vec<_>>>()?;
        let next = encode_and_decode(sys, l, merged)?;
        out.layers.push(next);
    }
    Ok(out)
}

/// Fraction of the world's objects that some element of `belief` matches
/// within [`COVERAGE_TOLERANCE`] per feature. Each element is compared with
/// its nearest object only.
pub fn coverage<T: Scalar>(belief: &ElementSet<T>, world: &World<T>) -> f64 {
    let n = world.n_objects();
    if n == 0 {
        return 1.0;
    }
    let mut hit = vec![false; n];
    for e in belief.iter() {
        let nearest = (0..n).min_by(|&a, &b| {
            let da = sq_dist(e, world.objects.get(a));
            let db = sq_dist(e, world.objects.get(b));
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        });
        if let Some(o) = nearest {
            let close = e
                .iter()
                .zip(world.objects.get(o))
                .all(|(a, b)| (*a - *b).abs().as_f64() <= COVERAGE_TOLERANCE);
            if close {
                hit[o] = true;
            }
        }
    }
    hit.iter().filter(|&&h| h).count() as f64 / n as f64
}

/// Element pairs from the incoming sets of every agent in rounds `1..`,
/// labelled by whether both came from the same object. Pairs with an
/// unknown source are skipped. Returned as `(positives, negatives)`, each
/// pair concatenated into one `2·dx` row.
pub fn provenance_pairs<T: Scalar>(world: &World<T>, rollout: &Rollout<T>) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for l in 1..rollout.layers.len() {
        for i in 0..world.n_agents() {
            let mut elems: Vec<(&[T], usize)> = Vec::new();
            for s in rollout.incoming(world, l, i) {
                for (e, id) in s.set.iter().zip(&s.ids) {
                    if let Some(id) = id {
                        elems.push((e, *id));
                    }
                }
            }
            for a in 0..elems.len() {
                for b in a + 1..elems.len() {
                    let mut row = elems[a].0.to_vec();
                    row.extend_from_slice(elems[b].0);
                    if elems[a].1 == elems[b].1 {
                        pos.push(row);
                    } else {
                        neg.push(row);
                    }
                }
            }
        }
    }
    (pos, neg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionEvalRow {
    pub world: usize,
    pub agent: usize,
    pub layer: usize,
    pub coverage: f64,
    /// Correlation of belief elements with their source objects.
    pub corr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionEvalReport {
    pub rows: Vec<FusionEvalRow>,
    /// Mean coverage over agents at the last round of each world.
    pub final_coverage: f64,
    /// Pooled belief/source correlation at the last round of each world.
    pub final_corr: Option<f64>,
    /// Balanced held-out duplicate classification accuracy.
    pub filter_accuracy: Option<f64>,
    pub filter_pairs: usize,
    /// Autoencoder correlation over every set encoded during the rollouts.
    pub ae_corr: Option<f64>,
}

/// Evaluates on `n_worlds` fresh worlds, each rolled out for `layers` rounds
/// or, if `None`, for its communication-graph diameter.
pub fn evaluate_fusion<T: Scalar>(
    sys: &FusionSystem<T>,
    world_cfg: &WorldConfig,
    n_worlds: usize,
    layers: Option<usize>,
    seed: u64,
) -> Result<FusionEvalReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let (mut cov_sum, mut cov_n) = (0.0, 0usize);
    let (mut truth, mut pred) = (Vec::new(), Vec::new());
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    let mut encoded = Vec::new();

    for w in 0..n_worlds {
        let world: World<T> = generate_world(&mut rng, world_cfg, sys.pisa.config.n_max)?;
        let depth = match layers {
            Some(l) => l,
            None => world.diameter().ok_or(Error::Contract("communication graph is disconnected".into()))?,
        };
        let ro = fusion_rollout(&world, depth, sys)?;
        for (l, agents) in ro.layers.iter().enumerate() {
            for (i, a) in agents.iter().enumerate() {
                let (t, p) = source_pairs(&a.belief, &world);
                let cov = coverage(&a.belief.set, &world);
                if l == depth {
                    cov_sum += cov;
                    cov_n += 1;
                    truth.extend_from_slice(&t);
                    pred.extend_from_slice(&p);
                }
                rows.push(FusionEvalRow {
                    world: w,
                    agent: i,
                    layer: l,
                    coverage: cov,
                    corr: pearson(&t, &p).ok(),
                });
                encoded.push(a.encoded.set.clone());
            }
        }
        let (p, n) = provenance_pairs(&world, &ro);
        pos.extend(p);
        neg.extend(n);
    }

    // balanced held-out set: every positive and as many random negatives
    neg.shuffle(&mut rng);
    let k = pos.len().min(neg.len());
    let (filter_accuracy, filter_pairs) = if k == 0 {
        (None, 0)
    } else {
        let mut correct = 0usize;
        for (rows, label) in [(&pos[..k], true), (&neg[..k], false)] {
            let probs = sys.filter.symmetric_probs(rows)?;
            correct += probs.iter().filter(|&&p| (p > DUPLICATE_THRESHOLD) == label).count();
        }
        (Some(correct as f64 / (2 * k) as f64), 2 * k)
    };
    let refs: Vec<&ElementSet<T>> = encoded.iter().collect();
    let ae = evaluate(&sys.pisa, &refs, Matching::KeyCorrespondence)?;
    Ok(FusionEvalReport {
        rows,
        final_coverage: if cov_n == 0 { 0.0 } else { cov_sum / cov_n as f64 },
        final_corr: pearson(&truth, &pred).ok(),
        filter_accuracy,
        filter_pairs,
        ae_corr: ae.correlation,
    })
}

/// Flattened (source object, belief element) feature pairs.
fn source_pairs<T: Scalar>(belief: &TaggedSet<T>, world: &World<T>) -> (Vec<f64>, Vec<f64>) {
    let (mut t, mut p) = (Vec::new(), Vec::new());
    for (e, id) in belief.set.iter().zip(&belief.ids) {
        if let Some(o) = id {
            t.extend(world.objects.get(*o).iter().map(|v| v.as_f64()));
            p.extend(e.iter().map(|v| v.as_f64()));
        }
    }
    (t, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::world::OBJECT_DIM;
    use crate::model::PisaConfig;

    fn system() -> FusionSystem<f64> {
        FusionSystem {
            pisa: PisaModel::new(PisaConfig::new(OBJECT_DIM, 32, 16), 0).unwrap(),
            filter: FilterParams::new(OBJECT_DIM, &[16], 1),
        }
    }

    fn world(seed: u64) -> World<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        generate_world(&mut rng, &WorldConfig::default(), 16).unwrap()
    }

    #[test]
    fn coverage_examples() {
        let w = world(0);
        assert_eq!(coverage(&w.objects, &w), 1.0);
        assert_eq!(coverage(&ElementSet::empty(OBJECT_DIM), &w), 0.0);
        let mut missing = ElementSet::empty(OBJECT_DIM);
        for o in 1..10 {
            missing.push(w.objects.get(o)).unwrap();
        }
        assert!((coverage(&missing, &w) - 0.9).abs() < 1e-12);
        // a uniform shift past the tolerance loses everything
        let shifted = ElementSet::from_flat(OBJECT_DIM, w.objects.as_flat().iter().map(|v| v + 0.11).collect()).unwrap();
        assert_eq!(coverage(&shifted, &w), 0.0);
    }

    #[test]
    fn round_zero_encodes_local_observations() {
        let sys = system();
        let w = world(1);
        let ro = fusion_rollout(&w, 0, &sys).unwrap();
        assert_eq!(ro.layers.len(), 1);
        for (i, a) in ro.layers[0].iter().enumerate() {
            assert_eq!(a.encoded, w.local_observe(i));
            assert_eq!(a.z.dim(), 32);
            assert_eq!(a.z, sys.pisa.encode(&a.encoded.set, 0).unwrap());
            assert_eq!(a.belief.set, sys.pisa.decode(&a.z, None).unwrap());
        }
    }

    #[test]
    fn rollout_is_deterministic_and_messages_have_fixed_size() {
        let sys = system();
        let w = world(2);
        let a = fusion_rollout(&w, 3, &sys).unwrap();
        let b = fusion_rollout(&w, 3, &sys).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.layers.len(), 4);
        for layer in &a.layers {
            for belief in layer {
                assert_eq!(belief.z.dim(), 32);
                assert!(belief.encoded.len() <= 16);
            }
        }
    }

    #[test]
    fn fusion_layer_matches_rollout_step() {
        let sys = system();
        let w = world(3);
        let ro = fusion_rollout(&w, 1, &sys).unwrap();
        let incoming: Vec<&LatentState<f64>> = std::iter::once(0)
            .chain(w.comm[0].iter().copied())
            .map(|j| &ro.layers[0][j].z)
            .collect();
        let (z, set) = fusion_layer(&incoming, &sys).unwrap();
        assert_eq!(set, ro.layers[1][0].encoded.set);
        assert_eq!(z.z, ro.layers[1][0].z.z);
        assert!(fusion_layer(&[], &sys).is_err());
    }

    #[test]
    fn pairs_are_labelled_by_source() {
        let sys = system();
        let w = world(4);
        let ro = fusion_rollout(&w, 1, &sys).unwrap();
        let (pos, neg) = provenance_pairs(&w, &ro);
        assert!(pos.iter().chain(&neg).all(|r| r.len() == 2 * OBJECT_DIM));
        let tagged: usize = (0..w.n_agents())
            .map(|i| ro.incoming(&w, 1, i).iter().map(|s| s.ids.iter().flatten().count()).sum::<usize>())
            .map(|m| m * m.saturating_sub(1) / 2)
            .sum();
        assert_eq!(pos.len() + neg.len(), tagged);
    }
}
