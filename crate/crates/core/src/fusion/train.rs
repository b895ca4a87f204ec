use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::SetBatch;
use crate::error::Result;
use crate::optim::AdamState;
use crate::scalar::Scalar;
use crate::set::ElementSet;
use crate::tape::Tape;
use crate::tensor::Tensor;
use crate::train::{batch_loss, optimize_step, ReconLoss};

use super::rollout::{fusion_rollout, provenance_pairs, FusionSystem};
use super::world::{generate_world, WorldConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionTrainConfig {
    pub world: WorldConfig,
    pub steps: usize,
    /// Sets per autoencoder step.
    pub batch_size: usize,
    /// Pairs per class per filter step.
    pub pair_batch: usize,
    pub lr: f64,
    /// A fresh world is rolled out every this many steps.
    pub rollout_every: usize,
    /// Replay capacity for encoded sets.
    pub set_capacity: usize,
    /// Replay capacity per pair class.
    pub pair_capacity: usize,
    /// Autoencoder steps on random sets before fusion training; 0 trains end to end.
    pub pretrain_steps: usize,
    pub seed: u64,
}

impl Default for FusionTrainConfig {
    fn default() -> Self {
        Self {
            world: WorldConfig::default(),
            steps: 30_000,
            batch_size: 64,
            pair_batch: 64,
            lr: 1e-3,
            rollout_every: 2,
            set_capacity: 4096,
            pair_capacity: 32_768,
            pretrain_steps: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FusionStepStats {
    pub loss_mse: f64,
    pub loss_size: f64,
    /// `None` when no pairs of one class have been seen yet.
    pub filter_bce: Option<f64>,
}

struct Ring<X> {
    items: VecDeque<X>,
    cap: usize,
}

impl<X> Ring<X> {
    fn new(cap: usize) -> Self {
        Self {
            items: VecDeque::new(),
            cap: cap.max(1),
        }
    }

    fn push(&mut self, x: X) {
        if self.items.len() == self.cap {
            self.items.pop_front();
        }
        self.items.push_back(x);
    }

    fn sample<'s, R: Rng + ?Sized>(&'s self, rng: &mut R, k: usize) -> Vec<&'s X> {
        (0..k).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

/// Draws `per_class` positives and `per_class` negatives with replacement,
/// swapping each pair's halves with probability 1/2. Returns `[2k × 2dx]`
/// rows (positives first) and their labels; empty if either class is empty.
pub fn balanced_pairs<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    pos: &[&Vec<T>],
    neg: &[&Vec<T>],
    per_class: usize,
) -> (Vec<T>, Vec<T>) {
    let (mut rows, mut labels) = (Vec::new(), Vec::new());
    if pos.is_empty() || neg.is_empty() {
        return (rows, labels);
    }
    for (pool, label) in [(pos, T::one()), (neg, T::zero())] {
        for _ in 0..per_class {
            let r = pool[rng.random_range(0..pool.len())];
            let half = r.len() / 2;
            if rng.random::<bool>() {
                rows.extend_from_slice(&r[half..]);
                rows.extend_from_slice(&r[..half]);
            } else {
                rows.extend_from_slice(r);
            }
            labels.push(label);
        }
    }
    (rows, labels)
}

/// Trains the autoencoder on the sets agents encode during rollouts and the
/// filter on provenance-labelled pairs of decoded elements.
///
/// Each round's loss treats its input sets as fixed; no gradient flows from
/// one round into the previous one. Rollouts go into replay buffers that the
/// two optimizers sample from.
pub struct FusionTrainer<T> {
    pub system: FusionSystem<T>,
    pub config: FusionTrainConfig,
    ae_opt: AdamState<T>,
    filter_opt: AdamState<T>,
    rng: ChaCha8Rng,
    sets: Ring<ElementSet<T>>,
    pos: Ring<Vec<T>>,
    neg: Ring<Vec<T>>,
    steps_done: usize,
}

impl<T: Scalar> FusionTrainer<T> {
    pub fn new(system: FusionSystem<T>, config: FusionTrainConfig) -> Self {
        let lr = T::lit(config.lr);
        Self {
            ae_opt: AdamState::new(lr),
            filter_opt: AdamState::new(lr),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            sets: Ring::new(config.set_capacity),
            pos: Ring::new(config.pair_capacity),
            neg: Ring::new(config.pair_capacity),
            steps_done: 0,
            system,
            config,
        }
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// Autoencoder steps on random sets of the object width.
    pub fn pretrain(&mut self, steps: usize) -> Result<()> {
        let cfg = &self.system.pisa.config;
        let (dx, n_max) = (cfg.dx, cfg.n_max);
        for _ in 0..steps {
            let batch = SetBatch::<T>::generate(self.rng.random(), self.config.batch_size, dx, 0..=n_max);
            self.ae_step(&batch.refs())?;
        }
        Ok(())
    }

    fn ae_step(&mut self, sets: &[&ElementSet<T>]) -> Result<crate::train::StepStats> {
        let input = self.system.pisa.prepare(sets)?;
        optimize_step(&mut self.system.pisa, &mut self.ae_opt, &input, ReconLoss::Correspondence)
    }

    fn collect(&mut self) -> Result<()> {
        let n_max = self.system.pisa.config.n_max;
        let world = generate_world(&mut self.rng, &self.config.world, n_max)?;
        let depth = world.diameter().unwrap_or(0);
        let ro = fusion_rollout(&world, depth, &self.system)?;
        for layer in &ro.layers {
            for a in layer {
                self.sets.push(a.encoded.set.clone());
            }
        }
        let (pos, neg) = provenance_pairs(&world, &ro);
        pos.into_iter().for_each(|p| self.pos.push(p));
        neg.into_iter().for_each(|n| self.neg.push(n));
        Ok(())
    }

    pub fn step(&mut self) -> Result<FusionStepStats> {
        if self.steps_done % self.config.rollout_every.max(1) == 0 {
            self.collect()?;
        }
        self.steps_done += 1;

        let batch: Vec<ElementSet<T>> = self
            .sets
            .sample(&mut self.rng, self.config.batch_size)
            .into_iter()
            .cloned()
            .collect();
        let ae = self.ae_step(&batch.iter().collect::<Vec<_>>())?;

        let pos: Vec<&Vec<T>> = self.pos.items.iter().collect();
        let neg: Vec<&Vec<T>> = self.neg.items.iter().collect();
        let (rows, labels) = balanced_pairs(&mut self.rng, &pos, &neg, self.config.pair_batch);
        let filter_bce = if labels.is_empty() {
            None
        } else {
            let f = &self.system.filter;
            let (grads, bce) = {
                let mut tape = Tape::with_params(&f.params);
                let x = tape.constant(Tensor::matrix(labels.len(), 2 * f.dx, rows)?);
                let logits = f.logits_tape(&mut tape, x)?;
                let loss = tape.bce_with_logits(logits, &labels)?;
                tape.backward(loss)?;
                (tape.param_grads(), tape.scalar(loss).as_f64())
            };
            self.filter_opt.step(&mut self.system.filter.params, &grads)?;
            Some(bce)
        };
        Ok(FusionStepStats {
            loss_mse: ae.loss_mse,
            loss_size: ae.loss_size,
            filter_bce,
        })
    }

    /// Reconstruction loss of the current autoencoder on one rollout's sets,
    /// as used by the training objective.
    pub fn rollout_loss(&self, sets: &[&ElementSet<T>]) -> Result<f64> {
        let model = &self.system.pisa;
        let input = model.prepare(sets)?;
        let mut tape = Tape::with_params(&model.params);
        let l = batch_loss(model, &mut tape, &input, ReconLoss::Correspondence)?;
        Ok(tape.scalar(l.mse).as_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{evaluate_fusion, FilterParams, OBJECT_DIM};
    use crate::model::{PisaConfig, PisaModel};

    #[test]
    fn sampler_is_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = vec![1.0f64, 2.0, 3.0, 4.0];
        let n1 = vec![5.0f64, 6.0, 7.0, 8.0];
        let n2 = vec![9.0f64, 10.0, 11.0, 12.0];
        let (rows, labels) = balanced_pairs(&mut rng, &[&p], &[&n1, &n2], 50);
        assert_eq!(labels.len(), 100);
        assert_eq!(rows.len(), 400);
        assert_eq!(labels.iter().filter(|&&l| l == 1.0).count(), 50);
        assert_eq!(labels.iter().filter(|&&l| l == 0.0).count(), 50);
        // swapped halves still form a valid pair
        for (r, &l) in rows.chunks(4).zip(&labels) {
            let ok = if l == 1.0 { r == [1.0, 2.0, 3.0, 4.0] || r == [3.0, 4.0, 1.0, 2.0] } else { r[0] >= 5.0 };
            assert!(ok, "{r:?}");
        }
        let (rows, labels) = balanced_pairs::<f64, _>(&mut rng, &[], &[&n1], 10);
        assert!(rows.is_empty() && labels.is_empty());
    }

    #[test]
    fn perfect_reconstruction_has_zero_loss() {
        let sys = FusionSystem {
            pisa: PisaModel::<f64>::new(PisaConfig::new(OBJECT_DIM, 16, 16), 0).unwrap(),
            filter: FilterParams::new(OBJECT_DIM, &[8], 0),
        };
        let trainer = FusionTrainer::new(sys, FusionTrainConfig::default());
        // only empty sets are reconstructed perfectly by an untrained model
        let e = ElementSet::empty(OBJECT_DIM);
        assert_eq!(trainer.rollout_loss(&[&e, &e]).unwrap(), 0.0);
    }

    #[test]
    fn short_training_improves_both_parts() {
        let sys = FusionSystem {
            pisa: PisaModel::<f32>::new(PisaConfig::new(OBJECT_DIM, 48, 16), 0).unwrap(),
            filter: FilterParams::new(OBJECT_DIM, &[32], 0),
        };
        let cfg = FusionTrainConfig {
            steps: 300,
            ..FusionTrainConfig::default()
        };
        let mut t = FusionTrainer::new(sys, cfg.clone());
        let stats: Vec<FusionStepStats> = (0..cfg.steps).map(|_| t.step().unwrap()).collect();
        let (first, last) = (stats[0], stats[stats.len() - 1]);
        assert!(last.loss_mse < first.loss_mse, "{first:?} → {last:?}");
        let bce: Vec<f64> = stats.iter().filter_map(|s| s.filter_bce).collect();
        assert!(bce.len() > cfg.steps / 2);
        let early = bce[..10].iter().sum::<f64>() / 10.0;
        let late = bce[bce.len() - 10..].iter().sum::<f64>() / 10.0;
        assert!(late < early, "filter loss {early} → {late}");
        let report = evaluate_fusion(&t.system, &cfg.world, 2, None, 9).unwrap();
        assert!(report.final_coverage.is_finite());
    }
}
