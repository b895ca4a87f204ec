//! Mini-batch training of the autoencoder.

use crate::error::Result;
use crate::losses::{hungarian_targets, mse_tape, size_loss_tape};
use crate::model::{EncoderInput, PisaModel};
use crate::optim::AdamState;
use crate::scalar::Scalar;
use crate::set::ElementSet;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// How decoded elements are paired with targets in the reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReconLoss {
    /// Output `i` is compared with the input assigned key `i`.
    #[default]
    Correspondence,
    /// Pairing by minimum-cost assignment, recomputed every step.
    Hungarian,
}

/// Loss nodes of one batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchLoss {
    pub total: Var,
    pub mse: Var,
    pub size: Var,
}

/// Scalar summary of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss_mse: f64,
    pub loss_size: f64,
}

/// Records the batch loss `mean sq. reconstruction error + mean (n − λ_dec(z))²`.
///
/// Decoding is teacher-forced: each set is decoded at its true cardinality.
pub fn batch_loss<T: Scalar>(
    model: &PisaModel<T>,
    tape: &mut Tape<'_, T>,
    input: &EncoderInput<T>,
    recon: ReconLoss,
) -> Result<BatchLoss> {
    let z = model.encode_tape(tape, input)?;
    let raw = model.cardinality_tape(tape, z)?;
    let size = size_loss_tape(tape, raw, &input.counts)?;
    let pred = model.decode_tape(tape, z, &input.counts)?;

    let dx = input.dx;
    let targets = match recon {
        ReconLoss::Correspondence => input.rows.clone(),
        ReconLoss::Hungarian => {
            let pv = tape.value(pred);
            let mut out = Vec::with_capacity(input.rows.len());
            let mut at = 0;
            for &n in &input.counts {
                let span = at * dx..(at + n) * dx;
                let truth = ElementSet::from_flat(dx, input.rows[span.clone()].to_vec())?;
                let guess = ElementSet::from_flat(dx, pv[span].to_vec())?;
                out.extend_from_slice(hungarian_targets(&truth, &guess)?.as_flat());
                at += n;
            }
            out
        }
    };
    let target = tape.constant(Tensor::matrix(input.num_rows(), dx, targets)?);
    let mse = mse_tape(tape, pred, target)?;
    let total = tape.add(mse, size)?;
    Ok(BatchLoss { total, mse, size })
}

/// Model plus optimizer state.
#[derive(Debug, Clone)]
pub struct Trainer<T> {
    pub model: PisaModel<T>,
    pub optimizer: AdamState<T>,
    pub recon: ReconLoss,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(model: PisaModel<T>, lr: T, recon: ReconLoss) -> Self {
        Self {
            model,
            optimizer: AdamState::new(lr),
            recon,
        }
    }

    /// One gradient step on a batch of sets.
    pub fn step(&mut self, sets: &[&ElementSet<T>]) -> Result<StepStats> {
        let input = self.model.prepare(sets)?;
        self.step_prepared(&input)
    }

    /// One gradient step on an already keyed batch.
    pub fn step_prepared(&mut self, input: &EncoderInput<T>) -> Result<StepStats> {
        optimize_step(&mut self.model, &mut self.optimizer, input, self.recon)
    }
}

/// Computes the batch loss, backpropagates and applies one optimizer update.
pub fn optimize_step<T: Scalar>(
    model: &mut PisaModel<T>,
    optimizer: &mut AdamState<T>,
    input: &EncoderInput<T>,
    recon: ReconLoss,
) -> Result<StepStats> {
    let (grads, stats) = {
        let mut tape = Tape::with_params(&model.params);
        let loss = batch_loss(model, &mut tape, input, recon)?;
        tape.backward(loss.total)?;
        let stats = StepStats {
            loss_mse: tape.scalar(loss.mse).as_f64(),
            loss_size: tape.scalar(loss.size).as_f64(),
        };
        (tape.param_grads(), stats)
    };
    optimizer.step(&mut model.params, &grads)?;
    Ok(stats)
}
