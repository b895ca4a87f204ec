//! Independent oracles for the integration tests: central finite
//! differences, brute-force assignment and a loop-based forward pass.

#![allow(dead_code)]

use pisa_core::model::PisaModel;
use pisa_core::nn::{LinearLayer, Mlp};
use pisa_core::params::ParamStore;
use pisa_core::set::ElementSet;
use pisa_core::tape::{Tape, Var};
use pisa_core::tensor::Tensor;
use pisa_core::train::{batch_loss, ReconLoss};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;

/// Relative difference, with a floor so that two near-zero values compare
/// by absolute difference instead.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

pub fn random_tensor<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

/// `Σ w ⊙ v` for fixed weights, turning any tensor into a scalar loss.
pub fn weighted_sum(tape: &mut Tape<'_, f64>, v: Var, seed: u64) -> Var {
    let shape = tape.shape(v).to_vec();
    let n: usize = shape.iter().product();
    let w: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed * 104_729) % 1000) as f64 / 500.0 - 1.0).collect();
    let c = tape.constant(Tensor::new(shape, w).unwrap());
    let p = tape.mul(v, c).unwrap();
    tape.sum(p)
}

/// Worst relative error between reverse-mode and central-difference
/// gradients of `f` with respect to every entry of every input.
pub fn op_gradcheck<F>(inputs: &[Tensor<f64>], f: F) -> f64
where
    F: Fn(&mut Tape<'_, f64>, &[Var]) -> Var,
{
    let loss_at = |ins: &[Tensor<f64>]| {
        let mut t = Tape::new();
        let vs: Vec<Var> = ins.iter().map(|x| t.leaf(x.clone(), true)).collect();
        let l = f(&mut t, &vs);
        t.scalar(l)
    };
    let mut tape = Tape::new();
    let vs: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
    let l = f(&mut tape, &vs);
    tape.backward(l).unwrap();

    let mut worst: f64 = 0.0;
    for (k, x) in inputs.iter().enumerate() {
        let analytic = tape.grad(vs[k]).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; x.numel()]);
        for i in 0..x.numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= FD_STEP;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
    }
    worst
}

fn total_loss(model: &PisaModel<f64>, sets: &[&ElementSet<f64>], recon: ReconLoss) -> f64 {
    let input = model.prepare(sets).unwrap();
    let mut tape = Tape::with_params(&model.params);
    let l = batch_loss(model, &mut tape, &input, recon).unwrap();
    tape.scalar(l.total)
}

/// Worst relative error of the full training-loss gradient over
/// `per_tensor` random entries of every trainable tensor.
pub fn model_gradcheck<R: Rng>(
    model: &PisaModel<f64>,
    sets: &[&ElementSet<f64>],
    recon: ReconLoss,
    per_tensor: usize,
    rng: &mut R,
) -> f64 {
    let grads = {
        let input = model.prepare(sets).unwrap();
        let mut tape = Tape::with_params(&model.params);
        let l = batch_loss(model, &mut tape, &input, recon).unwrap();
        tape.backward(l.total).unwrap();
        tape.param_grads()
    };
    let mut worst: f64 = 0.0;
    for id in model.params.ids() {
        if !model.params.is_trainable(id) {
            continue;
        }
        let numel = model.params.get(id).numel();
        let analytic = grads[id.index()].clone().unwrap_or_else(|| vec![0.0; numel]);
        for _ in 0..per_tensor.min(numel) {
            let i = rng.random_range(0..numel);
            let mut plus = model.clone();
            plus.params.get_mut(id).data_mut()[i] += FD_STEP;
            let mut minus = model.clone();
            minus.params.get_mut(id).data_mut()[i] -= FD_STEP;
            let numeric = (total_loss(&plus, sets, recon) - total_loss(&minus, sets, recon)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[i], numeric));
        }
    }
    worst
}

/// Minimum over all permutations of `Σ_i cost[i][π(i)]`, summed in row order.
pub fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for c in 0..cost.len() {
            if !used[c] {
                used[c] = true;
                go(cost, row + 1, used, acc + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(cost, 0, &mut vec![false; cost.len()], 0.0, &mut best);
    if cost.is_empty() {
        0.0
    } else {
        best
    }
}

fn dense(store: &ParamStore<f64>, layer: &LinearLayer, x: &[f64]) -> Vec<f64> {
    let w = store.get(layer.weight).data();
    (0..layer.out_dim)
        .map(|o| {
            let mut acc = layer.bias.map_or(0.0, |b| store.get(b).data()[o]);
            for i in 0..layer.in_dim {
                acc += w[o * layer.in_dim + i] * x[i];
            }
            acc
        })
        .collect()
}

fn mlp(store: &ParamStore<f64>, net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for (k, layer) in net.layers.iter().enumerate() {
        h = dense(store, layer, &h);
        if k + 1 < net.layers.len() {
            h.iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }
    h
}

/// Column `key − 1` of a bias-free `n_max → dz` layer, i.e. its onehot image.
fn key_vector(store: &ParamStore<f64>, layer: &LinearLayer, key: usize) -> Vec<f64> {
    let w = store.get(layer.weight).data();
    (0..layer.out_dim).map(|o| w[o * layer.in_dim + key - 1]).collect()
}

/// `Σ_i ψ_key(key_i) ⊙ ψ_val(x_i) + n·w`, element by element.
pub fn reference_encode(model: &PisaModel<f64>, x: &ElementSet<f64>, keys: &[usize]) -> Vec<f64> {
    let p = &model.params;
    let w = p.get(model.lambda_enc.weight).data();
    let mut z: Vec<f64> = w.iter().map(|v| v * x.len() as f64).collect();
    for (e, &k) in x.iter().zip(keys) {
        let val = mlp(p, &model.psi_val, e);
        let key = key_vector(p, &model.psi_key, k);
        for d in 0..z.len() {
            z[d] += key[d] * val[d];
        }
    }
    z
}

/// `φ_dec(z ⊙ φ_key(i))` for keys `1..=n`.
pub fn reference_decode(model: &PisaModel<f64>, z: &[f64], n: usize) -> Vec<Vec<f64>> {
    let p = &model.params;
    (1..=n)
        .map(|k| {
            let q = key_vector(p, &model.phi_key, k);
            let h: Vec<f64> = z.iter().zip(&q).map(|(a, b)| a * b).collect();
            mlp(p, &model.phi_dec, &h)
        })
        .collect()
}

/// Keys from sorting by `ρ·x`, ties broken lexicographically.
pub fn reference_keys(model: &PisaModel<f64>, x: &ElementSet<f64>) -> Vec<usize> {
    let proj: Vec<f64> = x.iter().map(|e| dense(&model.params, &model.rho, e)[0]).collect();
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        proj[a]
            .partial_cmp(&proj[b])
            .unwrap()
            .then_with(|| x.get(a).partial_cmp(x.get(b)).unwrap())
    });
    let mut keys = vec![0; x.len()];
    for (r, &i) in order.iter().enumerate() {
        keys[i] = r + 1;
    }
    keys
}
