//! The key/value set autoencoder.
//!
//! Encoding binds every element (value) to a discrete slot (key):
//!
//! ```text
//! z = Σ_i ψ_key(onehot(key_i)) ⊙ ψ_val(x_i) + n·w
//! ```
//!
//! Keys come from the rank of each element under a frozen random projection
//! `ρ`, so the result does not depend on input order. Decoding predicts the
//! cardinality `n̂` from `z`, builds one query `φ_key(onehot(i))` per key and
//! reads element `i` back as `φ_dec(z ⊙ q_i)`. Output `i` therefore
//! reconstructs the input element that was assigned key `i`.
//!
//! The cardinality term is homogeneous in `n`, which keeps the encoder
//! additive: encoding a disjoint union equals the sum of the encodings of the
//! parts, provided the second part uses keys offset past the first.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{dim_err, Error, Result};
use crate::nn::{LinearLayer, Mlp};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::set::ElementSet;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// How the encoder turns a set into a latent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncoderKind {
    /// Keys from ρ-ranks (the permutation-invariant encoder).
    #[default]
    Keyed,
    /// Keys from input position; not permutation-invariant.
    InputOrder,
    /// Sum-pooled Deep Sets encoder, `outer(Σ inner(x_i)) + n·w`.
    DeepSet,
}

impl EncoderKind {
    pub fn name(self) -> &'static str {
        match self {
            EncoderKind::Keyed => "keyed",
            EncoderKind::InputOrder => "input_order",
            EncoderKind::DeepSet => "deepset",
        }
    }
}

/// Sizes of the autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PisaConfig {
    /// Element feature width.
    pub dx: usize,
    /// Latent width.
    pub dz: usize,
    /// Maximum cardinality; also the width of the onehot keys.
    pub n_max: usize,
    /// Hidden width of ψ_val and φ_dec.
    pub hidden: usize,
    /// Hidden width of the cardinality decoder λ_dec.
    pub card_hidden: usize,
    pub encoder: EncoderKind,
}

impl PisaConfig {
    /// Default shapes: hidden width `max(2·dz, 64)`, cardinality head width 64.
    pub fn new(dx: usize, dz: usize, n_max: usize) -> Self {
        Self {
            dx,
            dz,
            n_max,
            hidden: (2 * dz).max(64),
            card_hidden: 64,
            encoder: EncoderKind::Keyed,
        }
    }

    pub fn with_encoder(mut self, encoder: EncoderKind) -> Self {
        self.encoder = encoder;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dx", self.dx),
            ("dz", self.dz),
            ("n_max", self.n_max),
            ("hidden", self.hidden),
            ("card_hidden", self.card_hidden),
        ] {
            if v == 0 {
                return Err(Error::Contract(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Which key (1-based) each input element is bound to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyAssignment {
    keys: Vec<usize>,
}

impl KeyAssignment {
    /// Wraps explicit keys; they must be distinct and ≥ 1.
    pub fn from_keys(keys: Vec<usize>) -> Result<Self> {
        let distinct: BTreeSet<_> = keys.iter().copied().collect();
        if distinct.len() != keys.len() || distinct.contains(&0) {
            return Err(Error::Contract(format!("keys must be distinct and 1-based, got {keys:?}")));
        }
        Ok(Self { keys })
    }

    /// Keys in input order: element `i` gets key `i + 1`.
    pub fn input_order(n: usize) -> Self {
        Self { keys: (1..=n).collect() }
    }

    /// `keys()[i]` is the key of input element `i`.
    pub fn keys(&self) -> &[usize] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Input indices sorted by ascending key.
    pub fn elements_by_key(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.keys.len()).collect();
        idx.sort_by_key(|&i| self.keys[i]);
        idx
    }

    /// Shifts every key by `offset`.
    pub fn offset(&self, offset: usize) -> Self {
        Self {
            keys: self.keys.iter().map(|k| k + offset).collect(),
        }
    }
}

/// A fixed-size encoding of a set.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<T> {
    pub z: Vec<T>,
    /// Keys currently bound in `z`. This is bookkeeping for insert/remove and
    /// is not part of the learned representation; latents produced by
    /// arithmetic (e.g. interpolation) carry `None`.
    pub occupied_keys: Option<BTreeSet<usize>>,
}

impl<T: Scalar> LatentState<T> {
    pub fn from_vec(z: Vec<T>) -> Self {
        Self { z, occupied_keys: None }
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// Componentwise `self + other`; key bookkeeping is merged when both sides
    /// carry it.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.z.len() != other.z.len() {
            return Err(dim_err("LatentState::add", self.z.len(), other.z.len()));
        }
        let z = self.z.iter().zip(&other.z).map(|(&a, &b)| a + b).collect();
        let occupied_keys = match (&self.occupied_keys, &other.occupied_keys) {
            (Some(a), Some(b)) => Some(a.union(b).copied().collect()),
            _ => None,
        };
        Ok(Self { z, occupied_keys })
    }

    /// `(1 − α)·self + α·other`, without key bookkeeping.
    pub fn lerp(&self, other: &Self, alpha: T) -> Result<Self> {
        if self.z.len() != other.z.len() {
            return Err(dim_err("LatentState::lerp", self.z.len(), other.z.len()));
        }
        let z = self
            .z
            .iter()
            .zip(&other.z)
            .map(|(&a, &b)| a + alpha * (b - a))
            .collect();
        Ok(Self::from_vec(z))
    }
}

/// Encoder input for a batch of sets, flattened and grouped by set with rows
/// in ascending key order inside each set.
#[derive(Debug, Clone)]
pub struct EncoderInput<T> {
    pub dx: usize,
    /// `[N × dx]` element rows.
    pub rows: Vec<T>,
    pub set_of_row: Vec<usize>,
    /// Zero-based onehot index of each row's key.
    pub key_of_row: Vec<usize>,
    /// Index of each row within its original input set.
    pub source_of_row: Vec<usize>,
    pub counts: Vec<usize>,
}

impl<T: Scalar> EncoderInput<T> {
    /// Builds the batch from sets and their key assignments.
    pub fn build(dx: usize, n_max: usize, items: &[(&ElementSet<T>, &KeyAssignment)]) -> Result<Self> {
        let mut out = Self {
            dx,
            rows: Vec::new(),
            set_of_row: Vec::new(),
            key_of_row: Vec::new(),
            source_of_row: Vec::new(),
            counts: Vec::with_capacity(items.len()),
        };
        for (b, (set, keys)) in items.iter().enumerate() {
            if set.dim() != dx {
                return Err(dim_err("encode", format!("elements of width {dx}"), set.dim()));
            }
            if keys.len() != set.len() {
                return Err(dim_err("encode", format!("{} keys", set.len()), keys.len()));
            }
            if let Some(&max) = keys.keys().iter().max() {
                if max > n_max {
                    return Err(Error::Capacity { needed: max, n_max });
                }
            }
            for i in keys.elements_by_key() {
                out.rows.extend_from_slice(set.get(i));
                out.set_of_row.push(b);
                out.key_of_row.push(keys.keys()[i] - 1);
                out.source_of_row.push(i);
            }
            out.counts.push(set.len());
        }
        Ok(out)
    }

    pub fn num_rows(&self) -> usize {
        self.set_of_row.len()
    }

    pub fn num_sets(&self) -> usize {
        self.counts.len()
    }
}

/// Deep Sets encoder used by the ablation variant.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepSetEncoder {
    pub inner: Mlp,
    pub outer: Mlp,
}

/// Parameters and layer handles of the autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PisaModel<T> {
    pub config: PisaConfig,
    pub params: ParamStore<T>,
    /// Frozen random projection `R^dx → R` that orders elements into keys.
    pub rho: LinearLayer,
    pub psi_key: LinearLayer,
    pub psi_val: Mlp,
    /// `λ_enc(n) = n·w`, a bias-free `1 → dz` layer.
    pub lambda_enc: LinearLayer,
    pub phi_key: LinearLayer,
    pub phi_dec: Mlp,
    pub lambda_dec: Mlp,
    pub deepset: Option<DeepSetEncoder>,
}

impl<T: Scalar> PisaModel<T> {
    /// Initializes all weights from `seed`.
    pub fn new(config: PisaConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let (dx, dz, h) = (config.dx, config.dz, config.hidden);
        let rho = LinearLayer::init(&mut p, "rho", dx, 1, false, false, &mut rng);
        let psi_key = LinearLayer::init(&mut p, "psi_key", config.n_max, dz, false, true, &mut rng);
        let psi_val = Mlp::init(&mut p, "psi_val", &[dx, h, dz], &mut rng);
        let lambda_enc = LinearLayer::init(&mut p, "lambda_enc", 1, dz, false, true, &mut rng);
        let phi_key = LinearLayer::init(&mut p, "phi_key", config.n_max, dz, false, true, &mut rng);
        let phi_dec = Mlp::init(&mut p, "phi_dec", &[dz, h, dx], &mut rng);
        let lambda_dec = Mlp::init(&mut p, "lambda_dec", &[dz, config.card_hidden, 1], &mut rng);
        let deepset = (config.encoder == EncoderKind::DeepSet).then(|| DeepSetEncoder {
            inner: Mlp::init(&mut p, "deepset_inner", &[dx, h, h], &mut rng),
            outer: Mlp::init(&mut p, "deepset_outer", &[h, h, dz], &mut rng),
        });
        Ok(Self {
            config,
            params: p,
            rho,
            psi_key,
            psi_val,
            lambda_enc,
            phi_key,
            phi_dec,
            lambda_dec,
            deepset,
        })
    }

    /// Same architecture with every parameter converted to another scalar type.
    pub fn cast<U: Scalar>(&self) -> PisaModel<U> {
        PisaModel {
            config: self.config.clone(),
            params: self.params.cast(),
            rho: self.rho.clone(),
            psi_key: self.psi_key.clone(),
            psi_val: self.psi_val.clone(),
            lambda_enc: self.lambda_enc.clone(),
            phi_key: self.phi_key.clone(),
            phi_dec: self.phi_dec.clone(),
            lambda_dec: self.lambda_dec.clone(),
            deepset: self.deepset.clone(),
        }
    }

    fn check_set(&self, x: &ElementSet<T>) -> Result<()> {
        if x.dim() != self.config.dx {
            return Err(dim_err("set", format!("elements of width {}", self.config.dx), x.dim()));
        }
        Ok(())
    }

    fn check_latent(&self, z: &LatentState<T>) -> Result<()> {
        if z.dim() != self.config.dz {
            return Err(dim_err("latent", self.config.dz, z.dim()));
        }
        Ok(())
    }

    /// ρ-projection of one element.
    pub fn rho_projection(&self, x: &[T]) -> Result<T> {
        Ok(self.rho.apply(&self.params, x)?[0])
    }

    /// Keys 1..n by ascending ρ-projection; ties fall back to lexicographic
    /// order of the raw features.
    pub fn assign_keys(&self, x: &ElementSet<T>) -> Result<KeyAssignment> {
        self.check_set(x)?;
        if x.len() > self.config.n_max {
            return Err(Error::Capacity {
                needed: x.len(),
                n_max: self.config.n_max,
            });
        }
        let proj: Vec<T> = x.iter().map(|e| self.rho_projection(e)).collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| {
            proj[a].partial_cmp(&proj[b]).unwrap_or(Ordering::Equal).then_with(|| lex_cmp(x.get(a), x.get(b)))
        });
        let mut keys = vec![0; x.len()];
        for (rank, &i) in order.iter().enumerate() {
            keys[i] = rank + 1;
        }
        Ok(KeyAssignment { keys })
    }

    /// Keys as the configured encoder assigns them.
    pub fn keys_for(&self, x: &ElementSet<T>) -> Result<KeyAssignment> {
        match self.config.encoder {
            EncoderKind::InputOrder => {
                self.check_set(x)?;
                if x.len() > self.config.n_max {
                    return Err(Error::Capacity {
                        needed: x.len(),
                        n_max: self.config.n_max,
                    });
                }
                Ok(KeyAssignment::input_order(x.len()))
            }
            EncoderKind::Keyed | EncoderKind::DeepSet => self.assign_keys(x),
        }
    }

    /// Encoder input for a batch, keyed as configured.
    pub fn prepare(&self, sets: &[&ElementSet<T>]) -> Result<EncoderInput<T>> {
        let keys: Vec<KeyAssignment> = sets.iter().map(|s| self.keys_for(s)).collect::<Result<_>>()?;
        let items: Vec<_> = sets.iter().copied().zip(keys.iter()).collect();
        EncoderInput::build(self.config.dx, self.config.n_max, &items)
    }

    // ------------------------------------------------------------------
    // differentiable building blocks
    // ------------------------------------------------------------------

    /// Latents `[B × dz]` for a prepared batch.
    pub fn encode_tape(&self, tape: &mut Tape<'_, T>, input: &EncoderInput<T>) -> Result<Var> {
        let b = input.num_sets();
        let x = tape.constant(Tensor::matrix(input.num_rows(), input.dx, input.rows.clone())?);
        let pooled = match (&self.config.encoder, &self.deepset) {
            (EncoderKind::DeepSet, Some(ds)) => {
                let h = ds.inner.forward(tape, x)?;
                let s = tape.segment_sum(h, &input.set_of_row, b)?;
                ds.outer.forward(tape, s)?
            }
            (EncoderKind::DeepSet, None) => {
                return Err(Error::Contract("deep-set encoder requested but the model has no deep-set parameters".into()))
            }
            _ => self.keyed_sum(tape, x, input)?,
        };
        let counts = tape.constant(Tensor::matrix(b, 1, input.counts.iter().map(|&n| T::from_usize_lossy(n)).collect())?);
        let card = self.lambda_enc.forward(tape, counts)?;
        tape.add(pooled, card)
    }

    fn keyed_sum(&self, tape: &mut Tape<'_, T>, x: Var, input: &EncoderInput<T>) -> Result<Var> {
        let values = self.psi_val.forward(tape, x)?;
        let kw = tape.param(self.psi_key.weight);
        let keys = tape.embed_columns(kw, &input.key_of_row)?;
        let bound = tape.mul(keys, values)?;
        tape.segment_sum(bound, &input.set_of_row, input.num_sets())
    }

    /// Decoded rows for `counts[b]` keys of each latent, in (set, key) order.
    pub fn decode_tape(&self, tape: &mut Tape<'_, T>, z: Var, counts: &[usize]) -> Result<Var> {
        let mut set_idx = Vec::new();
        let mut key_idx = Vec::new();
        for (b, &n) in counts.iter().enumerate() {
            if n > self.config.n_max {
                return Err(Error::Capacity {
                    needed: n,
                    n_max: self.config.n_max,
                });
            }
            set_idx.extend(std::iter::repeat_n(b, n));
            key_idx.extend(0..n);
        }
        let zr = tape.gather_rows(z, &set_idx)?;
        let qw = tape.param(self.phi_key.weight);
        let q = tape.embed_columns(qw, &key_idx)?;
        let h = tape.mul(zr, q)?;
        self.phi_dec.forward(tape, h)
    }

    /// Raw cardinality predictions `[B × 1]`.
    pub fn cardinality_tape(&self, tape: &mut Tape<'_, T>, z: Var) -> Result<Var> {
        self.lambda_dec.forward(tape, z)
    }

    // ------------------------------------------------------------------
    // inference
    // ------------------------------------------------------------------

    fn latents_tensor(&self, zs: &[&LatentState<T>]) -> Result<Tensor<T>> {
        let mut data = Vec::with_capacity(zs.len() * self.config.dz);
        for z in zs {
            self.check_latent(z)?;
            data.extend_from_slice(&z.z);
        }
        Tensor::matrix(zs.len(), self.config.dz, data)
    }

    /// Encodes each prepared set; key bookkeeping records the keys used.
    pub fn encode_prepared(&self, input: &EncoderInput<T>) -> Result<Vec<LatentState<T>>> {
        let mut tape = Tape::with_params(&self.params);
        let z = self.encode_tape(&mut tape, input)?;
        let dz = self.config.dz;
        let mut occupied = vec![BTreeSet::new(); input.num_sets()];
        for (&s, &k) in input.set_of_row.iter().zip(&input.key_of_row) {
            occupied[s].insert(k + 1);
        }
        Ok(tape
            .value(z)
            .chunks_exact(dz)
            .zip(occupied)
            .map(|(row, keys)| LatentState {
                z: row.to_vec(),
                occupied_keys: Some(keys),
            })
            .collect())
    }

    pub fn encode_batch(&self, sets: &[&ElementSet<T>]) -> Result<Vec<LatentState<T>>> {
        self.encode_prepared(&self.prepare(sets)?)
    }

    /// Encodes `x` with the configured encoder, keys shifted by `key_offset`.
    pub fn encode(&self, x: &ElementSet<T>, key_offset: usize) -> Result<LatentState<T>> {
        let keys = self.keys_for(x)?;
        if x.len() + key_offset > self.config.n_max {
            return Err(Error::Capacity {
                needed: x.len() + key_offset,
                n_max: self.config.n_max,
            });
        }
        self.encode_with_keys(x, &keys.offset(key_offset))
    }

    /// Encodes `x` binding element `i` to `keys.keys()[i]`.
    pub fn encode_with_keys(&self, x: &ElementSet<T>, keys: &KeyAssignment) -> Result<LatentState<T>> {
        self.check_set(x)?;
        let input = EncoderInput::build(self.config.dx, self.config.n_max, &[(x, keys)])?;
        Ok(self.encode_prepared(&input)?.remove(0))
    }

    /// Ablation: keys follow input order instead of ρ-ranks.
    pub fn encode_no_rho(&self, x: &ElementSet<T>) -> Result<LatentState<T>> {
        self.check_set(x)?;
        if x.len() > self.config.n_max {
            return Err(Error::Capacity {
                needed: x.len(),
                n_max: self.config.n_max,
            });
        }
        self.encode_with_keys(x, &KeyAssignment::input_order(x.len()))
    }

    /// Ablation: Deep Sets encoder. Requires a model built with
    /// [`EncoderKind::DeepSet`].
    pub fn encode_deepset(&self, x: &ElementSet<T>) -> Result<LatentState<T>> {
        if self.deepset.is_none() {
            return Err(Error::Contract("model has no deep-set encoder".into()));
        }
        self.check_set(x)?;
        let keys = self.assign_keys(x)?;
        let input = EncoderInput::build(self.config.dx, self.config.n_max, &[(x, &keys)])?;
        let mut tape = Tape::with_params(&self.params);
        let z = self.encode_tape(&mut tape, &input)?;
        Ok(LatentState {
            z: tape.value(z).to_vec(),
            occupied_keys: Some((1..=x.len()).collect()),
        })
    }

    /// Raw (unrounded) cardinality predictions.
    pub fn cardinality_raw_batch(&self, zs: &[&LatentState<T>]) -> Result<Vec<T>> {
        let zt = self.latents_tensor(zs)?;
        let mut tape = Tape::with_params(&self.params);
        let z = tape.constant(zt);
        let out = self.cardinality_tape(&mut tape, z)?;
        Ok(tape.value(out).to_vec())
    }

    pub fn cardinality_raw(&self, z: &LatentState<T>) -> Result<T> {
        Ok(self.cardinality_raw_batch(&[z])?[0])
    }

    /// Rounds a raw cardinality prediction into `[0, n_max]`.
    pub fn round_cardinality(&self, raw: T) -> usize {
        let r = raw.as_f64().round();
        if r.is_nan() || r <= 0.0 {
            0
        } else {
            (r as usize).min(self.config.n_max)
        }
    }

    pub fn predict_cardinality(&self, z: &LatentState<T>) -> Result<usize> {
        Ok(self.round_cardinality(self.cardinality_raw(z)?))
    }

    /// Decodes several latents, with per-latent forced cardinalities or the
    /// predicted ones.
    pub fn decode_batch(&self, zs: &[&LatentState<T>], forced: Option<&[usize]>) -> Result<Vec<ElementSet<T>>> {
        let zt = self.latents_tensor(zs)?;
        let mut tape = Tape::with_params(&self.params);
        let z = tape.constant(zt);
        let counts: Vec<usize> = match forced {
            Some(f) => {
                if f.len() != zs.len() {
                    return Err(dim_err("decode_batch", zs.len(), f.len()));
                }
                f.to_vec()
            }
            None => {
                let raw = self.cardinality_tape(&mut tape, z)?;
                tape.value(raw).iter().map(|&r| self.round_cardinality(r)).collect()
            }
        };
        let out = self.decode_tape(&mut tape, z, &counts)?;
        let dx = self.config.dx;
        let flat = tape.value(out);
        let mut sets = Vec::with_capacity(counts.len());
        let mut at = 0;
        for &n in &counts {
            sets.push(ElementSet::from_flat(dx, flat[at * dx..(at + n) * dx].to_vec())?);
            at += n;
        }
        Ok(sets)
    }

    /// Decodes one latent. Output element `i` belongs to key `i + 1`.
    pub fn decode(&self, z: &LatentState<T>, forced_n: Option<usize>) -> Result<ElementSet<T>> {
        let forced = forced_n.map(|n| [n]);
        Ok(self.decode_batch(&[z], forced.as_ref().map(|f| &f[..]))?.remove(0))
    }

    // ------------------------------------------------------------------
    // latent algebra
    // ------------------------------------------------------------------

    fn single_term(&self, e: &[T], key: usize) -> Result<LatentState<T>> {
        let x = ElementSet::from_flat(self.config.dx, e.to_vec())?;
        self.encode_with_keys(&x, &KeyAssignment::from_keys(vec![key])?)
    }

    /// Adds `e` under the smallest free key.
    pub fn latent_insert(&self, z: &LatentState<T>, e: &[T]) -> Result<LatentState<T>> {
        self.check_latent(z)?;
        let occupied = z
            .occupied_keys
            .as_ref()
            .ok_or_else(|| Error::Contract("latent carries no key bookkeeping".into()))?;
        let key = (1..=self.config.n_max)
            .find(|k| !occupied.contains(k))
            .ok_or(Error::Capacity {
                needed: occupied.len() + 1,
                n_max: self.config.n_max,
            })?;
        let term = self.single_term(e, key)?;
        let mut keys = occupied.clone();
        keys.insert(key);
        Ok(LatentState {
            z: z.z.iter().zip(&term.z).map(|(&a, &b)| a + b).collect(),
            occupied_keys: Some(keys),
        })
    }

    /// Subtracts the contribution of `x_known` stored under `key`.
    pub fn latent_remove(&self, z: &LatentState<T>, key: usize, x_known: &[T]) -> Result<LatentState<T>> {
        self.check_latent(z)?;
        let occupied = z
            .occupied_keys
            .as_ref()
            .ok_or_else(|| Error::Contract("latent carries no key bookkeeping".into()))?;
        if !occupied.contains(&key) {
            return Err(Error::KeyNotOccupied(key));
        }
        let term = self.single_term(x_known, key)?;
        let mut keys = occupied.clone();
        keys.remove(&key);
        Ok(LatentState {
            z: z.z.iter().zip(&term.z).map(|(&a, &b)| a - b).collect(),
            occupied_keys: Some(keys),
        })
    }
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}
