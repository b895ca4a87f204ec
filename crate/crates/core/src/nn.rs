//! Linear layers and ReLU MLPs whose weights live in a [`ParamStore`].

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{dim_err, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Affine map with weights stored `[out × in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LinearLayer {
    /// Registers a new layer with entries drawn from `U(-1/√in, 1/√in)`.
    ///
    /// Parameters are registered as `{name}.weight` and `{name}.bias`.
    pub fn init<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        with_bias: bool,
        trainable: bool,
        rng: &mut R,
    ) -> Self {
        assert!(in_dim >= 1 && out_dim >= 1, "layer dimensions must be positive");
        let bound = 1.0 / (in_dim as f64).sqrt();
        let dist = Uniform::new(-bound, bound).expect("valid bound");
        let mut draw = |n: usize| -> Vec<T> { (0..n).map(|_| T::lit(dist.sample(rng))).collect() };
        let w = Tensor::matrix(out_dim, in_dim, draw(out_dim * in_dim)).expect("shape");
        let weight = store.add(format!("{name}.weight"), w, trainable);
        let bias = with_bias.then(|| store.add(format!("{name}.bias"), Tensor::vector(draw(out_dim)), trainable));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let w = tape.param(self.weight);
        let b = self.bias.map(|b| tape.param(b));
        tape.linear(x, w, b)
    }

    /// Evaluates the layer on a single input vector without a tape.
    pub fn apply<T: Scalar>(&self, store: &ParamStore<T>, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim {
            return Err(dim_err("LinearLayer::apply", self.in_dim, x.len()));
        }
        let w = store.get(self.weight).data();
        let mut out: Vec<T> = match self.bias {
            Some(b) => store.get(b).data().to_vec(),
            None => vec![T::zero(); self.out_dim],
        };
        for (o, row) in out.iter_mut().zip(w.chunks_exact(self.in_dim)) {
            *o += row.iter().zip(x).map(|(&a, &b)| a * b).sum::<T>();
        }
        Ok(out)
    }
}

/// Multi-layer perceptron: linear layers with ReLU between them and a linear
/// output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<LinearLayer>,
}

impl Mlp {
    /// Builds an MLP through the given widths, e.g. `[6, 192, 96]` is one
    /// hidden layer of 192 units. Layers are named `{name}.{i}`.
    pub fn init<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, name: &str, widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "an MLP needs at least input and output widths");
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| LinearLayer::init(store, &format!("{name}.{i}"), w[0], w[1], true, true, rng))
            .collect();
        Self { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}
