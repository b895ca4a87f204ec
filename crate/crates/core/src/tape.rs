//! Tape-based reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its output value and the handles of its inputs. Nodes are appended in
//! evaluation order, so the node list is already topologically sorted and
//! [`Tape::backward`] is a single reverse sweep.
//!
//! Parameters are borrowed from a [`ParamStore`] instead of copied; their
//! gradients can be collected with [`Tape::param_grads`] once the backward
//! pass is done.

use std::borrow::Cow;

use crate::error::{dim_err, Error, Result};
use crate::params::{ParamId, ParamStore};
use crate::scalar::{gemm, MatView, Scalar};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Param,
    Reshape(Var),
    MatMul(Var, Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Square(Var),
    Relu(Var),
    Sigmoid(Var),
    Sum(Var),
    Mean(Var),
    SumList(Vec<Var>),
    GatherRows { src: Var, rows: Vec<usize> },
    SegmentSum { src: Var, segments: Vec<usize> },
    EmbedColumns { w: Var, cols: Vec<usize> },
    BceWithLogits { logits: Var, targets: Vec<T> },
}

#[derive(Debug)]
struct Node<'a, T: Clone> {
    shape: Vec<usize>,
    value: Cow<'a, [T]>,
    op: Op<T>,
    requires_grad: bool,
}

/// Recorded computation graph for one forward/backward pass.
pub struct Tape<'a, T: Scalar> {
    nodes: Vec<Node<'a, T>>,
    /// Accumulated gradients of leaf and parameter nodes, indexed by node.
    grads: Vec<Option<Vec<T>>>,
    params: Option<&'a ParamStore<T>>,
    param_vars: Vec<Option<Var>>,
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Interprets a shape as a matrix: rank 2 as-is, rank 1 as a row vector.
fn as_matrix(shape: &[usize]) -> Option<(usize, usize)> {
    match shape {
        [r, c] => Some((*r, *c)),
        [c] => Some((1, *c)),
        _ => None,
    }
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grads: Vec::new(),
            params: None,
            param_vars: Vec::new(),
        }
    }

    /// A tape whose [`Tape::param`] calls read from `store`.
    pub fn with_params(store: &'a ParamStore<T>) -> Self {
        Self {
            params: Some(store),
            param_vars: vec![None; store.len()],
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<'a, T> {
        &self.nodes[v.0]
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Places a tensor on the tape as a leaf.
    pub fn leaf(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, t.into_data(), Op::Leaf, requires_grad)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, false)
    }

    /// Binds a stored parameter (once per tape); frozen entries get no gradient.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars.get(id.0).copied().flatten() {
            return v;
        }
        let store = self.params.expect("tape was created without a parameter store");
        let entry = store.entry(id);
        self.nodes.push(Node {
            shape: entry.tensor.shape().to_vec(),
            value: Cow::Borrowed(entry.tensor.data()),
            op: Op::Param,
            requires_grad: entry.trainable,
        });
        self.grads.push(None);
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.to_vec()).expect("node shape is consistent")
    }

    /// Value of a single-element node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Accumulated gradient of a leaf or parameter node, if any reached it.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.grads[v.0].as_deref()
    }

    pub fn zero_grad(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Gradients indexed by [`ParamId`]; `None` for untouched or frozen entries.
    pub fn param_grads(&self) -> Vec<Option<Vec<T>>> {
        self.param_vars
            .iter()
            .map(|pv| pv.and_then(|v| self.grads[v.0].clone()))
            .collect()
    }

    // ------------------------------------------------------------------
    // operations
    // ------------------------------------------------------------------

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        if numel(&shape) != numel(self.shape(a)) {
            return Err(dim_err("reshape", format!("{:?}", self.shape(a)), format!("{shape:?}")));
        }
        let value = self.value(a).to_vec();
        let rg = self.rg(a);
        Ok(self.push(shape, value, Op::Reshape(a), rg))
    }

    /// Matrix product. `b` may be a vector, in which case the result is a vector.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = match self.shape(a) {
            [m, k] => (*m, *k),
            s => return Err(dim_err("matmul", "matrix lhs", format!("{s:?}"))),
        };
        let (k2, n, out_shape) = match self.shape(b) {
            [k2, n] => (*k2, *n, vec![m, *n]),
            [k2] => (*k2, 1, vec![m]),
            s => return Err(dim_err("matmul", "matrix or vector rhs", format!("{s:?}"))),
        };
        if k != k2 {
            return Err(dim_err("matmul", format!("inner dimension {k}"), k2));
        }
        let mut out = vec![T::zero(); m * n];
        gemm(
            T::one(),
            self.value(a),
            MatView::new(m, k),
            self.value(b),
            MatView::new(k, n),
            T::zero(),
            &mut out,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out_shape, out, Op::MatMul(a, b), rg))
    }

    /// `y = W·x` for a matrix `W` and vector `x`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        if self.shape(x).len() != 1 {
            return Err(dim_err("matvec", "vector rhs", format!("{:?}", self.shape(x))));
        }
        self.matmul(w, x)
    }

    /// Affine map `x·Wᵀ + b` applied to each row of `x` (`[N×in]` or `[in]`),
    /// with `W` stored `[out×in]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (out_dim, in_dim) = match self.shape(w) {
            [o, i] => (*o, *i),
            s => return Err(dim_err("linear", "[out×in] weight", format!("{s:?}"))),
        };
        let xs = self.shape(x).to_vec();
        let (rows, cols) = as_matrix(&xs).ok_or_else(|| dim_err("linear", "rank-1 or rank-2 input", format!("{xs:?}")))?;
        if cols != in_dim {
            return Err(dim_err("linear", format!("input width {in_dim}"), cols));
        }
        let mut out = vec![T::zero(); rows * out_dim];
        if let Some(b) = b {
            let bv = self.value(b);
            if bv.len() != out_dim {
                return Err(dim_err("linear", format!("bias of length {out_dim}"), bv.len()));
            }
            for row in out.chunks_exact_mut(out_dim) {
                row.copy_from_slice(bv);
            }
        }
        let beta = if b.is_some() { T::one() } else { T::zero() };
        gemm(
            T::one(),
            self.value(x),
            MatView::new(rows, cols),
            self.value(w),
            MatView::new(out_dim, in_dim).t(),
            beta,
            &mut out,
        );
        let shape = if xs.len() == 1 { vec![out_dim] } else { vec![rows, out_dim] };
        let rg = self.rg(x) || self.rg(w) || b.is_some_and(|b| self.rg(b));
        Ok(self.push(shape, out, Op::Linear { x, w, b }, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(dim_err(op, format!("{:?}", self.shape(a)), format!("{:?}", self.shape(b))));
        }
        Ok(())
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T, record: Op<T>) -> Result<Var> {
        self.same_shape(op, a, b)?;
        let out: Vec<T> = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| f(x, y)).collect();
        let rg = self.rg(a) || self.rg(b);
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, out, record, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, record: Op<T>) -> Var {
        let out: Vec<T> = self.value(a).iter().map(|&x| f(x)).collect();
        let rg = self.rg(a);
        let shape = self.shape(a).to_vec();
        self.push(shape, out, record, rg)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > T::zero() { x } else { T::zero() }, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().copied().sum();
        let rg = self.rg(a);
        self.push(vec![], vec![s], Op::Sum(a), rg)
    }

    /// Mean of all entries; zero for an empty tensor.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len();
        let s: T = self.value(a).iter().copied().sum();
        let m = if n == 0 { T::zero() } else { s / T::from_usize_lossy(n) };
        let rg = self.rg(a);
        self.push(vec![], vec![m], Op::Mean(a), rg)
    }

    /// Componentwise sum of equally shaped tensors, accumulated in list order.
    /// An empty list yields zeros of `shape`.
    pub fn reduce_sum(&mut self, xs: &[Var], shape: &[usize]) -> Result<Var> {
        let mut out = vec![T::zero(); numel(shape)];
        for &x in xs {
            if self.shape(x) != shape {
                return Err(dim_err("reduce_sum", format!("{shape:?}"), format!("{:?}", self.shape(x))));
            }
            for (o, &v) in out.iter_mut().zip(self.value(x)) {
                *o += v;
            }
        }
        let rg = xs.iter().any(|&x| self.rg(x));
        Ok(self.push(shape.to_vec(), out, Op::SumList(xs.to_vec()), rg))
    }

    /// Selects rows of a `[R×d]` matrix (repetition allowed).
    pub fn gather_rows(&mut self, src: Var, rows: &[usize]) -> Result<Var> {
        let (r, d) = match self.shape(src) {
            [r, d] => (*r, *d),
            s => return Err(dim_err("gather_rows", "matrix", format!("{s:?}"))),
        };
        let sv = self.value(src);
        let mut out = Vec::with_capacity(rows.len() * d);
        for &i in rows {
            if i >= r {
                return Err(dim_err("gather_rows", format!("row < {r}"), i));
            }
            out.extend_from_slice(&sv[i * d..(i + 1) * d]);
        }
        let rg = self.rg(src);
        Ok(self.push(vec![rows.len(), d], out, Op::GatherRows { src, rows: rows.to_vec() }, rg))
    }

    /// Sums the rows of `[N×d]` into `num_segments` buckets; row `i` goes to
    /// bucket `segments[i]`. Rows are accumulated in index order.
    pub fn segment_sum(&mut self, src: Var, segments: &[usize], num_segments: usize) -> Result<Var> {
        let (n, d) = match self.shape(src) {
            [n, d] => (*n, *d),
            s => return Err(dim_err("segment_sum", "matrix", format!("{s:?}"))),
        };
        if segments.len() != n {
            return Err(dim_err("segment_sum", format!("{n} segment ids"), segments.len()));
        }
        let sv = self.value(src);
        let mut out = vec![T::zero(); num_segments * d];
        for (i, &s) in segments.iter().enumerate() {
            if s >= num_segments {
                return Err(dim_err("segment_sum", format!("segment < {num_segments}"), s));
            }
            for (o, &v) in out[s * d..(s + 1) * d].iter_mut().zip(&sv[i * d..(i + 1) * d]) {
                *o += v;
            }
        }
        let rg = self.rg(src);
        Ok(self.push(vec![num_segments, d], out, Op::SegmentSum { src, segments: segments.to_vec() }, rg))
    }

    /// `W·onehot(c)` for every index `c` in `cols`: picks columns of an
    /// `[out×in]` weight, producing `[cols.len() × out]`.
    pub fn embed_columns(&mut self, w: Var, cols: &[usize]) -> Result<Var> {
        let (o, i) = match self.shape(w) {
            [o, i] => (*o, *i),
            s => return Err(dim_err("embed_columns", "[out×in] weight", format!("{s:?}"))),
        };
        let wv = self.value(w);
        let mut out = Vec::with_capacity(cols.len() * o);
        for &c in cols {
            if c >= i {
                return Err(dim_err("embed_columns", format!("index < {i}"), c));
            }
            out.extend((0..o).map(|r| wv[r * i + c]));
        }
        let rg = self.rg(w);
        Ok(self.push(vec![cols.len(), o], out, Op::EmbedColumns { w, cols: cols.to_vec() }, rg))
    }

    /// Mean binary cross-entropy between `sigmoid(logits)` and constant targets.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[T]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.len() != targets.len() {
            return Err(dim_err("bce_with_logits", lv.len(), targets.len()));
        }
        let n = lv.len();
        let total: T = lv
            .iter()
            .zip(targets)
            .map(|(&l, &t)| l.max(T::zero()) - l * t + (T::one() + (-l.abs()).exp()).ln())
            .sum();
        let loss = if n == 0 { T::zero() } else { total / T::from_usize_lossy(n) };
        let rg = self.rg(logits);
        Ok(self.push(
            vec![],
            vec![loss],
            Op::BceWithLogits {
                logits,
                targets: targets.to_vec(),
            },
            rg,
        ))
    }

    // ------------------------------------------------------------------
    // reverse sweep
    // ------------------------------------------------------------------

    /// Propagates `∂loss/∂·` to every reachable node that requires a gradient
    /// and adds the result into the stored gradients of leaves and parameters.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.node(loss).value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.node(loss).shape
            )));
        }
        let mut work: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        work[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = work[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            if matches!(self.nodes[idx].op, Op::Leaf | Op::Param) {
                match &mut self.grads[idx] {
                    Some(acc) => add_into(acc, &g),
                    slot @ None => *slot = Some(g),
                }
            } else {
                self.propagate(idx, &g, &mut work);
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[T], work: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        let out = &node.value;
        match &node.op {
            Op::Leaf | Op::Param => unreachable!(),
            Op::Reshape(a) => self.acc(work, *a, |d| add_into(d, g)),
            Op::MatMul(a, b) => {
                let (m, k) = as_matrix(self.shape(*a)).expect("matrix");
                let n = numel(&node.shape) / m.max(1);
                if self.rg(*a) {
                    // dA += g·Bᵀ
                    let bv = self.value(*b);
                    self.acc(work, *a, |d| gemm(T::one(), g, MatView::new(m, n), bv, MatView::new(k, n).t(), T::one(), d));
                }
                if self.rg(*b) {
                    // dB += Aᵀ·g
                    let av = self.value(*a);
                    self.acc(work, *b, |d| gemm(T::one(), av, MatView::new(m, k).t(), g, MatView::new(m, n), T::one(), d));
                }
            }
            Op::Linear { x, w, b } => {
                let (o, i) = as_matrix(self.shape(*w)).expect("matrix");
                let rows = g.len() / o.max(1);
                if self.rg(*x) {
                    // dX += g·W
                    let wv = self.value(*w);
                    self.acc(work, *x, |d| gemm(T::one(), g, MatView::new(rows, o), wv, MatView::new(o, i), T::one(), d));
                }
                if self.rg(*w) {
                    // dW += gᵀ·X
                    let xv = self.value(*x);
                    self.acc(work, *w, |d| gemm(T::one(), g, MatView::new(rows, o).t(), xv, MatView::new(rows, i), T::one(), d));
                }
                if let Some(b) = b.filter(|b| self.rg(*b)) {
                    self.acc(work, b, |d| {
                        for row in g.chunks_exact(o) {
                            add_into(d, row);
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                self.acc(work, *a, |d| add_into(d, g));
                self.acc(work, *b, |d| add_into(d, g));
            }
            Op::Sub(a, b) => {
                self.acc(work, *a, |d| add_into(d, g));
                self.acc(work, *b, |d| d.iter_mut().zip(g).for_each(|(d, &g)| *d -= g));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                self.acc(work, *a, |d| {
                    for ((d, &g), &y) in d.iter_mut().zip(g).zip(bv) {
                        *d += g * y;
                    }
                });
                self.acc(work, *b, |d| {
                    for ((d, &g), &x) in d.iter_mut().zip(g).zip(av) {
                        *d += g * x;
                    }
                });
            }
            Op::Scale(a, c) => self.acc(work, *a, |d| d.iter_mut().zip(g).for_each(|(d, &g)| *d += g * *c)),
            Op::Square(a) => {
                let av = self.value(*a);
                let two = T::lit(2.0);
                self.acc(work, *a, |d| {
                    for ((d, &g), &x) in d.iter_mut().zip(g).zip(av) {
                        *d += two * x * g;
                    }
                });
            }
            Op::Relu(a) => self.acc(work, *a, |d| {
                for ((d, &g), &y) in d.iter_mut().zip(g).zip(out.iter()) {
                    if y > T::zero() {
                        *d += g;
                    }
                }
            }),
            Op::Sigmoid(a) => self.acc(work, *a, |d| {
                for ((d, &g), &y) in d.iter_mut().zip(g).zip(out.iter()) {
                    *d += g * y * (T::one() - y);
                }
            }),
            Op::Sum(a) => self.acc(work, *a, |d| d.iter_mut().for_each(|d| *d += g[0])),
            Op::Mean(a) => {
                let n = T::from_usize_lossy(numel(self.shape(*a)).max(1));
                self.acc(work, *a, |d| d.iter_mut().for_each(|d| *d += g[0] / n));
            }
            Op::SumList(xs) => {
                for &x in xs {
                    self.acc(work, x, |d| add_into(d, g));
                }
            }
            Op::GatherRows { src, rows } => {
                let d_cols = node.shape[1];
                self.acc(work, *src, |d| {
                    for (r, &i) in rows.iter().enumerate() {
                        add_into(&mut d[i * d_cols..(i + 1) * d_cols], &g[r * d_cols..(r + 1) * d_cols]);
                    }
                });
            }
            Op::SegmentSum { src, segments } => {
                let d_cols = node.shape[1];
                self.acc(work, *src, |d| {
                    for (r, &s) in segments.iter().enumerate() {
                        add_into(&mut d[r * d_cols..(r + 1) * d_cols], &g[s * d_cols..(s + 1) * d_cols]);
                    }
                });
            }
            Op::EmbedColumns { w, cols } => {
                let (o, i) = as_matrix(self.shape(*w)).expect("matrix");
                self.acc(work, *w, |d| {
                    for (r, &c) in cols.iter().enumerate() {
                        for row in 0..o {
                            d[row * i + c] += g[r * o + row];
                        }
                    }
                });
            }
            Op::BceWithLogits { logits, targets } => {
                let lv = self.value(*logits);
                let n = T::from_usize_lossy(lv.len().max(1));
                self.acc(work, *logits, |d| {
                    for ((d, &l), &t) in d.iter_mut().zip(lv).zip(targets) {
                        *d += g[0] * (sigmoid(l) - t) / n;
                    }
                });
            }
        }
    }

    fn acc(&self, work: &mut [Option<Vec<T>>], v: Var, f: impl FnOnce(&mut [T])) {
        if !self.rg(v) {
            return;
        }
        let slot = &mut work[v.0];
        let buf = slot.get_or_insert_with(|| vec![T::zero(); self.nodes[v.0].value.len()]);
        f(buf);
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Logistic function, evaluated without overflow for large |x|.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec64(data: &[f64]) -> Tensor<f64> {
        Tensor::vector(data.to_vec())
    }

    fn mat64(r: usize, c: usize, data: &[f64]) -> Tensor<f64> {
        Tensor::matrix(r, c, data.to_vec()).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let mut t = Tape::<f64>::new();
        let id = t.constant(mat64(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let x = t.constant(vec64(&[3.0, 4.0]));
        let y = t.matvec(id, x).unwrap();
        assert_eq!(t.value(y), &[3.0, 4.0]);
        assert_eq!(t.shape(y), &[2]);

        let z = t.constant(mat64(2, 2, &[0.0; 4]));
        let y = t.matvec(z, x).unwrap();
        assert_eq!(t.value(y), &[0.0, 0.0]);

        let w = t.constant(mat64(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let ones = t.constant(vec64(&[1.0, 1.0]));
        let y = t.matvec(w, ones).unwrap();
        assert_eq!(t.value(y), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_shape_mismatch() {
        let mut t = Tape::<f64>::new();
        let w = t.constant(mat64(2, 3, &[0.0; 6]));
        let x = t.constant(vec64(&[1.0, 2.0]));
        assert!(matches!(t.matvec(w, x), Err(Error::Dimension { .. })));
    }

    #[test]
    fn ew_mul_examples() {
        let mut t = Tape::<f64>::new();
        let ones = t.constant(vec64(&[1.0, 1.0, 1.0]));
        let xyz = t.constant(vec64(&[0.5, -2.0, 7.0]));
        let c = t.mul(ones, xyz).unwrap();
        assert_eq!(t.value(c), &[0.5, -2.0, 7.0]);

        let zero = t.constant(vec64(&[0.0; 3]));
        let c = t.mul(zero, xyz).unwrap();
        assert_eq!(t.value(c), &[0.0; 3]);

        let a = t.constant(vec64(&[2.0, 3.0]));
        let b = t.constant(vec64(&[4.0, 5.0]));
        let c = t.mul(a, b).unwrap();
        assert_eq!(t.value(c), &[8.0, 15.0]);

        assert!(t.mul(a, xyz).is_err());
    }

    #[test]
    fn ew_mul_gradients_swap_operands() {
        let mut t = Tape::<f64>::new();
        let a = t.leaf(vec64(&[2.0, 3.0]), true);
        let b = t.leaf(vec64(&[4.0, 5.0]), true);
        let c = t.mul(a, b).unwrap();
        let s = t.sum(c);
        t.backward(s).unwrap();
        assert_eq!(t.grad(a).unwrap(), &[4.0, 5.0]);
        assert_eq!(t.grad(b).unwrap(), &[2.0, 3.0]);
    }

    #[test]
    fn reduce_sum_examples() {
        let mut t = Tape::<f64>::new();
        let empty = t.reduce_sum(&[], &[2]).unwrap();
        assert_eq!(t.value(empty), &[0.0, 0.0]);

        let v = t.constant(vec64(&[1.0, 2.0]));
        let one = t.reduce_sum(&[v], &[2]).unwrap();
        assert_eq!(t.value(one), &[1.0, 2.0]);

        let w = t.constant(vec64(&[3.0, 4.0]));
        let two = t.reduce_sum(&[v, w], &[2]).unwrap();
        assert_eq!(t.value(two), &[4.0, 6.0]);

        let odd = t.constant(vec64(&[1.0, 2.0, 3.0]));
        assert!(t.reduce_sum(&[v, odd], &[2]).is_err());
    }

    #[test]
    fn relu_and_sigmoid_examples() {
        let mut t = Tape::<f64>::new();
        let x = t.constant(vec64(&[-1.0, 2.0]));
        let r = t.relu(x);
        assert_eq!(t.value(r), &[0.0, 2.0]);

        let x = t.constant(vec64(&[0.0, 40.0, -40.0]));
        let s = t.sigmoid(x);
        assert_eq!(t.value(s)[0], 0.5);
        assert!((t.value(s)[1] - 1.0).abs() < 1e-6);
        assert!(t.value(s)[2].abs() < 1e-6);
        assert!(t.value(s).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn backward_examples() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(vec64(&[1.0, -2.0, 5.0]), true);
        let s = t.sum(x);
        t.backward(s).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[1.0, 1.0, 1.0]);

        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::scalar(3.0), true);
        let y = t.mul(x, x).unwrap();
        t.backward(y).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(vec64(&[1.0, 2.0]), true);
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_twice_doubles_exactly() {
        let mut t = Tape::<f64>::new();
        let w = t.leaf(mat64(2, 3, &[0.3, -0.1, 0.7, 1.1, -0.4, 0.2]), true);
        let x = t.leaf(vec64(&[0.5, -1.5, 2.0]), true);
        let h = t.matvec(w, x).unwrap();
        let h = t.relu(h);
        let l = t.square(h);
        let l = t.sum(l);
        t.backward(l).unwrap();
        let gw1 = t.grad(w).unwrap().to_vec();
        let gx1 = t.grad(x).unwrap().to_vec();
        t.backward(l).unwrap();
        for (a, b) in t.grad(w).unwrap().iter().zip(&gw1) {
            assert_eq!(*a, 2.0 * b);
        }
        for (a, b) in t.grad(x).unwrap().iter().zip(&gx1) {
            assert_eq!(*a, 2.0 * b);
        }
        t.zero_grad();
        assert!(t.grad(w).is_none());
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::<f64>::new();
        let c = t.constant(vec64(&[1.0, 2.0]));
        let x = t.leaf(vec64(&[3.0, 4.0]), true);
        let y = t.mul(c, x).unwrap();
        let s = t.sum(y);
        t.backward(s).unwrap();
        assert!(t.grad(c).is_none());
        assert_eq!(t.grad(x).unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn params_bind_once_and_frozen_ones_get_no_grad() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", vec64(&[2.0]), true);
        let f = store.add("f", vec64(&[5.0]), false);
        let mut t = Tape::with_params(&store);
        let a = t.param(w);
        assert_eq!(t.param(w), a);
        let b = t.param(f);
        let y = t.mul(a, b).unwrap();
        let s = t.sum(y);
        t.backward(s).unwrap();
        let grads = t.param_grads();
        assert_eq!(grads[0].as_deref(), Some(&[5.0][..]));
        assert!(grads[1].is_none());
    }

    #[test]
    fn segment_sum_and_gather_rows() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(mat64(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), true);
        let s = t.segment_sum(x, &[1, 0, 1], 2).unwrap();
        assert_eq!(t.value(s), &[3.0, 4.0, 6.0, 8.0]);
        let g = t.gather_rows(s, &[1, 1, 0]).unwrap();
        assert_eq!(t.value(g), &[6.0, 8.0, 6.0, 8.0, 3.0, 4.0]);
        let l = t.sum(g);
        t.backward(l).unwrap();
        assert_eq!(t.grad(x).unwrap(), &[2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn embed_columns_is_onehot_product() {
        let mut t = Tape::<f64>::new();
        let w = t.leaf(mat64(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), true);
        let e = t.embed_columns(w, &[2, 0]).unwrap();
        assert_eq!(t.value(e), &[3.0, 6.0, 1.0, 4.0]);
        let onehot = t.constant(vec64(&[0.0, 0.0, 1.0]));
        let direct = t.matvec(w, onehot).unwrap();
        assert_eq!(t.value(direct), &[3.0, 6.0]);
    }

    #[test]
    fn bce_matches_closed_form() {
        let mut t = Tape::<f64>::new();
        let l = t.leaf(vec64(&[0.0, 2.0]), true);
        let loss = t.bce_with_logits(l, &[1.0, 0.0]).unwrap();
        let expected = (-(0.5f64).ln() - (1.0 - sigmoid(2.0f64)).ln()) / 2.0;
        assert!((t.scalar(loss) - expected).abs() < 1e-12);
    }
}
