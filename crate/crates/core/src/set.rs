//! Variable-cardinality sets of fixed-width feature vectors.

use crate::error::{dim_err, Result};
use crate::scalar::Scalar;

/// A set of `len()` elements in `R^dim`, stored row-major.
///
/// The storage order is only meaningful where documented (decoder outputs are
/// in key order); as a set, the order carries no information.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementSet<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> ElementSet<T> {
    pub fn empty(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_flat(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(dim_err("ElementSet::from_flat", format!("multiple of {dim}"), data.len()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<T>]) -> Result<Self> {
        let mut set = Self::empty(dim);
        for r in rows {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, element: &[T]) -> Result<()> {
        if element.len() != self.dim {
            return Err(dim_err("ElementSet::push", self.dim, element.len()));
        }
        self.data.extend_from_slice(element);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// The same elements, reordered so that output `i` is input `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = Self::empty(self.dim);
        for &i in order {
            out.data.extend_from_slice(self.get(i));
        }
        out
    }

    /// Concatenation of two sets (a multiset union).
    pub fn union(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(dim_err("ElementSet::union", self.dim, other.dim));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { dim: self.dim, data })
    }

    pub fn cast<U: Scalar>(&self) -> ElementSet<U> {
        ElementSet {
            dim: self.dim,
            data: self.data.iter().map(|&v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Squared Euclidean distance.
pub fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}
