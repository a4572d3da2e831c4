//! Fixed-order reductions.
//!
//! Samples are split into contiguous chunks in index order, each chunk is
//! summed serially, and the chunk partials are combined as a balanced
//! pairwise tree. The result depends only on the sample order.

use std::ops::Range;

use crate::error::Result;

pub const CHUNK: usize = 256;

pub fn tree_reduce<A, L, M>(n: usize, leaf: L, merge: M) -> Result<Option<A>>
where
    L: Fn(Range<usize>) -> Result<A>,
    M: Fn(A, A) -> A,
{
    let mut level = Vec::with_capacity(n.div_ceil(CHUNK));
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        level.push(leaf(start..end)?);
        start = end;
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        level = next;
    }
    Ok(level.pop())
}

/// Pairwise sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    tree_reduce(xs.len(), |r| Ok(xs[r].iter().sum::<f64>()), |a, b| a + b)
        .ok()
        .flatten()
        .unwrap_or(0.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        sum(xs) / xs.len() as f64
    }
}

/// Running value/gradient/Hessian partials; the Hessian holds the upper triangle row-major.
#[derive(Clone, Debug)]
pub(crate) struct Accum {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Option<Vec<f64>>,
}

impl Accum {
    pub fn new(p: usize, hess: bool) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; p],
            hess: hess.then(|| vec![0.0; p * (p + 1) / 2]),
        }
    }

    pub fn add(&mut self, v: f64, gcoef: f64, hcoef: f64, psi: &[f64]) {
        self.value += v;
        for (g, x) in self.grad.iter_mut().zip(psi) {
            *g += gcoef * x;
        }
        if let Some(h) = self.hess.as_mut() {
            let p = psi.len();
            let mut k = 0;
            for i in 0..p {
                let a = hcoef * psi[i];
                for j in i..p {
                    h[k] += a * psi[j];
                    k += 1;
                }
            }
        }
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.value += other.value;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (self.hess.as_mut(), other.hess.as_ref()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self
    }
}

pub(crate) fn unpack_upper(p: usize, upper: &[f64]) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(p, p);
    let mut k = 0;
    for i in 0..p {
        for j in i..p {
            m[(i, j)] = upper[k];
            m[(j, i)] = upper[k];
            k += 1;
        }
    }
    m
}
