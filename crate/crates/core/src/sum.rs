//! Deterministic compensated reductions.
//!
//! Quadratures feed stopping criteria at the 1e-14 level, so plain left-fold
//! summation over a quarter million grid points is not accurate enough and
//! thread-order-dependent reductions are not reproducible. All sums here are
//! Kahan-compensated over fixed-size chunks, with the chunk results combined
//! in index order; the result does not depend on the number of threads.

use crate::C64;
use rayon::prelude::*;

const CHUNK: usize = 8192;

#[derive(Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

fn combine(parts: Vec<f64>) -> f64 {
    let mut acc = Kahan::default();
    for p in parts {
        acc.add(p);
    }
    acc.value()
}

/// Sum `f` over chunk index ranges `[lo, hi)` covering `0..n`.
/// `f` must itself accumulate its chunk with a `Kahan`.
pub fn chunked_sum(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let chunks = n.div_ceil(CHUNK);
    if chunks == 1 {
        return f(0, n);
    }
    let parts: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK, ((c + 1) * CHUNK).min(n)))
        .collect();
    combine(parts)
}

/// `sum_i a[i] * conj(b[i])`, deterministic.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    let re = chunked_sum(a.len(), |lo, hi| {
        let mut acc = Kahan::default();
        for i in lo..hi {
            acc.add(a[i].re * b[i].re + a[i].im * b[i].im);
        }
        acc.value()
    });
    let im = chunked_sum(a.len(), |lo, hi| {
        let mut acc = Kahan::default();
        for i in lo..hi {
            acc.add(a[i].im * b[i].re - a[i].re * b[i].im);
        }
        acc.value()
    });
    C64::new(re, im)
}

/// `sum_i |a[i]|^2`, deterministic.
pub fn norm_sqr(a: &[C64]) -> f64 {
    chunked_sum(a.len(), |lo, hi| {
        let mut acc = Kahan::default();
        for i in lo..hi {
            acc.add(a[i].norm_sqr());
        }
        acc.value()
    })
}

/// Combine per-line partial sums in line order.
pub fn combine_lines(parts: Vec<f64>) -> f64 {
    combine(parts)
}
