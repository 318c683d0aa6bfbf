//! Patch and stripe sparsity measures.
//!
//! Both operators extract a run of consecutive entries starting at every
//! index of the vector, wrapping past the end. The `alpha = 0` measure is
//! the largest nonzero count over those windows, the `alpha = 2` measure the
//! largest Euclidean norm.

use crate::error::{Error, Result};
use crate::matrix::{sum_squares, Matrix};

/// Which local measure to take over a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alpha {
    Count,
    Euclid,
}

impl TryFrom<u32> for Alpha {
    type Error = Error;

    fn try_from(alpha: u32) -> Result<Self> {
        match alpha {
            0 => Ok(Alpha::Count),
            2 => Ok(Alpha::Euclid),
            other => Err(Error::InvalidAlpha(other)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    patch_len: usize,
    vector_len: usize,
}

impl PatchSpec {
    pub fn new(patch_len: usize, vector_len: usize) -> Result<Self> {
        if patch_len == 0 || patch_len > vector_len {
            return Err(Error::InvalidSpec(format!(
                "patch length {patch_len} must lie in 1..={vector_len}"
            )));
        }
        Ok(PatchSpec {
            patch_len,
            vector_len,
        })
    }

    pub fn patch_len(&self) -> usize {
        self.patch_len
    }

    pub fn vector_len(&self) -> usize {
        self.vector_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StripeSpec {
    stripe_len: usize,
    vector_len: usize,
}

/// `floor((2 * (m / s) - 1) * n)` evaluated exactly as `floor((2m - s) n / s)`.
///
/// Returns `None` when the expression is not positive.
pub fn stripe_length(m: usize, s: usize, n: usize) -> Option<usize> {
    if s == 0 || 2 * m <= s {
        return None;
    }
    let len = (2 * m - s) * n / s;
    (len > 0).then_some(len)
}

impl StripeSpec {
    /// Stripe for a layer with atom length `m`, stride `s` and `n` atoms per shift.
    pub fn for_layer(m: usize, s: usize, n: usize, vector_len: usize) -> Result<Self> {
        let len = stripe_length(m, s, n).ok_or_else(|| {
            Error::InvalidSpec(format!(
                "stripe length floor((2*{m}/{s} - 1)*{n}) is not positive"
            ))
        })?;
        StripeSpec::with_len(len, vector_len)
    }

    pub fn with_len(stripe_len: usize, vector_len: usize) -> Result<Self> {
        if stripe_len == 0 || stripe_len > vector_len {
            return Err(Error::InvalidSpec(format!(
                "stripe length {stripe_len} must lie in 1..={vector_len}"
            )));
        }
        Ok(StripeSpec {
            stripe_len,
            vector_len,
        })
    }

    pub fn stripe_len(&self) -> usize {
        self.stripe_len
    }

    pub fn vector_len(&self) -> usize {
        self.vector_len
    }
}

pub fn patch_max_norm(x: &[f64], spec: &PatchSpec, alpha: u32) -> Result<f64> {
    let alpha = Alpha::try_from(alpha)?;
    check_len(spec.vector_len, x.len())?;
    Ok(window_max(x, spec.patch_len, alpha))
}

pub fn stripe_max_norm(x: &[f64], spec: &StripeSpec, alpha: u32) -> Result<f64> {
    let alpha = Alpha::try_from(alpha)?;
    check_len(spec.vector_len, x.len())?;
    Ok(window_max(x, spec.stripe_len, alpha))
}

/// Column-wise maximum of [`stripe_max_norm`].
pub fn matrix_stripe_max(x: &Matrix, spec: &StripeSpec, alpha: u32) -> Result<f64> {
    let alpha = Alpha::try_from(alpha)?;
    if x.cols() == 0 {
        return Err(Error::EmptyMatrix);
    }
    check_len(spec.vector_len, x.rows())?;
    Ok(x.columns()
        .map(|c| window_max(c, spec.stripe_len, alpha))
        .fold(0.0, f64::max))
}

/// Maximum of the windowed measure over all `x.len()` cyclic windows.
///
/// `len` must not exceed `x.len()`.
pub fn window_max(x: &[f64], len: usize, alpha: Alpha) -> f64 {
    let n = x.len();
    if n == 0 || len == 0 {
        return 0.0;
    }
    match alpha {
        Alpha::Count => window_max_count(x, len) as f64,
        Alpha::Euclid => (0..n)
            .map(|start| sum_squares((0..len).map(|k| x[(start + k) % n])))
            .fold(0.0, f64::max)
            .sqrt(),
    }
}

/// Sliding count of nonzeros.
pub fn window_max_count(x: &[f64], len: usize) -> usize {
    let n = x.len();
    if n == 0 || len == 0 {
        return 0;
    }
    let nz = |i: usize| usize::from(x[i % n] != 0.0);
    let mut count: usize = (0..len).map(nz).sum();
    let mut best = count;
    for start in 1..n {
        count = count + nz(start + len - 1) - nz(start - 1);
        best = best.max(count);
    }
    best
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
