//! Closed-form recovery guarantees for the thresholding forward pass.
//!
//! Probability outputs come in a raw form (which may exceed 1 and is then
//! vacuous) and a clamped form in `[0, 1]`.

use crate::error::{Error, Result};
use crate::matrix::sum_squares;

/// Tolerance for checking caller-supplied `zeta_prev` values against the
/// error recursion.
pub const CHAIN_TOL: f64 = 1e-9;

/// Everything the per-layer bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerBoundInputs {
    /// smallest nonzero magnitude of the layer's true code
    pub x_min: f64,
    /// largest nonzero magnitude of the layer's true code
    pub x_max: f64,
    /// mutual coherence of the layer dictionary
    pub mu: f64,
    /// stripe sparsity budget
    pub s: usize,
    /// error budget of the layer input (`zeta_{l-1}`)
    pub zeta_prev: f64,
    /// atoms per spatial position
    pub n: usize,
    /// number of spatial positions
    pub spatial: usize,
    /// number of data columns
    pub d: usize,
    /// worst patch nonzero count of the layer estimate, feeding the error
    /// recursion into the next layer
    pub patch_nonzeros: usize,
}

/// Largest stripe sparsity certified by the worst-case coherence argument:
/// recovery is guaranteed when `S` is strictly below the returned value.
/// Returns `+inf` for an orthonormal dictionary.
pub fn uniform_sparsity_bound(inputs: &LayerBoundInputs) -> f64 {
    if inputs.mu == 0.0 {
        return f64::INFINITY;
    }
    (1.0 / inputs.mu) / inputs.x_max * (0.5 * inputs.x_min - inputs.zeta_prev) + 0.5
}

pub fn uniform_condition_holds(inputs: &LayerBoundInputs) -> bool {
    (inputs.s as f64) < uniform_sparsity_bound(inputs)
}

/// `2 n M exp(-x_min^2 / (8 (x_max^2 mu^2 S + zeta^2)))`, unclamped.
///
/// A zero denominator is resolved by its limit: 0 when `x_min > 0`,
/// otherwise the exponential is taken as 1.
pub fn layer_summand(inputs: &LayerBoundInputs) -> f64 {
    let prefactor = 2.0 * inputs.n as f64 * inputs.spatial as f64;
    let spread = inputs.x_max * inputs.x_max * inputs.mu * inputs.mu * inputs.s as f64
        + inputs.zeta_prev * inputs.zeta_prev;
    if spread == 0.0 {
        return if inputs.x_min > 0.0 { 0.0 } else { prefactor };
    }
    prefactor * (-(inputs.x_min * inputs.x_min) / (8.0 * spread)).exp()
}

/// Single-vector, single-layer failure probability bound (clamped).
pub fn layer_failure_bound(inputs: &LayerBoundInputs) -> f64 {
    layer_summand(inputs).min(1.0)
}

/// `d * sum_l layer_summand(l)`, unclamped, after checking that every
/// `zeta_prev` follows from the previous layer through [`error_recursion`].
pub fn pathway_failure_bound_raw(per_layer: &[LayerBoundInputs]) -> Result<f64> {
    let first = per_layer
        .first()
        .ok_or_else(|| Error::InvalidSpec("pathway bound needs at least one layer".into()))?;
    for (i, pair) in per_layer.windows(2).enumerate() {
        let (prev, cur) = (&pair[0], &pair[1]);
        let expected = error_recursion(
            prev.patch_nonzeros,
            prev.mu,
            prev.s,
            prev.x_max,
            prev.zeta_prev,
        );
        if (expected - cur.zeta_prev).abs() > CHAIN_TOL {
            return Err(Error::ChainMismatch {
                layer: i + 2,
                expected,
                found: cur.zeta_prev,
            });
        }
    }
    let sum: f64 = per_layer.iter().map(layer_summand).sum();
    Ok(first.d as f64 * sum)
}

/// Failure probability bound for the whole activation pathway of `d`
/// columns (clamped).
pub fn pathway_failure_bound(per_layer: &[LayerBoundInputs]) -> Result<f64> {
    Ok(pathway_failure_bound_raw(per_layer)?.min(1.0))
}

/// Error budget of a layer whose support was recovered:
/// `sqrt(support_size) * (mu (S - 1) x_max + zeta_prev)`.
pub fn error_recursion(support_size: usize, mu: f64, s: usize, x_max: f64, zeta_prev: f64) -> f64 {
    (support_size as f64).sqrt() * (mu * s.saturating_sub(1) as f64 * x_max + zeta_prev)
}

fn log_union(n: usize, spatial: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidSpec(format!("delta {delta} must lie in (0, 1)")));
    }
    Ok((2.0 * spatial as f64 * n as f64 / delta).ln())
}

/// Stripe sparsity for which the layer fails with probability at most
/// `delta`; scales as `mu^-2`. Negative values mean no sparsity is admissible.
pub fn admissible_sparsity(
    x_min: f64,
    x_max: f64,
    zeta_prev: f64,
    mu: f64,
    n: usize,
    spatial: usize,
    delta: f64,
) -> Result<f64> {
    if mu == 0.0 {
        return Err(Error::ZeroCoherence);
    }
    let log = log_union(n, spatial, delta)?;
    let xmax2 = x_max * x_max;
    Ok((x_min * x_min / (8.0 * xmax2 * log) - zeta_prev * zeta_prev / xmax2) / (mu * mu))
}

/// Largest input noise level for which [`admissible_sparsity`] can be
/// positive: `x_min / sqrt(8 ln(2 M n / delta))`.
pub fn noise_admissibility(x_min: f64, n: usize, spatial: usize, delta: f64) -> Result<f64> {
    let log = log_union(n, spatial, delta)?;
    Ok(x_min / (8.0 * log).sqrt())
}

/// Tail bound `P(|sum eps_i alpha_i| > t) <= 2 exp(-t^2 / (2 |alpha|^2))`,
/// clamped to 1. A zero vector has zero tail.
pub fn rademacher_tail(alpha: &[f64], t: f64) -> f64 {
    let energy = sum_squares(alpha.iter().copied());
    if energy == 0.0 {
        return 0.0;
    }
    (2.0 * (-(t * t) / (2.0 * energy)).exp()).min(1.0)
}

/// Informational lower bound `m^{-1/2} sqrt(1 - 1/gamma)` on the coherence
/// of an `m x gamma m` matrix.
pub fn welch_bound(rows: usize, cols: usize) -> f64 {
    if cols <= rows || rows == 0 {
        return 0.0;
    }
    let gamma = cols as f64 / rows as f64;
    ((1.0 - 1.0 / gamma) / rows as f64).sqrt()
}

/// Configuration-level description of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerTheory {
    pub x_min: f64,
    pub x_max: f64,
    pub mu: f64,
    pub s: usize,
    pub n: usize,
    pub patch_len: usize,
    pub stripe_len: usize,
}

impl LayerTheory {
    /// Worst patch nonzero count of any code within the stripe budget.
    pub fn worst_patch_nonzeros(&self) -> usize {
        let stripes = self.patch_len.div_ceil(self.stripe_len.max(1));
        self.patch_len.min(stripes * self.s)
    }
}

/// Per-layer bound inputs with `zeta_prev` propagated from `zeta_0` through
/// the error recursion, using the worst patch count the budgets allow.
pub fn chain_inputs(
    layers: &[LayerTheory],
    zeta_0: f64,
    spatial: usize,
    d: usize,
) -> Vec<LayerBoundInputs> {
    let mut zeta = zeta_0;
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        let inputs = LayerBoundInputs {
            x_min: layer.x_min,
            x_max: layer.x_max,
            mu: layer.mu,
            s: layer.s,
            zeta_prev: zeta,
            n: layer.n,
            spatial,
            d,
            patch_nonzeros: layer.worst_patch_nonzeros(),
        };
        zeta = error_recursion(inputs.patch_nonzeros, layer.mu, layer.s, layer.x_max, zeta);
        out.push(inputs);
    }
    out
}

/// The error budget after the last layer of a chain.
pub fn final_zeta(chain: &[LayerBoundInputs]) -> f64 {
    chain.last().map_or(0.0, |l| {
        error_recursion(l.patch_nonzeros, l.mu, l.s, l.x_max, l.zeta_prev)
    })
}
