//! Ground-truth layered signals from the reverse pass, and observation noise.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::conv_dict::{
    apply_mask, sample_sign_mask, ConvDictionary, LocalDictionary, SignMask,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::measures::{window_max, window_max_count, Alpha, PatchSpec, StripeSpec};
use crate::seed::{derive, Role};

pub const DEFAULT_MAX_RETRIES: usize = 1000;

/// Where a layer's local dictionary comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySource {
    /// i.i.d. standard normal entries, unit columns
    Gaussian,
    /// `[1, tail, ..., tail]`, normalised (requires `n = 1`)
    Spike { tail: f64 },
    /// spike atom whose tail is tuned so the built dictionary has this coherence
    SpikeCoherence { target: f64 },
    /// `m x m` identity (requires `n = m`)
    Identity,
    /// local dictionary CSV
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    /// atom length `m_l`
    pub m: usize,
    /// atoms per spatial position `n_l`
    pub n: usize,
    /// stride `s_l`
    pub s: usize,
    /// stripe sparsity budget `S_l`
    pub budget: usize,
    pub x_min: f64,
    pub x_max: f64,
    /// optional cap on nonzeros per column, only used at the deepest layer
    pub nonzeros: Option<usize>,
    pub dictionary: DictionarySource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// number of spatial positions `M`
    pub spatial: usize,
    /// number of data columns `d`
    pub d: usize,
    /// input noise budget `zeta_0`
    pub zeta_0: f64,
    /// layers `1..=L`, stored at index `l - 1`
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, l: usize) -> &LayerSpec {
        &self.layers[l - 1]
    }

    /// `n_l`, with `n_0 = 1`.
    pub fn channels(&self, l: usize) -> usize {
        if l == 0 {
            1
        } else {
            self.layer(l).n
        }
    }

    /// Length of a layer-`l` column, `n_l * M`.
    pub fn vector_len(&self, l: usize) -> usize {
        self.channels(l) * self.spatial
    }

    pub fn stripe_spec(&self, l: usize) -> Result<StripeSpec> {
        let layer = self.layer(l);
        StripeSpec::for_layer(layer.m, layer.s, layer.n, self.vector_len(l))
    }

    /// Patch operator of layer `l >= 1` acting on layer-`l` columns.
    pub fn patch_spec(&self, l: usize) -> Result<PatchSpec> {
        PatchSpec::new(self.layer(l).m, self.vector_len(l))
    }

    /// Patch operator used to shape and measure the input noise: the support
    /// length of a first-layer atom on the input.
    pub fn noise_patch_spec(&self) -> Result<PatchSpec> {
        PatchSpec::new(self.layer(1).m, self.spatial)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("network needs at least one layer".into()));
        }
        if self.spatial == 0 || self.d == 0 {
            return Err(Error::InvalidSpec("M and d must be positive".into()));
        }
        if self.zeta_0.is_nan() || self.zeta_0 < 0.0 {
            return Err(Error::InvalidSpec(format!("zeta_0 = {} must be >= 0", self.zeta_0)));
        }
        for l in 1..=self.depth() {
            let layer = self.layer(l);
            let rows = self.vector_len(l - 1);
            if layer.m == 0 || layer.n == 0 {
                return Err(Error::InvalidSpec(format!("layer {l}: m and n must be positive")));
            }
            if layer.s * self.spatial != rows {
                return Err(Error::IncompatibleStride {
                    stride: layer.s,
                    spatial: self.spatial,
                    rows,
                });
            }
            if layer.m > rows {
                return Err(Error::InvalidSpec(format!(
                    "layer {l}: atom length {} exceeds input length {rows}",
                    layer.m
                )));
            }
            if !(layer.x_min > 0.0 && layer.x_min <= layer.x_max && layer.x_max.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "layer {l}: need 0 < x_min <= x_max, got [{}, {}]",
                    layer.x_min, layer.x_max
                )));
            }
            let stripe = self
                .stripe_spec(l)
                .map_err(|e| Error::InvalidSpec(format!("layer {l}: {e}")))?;
            if layer.budget == 0 || layer.budget > stripe.stripe_len() {
                return Err(Error::InvalidSpec(format!(
                    "layer {l}: S = {} must lie in 1..={}",
                    layer.budget,
                    stripe.stripe_len()
                )));
            }
            self.patch_spec(l)
                .map_err(|e| Error::InvalidSpec(format!("layer {l}: {e}")))?;
            if layer.nonzeros == Some(0) {
                return Err(Error::InvalidSpec(format!("layer {l}: nonzeros must be positive")));
            }
        }
        Ok(())
    }

    /// Whether every atom overlapping a given atom lies inside a single
    /// stripe window, which the coherence arguments behind the bounds rely on.
    pub fn stripe_covers_overlaps(&self, l: usize) -> bool {
        let layer = self.layer(l);
        let reach = layer.m.div_ceil(layer.s) - 1;
        let shifts = (2 * reach + 1).min(self.spatial);
        match self.stripe_spec(l) {
            Ok(stripe) => shifts * layer.n <= stripe.stripe_len(),
            Err(_) => false,
        }
    }

    /// Whether each layer's error patch covers the support of the next
    /// layer's atoms (`m_{l+1} <= m_l`), so the error budget of one layer is a
    /// valid noise budget for the next.
    pub fn patches_chain(&self) -> bool {
        self.layers.windows(2).all(|w| w[1].m <= w[0].m)
    }
}

/// Builds every layer's dictionary. Random sources draw from `seed`.
pub fn build_dictionaries(spec: &NetworkSpec, seed: u64) -> Result<Vec<ConvDictionary>> {
    spec.validate()?;
    (1..=spec.depth())
        .map(|l| build_layer_dictionary(spec, l, derive(seed, Role::Dictionary, l as u64)))
        .collect()
}

fn build_layer_dictionary(spec: &NetworkSpec, l: usize, seed: u64) -> Result<ConvDictionary> {
    let layer = spec.layer(l);
    let rows = spec.vector_len(l - 1);
    let local = match &layer.dictionary {
        DictionarySource::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            LocalDictionary::gaussian(layer.m, layer.n, l, &mut rng)?
        }
        DictionarySource::Spike { tail } => {
            require_single_atom(layer, l)?;
            LocalDictionary::spike(layer.m, *tail, l)?
        }
        DictionarySource::SpikeCoherence { target } => {
            require_single_atom(layer, l)?;
            let tail = tune_spike_tail(layer.m, spec.spatial, layer.s, rows, *target)?;
            LocalDictionary::spike(layer.m, tail, l)?
        }
        DictionarySource::Identity => {
            if layer.n != layer.m {
                return Err(Error::InvalidSpec(format!(
                    "layer {l}: identity dictionary needs n = m"
                )));
            }
            LocalDictionary::identity(layer.m, l)?
        }
        DictionarySource::File(path) => {
            let local = LocalDictionary::read_csv(path)?;
            if local.m() != layer.m || local.n() != layer.n {
                return Err(Error::InvalidSpec(format!(
                    "layer {l}: {} is {}x{}, expected {}x{}",
                    path.display(),
                    local.m(),
                    local.n(),
                    layer.m,
                    layer.n
                )));
            }
            local
        }
    };
    ConvDictionary::with_rows(local, spec.spatial, layer.s, rows)
}

fn require_single_atom(layer: &LayerSpec, l: usize) -> Result<()> {
    if layer.n != 1 {
        return Err(Error::InvalidSpec(format!("layer {l}: spike dictionary needs n = 1")));
    }
    Ok(())
}

/// Bisects the spike tail until the convolutional dictionary's coherence
/// matches `target` to within 1e-12.
pub fn tune_spike_tail(m: usize, spatial: usize, stride: usize, rows: usize, target: f64) -> Result<f64> {
    let coherence = |tail: f64| -> Result<f64> {
        let local = LocalDictionary::spike(m, tail, 1)?;
        Ok(ConvDictionary::with_rows(local, spatial, stride, rows)?.coherence_by_shift())
    };
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let max = coherence(hi)?;
    if !(target > 0.0 && target <= max) {
        return Err(Error::InvalidSpec(format!(
            "spike coherence target {target} outside (0, {max}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if coherence(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One Rademacher mask per layer, drawn from independent streams of `seed`.
pub fn sample_masks(spec: &NetworkSpec, seed: u64) -> Result<Vec<SignMask>> {
    (1..=spec.depth())
        .map(|l| {
            sample_sign_mask(
                spec.channels(l),
                spec.spatial,
                derive(seed, Role::Mask, l as u64),
                l,
            )
        })
        .collect()
}

/// The true representations `X^(0..=L)` and their supports.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSignal {
    /// `layers[l]` is `X^(l)`, of shape `n_l M x d`
    pub layers: Vec<Matrix>,
    /// `supports[l][j]`: sorted nonzero indices of column `j` of `X^(l)`
    pub supports: Vec<Vec<Vec<usize>>>,
    /// samples drawn per column before all constraints held
    pub attempts: Vec<usize>,
}

impl LayeredSignal {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn d(&self) -> usize {
        self.layers[0].cols()
    }

    /// Fraction of drawn column samples that were accepted.
    pub fn acceptance_rate(&self) -> f64 {
        let total: usize = self.attempts.iter().sum();
        if total == 0 {
            return 1.0;
        }
        self.attempts.len() as f64 / total as f64
    }

    /// Recomputes supports from the stored matrices.
    pub fn from_layers(layers: Vec<Matrix>) -> Self {
        let supports = layers
            .iter()
            .map(|x| x.columns().map(support_of).collect())
            .collect();
        let attempts = vec![1; layers.first().map_or(0, Matrix::cols)];
        LayeredSignal {
            layers,
            supports,
            attempts,
        }
    }
}

pub fn support_of(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| **x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

pub fn sample_layered_signal(
    spec: &NetworkSpec,
    dicts: &[ConvDictionary],
    masks: &[SignMask],
    seed: u64,
) -> Result<LayeredSignal> {
    sample_layered_signal_with_retries(spec, dicts, masks, seed, DEFAULT_MAX_RETRIES)
}

/// Samples every column independently: the deepest code gets a random
/// support that fills its stripe budget and magnitudes uniform in the band,
/// the reverse pass produces the shallower layers, and the column is redrawn
/// until every intermediate layer meets its budget and band.
pub fn sample_layered_signal_with_retries(
    spec: &NetworkSpec,
    dicts: &[ConvDictionary],
    masks: &[SignMask],
    seed: u64,
    max_retries: usize,
) -> Result<LayeredSignal> {
    spec.validate()?;
    let depth = spec.depth();
    check_network(spec, dicts, masks)?;
    let stripes: Vec<StripeSpec> = (1..=depth)
        .map(|l| spec.stripe_spec(l))
        .collect::<Result<_>>()?;

    let mut columns: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(spec.d); depth + 1];
    let mut attempts = Vec::with_capacity(spec.d);
    for j in 0..spec.d {
        let column_seed = derive(seed, Role::Signal, j as u64);
        let mut accepted = None;
        for attempt in 0..max_retries {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(column_seed, Role::Attempt, attempt as u64));
            let stack = draw_column(spec, dicts, masks, &stripes, &mut rng)?;
            if intermediate_ok(spec, &stripes, &stack) {
                accepted = Some((stack, attempt + 1));
                break;
            }
        }
        let (stack, tries) = accepted.ok_or(Error::ConstraintUnsatisfiable {
            layer: depth,
            column: j,
            retries: max_retries,
        })?;
        for (l, col) in stack.into_iter().enumerate() {
            columns[l].push(col);
        }
        attempts.push(tries);
    }

    let layers = columns
        .iter()
        .enumerate()
        .map(|(l, cols)| Matrix::from_columns(spec.vector_len(l), cols))
        .collect::<Result<Vec<_>>>()?;
    let supports = layers
        .iter()
        .map(|x| x.columns().map(support_of).collect())
        .collect();
    Ok(LayeredSignal {
        layers,
        supports,
        attempts,
    })
}

pub(crate) fn check_network(
    spec: &NetworkSpec,
    dicts: &[ConvDictionary],
    masks: &[SignMask],
) -> Result<()> {
    let depth = spec.depth();
    if dicts.len() != depth {
        return Err(Error::DimensionMismatch {
            expected: depth,
            found: dicts.len(),
        });
    }
    if masks.len() != depth {
        return Err(Error::DimensionMismatch {
            expected: depth,
            found: masks.len(),
        });
    }
    for l in 1..=depth {
        let (dict, mask) = (&dicts[l - 1], &masks[l - 1]);
        if dict.rows() != spec.vector_len(l - 1) {
            return Err(Error::DimensionMismatch {
                expected: spec.vector_len(l - 1),
                found: dict.rows(),
            });
        }
        if dict.cols() != spec.vector_len(l) {
            return Err(Error::DimensionMismatch {
                expected: spec.vector_len(l),
                found: dict.cols(),
            });
        }
        if mask.len() != dict.cols() {
            return Err(Error::DimensionMismatch {
                expected: dict.cols(),
                found: mask.len(),
            });
        }
    }
    Ok(())
}

/// Returns `[x^(0), ..., x^(L)]` for one column.
fn draw_column<R: Rng>(
    spec: &NetworkSpec,
    dicts: &[ConvDictionary],
    masks: &[SignMask],
    stripes: &[StripeSpec],
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let depth = spec.depth();
    let deepest = spec.layer(depth);
    let len = spec.vector_len(depth);
    let support = sample_support(
        len,
        stripes[depth - 1].stripe_len(),
        deepest.budget,
        deepest.nonzeros,
        rng,
    );
    let mut code = vec![0.0; len];
    for i in support {
        code[i] = if deepest.x_min == deepest.x_max {
            deepest.x_min
        } else {
            rng.random_range(deepest.x_min..=deepest.x_max)
        };
    }
    let mut stack = vec![Vec::new(); depth + 1];
    stack[depth] = code;
    for l in (1..=depth).rev() {
        let op = apply_mask(&dicts[l - 1], &masks[l - 1])?;
        stack[l - 1] = op.matvec(&stack[l])?;
    }
    Ok(stack)
}

/// Random maximal support under a cyclic window budget: indices are visited
/// in random order and kept unless some window containing them would exceed
/// `budget` nonzeros (or `cap` indices are already kept).
pub fn sample_support<R: Rng + ?Sized>(
    len: usize,
    window: usize,
    budget: usize,
    cap: Option<usize>,
    rng: &mut R,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    // counts[start] = nonzeros in the window beginning at `start`
    let mut counts = vec![0usize; len];
    let limit = cap.unwrap_or(len);
    let mut kept = Vec::new();
    for idx in order {
        if kept.len() >= limit {
            break;
        }
        let starts = (0..window).map(|k| (idx + len - k) % len);
        if starts.clone().all(|s| counts[s] < budget) {
            starts.for_each(|s| counts[s] += 1);
            kept.push(idx);
        }
    }
    kept.sort_unstable();
    kept
}

fn intermediate_ok(spec: &NetworkSpec, stripes: &[StripeSpec], stack: &[Vec<f64>]) -> bool {
    (1..spec.depth()).all(|l| {
        let layer = spec.layer(l);
        let x = &stack[l];
        window_max_count(x, stripes[l - 1].stripe_len()) <= layer.budget
            && x
                .iter()
                .filter(|v| **v != 0.0)
                .all(|v| (layer.x_min..=layer.x_max).contains(&v.abs()))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyObservation {
    pub x_hat_0: Matrix,
    pub noise: Matrix,
}

/// Adds Gaussian noise to `X^(0)`, each column rescaled so its worst
/// `patch_len` window has Euclidean norm exactly `zeta_0`.
pub fn inject_noise(
    signal: &LayeredSignal,
    zeta_0: f64,
    patch_len: usize,
    seed: u64,
) -> Result<NoisyObservation> {
    if zeta_0.is_nan() || zeta_0 < 0.0 {
        return Err(Error::InvalidSpec(format!("zeta_0 = {zeta_0} must be >= 0")));
    }
    let x0 = &signal.layers[0];
    let rows = x0.rows();
    PatchSpec::new(patch_len, rows)?;
    let mut noise = Matrix::zeros(rows, x0.cols());
    if zeta_0 > 0.0 {
        for j in 0..x0.cols() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, Role::Noise, j as u64));
            let col = noise.col_mut(j);
            col.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            let worst = window_max(col, patch_len, Alpha::Euclid);
            let scale = zeta_0 / worst;
            col.iter_mut().for_each(|v| *v *= scale);
        }
    }
    let mut x_hat_0 = x0.clone();
    for j in 0..x0.cols() {
        for (a, b) in x_hat_0.col_mut(j).iter_mut().zip(noise.col(j)) {
            *a += b;
        }
    }
    Ok(NoisyObservation { x_hat_0, noise })
}
