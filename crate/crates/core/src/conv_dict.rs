//! Local and convolutional dictionaries, Rademacher sign masks and mutual
//! coherence.
//!
//! A convolutional dictionary with `rows = stride * spatial` rows and
//! `n * spatial` columns is built by placing every column of a local `m x n`
//! block at each of the `spatial` row offsets `0, stride, 2*stride, ...`,
//! wrapping cyclically past the last row. Column `p * n + t` is local atom
//! `t` placed at offset `p * stride`.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, parse_csv_floats, Matrix};

/// Tolerance used when validating unit-norm local atoms at construction.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Column-count threshold above which coherence switches from the dense Gram
/// scan to the shift-difference scan.
pub const DENSE_COHERENCE_MAX_COLS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDictionary {
    m: usize,
    n: usize,
    layer: usize,
    /// column-major `m x n`
    entries: Vec<f64>,
}

impl LocalDictionary {
    pub fn new(m: usize, n: usize, layer: usize, entries: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidSpec(format!(
                "local dictionary must be at least 1x1, got {m}x{n}"
            )));
        }
        if layer == 0 {
            return Err(Error::InvalidSpec("layer index starts at 1".into()));
        }
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                found: entries.len(),
            });
        }
        Ok(LocalDictionary {
            m,
            n,
            layer,
            entries,
        })
    }

    pub fn from_matrix(matrix: &Matrix, layer: usize) -> Result<Self> {
        let entries = matrix.columns().flatten().copied().collect();
        LocalDictionary::new(matrix.rows(), matrix.cols(), layer, entries)
    }

    /// I.i.d. standard normal entries, columns rescaled to unit norm.
    pub fn gaussian<R: Rng + ?Sized>(m: usize, n: usize, layer: usize, rng: &mut R) -> Result<Self> {
        let entries = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
        let mut local = LocalDictionary::new(m, n, layer, entries)?;
        local.normalize_columns();
        Ok(local)
    }

    /// Single atom `[1, tail, tail, ..., tail]` of length `m`, normalised.
    ///
    /// Shifted copies of this atom overlap in roughly `tail`, which makes the
    /// coherence of the convolutional dictionary directly controllable.
    pub fn spike(m: usize, tail: f64, layer: usize) -> Result<Self> {
        let mut entries = vec![tail; m];
        if let Some(first) = entries.first_mut() {
            *first = 1.0;
        }
        let mut local = LocalDictionary::new(m, 1, layer, entries)?;
        local.normalize_columns();
        Ok(local)
    }

    pub fn identity(m: usize, layer: usize) -> Result<Self> {
        let mut entries = vec![0.0; m * m];
        for i in 0..m {
            entries[i * m + i] = 1.0;
        }
        LocalDictionary::new(m, m, layer, entries)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn get(&self, r: usize, t: usize) -> f64 {
        self.entries[t * self.m + r]
    }

    pub fn column(&self, t: usize) -> &[f64] {
        &self.entries[t * self.m..(t + 1) * self.m]
    }

    pub fn normalize_columns(&mut self) {
        for col in self.entries.chunks_mut(self.m) {
            let norm = norm2(col);
            if norm > 0.0 {
                col.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }

    pub fn check_unit_columns(&self, tol: f64) -> Result<()> {
        for t in 0..self.n {
            let norm = norm2(self.column(t));
            if (norm - 1.0).abs() > tol {
                return Err(Error::NonUnitColumns { column: t, norm });
            }
        }
        Ok(())
    }

    /// First line `m,n,layer`, then `m` rows of `n` entries.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},{}\n", self.m, self.n, self.layer);
        for r in 0..self.m {
            for t in 0..self.n {
                if t > 0 {
                    out.push(',');
                }
                write!(out, "{}", self.get(r, t)).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(origin, "missing m,n,layer header"))?;
        let dims: Vec<usize> = header
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(origin, format!("header {header:?}: {e}")))?;
        let [m, n, layer] = dims[..] else {
            return Err(Error::parse(origin, "header must be m,n,layer"));
        };
        let mut entries = vec![0.0; m * n];
        let mut r = 0;
        for line in lines {
            let row = parse_csv_floats(line).map_err(|e| Error::parse(origin, e))?;
            if row.len() != n || r >= m {
                return Err(Error::parse(origin, format!("row {r} does not fit {m}x{n}")));
            }
            for (t, v) in row.into_iter().enumerate() {
                entries[t * m + r] = v;
            }
            r += 1;
        }
        if r != m {
            return Err(Error::parse(origin, format!("expected {m} rows, found {r}")));
        }
        LocalDictionary::new(m, n, layer, entries)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LocalDictionary::from_csv_str(&text, path)
    }
}

/// Banded circulant dictionary built from a [`LocalDictionary`].
#[derive(Debug)]
pub struct ConvDictionary {
    local: LocalDictionary,
    spatial: usize,
    stride: usize,
    rows: usize,
    coherence: OnceLock<f64>,
}

impl Clone for ConvDictionary {
    fn clone(&self) -> Self {
        let coherence = OnceLock::new();
        if let Some(mu) = self.coherence.get() {
            let _ = coherence.set(*mu);
        }
        ConvDictionary {
            local: self.local.clone(),
            spatial: self.spatial,
            stride: self.stride,
            rows: self.rows,
            coherence,
        }
    }
}

/// Builds the dictionary with `stride * spatial` rows.
pub fn build_conv_dictionary(
    local: LocalDictionary,
    spatial: usize,
    stride: usize,
) -> Result<ConvDictionary> {
    ConvDictionary::with_rows(local, spatial, stride, stride * spatial)
}

impl ConvDictionary {
    /// Builds the dictionary for a target row count, which must be tiled
    /// exactly once by `spatial` shifts of `stride` rows.
    pub fn with_rows(
        local: LocalDictionary,
        spatial: usize,
        stride: usize,
        rows: usize,
    ) -> Result<Self> {
        if stride == 0 || spatial == 0 || stride * spatial != rows {
            return Err(Error::IncompatibleStride {
                stride,
                spatial,
                rows,
            });
        }
        if local.m() > rows {
            return Err(Error::InvalidSpec(format!(
                "atom length {} exceeds {} rows",
                local.m(),
                rows
            )));
        }
        local.check_unit_columns(UNIT_NORM_TOL)?;
        Ok(ConvDictionary {
            local,
            spatial,
            stride,
            rows,
            coherence: OnceLock::new(),
        })
    }

    pub fn local(&self) -> &LocalDictionary {
        &self.local
    }

    pub fn spatial(&self) -> usize {
        self.spatial
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.local.n() * self.spatial
    }

    pub fn atoms_per_shift(&self) -> usize {
        self.local.n()
    }

    /// `(row offset, local atom)` of column `j`.
    pub fn placement(&self, j: usize) -> (usize, usize) {
        let n = self.local.n();
        ((j / n) * self.stride, j % n)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        let (offset, t) = self.placement(j);
        for (r, v) in self.local.column(t).iter().enumerate() {
            out[(offset + r) % self.rows] += v;
        }
        out
    }

    /// `A * code`
    pub fn matvec(&self, code: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols(), code.len())?;
        let mut out = vec![0.0; self.rows];
        for (j, &c) in code.iter().enumerate() {
            if c != 0.0 {
                self.add_column(j, c, &mut out);
            }
        }
        Ok(out)
    }

    /// `A^T * x`
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, x.len())?;
        Ok((0..self.cols()).map(|j| self.column_dot(j, x)).collect())
    }

    pub(crate) fn add_column(&self, j: usize, scale: f64, out: &mut [f64]) {
        let (offset, t) = self.placement(j);
        for (r, v) in self.local.column(t).iter().enumerate() {
            out[(offset + r) % self.rows] += scale * v;
        }
    }

    pub(crate) fn column_dot(&self, j: usize, x: &[f64]) -> f64 {
        let (offset, t) = self.placement(j);
        self.local
            .column(t)
            .iter()
            .enumerate()
            .map(|(r, v)| v * x[(offset + r) % self.rows])
            .sum()
    }

    pub fn dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols());
        for j in 0..self.cols() {
            let (offset, t) = self.placement(j);
            for (r, v) in self.local.column(t).iter().enumerate() {
                let row = (offset + r) % self.rows;
                m.set(row, j, m.get(row, j) + v);
            }
        }
        m
    }

    /// Mutual coherence `max_{i != j} |a_i . a_j|`, computed once and cached.
    pub fn mutual_coherence(&self) -> Result<f64> {
        if self.cols() < 2 {
            return Err(Error::SingleColumn);
        }
        Ok(*self.coherence.get_or_init(|| {
            if self.cols() <= DENSE_COHERENCE_MAX_COLS {
                dense_coherence(&self.dense())
            } else {
                self.coherence_by_shift()
            }
        }))
    }

    /// Coherence from the circulant structure: `<a_{p,t}, a_{q,u}>` only
    /// depends on `(q - p) mod spatial`, so it suffices to correlate the atoms
    /// at shift 0 against every atom at every shift.
    pub fn coherence_by_shift(&self) -> f64 {
        let n = self.local.n();
        let mut mu = 0.0_f64;
        for delta in 0..self.spatial {
            for t in 0..n {
                let base = self.column(t);
                for u in 0..n {
                    if delta == 0 && t == u {
                        continue;
                    }
                    let ip = self.column_dot(delta * n + u, &base).abs();
                    mu = mu.max(ip);
                }
            }
        }
        mu.min(1.0)
    }

    /// Dense materialisation as row-per-line CSV.
    pub fn dense_csv(&self) -> String {
        self.dense().to_csv()
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Max absolute off-diagonal Gram entry of a dense matrix, clamped to 1.
pub fn dense_coherence(m: &Matrix) -> f64 {
    let mut mu = 0.0_f64;
    for i in 0..m.cols() {
        for j in (i + 1)..m.cols() {
            mu = mu.max(dot(m.col(i), m.col(j)).abs());
        }
    }
    mu.min(1.0)
}

/// Diagonal of a Rademacher matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignMask {
    signs: Vec<i8>,
    layer: usize,
}

impl SignMask {
    pub fn from_signs(signs: Vec<i8>, layer: usize) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidSpec("sign mask must be nonempty".into()));
        }
        if let Some(bad) = signs.iter().find(|s| **s != 1 && **s != -1) {
            return Err(Error::InvalidSpec(format!("sign entry {bad} not in {{-1, 1}}")));
        }
        Ok(SignMask { signs, layer })
    }

    pub fn ones(len: usize, layer: usize) -> Self {
        SignMask {
            signs: vec![1; len],
            layer,
        }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn sign(&self, j: usize) -> f64 {
        f64::from(self.signs[j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(3 * self.signs.len());
        for s in &self.signs {
            writeln!(out, "{s}").unwrap();
        }
        out
    }

    pub fn from_csv_str(text: &str, layer: usize, origin: &Path) -> Result<Self> {
        let signs = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.parse::<i8>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(origin, e.to_string()))?;
        SignMask::from_signs(signs, layer)
    }
}

/// I.i.d. uniform signs of length `n * spatial`, reproducible from `seed`.
pub fn sample_sign_mask(n: usize, spatial: usize, seed: u64, layer: usize) -> Result<SignMask> {
    let len = n * spatial;
    if len == 0 {
        return Err(Error::InvalidSpec("sign mask length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_sign_mask_with(len, layer, &mut rng))
}

pub fn sample_sign_mask_with<R: Rng + ?Sized>(len: usize, layer: usize, rng: &mut R) -> SignMask {
    let signs = (0..len)
        .map(|_| if rng.random::<bool>() { 1 } else { -1 })
        .collect();
    SignMask { signs, layer }
}

/// `A * diag(mask)`, applied without forming the product.
#[derive(Debug, Clone, Copy)]
pub struct MaskedDictionary<'a> {
    dict: &'a ConvDictionary,
    mask: &'a SignMask,
}

pub fn apply_mask<'a>(dict: &'a ConvDictionary, mask: &'a SignMask) -> Result<MaskedDictionary<'a>> {
    check_len(dict.cols(), mask.len())?;
    Ok(MaskedDictionary { dict, mask })
}

impl MaskedDictionary<'_> {
    pub fn dict(&self) -> &ConvDictionary {
        self.dict
    }

    pub fn mask(&self) -> &SignMask {
        self.mask
    }

    pub fn rows(&self) -> usize {
        self.dict.rows()
    }

    pub fn cols(&self) -> usize {
        self.dict.cols()
    }

    pub fn matvec(&self, code: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols(), code.len())?;
        let mut out = vec![0.0; self.rows()];
        for (j, &c) in code.iter().enumerate() {
            if c != 0.0 {
                self.dict.add_column(j, self.mask.sign(j) * c, &mut out);
            }
        }
        Ok(out)
    }

    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows(), x.len())?;
        Ok((0..self.cols())
            .map(|j| self.mask.sign(j) * self.dict.column_dot(j, x))
            .collect())
    }

    pub fn dense(&self) -> Matrix {
        let mut m = self.dict.dense();
        for j in 0..m.cols() {
            let s = self.mask.sign(j);
            m.col_mut(j).iter_mut().for_each(|v| *v *= s);
        }
        m
    }

    /// Signs do not change `|a_i . a_j|`, so this is the unmasked coherence.
    pub fn mutual_coherence(&self) -> Result<f64> {
        self.dict.mutual_coherence()
    }
}
