//! Layered hard-thresholding forward pass and recovery bookkeeping.

use std::collections::BTreeSet;

use crate::bounds::error_recursion;
use crate::conv_dict::{apply_mask, ConvDictionary, SignMask};
use crate::error::{Error, Result};
use crate::generator::{check_network, support_of, LayeredSignal, NetworkSpec, NoisyObservation};
use crate::matrix::Matrix;
use crate::measures::{patch_max_norm, window_max_count};

/// Keeps the `k` largest-magnitude entries of `v` and zeroes the rest.
/// Equal magnitudes are resolved in favour of the lower index.
pub fn hard_threshold(v: &[f64], k: usize) -> Result<Vec<f64>> {
    if k > v.len() {
        return Err(Error::KOutOfRange { k, len: v.len() });
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    // stable: ties keep ascending index order
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()));
    let mut out = vec![0.0; v.len()];
    for &i in &order[..k] {
        out[i] = v[i];
    }
    Ok(out)
}

/// `hard_threshold((A D)^T x_hat_prev, k)`
pub fn forward_layer(
    x_hat_prev: &[f64],
    dict: &ConvDictionary,
    mask: &SignMask,
    k: usize,
) -> Result<Vec<f64>> {
    let op = apply_mask(dict, mask)?;
    hard_threshold(&op.matvec_t(x_hat_prev)?, k)
}

pub fn support_equal(a: &[usize], b: &[usize]) -> bool {
    a.iter().collect::<BTreeSet<_>>() == b.iter().collect::<BTreeSet<_>>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// `estimates[0]` is the observation, `estimates[l]` the layer-`l` estimate
    pub estimates: Vec<Matrix>,
    /// `support_match[l - 1][j]`
    pub support_match: Vec<Vec<bool>>,
    /// worst patch error `|x_hat - x|` of layer `l`, `errors[l - 1][j]`
    pub errors: Vec<Vec<f64>>,
    /// per-column error budget from the recursion, `zeta[l - 1][j]`
    pub zeta: Vec<Vec<f64>>,
    pub pathway_recovered: Vec<bool>,
}

impl RecoveryResult {
    pub fn depth(&self) -> usize {
        self.support_match.len()
    }

    /// Whether column `j` matched at every layer up to and including `l`.
    pub fn matched_through(&self, l: usize, j: usize) -> bool {
        (1..=l).all(|k| self.support_match[k - 1][j])
    }

    pub fn all_recovered(&self) -> bool {
        self.pathway_recovered.iter().all(|r| *r)
    }
}

/// Runs the forward pass on every column, using the true per-column support
/// sizes as the thresholding cardinalities.
pub fn run_forward_pass(
    obs: &NoisyObservation,
    truth: &LayeredSignal,
    dicts: &[ConvDictionary],
    masks: &[SignMask],
    spec: &NetworkSpec,
) -> Result<RecoveryResult> {
    check_network(spec, dicts, masks)?;
    let depth = spec.depth();
    if truth.depth() != depth {
        return Err(Error::DimensionMismatch {
            expected: depth,
            found: truth.depth(),
        });
    }
    let d = obs.x_hat_0.cols();
    if truth.d() != d || obs.x_hat_0.rows() != spec.vector_len(0) {
        return Err(Error::DimensionMismatch {
            expected: truth.d(),
            found: d,
        });
    }
    let mus: Vec<f64> = dicts
        .iter()
        .map(|dict| dict.mutual_coherence().or(Ok::<_, Error>(0.0)))
        .collect::<Result<_>>()?;
    let patches = (1..=depth)
        .map(|l| spec.patch_spec(l))
        .collect::<Result<Vec<_>>>()?;

    let mut estimates: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(d); depth + 1];
    let mut support_match = vec![Vec::with_capacity(d); depth];
    let mut errors = vec![Vec::with_capacity(d); depth];
    let mut zeta = vec![Vec::with_capacity(d); depth];

    for j in 0..d {
        let mut current = obs.x_hat_0.col(j).to_vec();
        let mut zeta_prev = spec.zeta_0;
        estimates[0].push(current.clone());
        for l in 1..=depth {
            let k = truth.supports[l][j].len();
            let next = forward_layer(&current, &dicts[l - 1], &masks[l - 1], k)?;
            let truth_col = truth.layers[l].col(j);
            let matched = support_equal(&support_of(&next), &truth.supports[l][j]);
            let diff: Vec<f64> = next.iter().zip(truth_col).map(|(a, b)| a - b).collect();
            let err = patch_max_norm(&diff, &patches[l - 1], 2)?;
            let layer = spec.layer(l);
            let z = error_recursion(
                window_max_count(&next, patches[l - 1].patch_len()),
                mus[l - 1],
                layer.budget,
                layer.x_max,
                zeta_prev,
            );
            support_match[l - 1].push(matched);
            errors[l - 1].push(err);
            zeta[l - 1].push(z);
            zeta_prev = z;
            estimates[l].push(next.clone());
            current = next;
        }
    }

    let estimates = estimates
        .iter()
        .enumerate()
        .map(|(l, cols)| Matrix::from_columns(spec.vector_len(l), cols))
        .collect::<Result<Vec<_>>>()?;
    let pathway_recovered = (0..d)
        .map(|j| support_match.iter().all(|layer| layer[j]))
        .collect();
    Ok(RecoveryResult {
        estimates,
        support_match,
        errors,
        zeta,
        pathway_recovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv_dict::{build_conv_dictionary, sample_sign_mask, LocalDictionary};
    use crate::generator::{
        build_dictionaries, inject_noise, sample_layered_signal, sample_masks, DictionarySource,
        LayerSpec,
    };
    use proptest::prelude::*;

    #[test]
    fn threshold_examples() {
        let v = [3.0, -5.0, 1.0, 4.0];
        assert_eq!(hard_threshold(&v, 0).unwrap(), vec![0.0; 4]);
        assert_eq!(hard_threshold(&v, 4).unwrap(), v.to_vec());
        assert!(matches!(hard_threshold(&v, 5), Err(Error::KOutOfRange { k: 5, len: 4 })));
        // brute force over all 2-subsets maximising retained energy
        let mut best = (0.0, (0, 0));
        for a in 0..4 {
            for b in (a + 1)..4 {
                let e = v[a] * v[a] + v[b] * v[b];
                if e > best.0 {
                    best = (e, (a, b));
                }
            }
        }
        let mut expected = vec![0.0; 4];
        expected[best.1 .0] = v[best.1 .0];
        expected[best.1 .1] = v[best.1 .1];
        assert_eq!(expected, vec![0.0, -5.0, 0.0, 4.0]);
        assert_eq!(hard_threshold(&v, 2).unwrap(), expected);
    }

    #[test]
    fn ties_prefer_lower_index() {
        assert_eq!(
            hard_threshold(&[1.0, -2.0, 2.0, -2.0], 2).unwrap(),
            vec![0.0, -2.0, 2.0, 0.0]
        );
    }

    #[test]
    fn support_set_semantics() {
        assert!(support_equal(&[], &[]));
        assert!(support_equal(&[1, 2], &[2, 1]));
        assert!(!support_equal(&[1, 2], &[1, 3]));
    }

    #[test]
    fn orthonormal_single_atom_recovery() {
        let local = LocalDictionary::identity(2, 1).unwrap();
        let d = build_conv_dictionary(local, 4, 2).unwrap();
        let mask = sample_sign_mask(2, 4, 3, 1).unwrap();
        let op = apply_mask(&d, &mask).unwrap();
        for i in 0..d.cols() {
            let mut e = vec![0.0; d.cols()];
            e[i] = 1.0;
            let y = op.matvec(&e).unwrap();
            assert_eq!(forward_layer(&y, &d, &mask, 1).unwrap(), e);
            assert_eq!(forward_layer(&y, &d, &mask, 0).unwrap(), vec![0.0; d.cols()]);
        }
    }

    fn one_layer(dictionary: DictionarySource, m: usize, n: usize, budget: usize) -> NetworkSpec {
        NetworkSpec {
            spatial: 16,
            d: 8,
            zeta_0: 0.0,
            layers: vec![LayerSpec {
                m,
                n,
                s: 1,
                budget,
                x_min: 1.0,
                x_max: 2.0,
                nonzeros: None,
                dictionary,
            }],
        }
    }

    #[test]
    fn identity_network_recovers_exactly() {
        let spec = one_layer(DictionarySource::Identity, 1, 1, 1);
        let dicts = build_dictionaries(&spec, 0).unwrap();
        let masks = sample_masks(&spec, 0).unwrap();
        let truth = sample_layered_signal(&spec, &dicts, &masks, 0).unwrap();
        let obs = inject_noise(&truth, 0.0, 1, 0).unwrap();
        let res = run_forward_pass(&obs, &truth, &dicts, &masks, &spec).unwrap();
        assert!(res.all_recovered());
        assert!(res.errors[0].iter().all(|e| *e == 0.0));
        assert_eq!(res.estimates[1], truth.layers[1]);
    }

    #[test]
    fn low_coherence_layer_matches_dense_oracle() {
        let spec = one_layer(DictionarySource::SpikeCoherence { target: 0.05 }, 4, 1, 2);
        let dicts = build_dictionaries(&spec, 1).unwrap();
        let masks = sample_masks(&spec, 2).unwrap();
        let truth = sample_layered_signal(&spec, &dicts, &masks, 3).unwrap();
        let obs = inject_noise(&truth, 0.0, 4, 4).unwrap();
        let res = run_forward_pass(&obs, &truth, &dicts, &masks, &spec).unwrap();

        let dense = apply_mask(&dicts[0], &masks[0]).unwrap().dense();
        for j in 0..spec.d {
            let y = obs.x_hat_0.col(j);
            let corr: Vec<f64> = (0..dense.cols())
                .map(|c| (0..dense.rows()).map(|r| dense.get(r, c) * y[r]).sum())
                .collect();
            let k = truth.supports[1][j].len();
            let mut idx: Vec<usize> = (0..corr.len()).collect();
            idx.sort_by(|a, b| corr[*b].abs().partial_cmp(&corr[*a].abs()).unwrap().then(a.cmp(b)));
            let mut top: Vec<usize> = idx[..k].to_vec();
            top.sort_unstable();
            assert_eq!(top, truth.supports[1][j]);
            assert_eq!(support_of(res.estimates[1].col(j)), top);
            for c in 0..corr.len() {
                let expect = if top.contains(&c) { corr[c] } else { 0.0 };
                assert!((res.estimates[1].get(c, j) - expect).abs() < 1e-12);
            }
        }
        assert!(res.all_recovered());
    }

    #[test]
    fn two_layer_matches_dense_recursion() {
        let spec = NetworkSpec {
            spatial: 8,
            d: 4,
            zeta_0: 0.02,
            layers: vec![
                LayerSpec {
                    m: 4,
                    n: 2,
                    s: 1,
                    budget: 6,
                    x_min: 1e-3,
                    x_max: 10.0,
                    nonzeros: None,
                    dictionary: DictionarySource::Gaussian,
                },
                LayerSpec {
                    m: 4,
                    n: 2,
                    s: 2,
                    budget: 1,
                    x_min: 1.0,
                    x_max: 1.0,
                    nonzeros: Some(1),
                    dictionary: DictionarySource::Gaussian,
                },
            ],
        };
        let dicts = build_dictionaries(&spec, 8).unwrap();
        let masks = sample_masks(&spec, 9).unwrap();
        let truth = sample_layered_signal(&spec, &dicts, &masks, 10).unwrap();
        let obs = inject_noise(&truth, spec.zeta_0, 4, 11).unwrap();
        let res = run_forward_pass(&obs, &truth, &dicts, &masks, &spec).unwrap();

        let dense: Vec<Matrix> = (0..2).map(|l| apply_mask(&dicts[l], &masks[l]).unwrap().dense()).collect();
        for j in 0..spec.d {
            let mut x = obs.x_hat_0.col(j).to_vec();
            for l in 0..2 {
                let a = &dense[l];
                let corr: Vec<f64> = (0..a.cols())
                    .map(|c| (0..a.rows()).map(|r| a.get(r, c) * x[r]).sum())
                    .collect();
                let k = truth.supports[l + 1][j].len();
                let mut idx: Vec<usize> = (0..corr.len()).collect();
                idx.sort_by(|p, q| corr[*q].abs().partial_cmp(&corr[*p].abs()).unwrap().then(p.cmp(q)));
                let mut next = vec![0.0; corr.len()];
                for &i in &idx[..k] {
                    next[i] = corr[i];
                }
                x = next;
            }
            for (a, b) in x.iter().zip(res.estimates[2].col(j)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recovered_flags_are_consistent() {
        let spec = one_layer(DictionarySource::Gaussian, 3, 2, 3);
        let dicts = build_dictionaries(&spec, 5).unwrap();
        let masks = sample_masks(&spec, 6).unwrap();
        let truth = sample_layered_signal(&spec, &dicts, &masks, 7).unwrap();
        let obs = inject_noise(&truth, 0.05, 3, 8).unwrap();
        let res = run_forward_pass(&obs, &truth, &dicts, &masks, &spec).unwrap();
        for j in 0..spec.d {
            if res.pathway_recovered[j] {
                assert_eq!(support_of(res.estimates[1].col(j)), truth.supports[1][j]);
            }
            assert_eq!(res.pathway_recovered[j], res.matched_through(1, j));
        }
    }

    proptest! {
        #[test]
        fn threshold_idempotent_and_sized(
            v in proptest::collection::vec(-5.0..5.0f64, 1..20),
            frac in 0.0..=1.0f64,
        ) {
            let k = ((v.len() as f64) * frac).floor() as usize;
            let once = hard_threshold(&v, k).unwrap();
            prop_assert_eq!(hard_threshold(&once, k).unwrap(), once.clone());
            let nnz = v.iter().filter(|x| **x != 0.0).count();
            prop_assert_eq!(once.iter().filter(|x| **x != 0.0).count(), k.min(nnz));
            for (a, b) in once.iter().zip(&v) {
                prop_assert!(*a == 0.0 || a == b);
            }
        }
    }
}
