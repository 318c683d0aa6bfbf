//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcsc_lab::bounds::{
    chain_inputs, layer_failure_bound, layer_summand, pathway_failure_bound,
    pathway_failure_bound_raw, LayerBoundInputs, LayerTheory,
};
use dcsc_lab::conv_dict::{build_conv_dictionary, ConvDictionary, LocalDictionary, SignMask};
use dcsc_lab::generator::{build_dictionaries, sample_layered_signal, sample_masks};
use dcsc_lab::harness::experiment::{dictionary_seed, run_experiment, run_regime_comparison};
use dcsc_lab::harness::{verify_rademacher, ExperimentConfig, ExperimentReport};
use dcsc_lab::measures::{patch_max_norm, stripe_max_norm, PatchSpec, StripeSpec};

const TRIALS: usize = 1000;
const ERROR_TOL: f64 = 1e-9;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(format!("{name}.toml"))
}

fn load(name: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::read(&config_path(name)).unwrap();
    cfg.output_path = None;
    cfg.workers = 4;
    cfg
}

fn margin(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Columns of `A diag(mask)`, placed entry by entry.
fn dense_oracle(dict: &ConvDictionary, mask: Option<&SignMask>) -> Vec<Vec<f64>> {
    let local = dict.local();
    let rows = dict.rows();
    let mut cols = Vec::with_capacity(dict.cols());
    for p in 0..dict.spatial() {
        for t in 0..local.n() {
            let sign = mask.map_or(1.0, |m| f64::from(m.signs()[p * local.n() + t]));
            let mut c = vec![0.0; rows];
            for r in 0..local.m() {
                c[(p * dict.stride() + r) % rows] += sign * local.get(r, t);
            }
            cols.push(c);
        }
    }
    cols
}

fn coherence_oracle(cols: &[Vec<f64>]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut mu: f64 = 0.0;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let dot: f64 = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum();
            mu = mu.max(dot.abs() / (norm(&cols[i]) * norm(&cols[j])));
        }
    }
    mu
}

fn window_oracle(x: &[f64], len: usize, alpha: u32) -> f64 {
    let n = x.len();
    (0..n)
        .map(|i| {
            let w = (0..len).map(|k| x[(i + k) % n]);
            if alpha == 0 {
                w.filter(|v| *v != 0.0).count() as f64
            } else {
                w.map(|v| v * v).sum::<f64>().sqrt()
            }
        })
        .fold(0.0, f64::max)
}

fn c1_coherence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let m: usize = rng.random_range(1..=8);
        let n = rng.random_range(1..=8);
        let stride = rng.random_range(1..=4);
        let spatial = rng.random_range(2..=16).max(m.div_ceil(stride));
        let local = if i % 5 == 4 {
            LocalDictionary::spike(m, rng.random_range(0.0..0.3), 1).unwrap()
        } else {
            LocalDictionary::gaussian(m, n, 1, &mut rng).unwrap()
        };
        let dict = build_conv_dictionary(local, spatial, stride).unwrap();
        let oracle = coherence_oracle(&dense_oracle(&dict, None));
        let got = dict.mutual_coherence().unwrap();
        let diff = (got - oracle).abs().max((dict.coherence_by_shift() - oracle).abs());
        worst = worst.max(diff);
        if diff > 1e-12 {
            return Err(format!("instance {i}: {got} vs oracle {oracle}"));
        }
    }
    Ok(format!("50 instances, max deviation {worst:.1e}"))
}

fn c2_measures() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let m = rng.random_range(1..=8);
        let n = rng.random_range(1..=8);
        let s = rng.random_range(1..=n);
        let spatial = rng.random_range(1..=32);
        let len = n * spatial;
        let Ok(stripe) = StripeSpec::for_layer(m, s, n, len) else {
            continue;
        };
        let patch_len = rng.random_range(1..=len);
        let patch = PatchSpec::new(patch_len, len).unwrap();
        let x: Vec<f64> = (0..len)
            .map(|_| if rng.random_bool(0.6) { 0.0 } else { rng.random_range(-3.0..3.0) })
            .collect();
        let stripe_len = (2 * m - s) * n / s;
        for alpha in [0, 2] {
            let pairs = [
                (patch_max_norm(&x, &patch, alpha).unwrap(), window_oracle(&x, patch_len, alpha)),
                (
                    stripe_max_norm(&x, &stripe, alpha).unwrap(),
                    window_oracle(&x, stripe_len.min(len), alpha),
                ),
            ];
            for (got, want) in pairs {
                let diff = (got - want).abs();
                let ok = if alpha == 0 { got == want } else { diff <= 1e-12 };
                if !ok {
                    return Err(format!("alpha {alpha}: {got} vs oracle {want} (len {len})"));
                }
                worst = worst.max(diff);
            }
        }
        done += 1;
    }
    Ok(format!("100 vectors, counts exact, max l2 deviation {worst:.1e}"))
}

fn c3_reverse_pass() -> Result<String, String> {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for name in ["uniform", "uniform_deep", "mixed", "two_layer", "deep", "theorem"] {
        let cfg = load(name);
        let spec = &cfg.spec;
        let dicts = build_dictionaries(spec, dictionary_seed(cfg.root_seed, 0)).unwrap();
        for seed in 0..20 {
            let masks = sample_masks(spec, seed).unwrap();
            let sig = sample_layered_signal(spec, &dicts, &masks, seed).unwrap();
            for l in 1..=spec.depth() {
                let cols = dense_oracle(&dicts[l - 1], Some(&masks[l - 1]));
                let layer = spec.layer(l);
                let stripe_len = (2 * layer.m - layer.s) * layer.n / layer.s;
                for j in 0..spec.d {
                    let code = sig.layers[l].col(j);
                    let prev = sig.layers[l - 1].col(j);
                    for (r, want) in prev.iter().enumerate() {
                        let got: f64 = cols.iter().zip(code).map(|(c, x)| c[r] * x).sum();
                        worst = worst.max((got - want).abs());
                    }
                    let count = window_oracle(code, stripe_len.min(code.len()), 0);
                    if count > layer.budget as f64 {
                        return Err(format!("{name}: layer {l} column {j} has {count} > S"));
                    }
                    checked += 1;
                }
            }
        }
    }
    if worst > 1e-12 {
        return Err(format!("reverse pass deviates by {worst:e}"));
    }
    Ok(format!("{checked} layer columns, max deviation {worst:.1e}"))
}

struct Runs {
    reports: Vec<(&'static str, ExperimentReport)>,
}

fn run_all() -> Runs {
    let names = ["uniform", "uniform_deep", "theorem", "mixed", "regime", "two_layer", "deep"];
    let reports = names
        .iter()
        .map(|name| {
            let mut cfg = load(name);
            cfg.num_trials = TRIALS;
            (*name, run_experiment(&cfg).unwrap())
        })
        .collect();
    Runs { reports }
}

fn c4_error_bound(runs: &Runs) -> Result<String, String> {
    let mut checks = 0;
    let mut configs = 0;
    for (name, report) in &runs.reports {
        configs += 1;
        for point in &report.points {
            if point.records.len() < TRIALS {
                return Err(format!("{name}: only {} trials", point.records.len()));
            }
            for rec in &point.records {
                let depth = rec.layers.len();
                let cols = rec.rows.len() / depth;
                for j in 0..cols {
                    let rows = &rec.rows[j * depth..(j + 1) * depth];
                    for (l, row) in rows.iter().enumerate() {
                        assert_eq!((row.column, row.layer), (j, l + 1));
                        if !rows[..=l].iter().all(|r| r.support_match) {
                            break;
                        }
                        checks += 1;
                        if row.measured_error > row.zeta_l + ERROR_TOL {
                            return Err(format!(
                                "{name} trial {} column {j} layer {}: {} > {}",
                                rec.trial_id,
                                l + 1,
                                row.measured_error,
                                row.zeta_l
                            ));
                        }
                    }
                }
            }
        }
    }
    if configs < 5 || checks == 0 {
        return Err(format!("{configs} configs, {checks} checks"));
    }
    Ok(format!("{configs} configs x {TRIALS} trials, {checks} matched checks, 0 violations"))
}

fn c5_theorem(runs: &Runs) -> Result<String, String> {
    let mut tested = 0;
    for (name, report) in &runs.reports {
        for point in &report.points {
            let p = point.setup.theorem1;
            if !(p > 0.0 && p < 0.9) {
                continue;
            }
            let failed = point.records.iter().filter(|r| r.pathway_failed).count();
            let rate = failed as f64 / point.records.len() as f64;
            if rate > p + margin(p, point.records.len()) {
                return Err(format!("{name} [{}]: rate {rate} above bound {p}", point.summary.label));
            }
            tested += 1;
        }
    }
    if tested < 5 {
        return Err(format!("only {tested} points with bound in (0, 0.9)"));
    }
    Ok(format!("{tested} points with bound in (0, 0.9), none above bound + 3 sigma"))
}

/// Worst-case sparsity limit, evaluated from the layer inputs.
fn worst_case_limit(input: &LayerBoundInputs) -> f64 {
    if input.mu == 0.0 {
        return f64::INFINITY;
    }
    (input.x_min / 2.0 - input.zeta_prev) / (input.mu * input.x_max) + 0.5
}

fn c6_uniform(runs: &Runs) -> Result<String, String> {
    let mut tested = 0;
    for (name, report) in &runs.reports {
        for point in &report.points {
            if !point.setup.chain.iter().all(|c| (c.s as f64) < worst_case_limit(c)) {
                continue;
            }
            let failed = point.records.iter().filter(|r| r.pathway_failed).count();
            if failed > 0 {
                return Err(format!("{name} [{}]: {failed} failures", point.summary.label));
            }
            tested += 1;
        }
    }
    if tested == 0 {
        return Err("no configuration satisfies the uniform condition".into());
    }
    Ok(format!("{tested} certified points, 0 failures in {TRIALS} trials each"))
}

fn c7_regimes() -> Result<String, String> {
    let mut cfg = load("regime");
    cfg.num_trials = TRIALS;
    let rows = run_regime_comparison(&cfg).map_err(|e| e.to_string())?;
    let delta = 0.05;
    let limit = delta + margin(delta, TRIALS);
    for row in &rows {
        let spec = &cfg.spec;
        let layer = spec.layer(1);
        let mu = row.mu;
        let uniform = (layer.x_min / 2.0 - spec.zeta_0) / (mu * layer.x_max) + 0.5;
        let log = (2.0 * (spec.spatial * layer.n) as f64 / delta).ln();
        let admissible = (layer.x_min.powi(2) / (8.0 * layer.x_max.powi(2) * log)
            - spec.zeta_0.powi(2) / layer.x_max.powi(2))
            / (mu * mu);
        let s = row.s as f64;
        if mu <= 0.15 && s > uniform && admissible.floor() >= s {
            let rate = row.failed_columns as f64 / row.columns as f64;
            if rate <= limit && row.trials >= TRIALS {
                return Ok(format!(
                    "mu = {mu:.4}, S = {}: worst-case limit {uniform:.3}, probabilistic limit {admissible:.3}, failure rate {rate} <= {limit:.4}",
                    row.s
                ));
            }
            return Err(format!("S = {}: failure rate {rate} above {limit}", row.s));
        }
    }
    Err("no budget separates the two conditions".into())
}

fn tail_oracle(alpha: &[f64], t: f64) -> f64 {
    let energy: f64 = alpha.iter().map(|a| a * a).sum();
    if energy == 0.0 {
        return 0.0;
    }
    (2.0 * (-t * t / (2.0 * energy)).exp()).min(1.0)
}

fn c8_rademacher() -> Result<String, String> {
    let alphas: [Vec<f64>; 3] = [
        vec![1.0],
        vec![0.5; 4],
        vec![3.0, -1.0, 0.5, 2.0, 0.25, -0.75, 1.5],
    ];
    let mut points = 0;
    for (i, alpha) in alphas.iter().enumerate() {
        let norm = alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        let grid: Vec<f64> = (1..=10).map(|k| 0.3 * k as f64 * norm).collect();
        let rows = verify_rademacher(100_000, alpha, &grid, 300 + i as u64).map_err(|e| e.to_string())?;
        for row in rows {
            let bound = tail_oracle(alpha, row.t);
            if row.empirical > bound || (row.bound - bound).abs() > 1e-12 {
                return Err(format!("alpha {i}, t = {}: {} vs bound {bound}", row.t, row.empirical));
            }
            points += 1;
        }
    }
    Ok(format!("3 vectors x 10 thresholds x 1e5 draws, {points} points below the bound"))
}

fn c9_reductions() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for _ in 0..500 {
        let x_max = rng.random_range(0.1..3.0);
        let input = LayerBoundInputs {
            x_min: rng.random_range(0.01..=x_max),
            x_max,
            mu: rng.random_range(0.0..1.0),
            s: rng.random_range(1..20),
            zeta_prev: rng.random_range(0.0..0.5),
            n: rng.random_range(1..=8),
            spatial: rng.random_range(1..=64),
            d: 1,
            patch_nonzeros: 1,
        };
        let single = pathway_failure_bound(&[input]).map_err(|e| e.to_string())?;
        if single.to_bits() != layer_failure_bound(&input).to_bits() {
            return Err(format!("single layer: {single} vs {}", layer_failure_bound(&input)));
        }

        let depth = rng.random_range(1..=3);
        let theory: Vec<LayerTheory> = (0..depth)
            .map(|_| {
                let x_max = rng.random_range(0.5..2.0);
                LayerTheory {
                    x_min: rng.random_range(0.1..=x_max),
                    x_max,
                    mu: rng.random_range(0.0..0.3),
                    s: rng.random_range(1..6),
                    n: rng.random_range(1..=8),
                    patch_len: rng.random_range(1..=8),
                    stripe_len: rng.random_range(1..=15),
                }
            })
            .collect();
        let spatial = rng.random_range(4..=64);
        let chain = chain_inputs(&theory, rng.random_range(0.0..0.1), spatial, 1);
        let raw = pathway_failure_bound_raw(&chain).map_err(|e| e.to_string())?;
        let summed: f64 = chain.iter().map(layer_summand).sum();
        let independent: f64 = chain
            .iter()
            .map(|c| {
                let spread = c.x_max.powi(2) * c.mu.powi(2) * c.s as f64 + c.zeta_prev.powi(2);
                let scale = 2.0 * (c.n * c.spatial) as f64;
                if spread == 0.0 {
                    if c.x_min > 0.0 { 0.0 } else { scale }
                } else {
                    scale * (-c.x_min.powi(2) / (8.0 * spread)).exp()
                }
            })
            .sum();
        if raw.to_bits() != summed.to_bits() || (raw - independent).abs() > 1e-12 * independent.max(1.0) {
            return Err(format!("{depth} layers: {raw} vs summands {summed} / {independent}"));
        }
    }
    Ok("500 random inputs: single-layer bitwise equal, layered raw bound equals summand sum".into())
}

fn c10_reproducible() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let exe = env!("CARGO_BIN_EXE_dcsc-lab");
    let config = config_path("mixed");
    let mut outputs = Vec::new();
    for (run, workers) in [(0, "1"), (1, "4")] {
        let out = dir.path().join(format!("run{run}.csv"));
        let status = Command::new(exe)
            .args(["montecarlo", "--config"])
            .arg(&config)
            .args(["--seed", "42", "--trials", "200", "--workers", workers, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    if outputs[0] != outputs[1] {
        return Err("CSV outputs differ".into());
    }
    Ok(format!("two runs, {} identical bytes", outputs[0].len()))
}

type Check<'a> = Box<dyn Fn() -> Result<String, String> + 'a>;

fn main() -> ExitCode {
    let start = Instant::now();
    let runs = run_all();
    let criteria: Vec<(&str, Check)> = vec![
        ("coherence oracle", Box::new(c1_coherence)),
        ("measure oracles", Box::new(c2_measures)),
        ("reverse-pass consistency", Box::new(c3_reverse_pass)),
        ("deterministic error bound", Box::new(|| c4_error_bound(&runs))),
        ("pathway bound validity", Box::new(|| c5_theorem(&runs))),
        ("uniform-regime dominance", Box::new(|| c6_uniform(&runs))),
        ("probabilistic regime beyond worst case", Box::new(c7_regimes)),
        ("Rademacher concentration", Box::new(c8_rademacher)),
        ("reduction identities", Box::new(c9_reductions)),
        ("reproducibility", Box::new(c10_reproducible)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of 10 criteria passed in {:.1?}", 10 - failures, start.elapsed());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
