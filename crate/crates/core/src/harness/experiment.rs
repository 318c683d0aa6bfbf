//! Monte Carlo experiments comparing the forward pass against the bounds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    admissible_sparsity, chain_inputs, layer_failure_bound, layer_summand, noise_admissibility,
    pathway_failure_bound, pathway_failure_bound_raw, rademacher_tail, uniform_condition_holds,
    uniform_sparsity_bound, welch_bound, LayerBoundInputs, LayerTheory,
};
use crate::conv_dict::ConvDictionary;
use crate::error::{Error, Result};
use crate::forward::run_forward_pass;
use crate::generator::{
    build_dictionaries, inject_noise, sample_layered_signal, sample_masks, DictionarySource,
    NetworkSpec,
};
use crate::harness::config::ExperimentConfig;
use crate::seed::{derive, trial_seed, Role};

pub const CSV_VERSION_LINE: &str = concat!("# dcsc-lab v", env!("CARGO_PKG_VERSION"));

/// Absolute slack for floating-point roundoff when comparing a measured
/// error with its budget.
pub const ERROR_TOL: f64 = 1e-9;

pub const CSV_HEADER: &str = "trial,column,layer,support_match,measured_error,zeta_l,layer_bound,theorem1_bound,seed,point,layer_bound_raw,theorem1_bound_raw";

/// `3 sqrt(p (1 - p) / trials)`
pub fn binomial_margin(p: f64, trials: usize) -> f64 {
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub index: usize,
    pub draw: usize,
    pub spec: NetworkSpec,
    pub label: String,
}

impl ExperimentConfig {
    /// Cartesian product of dictionary draws, coherence targets, noise
    /// levels and budgets, in that nesting order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let sw = &self.sweep;
        let opt = |v: &[f64]| -> Vec<Option<f64>> {
            if v.is_empty() {
                vec![None]
            } else {
                v.iter().copied().map(Some).collect()
            }
        };
        let budgets: Vec<Option<usize>> = if sw.budgets.is_empty() {
            vec![None]
        } else {
            sw.budgets.iter().copied().map(Some).collect()
        };
        let mut points = Vec::new();
        for draw in 0..sw.dict_draws {
            for coherence in opt(&sw.coherence) {
                for zeta in opt(&sw.zeta_0) {
                    for budget in &budgets {
                        let mut spec = self.spec.clone();
                        let mut label = format!("draw={draw}");
                        let layer = &mut spec.layers[sw.layer - 1];
                        if let Some(target) = coherence {
                            layer.dictionary = DictionarySource::SpikeCoherence { target };
                            write!(label, ";mu={target}").unwrap();
                        }
                        if let Some(b) = budget {
                            layer.budget = *b;
                            write!(label, ";S{}={b}", sw.layer).unwrap();
                        }
                        if let Some(z) = zeta {
                            spec.zeta_0 = z;
                            write!(label, ";zeta_0={z}").unwrap();
                        }
                        points.push(SweepPoint {
                            index: points.len(),
                            draw,
                            spec,
                            label,
                        });
                    }
                }
            }
        }
        points
    }
}

/// Dictionaries and configuration-level bounds of one sweep point.
#[derive(Debug, Clone)]
pub struct PointSetup {
    pub dicts: Vec<ConvDictionary>,
    pub mus: Vec<f64>,
    pub chain: Vec<LayerBoundInputs>,
    pub layer_bounds_raw: Vec<f64>,
    pub layer_bounds: Vec<f64>,
    pub theorem1_raw: f64,
    pub theorem1: f64,
    pub uniform_holds: Vec<bool>,
}

pub fn dictionary_seed(root_seed: u64, draw: usize) -> u64 {
    derive(root_seed, Role::Dictionary, draw as u64)
}

pub fn layer_theory(spec: &NetworkSpec, mus: &[f64]) -> Result<Vec<LayerTheory>> {
    (1..=spec.depth())
        .map(|l| {
            let layer = spec.layer(l);
            Ok(LayerTheory {
                x_min: layer.x_min,
                x_max: layer.x_max,
                mu: mus[l - 1],
                s: layer.budget,
                n: layer.n,
                patch_len: layer.m,
                stripe_len: spec.stripe_spec(l)?.stripe_len(),
            })
        })
        .collect()
}

pub fn prepare_point(spec: &NetworkSpec, dicts: Vec<ConvDictionary>) -> Result<PointSetup> {
    let mus = dicts
        .iter()
        .map(|d| d.mutual_coherence().or(Ok(0.0)))
        .collect::<Result<Vec<f64>>>()?;
    let theory = layer_theory(spec, &mus)?;
    let chain = chain_inputs(&theory, spec.zeta_0, spec.spatial, spec.d);
    let layer_bounds_raw: Vec<f64> = chain.iter().map(layer_summand).collect();
    let layer_bounds = chain.iter().map(layer_failure_bound).collect();
    let theorem1_raw = pathway_failure_bound_raw(&chain)?;
    let theorem1 = pathway_failure_bound(&chain)?;
    let uniform_holds = chain.iter().map(uniform_condition_holds).collect();
    Ok(PointSetup {
        dicts,
        mus,
        chain,
        layer_bounds_raw,
        layer_bounds,
        theorem1_raw,
        theorem1,
        uniform_holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerTrialStats {
    pub layer: usize,
    pub support_match_fraction: f64,
    pub measured_max_error: f64,
    pub zeta_max: f64,
    pub layer_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub column: usize,
    pub layer: usize,
    pub support_match: bool,
    pub measured_error: f64,
    pub zeta_l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub point: usize,
    pub trial_id: usize,
    pub seed: u64,
    pub layers: Vec<LayerTrialStats>,
    pub pathway_recovered_fraction: f64,
    /// some column missed its pathway
    pub pathway_failed: bool,
    pub failed_columns: usize,
    pub theorem1_bound: f64,
    /// checks of the conditional error bound (column, layer pairs whose
    /// support was matched through that layer)
    pub error_checks: usize,
    pub error_violations: usize,
    pub acceptance_rate: f64,
    pub rows: Vec<CsvRow>,
}

pub fn run_trial(
    spec: &NetworkSpec,
    setup: &PointSetup,
    point: usize,
    trial_id: usize,
    seed: u64,
) -> Result<TrialRecord> {
    let masks = sample_masks(spec, seed)?;
    let truth = sample_layered_signal(spec, &setup.dicts, &masks, seed)?;
    let obs = inject_noise(&truth, spec.zeta_0, spec.layer(1).m, seed)?;
    let res = run_forward_pass(&obs, &truth, &setup.dicts, &masks, spec)?;

    let d = spec.d;
    let mut rows = Vec::with_capacity(d * spec.depth());
    let mut error_checks = 0;
    let mut error_violations = 0;
    for j in 0..d {
        for l in 1..=spec.depth() {
            let (err, zeta) = (res.errors[l - 1][j], res.zeta[l - 1][j]);
            if res.matched_through(l, j) {
                error_checks += 1;
                if err > zeta + ERROR_TOL {
                    error_violations += 1;
                }
            }
            rows.push(CsvRow {
                column: j,
                layer: l,
                support_match: res.support_match[l - 1][j],
                measured_error: err,
                zeta_l: zeta,
            });
        }
    }
    let layers = (1..=spec.depth())
        .map(|l| {
            let matched = res.support_match[l - 1].iter().filter(|m| **m).count();
            LayerTrialStats {
                layer: l,
                support_match_fraction: matched as f64 / d as f64,
                measured_max_error: res.errors[l - 1].iter().copied().fold(0.0, f64::max),
                zeta_max: res.zeta[l - 1].iter().copied().fold(0.0, f64::max),
                layer_bound: setup.layer_bounds[l - 1],
            }
        })
        .collect();
    let recovered = res.pathway_recovered.iter().filter(|r| **r).count();
    Ok(TrialRecord {
        point,
        trial_id,
        seed,
        layers,
        pathway_recovered_fraction: recovered as f64 / d as f64,
        pathway_failed: recovered < d,
        failed_columns: d - recovered,
        theorem1_bound: setup.theorem1,
        error_checks,
        error_violations,
        acceptance_rate: truth.acceptance_rate(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub point: usize,
    pub label: String,
    pub trials: usize,
    pub columns_per_trial: usize,
    pub mu: Vec<f64>,
    pub failed_trials: usize,
    pub empirical_failure_rate: f64,
    pub failed_columns: usize,
    pub column_failure_rate: f64,
    pub theorem1_bound: f64,
    pub theorem1_bound_raw: f64,
    pub binomial_margin: f64,
    pub within_theorem1_bound: bool,
    pub uniform_condition_all_layers: bool,
    pub error_checks: usize,
    pub error_bound_violations: usize,
    pub mean_acceptance_rate: f64,
    /// every overlapping atom pair fits one stripe window and error patches
    /// cover the next layer's atoms
    pub bounds_certified: bool,
    pub zeta_chain: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub summary: PointSummary,
    pub records: Vec<TrialRecord>,
    pub setup: PointSetup,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InfeasibleConfig(format!("cannot start {workers} workers: {e}")))
}

/// Runs every trial of one sweep point; records come back ordered by trial.
pub fn run_point(
    point: &SweepPoint,
    root_seed: u64,
    num_trials: usize,
    pool: &rayon::ThreadPool,
) -> Result<PointOutcome> {
    let spec = &point.spec;
    spec.validate()
        .map_err(|e| Error::InfeasibleConfig(format!("{}: {e}", point.label)))?;
    let dicts = build_dictionaries(spec, dictionary_seed(root_seed, point.draw))?;
    let setup = prepare_point(spec, dicts)?;
    let point_root = derive(root_seed, Role::Trial, point.index as u64);
    let records: Vec<TrialRecord> = pool.install(|| {
        (0..num_trials)
            .into_par_iter()
            .map(|t| run_trial(spec, &setup, point.index, t, trial_seed(point_root, t as u64)))
            .collect::<Result<Vec<_>>>()
    })?;

    let failed_trials = records.iter().filter(|r| r.pathway_failed).count();
    let failed_columns: usize = records.iter().map(|r| r.failed_columns).sum();
    let rate = failed_trials as f64 / num_trials as f64;
    let margin = binomial_margin(setup.theorem1, num_trials);
    let certified = (1..=spec.depth()).all(|l| spec.stripe_covers_overlaps(l)) && spec.patches_chain();
    let mut zeta_chain: Vec<f64> = setup.chain.iter().map(|c| c.zeta_prev).collect();
    zeta_chain.push(crate::bounds::final_zeta(&setup.chain));
    let summary = PointSummary {
        point: point.index,
        label: point.label.clone(),
        trials: num_trials,
        columns_per_trial: spec.d,
        mu: setup.mus.clone(),
        failed_trials,
        empirical_failure_rate: rate,
        failed_columns,
        column_failure_rate: failed_columns as f64 / (num_trials * spec.d) as f64,
        theorem1_bound: setup.theorem1,
        theorem1_bound_raw: setup.theorem1_raw,
        binomial_margin: margin,
        within_theorem1_bound: rate <= setup.theorem1 + margin,
        uniform_condition_all_layers: setup.uniform_holds.iter().all(|h| *h),
        error_checks: records.iter().map(|r| r.error_checks).sum(),
        error_bound_violations: records.iter().map(|r| r.error_violations).sum(),
        mean_acceptance_rate: records.iter().map(|r| r.acceptance_rate).sum::<f64>()
            / num_trials as f64,
        bounds_certified: certified,
        zeta_chain,
    };
    Ok(PointOutcome {
        summary,
        records,
        setup,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub points: Vec<PointOutcome>,
}

impl ExperimentReport {
    pub fn records(&self) -> impl Iterator<Item = &TrialRecord> {
        self.points.iter().flat_map(|p| p.records.iter())
    }

    pub fn summaries(&self) -> Vec<&PointSummary> {
        self.points.iter().map(|p| &p.summary).collect()
    }

    pub fn total_error_violations(&self) -> usize {
        self.points.iter().map(|p| p.summary.error_bound_violations).sum()
    }

    /// One row per (point, trial, column, layer).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CSV_VERSION_LINE}").unwrap();
        writeln!(out, "{CSV_HEADER}").unwrap();
        for p in &self.points {
            let setup = &p.setup;
            for r in &p.records {
                for row in &r.rows {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{}",
                        r.trial_id,
                        row.column,
                        row.layer,
                        u8::from(row.support_match),
                        row.measured_error,
                        row.zeta_l,
                        setup.layer_bounds[row.layer - 1],
                        setup.theorem1,
                        r.seed,
                        r.point,
                        setup.layer_bounds_raw[row.layer - 1],
                        setup.theorem1_raw,
                    )
                    .unwrap();
                }
            }
        }
        out
    }

    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            version: &'static str,
            total_error_bound_violations: usize,
            points: Vec<&'a PointSummary>,
        }
        let s = Summary {
            version: env!("CARGO_PKG_VERSION"),
            total_error_bound_violations: self.total_error_violations(),
            points: self.summaries(),
        };
        serde_json::to_string_pretty(&s).expect("summary is serialisable") + "\n"
    }
}

/// `<path>.summary.json`
pub fn summary_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.file_name().unwrap_or_default().to_os_string();
    name.push(".summary.json");
    csv_path.with_file_name(name)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs every sweep point and, when an output path is configured, writes the
/// per-row CSV and a summary next to it.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let pool = thread_pool(config.workers)?;
    let points = config
        .points()
        .iter()
        .map(|p| run_point(p, config.root_seed, config.num_trials, &pool))
        .collect::<Result<Vec<_>>>()?;
    let report = ExperimentReport { points };
    if let Some(path) = &config.output_path {
        write_file(path, &report.to_csv())?;
        write_file(&summary_path(path), &report.summary_json())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// worst-case coherence condition holds at every layer
    Uniform,
    /// only the probabilistic `mu^-2` condition holds
    Probabilistic,
    Unguaranteed,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Uniform => "uniform",
            Regime::Probabilistic => "probabilistic",
            Regime::Unguaranteed => "unguaranteed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeRow {
    pub s: usize,
    pub layer: usize,
    pub mu: f64,
    /// worst-case sparsity limit of the swept layer
    pub uniform_limit: f64,
    pub uniform_holds: bool,
    /// probabilistic sparsity limit of the swept layer at `delta`
    pub admissible_limit: f64,
    pub admissible_holds: bool,
    pub regime: Regime,
    pub delta: f64,
    pub trials: usize,
    pub columns: usize,
    pub failed_columns: usize,
    pub column_failure_rate: f64,
    pub trial_failure_rate: f64,
    pub margin: f64,
    /// column failure rate within `delta + 3 sigma`
    pub within_delta: bool,
    pub theorem1_bound: f64,
}

fn admissible_holds_at(input: &LayerBoundInputs, delta: f64) -> Result<(f64, bool)> {
    match admissible_sparsity(
        input.x_min,
        input.x_max,
        input.zeta_prev,
        input.mu,
        input.n,
        input.spatial,
        delta,
    ) {
        Ok(v) => Ok((v, input.s as f64 <= v.floor())),
        Err(Error::ZeroCoherence) => Ok((f64::INFINITY, true)),
        Err(e) => Err(e),
    }
}

/// Sweeps the budget of the swept layer at a fixed dictionary and labels
/// each value by which guarantee covers it, next to its empirical recovery.
pub fn run_regime_comparison(config: &ExperimentConfig) -> Result<Vec<RegimeRow>> {
    config.validate()?;
    let pool = thread_pool(config.workers)?;
    let layer = config.sweep.layer;
    let budgets: Vec<usize> = if config.sweep.budgets.is_empty() {
        (1..=config.spec.stripe_spec(layer)?.stripe_len()).collect()
    } else {
        config.sweep.budgets.clone()
    };
    let mut rows = Vec::with_capacity(budgets.len());
    for (i, &s) in budgets.iter().enumerate() {
        let mut spec = config.spec.clone();
        spec.layers[layer - 1].budget = s;
        let point = SweepPoint {
            index: i,
            draw: 0,
            spec,
            label: format!("S{layer}={s}"),
        };
        let outcome = run_point(&point, config.root_seed, config.num_trials, &pool)?;
        let setup = &outcome.setup;
        let uniform_holds = setup.uniform_holds.iter().all(|h| *h);
        let mut admissible_all = true;
        for input in &setup.chain {
            admissible_all &= admissible_holds_at(input, config.delta)?.1;
        }
        let swept = &setup.chain[layer - 1];
        let (admissible_limit, _) = admissible_holds_at(swept, config.delta)?;
        let regime = if uniform_holds {
            Regime::Uniform
        } else if admissible_all {
            Regime::Probabilistic
        } else {
            Regime::Unguaranteed
        };
        let sum = &outcome.summary;
        let columns = sum.trials * sum.columns_per_trial;
        let margin = binomial_margin(config.delta, columns);
        rows.push(RegimeRow {
            s,
            layer,
            mu: setup.mus[layer - 1],
            uniform_limit: uniform_sparsity_bound(swept),
            uniform_holds,
            admissible_limit,
            admissible_holds: admissible_all,
            regime,
            delta: config.delta,
            trials: sum.trials,
            columns,
            failed_columns: sum.failed_columns,
            column_failure_rate: sum.column_failure_rate,
            trial_failure_rate: sum.empirical_failure_rate,
            margin,
            within_delta: sum.column_failure_rate <= config.delta + margin,
            theorem1_bound: sum.theorem1_bound,
        });
    }
    Ok(rows)
}

pub fn regime_csv(rows: &[RegimeRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_VERSION_LINE}").unwrap();
    writeln!(
        out,
        "S,layer,mu,uniform_limit,uniform_holds,admissible_limit,admissible_holds,regime,delta,trials,columns,failed_columns,column_failure_rate,trial_failure_rate,margin,within_delta,theorem1_bound"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.s,
            r.layer,
            r.mu,
            r.uniform_limit,
            u8::from(r.uniform_holds),
            r.admissible_limit,
            u8::from(r.admissible_holds),
            r.regime.as_str(),
            r.delta,
            r.trials,
            r.columns,
            r.failed_columns,
            r.column_failure_rate,
            r.trial_failure_rate,
            r.margin,
            u8::from(r.within_delta),
            r.theorem1_bound,
        )
        .unwrap();
    }
    out
}

/// Configuration-level bound table of one network, one row per layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub layer: usize,
    pub mu: f64,
    pub welch: f64,
    pub s: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub zeta_prev: f64,
    pub zeta_l: f64,
    pub uniform_limit: f64,
    pub uniform_holds: bool,
    pub admissible_limit: f64,
    pub noise_threshold: f64,
    pub noise_admissible: bool,
    pub layer_bound_raw: f64,
    pub layer_bound: f64,
    pub stripe_covers_overlaps: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundTable {
    pub rows: Vec<BoundRow>,
    pub theorem1_bound_raw: f64,
    pub theorem1_bound: f64,
    pub delta: f64,
}

pub fn bound_table(spec: &NetworkSpec, dict_seed: u64, delta: f64) -> Result<BoundTable> {
    let dicts = build_dictionaries(spec, dict_seed)?;
    let welch: Vec<f64> = dicts.iter().map(|d| welch_bound(d.rows(), d.cols())).collect();
    let setup = prepare_point(spec, dicts)?;
    let mut rows = Vec::with_capacity(spec.depth());
    for (i, input) in setup.chain.iter().enumerate() {
        let l = i + 1;
        let zeta_l = crate::bounds::error_recursion(
            input.patch_nonzeros,
            input.mu,
            input.s,
            input.x_max,
            input.zeta_prev,
        );
        let (admissible_limit, _) = admissible_holds_at(input, delta)?;
        let noise_threshold = noise_admissibility(input.x_min, input.n, input.spatial, delta)?;
        rows.push(BoundRow {
            layer: l,
            mu: input.mu,
            welch: welch[i],
            s: input.s,
            x_min: input.x_min,
            x_max: input.x_max,
            zeta_prev: input.zeta_prev,
            zeta_l,
            uniform_limit: uniform_sparsity_bound(input),
            uniform_holds: setup.uniform_holds[i],
            admissible_limit,
            noise_threshold,
            noise_admissible: input.zeta_prev < noise_threshold,
            layer_bound_raw: setup.layer_bounds_raw[i],
            layer_bound: setup.layer_bounds[i],
            stripe_covers_overlaps: spec.stripe_covers_overlaps(l),
        });
    }
    Ok(BoundTable {
        rows,
        theorem1_bound_raw: setup.theorem1_raw,
        theorem1_bound: setup.theorem1,
        delta,
    })
}

impl BoundTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CSV_VERSION_LINE}").unwrap();
        writeln!(out, "# delta={} theorem1_bound={} theorem1_bound_raw={}", self.delta, self.theorem1_bound, self.theorem1_bound_raw).unwrap();
        writeln!(out, "layer,mu,welch,S,x_min,x_max,zeta_prev,zeta_l,uniform_limit,uniform_holds,admissible_limit,noise_threshold,noise_admissible,layer_bound_raw,layer_bound,stripe_covers_overlaps").unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.layer,
                r.mu,
                r.welch,
                r.s,
                r.x_min,
                r.x_max,
                r.zeta_prev,
                r.zeta_l,
                r.uniform_limit,
                u8::from(r.uniform_holds),
                r.admissible_limit,
                r.noise_threshold,
                u8::from(r.noise_admissible),
                r.layer_bound_raw,
                r.layer_bound,
                u8::from(r.stripe_covers_overlaps),
            )
            .unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RademacherRow {
    pub t: f64,
    pub draws: usize,
    pub exceedances: usize,
    pub empirical: f64,
    pub bound: f64,
}

/// Empirical `P(|sum eps_i alpha_i| > t)` over `n_draws` sign vectors, next
/// to the concentration bound.
pub fn verify_rademacher(
    n_draws: usize,
    alpha: &[f64],
    t_grid: &[f64],
    seed: u64,
) -> Result<Vec<RademacherRow>> {
    if n_draws < 100 {
        return Err(Error::InvalidSpec(format!("need at least 100 draws, got {n_draws}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, Role::Rademacher, 0));
    let sums: Vec<f64> = (0..n_draws)
        .map(|_| {
            alpha
                .iter()
                .map(|a| if rng.random::<bool>() { *a } else { -*a })
                .sum::<f64>()
                .abs()
        })
        .collect();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let exceedances = sums.iter().filter(|s| **s > t).count();
            RademacherRow {
                t,
                draws: n_draws,
                exceedances,
                empirical: exceedances as f64 / n_draws as f64,
                bound: rademacher_tail(alpha, t),
            }
        })
        .collect())
}

pub fn rademacher_csv(rows: &[RademacherRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{CSV_VERSION_LINE}").unwrap();
    writeln!(out, "t,draws,exceedances,empirical,bound").unwrap();
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.t, r.draws, r.exceedances, r.empirical, r.bound).unwrap();
    }
    out
}
