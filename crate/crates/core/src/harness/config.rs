//! Experiment configuration files.
//!
//! The format is TOML with a `[network]` table, one `[layer.<l>]` table per
//! layer and optional `[experiment]` and `[sweep]` tables. See
//! `docs/config.md` for the full grammar.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::generator::{DictionarySource, LayerSpec, NetworkSpec};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    network: RawNetwork,
    layer: BTreeMap<String, RawLayer>,
    experiment: Option<RawExperiment>,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    #[serde(rename = "M")]
    spatial: usize,
    #[serde(rename = "L")]
    depth: Option<usize>,
    d: usize,
    #[serde(default)]
    zeta_0: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    m: usize,
    n: usize,
    s: Option<usize>,
    #[serde(rename = "S")]
    budget: usize,
    x_min: f64,
    x_max: f64,
    nonzeros: Option<usize>,
    dictionary: Option<String>,
    tail: Option<f64>,
    coherence: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    trials: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    delta: Option<f64>,
    output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    layer: Option<usize>,
    #[serde(rename = "S")]
    budgets: Option<Vec<usize>>,
    zeta_0: Option<Vec<f64>>,
    coherence: Option<Vec<f64>>,
    dict_draws: Option<usize>,
}

/// Grid of sweep values. Empty lists leave the base configuration alone.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// layer whose `S` and dictionary coherence are swept
    pub layer: usize,
    pub budgets: Vec<usize>,
    pub zeta_0: Vec<f64>,
    /// spike-dictionary coherence targets for the swept layer
    pub coherence: Vec<f64>,
    /// independent dictionary draws
    pub dict_draws: usize,
}

impl Sweep {
    pub fn none(depth: usize) -> Self {
        Sweep {
            layer: depth,
            budgets: Vec::new(),
            zeta_0: Vec::new(),
            coherence: Vec::new(),
            dict_draws: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spec: NetworkSpec,
    pub num_trials: usize,
    pub root_seed: u64,
    pub sweep: Sweep,
    pub output_path: Option<PathBuf>,
    pub workers: usize,
    pub delta: f64,
}

impl ExperimentConfig {
    pub fn new(spec: NetworkSpec, num_trials: usize, root_seed: u64) -> Self {
        let depth = spec.depth();
        ExperimentConfig {
            spec,
            num_trials,
            root_seed,
            sweep: Sweep::none(depth),
            output_path: None,
            workers: 1,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trials == 0 {
            return Err(Error::InfeasibleConfig("num_trials must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::InfeasibleConfig("workers must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InfeasibleConfig(format!("delta {} must lie in (0, 1)", self.delta)));
        }
        if self.sweep.layer == 0 || self.sweep.layer > self.spec.depth() {
            return Err(Error::InfeasibleConfig(format!(
                "sweep layer {} outside 1..={}",
                self.sweep.layer,
                self.spec.depth()
            )));
        }
        if self.sweep.dict_draws == 0 {
            return Err(Error::InfeasibleConfig("dict_draws must be at least 1".into()));
        }
        self.spec
            .validate()
            .map_err(|e| Error::InfeasibleConfig(e.to_string()))
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        let base_dir = origin.parent().unwrap_or(Path::new("."));
        let spec = network_from_raw(&raw, base_dir, origin)?;
        let exp = raw.experiment.unwrap_or_default();
        let sweep = raw.sweep.unwrap_or_default();
        let config = ExperimentConfig {
            num_trials: exp.trials.unwrap_or(DEFAULT_TRIALS),
            root_seed: exp.seed.unwrap_or(DEFAULT_SEED),
            output_path: exp.output,
            workers: exp.workers.unwrap_or(1),
            delta: exp.delta.unwrap_or(DEFAULT_DELTA),
            sweep: Sweep {
                layer: sweep.layer.unwrap_or(spec.depth()),
                budgets: sweep.budgets.unwrap_or_default(),
                zeta_0: sweep.zeta_0.unwrap_or_default(),
                coherence: sweep.coherence.unwrap_or_default(),
                dict_draws: sweep.dict_draws.unwrap_or(1),
            },
            spec,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml_str(&text, path)
    }
}

fn network_from_raw(raw: &RawConfig, base_dir: &Path, origin: &Path) -> Result<NetworkSpec> {
    let mut by_index = BTreeMap::new();
    for (key, layer) in &raw.layer {
        let l: usize = key
            .parse()
            .map_err(|_| Error::parse(origin, format!("layer key {key:?} is not an integer")))?;
        by_index.insert(l, layer);
    }
    let depth = by_index.len();
    if let Some(declared) = raw.network.depth {
        if declared != depth {
            return Err(Error::parse(
                origin,
                format!("L = {declared} but {depth} layer sections given"),
            ));
        }
    }
    if by_index.keys().copied().ne(1..=depth) {
        return Err(Error::parse(origin, "layer sections must be numbered 1..=L"));
    }
    let mut layers = Vec::with_capacity(depth);
    let mut prev_n = 1;
    for (l, raw_layer) in by_index {
        let dictionary = dictionary_from_raw(raw_layer, base_dir)
            .map_err(|m| Error::parse(origin, format!("layer {l}: {m}")))?;
        layers.push(LayerSpec {
            m: raw_layer.m,
            n: raw_layer.n,
            s: raw_layer.s.unwrap_or(prev_n),
            budget: raw_layer.budget,
            x_min: raw_layer.x_min,
            x_max: raw_layer.x_max,
            nonzeros: raw_layer.nonzeros,
            dictionary,
        });
        prev_n = raw_layer.n;
    }
    Ok(NetworkSpec {
        spatial: raw.network.spatial,
        d: raw.network.d,
        zeta_0: raw.network.zeta_0,
        layers,
    })
}

fn dictionary_from_raw(layer: &RawLayer, base_dir: &Path) -> std::result::Result<DictionarySource, String> {
    match layer.dictionary.as_deref().unwrap_or("gaussian") {
        "gaussian" => Ok(DictionarySource::Gaussian),
        "identity" => Ok(DictionarySource::Identity),
        "spike" => match (layer.tail, layer.coherence) {
            (Some(tail), None) => Ok(DictionarySource::Spike { tail }),
            (None, Some(target)) => Ok(DictionarySource::SpikeCoherence { target }),
            _ => Err("spike dictionary needs exactly one of `tail` or `coherence`".into()),
        },
        path => Ok(DictionarySource::File(base_dir.join(path))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[network]
M = 8
L = 2
d = 3
zeta_0 = 0.01

[layer.1]
m = 4
n = 2
S = 6
x_min = 0.001
x_max = 10.0

[layer.2]
m = 4
n = 2
S = 1
x_min = 1.0
x_max = 1.0
dictionary = "spike"
coherence = 0.05

[experiment]
trials = 10
seed = 5
workers = 2

[sweep]
S = [1, 2]
zeta_0 = [0.0, 0.02]
"#;

    #[test]
    fn parses_sample() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE, Path::new("dir/cfg.toml"));
        // layer 2 spike needs n = 1, but parsing itself is fine; validate
        // does not build dictionaries
        let cfg = cfg.unwrap();
        assert_eq!(cfg.spec.spatial, 8);
        assert_eq!(cfg.spec.layers[0].s, 1);
        assert_eq!(cfg.spec.layers[1].s, 2);
        assert_eq!(
            cfg.spec.layers[1].dictionary,
            DictionarySource::SpikeCoherence { target: 0.05 }
        );
        assert_eq!(cfg.num_trials, 10);
        assert_eq!(cfg.sweep.layer, 2);
        assert_eq!(cfg.sweep.budgets, vec![1, 2]);
        assert_eq!(cfg.workers, 2);
    }

    #[test]
    fn rejects_bad_layers() {
        let gap = SAMPLE.replace("[layer.2]", "[layer.3]").replace("L = 2\n", "");
        assert!(ExperimentConfig::from_toml_str(&gap, Path::new("c.toml")).is_err());
        let wrong_l = SAMPLE.replace("L = 2", "L = 3");
        assert!(ExperimentConfig::from_toml_str(&wrong_l, Path::new("c.toml")).is_err());
        let unknown = SAMPLE.replace("zeta_0 = 0.01", "zeta_0 = 0.01\nfoo = 1");
        assert!(ExperimentConfig::from_toml_str(&unknown, Path::new("c.toml")).is_err());
        let zero_trials = SAMPLE.replace("trials = 10", "trials = 0");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&zero_trials, Path::new("c.toml")),
            Err(Error::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn file_dictionaries_resolve_against_config_dir() {
        let text = SAMPLE.replace(
            "dictionary = \"spike\"\ncoherence = 0.05",
            "dictionary = \"local2.csv\"",
        );
        let cfg = ExperimentConfig::from_toml_str(&text, Path::new("dir/cfg.toml")).unwrap();
        assert_eq!(
            cfg.spec.layers[1].dictionary,
            DictionarySource::File(PathBuf::from("dir/local2.csv"))
        );
    }
}
