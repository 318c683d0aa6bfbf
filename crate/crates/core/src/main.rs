use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dcsc_lab::conv_dict::{build_conv_dictionary, LocalDictionary, SignMask};
use dcsc_lab::error::{Error, Result};
use dcsc_lab::forward::run_forward_pass;
use dcsc_lab::generator::{
    build_dictionaries, inject_noise, sample_layered_signal, sample_masks, LayeredSignal,
    NoisyObservation,
};
use dcsc_lab::harness::experiment::{
    bound_table, dictionary_seed, rademacher_csv, regime_csv, run_experiment,
    run_regime_comparison, summary_path, verify_rademacher, CSV_VERSION_LINE,
};
use dcsc_lab::harness::ExperimentConfig;
use dcsc_lab::matrix::Matrix;
use dcsc_lab::measures::{patch_max_norm, stripe_max_norm, PatchSpec, StripeSpec};
use dcsc_lab::seed::{derive, Role};

#[derive(Parser)]
#[command(name = "dcsc-lab", version, about = "Deep convolutional sparse coding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample dictionaries, masks, a layered signal and its noisy observation
    Generate {
        #[command(flatten)]
        run: RunArgs,
        /// output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the thresholding forward pass on a directory written by `generate`
    Forward {
        #[arg(long)]
        config: PathBuf,
        /// directory written by `generate`
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the per-layer bound table of a configuration
    Bounds {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo comparison of recovery against the bounds
    Montecarlo {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        par: ParArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the budget of one layer and label each value by its guarantee
    CompareRegimes {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        par: ParArgs,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Empirical tail of a Rademacher sum against its concentration bound
    Rademacher {
        /// comma separated coefficients
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        alpha: Vec<f64>,
        /// comma separated thresholds
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Patch or stripe max-norm of every column of a vector CSV
    Measure {
        #[arg(long = "in")]
        input: PathBuf,
        /// window length of a patch measure
        #[arg(long, conflicts_with = "stripe", required_unless_present = "stripe")]
        patch: Option<usize>,
        /// stripe of a layer with patch size m, stride s and n channels
        #[arg(long, num_args = 3, value_names = ["m", "s", "n"])]
        stripe: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        alpha: u32,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ParArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

fn load(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::read(&run.config)?;
    if let Some(seed) = run.seed {
        config.root_seed = seed;
    }
    Ok(config)
}

fn apply_par(config: &mut ExperimentConfig, par: &ParArgs) -> Result<()> {
    if let Some(t) = par.trials {
        config.num_trials = t;
    }
    if let Some(w) = par.workers {
        config.workers = w;
    }
    config.validate()
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn generate(run: &RunArgs, out: &Path) -> Result<()> {
    let config = load(run)?;
    let spec = &config.spec;
    let dicts = build_dictionaries(spec, dictionary_seed(config.root_seed, 0))?;
    let seed = derive(config.root_seed, Role::Trial, 0);
    let masks = sample_masks(spec, seed)?;
    let signal = sample_layered_signal(spec, &dicts, &masks, seed)?;
    let obs = inject_noise(&signal, spec.zeta_0, spec.layer(1).m, seed)?;
    for l in 1..=spec.depth() {
        write_file(&out.join(format!("dict_{l}.csv")), &dicts[l - 1].local().to_csv())?;
        write_file(&out.join(format!("mask_{l}.csv")), &masks[l - 1].to_csv())?;
    }
    for (l, x) in signal.layers.iter().enumerate() {
        write_file(&out.join(format!("x_{l}.csv")), &x.to_csv())?;
    }
    write_file(&out.join("x_hat_0.csv"), &obs.x_hat_0.to_csv())?;
    write_file(&out.join("noise_0.csv"), &obs.noise.to_csv())?;
    eprintln!(
        "wrote {} layers for {} columns to {}",
        spec.depth(),
        spec.d,
        out.display()
    );
    Ok(())
}

fn forward(config: &Path, input: &Path, out: Option<&Path>) -> Result<()> {
    let config = ExperimentConfig::read(config)?;
    let spec = &config.spec;
    let mut dicts = Vec::with_capacity(spec.depth());
    let mut masks = Vec::with_capacity(spec.depth());
    for l in 1..=spec.depth() {
        let local = LocalDictionary::read_csv(&input.join(format!("dict_{l}.csv")))?;
        dicts.push(build_conv_dictionary(local, spec.spatial, spec.layer(l).s)?);
        let path = input.join(format!("mask_{l}.csv"));
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        masks.push(SignMask::from_csv_str(&text, l, &path)?);
    }
    let layers = (0..=spec.depth())
        .map(|l| Matrix::read_csv(&input.join(format!("x_{l}.csv"))))
        .collect::<Result<Vec<_>>>()?;
    let truth = LayeredSignal::from_layers(layers);
    let x_hat_0 = Matrix::read_csv(&input.join("x_hat_0.csv"))?;
    let noise = Matrix::read_csv(&input.join("noise_0.csv"))?;
    let obs = NoisyObservation { x_hat_0, noise };
    let res = run_forward_pass(&obs, &truth, &dicts, &masks, spec)?;

    let mut csv = String::new();
    writeln!(csv, "{CSV_VERSION_LINE}").unwrap();
    writeln!(csv, "column,layer,support_match,measured_error,zeta_l").unwrap();
    for j in 0..spec.d {
        for l in 1..=spec.depth() {
            writeln!(
                csv,
                "{j},{l},{},{},{}",
                u8::from(res.support_match[l - 1][j]),
                res.errors[l - 1][j],
                res.zeta[l - 1][j]
            )
            .unwrap();
        }
    }
    emit(&csv, out)?;
    let recovered = res.pathway_recovered.iter().filter(|r| **r).count();
    eprintln!("pathway recovered for {recovered} of {} columns", spec.d);
    Ok(())
}

fn measure(input: &Path, patch: Option<usize>, stripe: Option<&[usize]>, alpha: u32) -> Result<()> {
    let x = Matrix::read_csv(input)?;
    let mut csv = String::new();
    writeln!(csv, "column,value").unwrap();
    for (j, col) in x.columns().enumerate() {
        let v = match (patch, stripe) {
            (Some(len), _) => patch_max_norm(col, &PatchSpec::new(len, col.len())?, alpha)?,
            (None, Some(&[m, s, n])) => {
                stripe_max_norm(col, &StripeSpec::for_layer(m, s, n, col.len())?, alpha)?
            }
            _ => return Err(Error::InvalidSpec("give --patch or --stripe m s n".into())),
        };
        writeln!(csv, "{j},{v}").unwrap();
    }
    print!("{csv}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { run, out } => generate(&run, &out),
        Command::Forward { config, input, out } => forward(&config, &input, out.as_deref()),
        Command::Bounds { run, delta, out } => {
            let config = load(&run)?;
            let delta = delta.unwrap_or(config.delta);
            let table = bound_table(&config.spec, dictionary_seed(config.root_seed, 0), delta)?;
            emit(&table.to_csv(), out.as_deref())
        }
        Command::Montecarlo { run, par, out } => {
            let mut config = load(&run)?;
            apply_par(&mut config, &par)?;
            if out.is_some() {
                config.output_path = out;
            }
            let report = run_experiment(&config)?;
            if config.output_path.is_none() {
                print!("{}", report.to_csv());
            }
            for s in report.summaries() {
                eprintln!(
                    "point {} [{}]: {} of {} trials failed, rate {:.4} vs bound {:.4} (+{:.4}), error violations {}",
                    s.point,
                    s.label,
                    s.failed_trials,
                    s.trials,
                    s.empirical_failure_rate,
                    s.theorem1_bound,
                    s.binomial_margin,
                    s.error_bound_violations
                );
            }
            if let Some(path) = &config.output_path {
                eprintln!("summary written to {}", summary_path(path).display());
            }
            Ok(())
        }
        Command::CompareRegimes { run, par, delta, out } => {
            let mut config = load(&run)?;
            if let Some(delta) = delta {
                config.delta = delta;
            }
            apply_par(&mut config, &par)?;
            let rows = run_regime_comparison(&config)?;
            emit(&regime_csv(&rows), out.as_deref())
        }
        Command::Rademacher { alpha, t, draws, seed, out } => {
            let rows = verify_rademacher(draws, &alpha, &t, seed)?;
            emit(&rademacher_csv(&rows), out.as_deref())
        }
        Command::Measure { input, patch, stripe, alpha } => {
            measure(&input, patch, stripe.as_deref(), alpha)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
