//! Experiment orchestration: config parsing, the closed-form theory sweep,
//! training experiments over budget lists, and CSV emission.

use crate::affine_opt::{solve_affine, DistortionBudget};
use crate::datasets::{gen_synthetic, load_mnist_idx, Dataset};
use crate::error::Error;
use crate::gauss::BinaryGaussianMixture;
use crate::leakage::{map_accuracy, max_leakage_binary, sibson_mi_max_approx, sibson_mi_quadrature, SibsonOrder};
use crate::training::{
    alternating_train, derive_seed, evaluate_adversary, write_trace_csv, Metric, PenaltySchedule,
    PrivatizerKind, TrainingConfig,
};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    TheorySweep,
    TrainSynthetic,
    TrainMnist,
    Verify,
}

/// Parsed experiment description with every knob resolved to a value.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    pub prior_p: f64,
    pub metric: Metric,
    pub alpha: f64,
    pub privatizer: PrivatizerKind,
    pub distortion_budgets: Vec<f64>,
    pub n_train: usize,
    pub n_val: usize,
    pub batch_size: usize,
    pub samples_s: usize,
    pub adversary_steps_k: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub penalty_schedule: PenaltySchedule,
    pub latent_dim: usize,
    pub output: Option<String>,
    pub mnist_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn model(&self) -> Result<BinaryGaussianMixture, Error> {
        BinaryGaussianMixture::new(self.mu0, self.mu1, self.sigma, self.prior_p)
    }

    pub fn order(&self) -> Result<SibsonOrder, Error> {
        SibsonOrder::new(self.alpha)
    }

    fn training_config(&self, budget: f64, seed: u64) -> TrainingConfig {
        TrainingConfig {
            minibatch: self.batch_size,
            latent_samples: self.samples_s,
            adversary_steps: self.adversary_steps_k,
            epochs: self.epochs,
            distortion_budget: budget,
            order: SibsonOrder::new(self.alpha).expect("validated at parse"),
            metric: self.metric,
            privatizer: self.privatizer,
            learning_rate: self.learning_rate,
            seed,
            penalty: self.penalty_schedule,
            privatizer_hidden: vec![4, 2],
            adversary_hidden: if self.experiment == ExperimentKind::TrainMnist {
                vec![64, 32]
            } else {
                vec![4, 2]
            },
            latent_dim: self.latent_dim,
            dropout: 0.0,
            distortion_normalizer: 1.0,
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

/// Parse the line-oriented `key = value` config format. `#` starts a
/// comment, lists are comma-separated, unknown keys are rejected, and
/// defaults follow the synthetic experiment settings.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, Error> {
    let mut pairs: BTreeMap<String, (String, usize)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(line_no, format!("expected `key = value`, got `{line}`")));
        };
        let key = key.trim().to_string();
        if pairs.contains_key(&key) {
            return Err(config_err(line_no, format!("duplicate key `{key}`")));
        }
        pairs.insert(key, (value.trim().to_string(), line_no));
    }

    const KNOWN: &[&str] = &[
        "experiment", "mu0", "mu1", "sigma", "prior_p", "metric", "alpha", "privatizer",
        "distortion_budgets", "n_train", "n_val", "batch_size", "samples_s", "adversary_steps_k",
        "epochs", "learning_rate", "seed", "penalty_schedule", "latent_dim", "output", "mnist_dir",
    ];
    for (key, (_, line)) in &pairs {
        if !KNOWN.contains(&key.as_str()) {
            return Err(config_err(*line, format!("unknown key `{key}`")));
        }
    }

    let (experiment_raw, experiment_line) = pairs
        .get("experiment")
        .cloned()
        .ok_or_else(|| config_err(0, "missing required key `experiment`"))?;
    let experiment = match experiment_raw.as_str() {
        "theory_sweep" => ExperimentKind::TheorySweep,
        "train_synthetic" => ExperimentKind::TrainSynthetic,
        "train_mnist" => ExperimentKind::TrainMnist,
        "verify" => ExperimentKind::Verify,
        other => return Err(config_err(experiment_line, format!("unknown experiment `{other}`"))),
    };

    fn get_f64(pairs: &BTreeMap<String, (String, usize)>, key: &str, default: f64) -> Result<f64, Error> {
        match pairs.get(key) {
            None => Ok(default),
            Some((v, line)) => v
                .parse()
                .map_err(|_| config_err(*line, format!("`{key}` expects a number, got `{v}`"))),
        }
    }
    fn get_usize(pairs: &BTreeMap<String, (String, usize)>, key: &str, default: usize) -> Result<usize, Error> {
        match pairs.get(key) {
            None => Ok(default),
            Some((v, line)) => v
                .parse()
                .map_err(|_| config_err(*line, format!("`{key}` expects a nonnegative integer, got `{v}`"))),
        }
    }

    let mnist = experiment == ExperimentKind::TrainMnist;
    let mu0 = get_f64(&pairs, "mu0", -3.0)?;
    let mu1 = get_f64(&pairs, "mu1", 3.0)?;
    let sigma = get_f64(&pairs, "sigma", 1.0)?;
    let prior_p = get_f64(&pairs, "prior_p", 0.5)?;
    let alpha = get_f64(&pairs, "alpha", 20.0)?;
    let learning_rate = get_f64(&pairs, "learning_rate", 1e-3)?;
    let n_train = get_usize(&pairs, "n_train", if mnist { 10_000 } else { 10_000 })?;
    let n_val = get_usize(&pairs, "n_val", if mnist { 2_000 } else { 5_000 })?;
    let batch_size = get_usize(&pairs, "batch_size", 500)?;
    let samples_s = get_usize(&pairs, "samples_s", 12)?;
    let adversary_steps_k = get_usize(&pairs, "adversary_steps_k", if mnist { 10 } else { 20 })?;
    let epochs = get_usize(&pairs, "epochs", if mnist { 200 } else { 1000 })?;
    let seed = get_usize(&pairs, "seed", 7)? as u64;
    let latent_dim = get_usize(&pairs, "latent_dim", if mnist { 8 } else { 1 })?;

    let metric = match pairs.get("metric") {
        None => Metric::Sibson,
        Some((v, line)) => match v.as_str() {
            "sibson" => Metric::Sibson,
            "mi" => Metric::Mi,
            other => return Err(config_err(*line, format!("unknown metric `{other}`"))),
        },
    };
    let privatizer = match pairs.get("privatizer") {
        None => {
            if mnist {
                PrivatizerKind::Mlp
            } else {
                PrivatizerKind::Affine
            }
        }
        Some((v, line)) => match v.as_str() {
            "affine" => PrivatizerKind::Affine,
            "noisy_affine" => PrivatizerKind::NoisyAffine,
            "mlp" => PrivatizerKind::Mlp,
            other => return Err(config_err(*line, format!("unknown privatizer `{other}`"))),
        },
    };
    let penalty_schedule = match pairs.get("penalty_schedule") {
        None => PenaltySchedule::Ramp,
        Some((v, line)) => match v.as_str() {
            "ramp" => PenaltySchedule::Ramp,
            "legacy" => PenaltySchedule::Legacy,
            other => return Err(config_err(*line, format!("unknown penalty schedule `{other}`"))),
        },
    };
    let distortion_budgets = match pairs.get("distortion_budgets") {
        None => {
            if mnist {
                vec![0.02, 0.04, 0.06, 0.08]
            } else {
                vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
            }
        }
        Some((v, line)) => {
            if v.is_empty() {
                Vec::new()
            } else {
                v.split(',')
                    .map(|s| {
                        s.trim().parse::<f64>().map_err(|_| {
                            config_err(*line, format!("`distortion_budgets` expects numbers, got `{s}`"))
                        })
                    })
                    .collect::<Result<Vec<f64>, Error>>()?
            }
        }
    };
    let output = pairs.get("output").map(|(v, _)| v.clone());
    let mnist_dir = pairs.get("mnist_dir").map(|(v, _)| v.clone());

    // range validation mirrors the upstream module contracts
    let line_of = |key: &str| pairs.get(key).map(|(_, l)| *l).unwrap_or(0);
    if sigma <= 0.0 {
        return Err(config_err(line_of("sigma"), "sigma must be positive"));
    }
    if !(0.0..=1.0).contains(&prior_p) {
        return Err(config_err(line_of("prior_p"), "prior_p must lie in [0,1]"));
    }
    if mu0 > mu1 {
        return Err(config_err(line_of("mu0"), "means must satisfy mu0 <= mu1"));
    }
    if alpha <= 1.0 || !alpha.is_finite() {
        return Err(config_err(line_of("alpha"), "alpha must be a finite real greater than 1"));
    }
    if learning_rate <= 0.0 {
        return Err(config_err(line_of("learning_rate"), "learning_rate must be positive"));
    }
    if distortion_budgets.iter().any(|&d| d < 0.0 || !d.is_finite()) {
        return Err(config_err(line_of("distortion_budgets"), "budgets must be nonnegative"));
    }
    if batch_size == 0 || samples_s == 0 || adversary_steps_k == 0 || epochs == 0 || latent_dim == 0 {
        return Err(config_err(
            line_of("batch_size"),
            "batch_size, samples_s, adversary_steps_k, epochs, latent_dim must be at least 1",
        ));
    }
    if mnist && privatizer != PrivatizerKind::Mlp {
        return Err(config_err(line_of("privatizer"), "train_mnist requires the mlp privatizer"));
    }

    Ok(ExperimentConfig {
        experiment,
        mu0,
        mu1,
        sigma,
        prior_p,
        metric,
        alpha,
        privatizer,
        distortion_budgets,
        n_train,
        n_val,
        batch_size,
        samples_s,
        adversary_steps_k,
        epochs,
        learning_rate,
        seed,
        penalty_schedule,
        latent_dim,
        output,
        mnist_dir,
    })
}

pub const THEORY_SWEEP_HEADER: &str =
    "D,beta0_star,beta1_star,regime,map_accuracy,max_leakage,sibson_mi_approx,sibson_mi_quadrature";

/// One row per budget: the closed-form optimum and every metric evaluated at
/// it. The max-approximation column is NaN on collapsed means, where its
/// threshold is undefined.
pub fn run_theory_sweep(config: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf, Error> {
    let model = config.model()?;
    let order = config.order()?;
    let path = out_dir.join(config.output.as_deref().unwrap_or("theory_sweep.csv"));
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "{THEORY_SWEEP_HEADER}")?;
    for &d_budget in &config.distortion_budgets {
        let solution = solve_affine(&model, DistortionBudget::new(d_budget)?);
        let transformed = model.apply_affine(solution.beta0, solution.beta1, 0.0)?;
        let accuracy = map_accuracy(&transformed);
        let leakage = max_leakage_binary(&transformed);
        let approx = match sibson_mi_max_approx(&transformed, order) {
            Ok((v, _)) => v,
            Err(_) => f64::NAN,
        };
        let quad = sibson_mi_quadrature(&transformed, order)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d_budget, solution.beta0, solution.beta1, solution.regime, accuracy, leakage, approx, quad
        )?;
    }
    Ok(path)
}

/// One privacy-utility point from a finished training run.
#[derive(Debug, Clone)]
pub struct TradeoffRecord {
    pub budget: f64,
    pub achieved_distortion: f64,
    pub adversary_accuracy: f64,
    pub metric: Metric,
    pub alpha: f64,
    pub privatizer: PrivatizerKind,
    pub seed: u64,
    pub theory_map_accuracy: f64,
    pub diverged: bool,
}

pub const TRADEOFF_HEADER: &str =
    "budget,achieved_distortion,adversary_accuracy,metric,alpha,privatizer,seed,theory_map_accuracy,diverged";

impl TradeoffRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.budget,
            self.achieved_distortion,
            self.adversary_accuracy,
            self.metric,
            self.alpha,
            self.privatizer,
            self.seed,
            self.theory_map_accuracy,
            u8::from(self.diverged)
        )
    }
}

/// MAP accuracy of the closed-form affine optimum at budget `d_budget`.
pub fn theory_accuracy_at_budget(model: &BinaryGaussianMixture, d_budget: f64) -> Result<f64, Error> {
    let solution = solve_affine(model, DistortionBudget::new(d_budget)?);
    let transformed = model.apply_affine(solution.beta0, solution.beta1, 0.0)?;
    Ok(map_accuracy(&transformed))
}

/// MAP accuracy of the closed-form optimum whose budget equals an achieved
/// distortion; the theoretical curve trained runs are compared against.
pub fn theory_accuracy_at_distortion(model: &BinaryGaussianMixture, achieved: f64) -> Result<f64, Error> {
    theory_accuracy_at_budget(model, achieved)
}

fn mnist_datasets(config: &ExperimentConfig) -> Result<(Dataset, Dataset), Error> {
    let dir = PathBuf::from(config.mnist_dir.as_deref().ok_or_else(|| Error::domain(
        "train_mnist needs `mnist_dir` pointing at the IDX files",
    ))?);
    let train_full = load_mnist_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let t10k_images = dir.join("t10k-images-idx3-ubyte");
    let (train, val) = if t10k_images.exists() {
        let val_full = load_mnist_idx(&t10k_images, &dir.join("t10k-labels-idx1-ubyte"))?;
        (
            subset(&train_full, 0, config.n_train.min(train_full.len()), crate::datasets::Split::Train),
            subset(&val_full, 0, config.n_val.min(val_full.len()), crate::datasets::Split::Validation),
        )
    } else {
        // no held-out files: carve the validation slice off the tail
        let n_train = config.n_train.min(train_full.len());
        let n_val = config.n_val.min(train_full.len() - n_train);
        (
            subset(&train_full, 0, n_train, crate::datasets::Split::Train),
            subset(&train_full, n_train, n_val, crate::datasets::Split::Validation),
        )
    };
    Ok((train, val))
}

fn subset(source: &Dataset, start: usize, len: usize, split: crate::datasets::Split) -> Dataset {
    let dim = source.feature_dim();
    let mut features = Vec::with_capacity(len * dim);
    let mut labels = Vec::with_capacity(len);
    for i in start..start + len {
        features.extend_from_slice(source.row(i));
        labels.push(source.labels()[i]);
    }
    Dataset::new(features, labels, dim, source.num_classes(), split).expect("subset of a valid dataset")
}

/// Train one pair per budget, evaluate on validation, and emit the
/// trade-off CSV plus one trace CSV per budget. Budget runs may execute in
/// parallel; rows are always written in budget order with per-budget seeds
/// derived identically in both modes.
pub fn run_training_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    parallel: bool,
) -> Result<PathBuf, Error> {
    let (train, val, model) = match config.experiment {
        ExperimentKind::TrainSynthetic => {
            let model = config.model()?;
            let (train, val) = gen_synthetic(&model, config.n_train, config.n_val, config.seed);
            (train, val, Some(model))
        }
        ExperimentKind::TrainMnist => {
            let (train, val) = mnist_datasets(config)?;
            (train, val, None)
        }
        _ => return Err(Error::domain("not a training experiment")),
    };
    let distortion_normalizer = if config.experiment == ExperimentKind::TrainMnist {
        train.feature_dim() as f64
    } else {
        1.0
    };

    let run_one = |(idx, &budget): (usize, &f64)| -> Result<(TradeoffRecord, crate::training::TrainedPair), Error> {
        let run_seed = derive_seed(config.seed, "budget", idx as u64);
        let mut tc = config.training_config(budget, run_seed);
        tc.distortion_normalizer = distortion_normalizer;
        let pair = alternating_train(&tc, &train)?;
        let p_tilde = {
            let n0 = train.labels().iter().filter(|&&c| c == 0).count();
            n0 as f64 / train.len() as f64
        };
        let (accuracy, achieved) = evaluate_adversary(
            &pair.privatizer,
            &pair.adversary,
            &val,
            config.samples_s,
            p_tilde,
            derive_seed(run_seed, "eval", 0),
        )
        .map(|(a, d)| (a, d / distortion_normalizer))?;
        let theory = match &model {
            Some(m) => theory_accuracy_at_budget(m, budget)?,
            None => f64::NAN,
        };
        Ok((
            TradeoffRecord {
                budget,
                achieved_distortion: achieved,
                adversary_accuracy: accuracy,
                metric: config.metric,
                alpha: config.alpha,
                privatizer: config.privatizer,
                seed: run_seed,
                theory_map_accuracy: theory,
                diverged: pair.diverged_at.is_some(),
            },
            pair,
        ))
    };

    let indexed: Vec<(usize, &f64)> = config.distortion_budgets.iter().enumerate().collect();
    let mut results: Vec<(usize, TradeoffRecord, crate::training::TrainedPair)> = if parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = indexed
                .iter()
                .map(|item| {
                    let run = &run_one;
                    let item = *item;
                    scope.spawn(move || run(item).map(|(r, p)| (item.0, r, p)))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("budget worker panicked"))
                .collect::<Result<Vec<_>, Error>>()
        })?
    } else {
        indexed
            .iter()
            .map(|item| run_one(*item).map(|(r, p)| (item.0, r, p)))
            .collect::<Result<Vec<_>, Error>>()?
    };
    results.sort_by_key(|(idx, _, _)| *idx);

    let path = out_dir.join(config.output.as_deref().unwrap_or("tradeoff.csv"));
    let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
    writeln!(out, "{TRADEOFF_HEADER}")?;
    for (idx, record, pair) in &results {
        writeln!(out, "{}", record.csv_row())?;
        write_trace_csv(pair, &out_dir.join(format!("trace_budget{idx}.csv")))?;
    }
    Ok(path)
}
