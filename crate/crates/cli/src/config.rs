//! Experiment configuration: a flat TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use gptt_audit::datagen::{read_histogram_csv, support_k, DatasetMeta};
use gptt_audit::mechanisms::{gptt_instantiation, GpttParams, SvtParams};
use gptt_audit::Histogram;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    ViolationCurve,
    HardViolation,
    ReconstructionTable,
    TheoremCheck,
    MechanismDemo,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::ViolationCurve => "violation_curve",
            Experiment::HardViolation => "hard_violation",
            Experiment::ReconstructionTable => "reconstruction_table",
            Experiment::TheoremCheck => "theorem_check",
            Experiment::MechanismDemo => "mechanism_demo",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every key is optional; unset keys take the experiment's default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub n_trials: Option<u64>,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<Format>,

    /// `lee_clifton`, `chen` or `stoddard`, split from `epsilon`.
    pub instantiation: Option<String>,
    pub epsilon: Option<f64>,
    pub epsilon1: Option<f64>,
    pub epsilon2: Option<f64>,
    pub t_grid: Option<Vec<usize>>,

    pub epsilons: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub split: Option<f64>,

    /// Histogram CSV; a synthetic fixture is used when absent.
    pub dataset: Option<PathBuf>,
    pub zipf_domain: Option<usize>,
    pub zipf_total: Option<u64>,
    pub zipf_exponent: Option<f64>,
    pub staircase_k: Option<u64>,
    pub staircase_extra: Option<usize>,
    pub k: Option<u64>,

    pub counts: Option<Vec<u64>>,
    pub threshold: Option<f64>,
    pub cutoff: Option<usize>,
    pub copies: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Config::parse(&text).map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message)))
    }

    pub fn parse(text: &str) -> Result<Config, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(e.message().to_string()))
    }
}

/// Where the histogram comes from.
#[derive(Debug, Clone)]
pub enum DatasetSource {
    Csv(PathBuf),
    Zipf { domain: usize, total: u64, exponent: f64 },
    Staircase { k: u64, extra: usize },
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub db: Histogram,
    pub meta: DatasetMeta,
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone)]
pub enum Plan {
    ViolationCurve {
        epsilon1: f64,
        epsilon2: f64,
        t_grid: Vec<usize>,
        n_trials: u64,
    },
    HardViolation {
        epsilons: Vec<f64>,
        n_trials: u64,
    },
    ReconstructionTable {
        source: DatasetSource,
        epsilons: Vec<f64>,
        delta: f64,
        split: f64,
        n_trials: u64,
    },
    TheoremCheck {
        source: DatasetSource,
        k: Option<u64>,
        epsilon: f64,
        delta: f64,
        n_trials: u64,
    },
    MechanismDemo {
        db: Histogram,
        svt: SvtParams,
        gptt: GpttParams,
        copies: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub plan: Plan,
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn open_unit(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

fn at_least_one(name: &str, v: u64) -> Result<u64, CliError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} must be at least 1")))
    }
}

fn epsilon_list(cfg: &Config) -> Result<Vec<f64>, CliError> {
    let eps = cfg.epsilons.clone().unwrap_or_else(|| vec![1.0, 0.5, 0.1]);
    if eps.is_empty() {
        return Err(CliError::config("epsilons must not be empty"));
    }
    for &e in &eps {
        positive("every entry of epsilons", e)?;
    }
    Ok(eps)
}

/// `(ε₁, ε₂)` from either an explicit pair or an instantiation name.
fn gptt_split(cfg: &Config, default_instantiation: &str) -> Result<(f64, f64), CliError> {
    match (cfg.epsilon1, cfg.epsilon2) {
        (Some(e1), Some(e2)) => {
            if cfg.instantiation.is_some() {
                return Err(CliError::config("give either instantiation or epsilon1/epsilon2, not both"));
            }
            positive("epsilon1", e1)?;
            if !(e2 > 0.0) {
                return Err(CliError::config(format!("epsilon2 must be positive, got {e2}")));
            }
            Ok((e1, e2))
        }
        (None, None) => {
            let name = cfg.instantiation.as_deref().unwrap_or(default_instantiation);
            let epsilon = positive("epsilon", cfg.epsilon.unwrap_or(1.0))?;
            gptt_instantiation(name, epsilon).map_err(CliError::from)
        }
        _ => Err(CliError::config("epsilon1 and epsilon2 must be given together")),
    }
}

fn dataset_source(cfg: &Config, experiment: Experiment) -> Result<DatasetSource, CliError> {
    let zipf_keys = cfg.zipf_domain.is_some() || cfg.zipf_total.is_some() || cfg.zipf_exponent.is_some();
    let stair_keys = cfg.staircase_k.is_some() || cfg.staircase_extra.is_some();
    if cfg.dataset.is_some() && (zipf_keys || stair_keys) {
        return Err(CliError::config("dataset cannot be combined with synthetic fixture keys"));
    }
    if zipf_keys && stair_keys {
        return Err(CliError::config("choose either the Zipf or the staircase fixture"));
    }
    if let Some(path) = &cfg.dataset {
        return Ok(DatasetSource::Csv(path.clone()));
    }
    let use_staircase = stair_keys || (!zipf_keys && experiment == Experiment::TheoremCheck);
    if use_staircase {
        Ok(DatasetSource::Staircase {
            k: cfg.staircase_k.unwrap_or(30),
            extra: cfg.staircase_extra.unwrap_or(50),
        })
    } else {
        let domain = cfg.zipf_domain.unwrap_or(4096);
        if domain < 2 {
            return Err(CliError::config("zipf_domain must be at least 2"));
        }
        Ok(DatasetSource::Zipf {
            domain,
            total: cfg.zipf_total.unwrap_or(20_000),
            exponent: positive("zipf_exponent", cfg.zipf_exponent.unwrap_or(1.0))?,
        })
    }
}

impl DatasetSource {
    /// Loads or generates the histogram. Synthetic fixtures draw from `rng`.
    pub fn load(&self, rng: &mut gptt_audit::Rng) -> Result<Dataset, CliError> {
        use gptt_audit::datagen::{compute_meta, staircase_histogram, zipfian_histogram};
        let (db, meta) = match self {
            DatasetSource::Csv(path) => read_histogram_csv(path)?,
            DatasetSource::Zipf { domain, total, exponent } => {
                let db = zipfian_histogram(*domain, *total, *exponent, rng)?;
                let meta = compute_meta(&db, &format!("zipf_{domain}_{total}"));
                (db, meta)
            }
            DatasetSource::Staircase { k, extra } => {
                let db = staircase_histogram(*k, *extra);
                let meta = compute_meta(&db, &format!("staircase_{k}_{extra}"));
                (db, meta)
            }
        };
        if db.domain_size() < 2 {
            return Err(CliError::config(format!("dataset {} has fewer than two cells", meta.name)));
        }
        Ok(Dataset { db, meta })
    }
}

/// Checks the precondition of the reconstruction theorem against a loaded dataset.
pub fn theorem_level(dataset: &Dataset, k: Option<u64>) -> Result<u64, CliError> {
    let available = support_k(&dataset.db);
    match k {
        Some(k) if (k as i64) <= available => Ok(k),
        Some(k) => Err(CliError::config(format!(
            "k = {k} but dataset {} only has every level up to {available}",
            dataset.meta.name
        ))),
        None if available >= 0 => Ok(available as u64),
        None => Err(CliError::config(format!("dataset {} has no empty cell", dataset.meta.name))),
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

pub fn resolve(cfg: &Config, overrides: &Overrides) -> Result<Resolved, CliError> {
    let experiment = overrides
        .experiment
        .or(cfg.experiment)
        .ok_or_else(|| CliError::config("no experiment given (use --experiment or the `experiment` key)"))?;
    let seed = overrides.seed.or(cfg.seed).unwrap_or(0);
    let format = overrides.format.or(cfg.output_format).unwrap_or_default();
    let output_path = overrides.out.clone().or_else(|| cfg.output_path.clone());
    let trials = |default: u64| at_least_one("n_trials", cfg.n_trials.unwrap_or(default));

    let plan = match experiment {
        Experiment::ViolationCurve => {
            let (epsilon1, epsilon2) = gptt_split(cfg, "chen")?;
            if !epsilon2.is_finite() {
                return Err(CliError::config("violation_curve needs a finite epsilon2"));
            }
            let t_grid = cfg.t_grid.clone().unwrap_or_else(|| (0..=10).map(|i| 1 << i).collect());
            if t_grid.is_empty() || t_grid.contains(&0) {
                return Err(CliError::config("t_grid must be a non-empty list of positive integers"));
            }
            Plan::ViolationCurve {
                epsilon1,
                epsilon2,
                t_grid,
                n_trials: trials(100_000)?,
            }
        }
        Experiment::HardViolation => Plan::HardViolation {
            epsilons: match &cfg.epsilons {
                Some(_) => epsilon_list(cfg)?,
                None => vec![0.25, 0.5, 1.0],
            },
            n_trials: trials(1_000_000)?,
        },
        Experiment::ReconstructionTable => {
            let split = open_unit("split", cfg.split.unwrap_or(0.5))?;
            Plan::ReconstructionTable {
                source: dataset_source(cfg, experiment)?,
                epsilons: epsilon_list(cfg)?,
                delta: open_unit("delta", cfg.delta.unwrap_or(0.05))?,
                split,
                n_trials: trials(10)?,
            }
        }
        Experiment::TheoremCheck => {
            let epsilon = positive("epsilon", cfg.epsilon.unwrap_or(1.0))?;
            let delta = open_unit("delta", cfg.delta.unwrap_or(0.05))?;
            let alpha = gptt_audit::attack::attack_threshold(epsilon, delta);
            let source = dataset_source(cfg, experiment)?;
            let k = cfg.k.or(match source {
                DatasetSource::Staircase { k, .. } => Some(k),
                _ => None,
            });
            if let Some(k) = k {
                if k <= 2 * alpha {
                    return Err(CliError::config(format!("k = {k} must exceed 2α = {}", 2 * alpha)));
                }
            }
            Plan::TheoremCheck {
                source,
                k,
                epsilon,
                delta,
                n_trials: trials(500)?,
            }
        }
        Experiment::MechanismDemo => {
            let counts = cfg.counts.clone().unwrap_or_else(|| vec![0, 1, 2, 5, 5, 9, 3, 7]);
            if counts.is_empty() {
                return Err(CliError::config("counts must not be empty"));
            }
            let threshold = cfg.threshold.unwrap_or(4.0);
            if !threshold.is_finite() {
                return Err(CliError::config("threshold must be finite"));
            }
            let epsilon = positive("epsilon", cfg.epsilon.unwrap_or(1.0))?;
            let (e1, e2) = gptt_split(cfg, "chen")?;
            let copies = cfg.copies.unwrap_or(11);
            if copies == 0 || copies.is_multiple_of(2) {
                return Err(CliError::config(format!("copies must be a positive odd number, got {copies}")));
            }
            Plan::MechanismDemo {
                db: Histogram::new(counts),
                svt: SvtParams::new(threshold, cfg.cutoff.unwrap_or(2), epsilon, 1.0)?,
                gptt: GpttParams::new(threshold, e1, e2, 1.0)?,
                copies,
            }
        }
    };
    Ok(Resolved {
        experiment,
        seed,
        output_path,
        format,
        plan,
    })
}
