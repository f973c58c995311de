use gptt_audit::attack::{partition_attack, reconstruct as run_reconstruct};
use gptt_audit::audit::{
    exact_output_probability_hard, kappa, log_ratio, mechanism_output_frequency, CounterexampleSpec, Database,
};
use gptt_audit::datagen::zipfian_histogram;
use gptt_audit::{Error, Histogram, Result, Rng};

pub fn kappa_curve(epsilon2: f64, z_min: f64, z_max: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || z_min.is_nan() || z_max.is_nan() || z_min >= z_max {
        return Err(Error::Argument(format!("need n >= 2 points on a proper interval, got n = {n}, [{z_min}, {z_max}]")));
    }
    let step = (z_max - z_min) / (n - 1) as f64;
    (0..n).map(|i| kappa(z_min + step * i as f64, epsilon2)).collect()
}

pub fn violation_curve(epsilon1: f64, epsilon2: f64, copies: &[usize]) -> Result<Vec<f64>> {
    copies
        .iter()
        .map(|&t| log_ratio(&CounterexampleSpec::new(t, epsilon1, epsilon2)?))
        .collect()
}

pub fn hard_violation(epsilon1: f64, n_runs: u64, seed: u64) -> Result<Vec<f64>> {
    let (p_d, p_dp) = exact_output_probability_hard(epsilon1)?;
    let spec = CounterexampleSpec::new(1, epsilon1, f64::INFINITY)?;
    let base = Rng::new(seed);
    let f_d = mechanism_output_frequency(&spec, Database::D, n_runs, &base.child(0))?;
    let f_dp = mechanism_output_frequency(&spec, Database::DPrime, n_runs, &base.child(1))?;
    Ok(vec![p_d, p_dp, f_d.mean(), f_dp.mean()])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionView {
    pub guesses: Vec<u32>,
    pub block_of: Vec<u32>,
    pub n_blocks: u32,
    pub noisy_threshold: f64,
    pub overall_accuracy: f64,
}

/// The partition shown is the one the reconstruction used: both start from
/// `Rng::new(seed)` and the partition attack draws first.
pub fn reconstruct(counts: &[u32], epsilon: f64, delta: f64, split: f64, seed: u64) -> Result<ReconstructionView> {
    let db = Histogram::new(counts.iter().map(|&c| c as u64).collect());
    let report = run_reconstruct(&db, epsilon, delta, split, &mut Rng::new(seed))?;
    let partition = partition_attack(&db, split * epsilon, delta, &mut Rng::new(seed))?;
    if partition.blocks().len() != report.n_blocks {
        return Err(Error::Internal("partition replay diverged".into()));
    }
    Ok(ReconstructionView {
        guesses: report.guessed_counts.iter().map(|&g| g.min(u32::MAX as u64) as u32).collect(),
        block_of: partition.block_of().into_iter().map(|b| b as u32).collect(),
        n_blocks: report.n_blocks as u32,
        noisy_threshold: partition.noisy_threshold(),
        overall_accuracy: report.overall_accuracy,
    })
}

pub fn zipf_counts(domain: usize, total: u64, exponent: f64, seed: u64) -> Result<Vec<u32>> {
    let db = zipfian_histogram(domain, total, exponent, &mut Rng::new(seed))?;
    Ok(db.counts().iter().map(|&c| c as u32).collect())
}
