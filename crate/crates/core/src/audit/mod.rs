//! Quantitative evidence that GPTT is not differentially private.
//!
//! The counterexample uses `2t` unit-sensitivity queries with threshold 0.
//! On database `D` the first `t` queries answer 0 and the last `t` answer
//! 1; on the neighbor `D'` the values are swapped. The target output is
//! `t` negatives followed by `t` positives. Conditioning on the noisy
//! threshold `z ~ Lap(1/ε₁)`,
//!
//! ```text
//! V(v)  = ∫ f₁(z) [F₂(z)   (1 - F₂(z-1))]^t dz
//! V'(v) = ∫ f₁(z) [F₂(z-1) (1 - F₂(z))  ]^t dz
//! ```
//!
//! where `f₁` and `F₂` are the Laplace pdf of scale `1/ε₁` and cdf of scale
//! `1/ε₂`. The pointwise integrand ratio `κ(z)` exceeds 1 everywhere, so
//! `ln V - ln V'` grows without bound in `t`.

mod quadrature;

use std::fmt;

pub use quadrature::LogQuadrature;

use crate::error::{Error, Result};
use crate::histogram::{Histogram, NeighborPair, Query};
use crate::mechanisms::{self, Answer, GpttParams};
use crate::noise::{LaplaceDist, Rng};

/// Mass of the threshold noise left outside the integration range.
const TAIL_TOL: f64 = 1e-14;
const MC_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Database {
    D,
    DPrime,
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Database::D => "D",
            Database::DPrime => "D'",
        })
    }
}

/// The `t`-copy counterexample, realized on concrete neighboring databases.
///
/// Domain `{u₀, u₁}`; `D = (1, 1)` and `D' = (1, 0)`. The query
/// `x₀ - x₁` answers 0 on `D` and 1 on `D'`; the query `x₁` answers 1 on
/// `D` and 0 on `D'`. Both have sensitivity 1.
#[derive(Debug, Clone)]
pub struct CounterexampleSpec {
    copies: usize,
    epsilon1: f64,
    epsilon2: f64,
    pair: NeighborPair,
    queries: Vec<Query>,
    target: Vec<Answer>,
}

impl CounterexampleSpec {
    pub const THRESHOLD: f64 = 0.0;

    /// `copies` may be 0 (empty query set, every probability is 1).
    /// `epsilon2` may be infinite.
    pub fn new(copies: usize, epsilon1: f64, epsilon2: f64) -> Result<Self> {
        GpttParams::new(Self::THRESHOLD, epsilon1, epsilon2, 1.0)?;
        let pair = NeighborPair::new(Histogram::new(vec![1, 1]), Histogram::new(vec![1, 0]))?;
        let low_on_d = Query::diff(0, 1)?;
        let high_on_d = Query::count(1);

        let mut queries = vec![low_on_d; copies];
        queries.extend(std::iter::repeat_n(high_on_d, copies));
        let mut target = vec![Answer::Bot; copies];
        target.extend(std::iter::repeat_n(Answer::Top, copies));

        let spec = CounterexampleSpec {
            copies,
            epsilon1,
            epsilon2,
            pair,
            queries,
            target,
        };
        spec.check_realization()?;
        Ok(spec)
    }

    fn check_realization(&self) -> Result<()> {
        let expect = |which, low: f64, high: f64| -> Result<()> {
            let values = self.query_values(which)?;
            let ok = values[..self.copies].iter().all(|&v| v == low) && values[self.copies..].iter().all(|&v| v == high);
            if ok {
                Ok(())
            } else {
                Err(Error::Internal(format!("counterexample realization broken on {which}")))
            }
        };
        expect(Database::D, 0.0, 1.0)?;
        expect(Database::DPrime, 1.0, 0.0)
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn epsilon1(&self) -> f64 {
        self.epsilon1
    }

    pub fn epsilon2(&self) -> f64 {
        self.epsilon2
    }

    pub fn pair(&self) -> &NeighborPair {
        &self.pair
    }

    pub fn database(&self, which: Database) -> &Histogram {
        match which {
            Database::D => self.pair.left(),
            Database::DPrime => self.pair.right(),
        }
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn target_output(&self) -> &[Answer] {
        &self.target
    }

    pub fn query_values(&self, which: Database) -> Result<Vec<f64>> {
        let db = self.database(which);
        self.queries.iter().map(|q| q.evaluate(db)).collect()
    }

    pub fn gptt_params(&self) -> GpttParams {
        GpttParams::new(Self::THRESHOLD, self.epsilon1, self.epsilon2, 1.0).expect("validated in constructor")
    }

    fn threshold_dist(&self) -> LaplaceDist {
        LaplaceDist::new(Self::THRESHOLD, 1.0 / self.epsilon1).expect("validated in constructor")
    }

    fn query_noise(&self) -> Result<LaplaceDist> {
        if self.epsilon2.is_finite() {
            LaplaceDist::with_epsilon(self.epsilon2)
        } else {
            Err(Error::arg(
                "epsilon2 is infinite: use exact_output_probability_hard for the noiseless case",
            ))
        }
    }

    /// Distinct (query value, target answer) pairs with multiplicities.
    fn value_groups(&self, which: Database) -> Result<Vec<(f64, Answer, usize)>> {
        let values = self.query_values(which)?;
        let mut groups: Vec<(f64, Answer, usize)> = Vec::new();
        for (&v, &a) in values.iter().zip(&self.target) {
            match groups.iter_mut().find(|(gv, ga, _)| *gv == v && *ga == a) {
                Some(g) => g.2 += 1,
                None => groups.push((v, a, 1)),
            }
        }
        Ok(groups)
    }
}

/// Log of the per-copy integrand factor on each database.
fn ln_copy_factor(noise: &LaplaceDist, z: f64, which: Database) -> f64 {
    match which {
        Database::D => noise.ln_cdf(z) + noise.ln_sf(z - 1.0),
        Database::DPrime => noise.ln_cdf(z - 1.0) + noise.ln_sf(z),
    }
}

/// `ln P[GPTT(db) = target]` by quadrature over the noisy threshold.
pub fn ln_exact_output_probability(spec: &CounterexampleSpec, which: Database) -> Result<f64> {
    let noise = spec.query_noise()?;
    if spec.copies == 0 {
        return Ok(0.0);
    }
    let threshold = spec.threshold_dist();
    let t = spec.copies as f64;
    let half_width = (1.0 / spec.epsilon1) * (2.0 / TAIL_TOL).ln();
    let breakpoints = [-half_width.max(2.0), 0.0, 1.0, half_width.max(2.0)];
    let quad = LogQuadrature {
        initial_panels: 64 + (16.0 * t.sqrt()).ceil() as usize,
        ..Default::default()
    };
    Ok(quad.ln_integral(|z| threshold.ln_pdf(z) + t * ln_copy_factor(&noise, z, which), &breakpoints))
}

/// `P[GPTT(db) = target]` for finite `ε₂`. May underflow to 0 for large
/// copy counts; use [`ln_exact_output_probability`] there.
pub fn exact_output_probability(spec: &CounterexampleSpec, which: Database) -> Result<f64> {
    Ok(ln_exact_output_probability(spec, which)?.exp())
}

/// The two-query, `ε₂ = ∞` case in closed form.
///
/// Output `(Bot, Top)` on `D` needs the noisy threshold in `(0, 1]`; on
/// `D'` the first query exceeds the second, so the output is impossible.
pub fn exact_output_probability_hard(epsilon1: f64) -> Result<(f64, f64)> {
    let threshold = LaplaceDist::new(CounterexampleSpec::THRESHOLD, 1.0 / epsilon1)?;
    Ok((threshold.cdf(1.0) - threshold.cdf(0.0), 0.0))
}

/// Ratio of the `D` and `D'` integrands at threshold `z`.
pub fn kappa(z: f64, epsilon2: f64) -> Result<f64> {
    let noise = LaplaceDist::with_epsilon(epsilon2)?;
    Ok(ln_kappa(&noise, z).exp())
}

fn ln_kappa(noise: &LaplaceDist, z: f64) -> f64 {
    ln_copy_factor(noise, z, Database::D) - ln_copy_factor(noise, z, Database::DPrime)
}

/// Minimum of `κ` over `[lo, hi]`: dense scan, then golden-section refinement.
pub fn kappa_min(lo: f64, hi: f64, epsilon2: f64) -> Result<f64> {
    if !(lo <= hi) {
        return Err(Error::arg(format!("empty interval [{lo}, {hi}]")));
    }
    let noise = LaplaceDist::with_epsilon(epsilon2)?;
    let f = |z: f64| ln_kappa(&noise, z);
    let n = 2048;
    let step = (hi - lo) / n as f64;
    let (best_i, mut best) = (0..=n)
        .map(|i| (i, f(lo + i as f64 * step)))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if step > 0.0 {
        let mut a = (lo + (best_i as f64 - 1.0) * step).max(lo);
        let mut b = (lo + (best_i as f64 + 1.0) * step).min(hi);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        best = best.min(f(0.5 * (a + b)));
    }
    Ok(best.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

/// A probability estimate kept in log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub ln_mean: f64,
    /// Standard error divided by the mean (0 for exact values).
    pub rel_std_error: f64,
    pub n_trials: Option<u64>,
}

impl Estimate {
    fn exact(ln_mean: f64) -> Self {
        Estimate {
            ln_mean,
            rel_std_error: 0.0,
            n_trials: None,
        }
    }

    pub fn mean(&self) -> f64 {
        self.ln_mean.exp()
    }

    pub fn std_error(&self) -> f64 {
        if self.ln_mean == f64::NEG_INFINITY {
            0.0
        } else {
            self.rel_std_error * self.mean()
        }
    }
}

/// Output probabilities of the target vector on both databases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditResult {
    pub method: Method,
    pub prob_d: Estimate,
    pub prob_dprime: Estimate,
}

impl AuditResult {
    /// `ln V(v) - ln V'(v)`; `+inf` when `V'(v) = 0 < V(v)`.
    pub fn log_ratio(&self) -> f64 {
        self.prob_d.ln_mean - self.prob_dprime.ln_mean
    }

    /// Delta-method standard error of [`AuditResult::log_ratio`].
    pub fn log_ratio_std_error(&self) -> f64 {
        self.prob_d.rel_std_error.hypot(self.prob_dprime.rel_std_error)
    }
}

pub fn quadrature_audit(spec: &CounterexampleSpec) -> Result<AuditResult> {
    Ok(AuditResult {
        method: Method::Quadrature,
        prob_d: Estimate::exact(ln_exact_output_probability(spec, Database::D)?),
        prob_dprime: Estimate::exact(ln_exact_output_probability(spec, Database::DPrime)?),
    })
}

/// `ln V - ln V'` by quadrature.
pub fn log_ratio(spec: &CounterexampleSpec) -> Result<f64> {
    Ok(quadrature_audit(spec)?.log_ratio())
}

/// Rao-Blackwellized Monte Carlo estimate of `P[GPTT(db) = target]`.
///
/// Each trial draws only the noisy threshold; given it, the answers are
/// independent and their exact conditional probabilities are multiplied.
/// With `ε₂ = ∞` the conditional probability is an indicator.
pub fn mc_output_probability(spec: &CounterexampleSpec, which: Database, n_trials: u64, rng: &Rng) -> Result<Estimate> {
    if n_trials == 0 {
        return Err(Error::arg("n_trials must be at least 1"));
    }
    let groups = spec.value_groups(which)?;
    let threshold = spec.threshold_dist();
    let noise = spec.epsilon2.is_finite().then(|| LaplaceDist::with_epsilon(spec.epsilon2)).transpose()?;

    // ln P[answer | noisy threshold z] for one query with true value v
    let ln_conditional = |z: f64, v: f64, a: Answer| -> f64 {
        match (&noise, a) {
            (Some(n), Answer::Bot) => n.ln_cdf(z - v),
            (Some(n), Answer::Top) => n.ln_sf(z - v),
            (None, Answer::Bot) if v < z => 0.0,
            (None, Answer::Top) if v >= z => 0.0,
            (None, _) => f64::NEG_INFINITY,
        }
    };
    let ln_trial = |rng: &mut Rng| -> f64 {
        let z = threshold.sample(rng);
        groups.iter().map(|&(v, a, m)| m as f64 * ln_conditional(z, v, a)).sum()
    };

    let n = n_trials as usize;
    let chunks = n.div_ceil(MC_CHUNK);
    let run_chunk = |c: usize| -> Vec<f64> {
        let mut child = rng.child(c as u64);
        let len = MC_CHUNK.min(n - c * MC_CHUNK);
        (0..len).map(|_| ln_trial(&mut child)).collect()
    };
    let logs: Vec<Vec<f64>> = par_map(chunks, run_chunk);
    Ok(log_space_mean(logs.iter().flatten().copied(), n_trials))
}

/// Monte Carlo estimates on both databases, using independent child streams.
pub fn mc_audit(spec: &CounterexampleSpec, n_trials: u64, rng: &Rng) -> Result<AuditResult> {
    Ok(AuditResult {
        method: Method::MonteCarlo,
        prob_d: mc_output_probability(spec, Database::D, n_trials, &rng.child(0))?,
        prob_dprime: mc_output_probability(spec, Database::DPrime, n_trials, &rng.child(1))?,
    })
}

fn log_space_mean(logs: impl Iterator<Item = f64> + Clone, n: u64) -> Estimate {
    let shift = logs.clone().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Estimate {
            ln_mean: f64::NEG_INFINITY,
            rel_std_error: 0.0,
            n_trials: Some(n),
        };
    }
    let (s1, s2) = logs.fold((0.0, 0.0), |(s1, s2), l| {
        let w = (l - shift).exp();
        (s1 + w, s2 + w * w)
    });
    let nf = n as f64;
    let mean = s1 / nf;
    let var = if n > 1 { ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Estimate {
        ln_mean: mean.ln() + shift,
        rel_std_error: (var / nf).sqrt() / mean,
        n_trials: Some(n),
    }
}

/// Empirical frequency of the target output from running the GPTT
/// mechanism itself on the realized database. Run `i` uses `rng.child(i)`.
pub fn mechanism_output_frequency(spec: &CounterexampleSpec, which: Database, n_runs: u64, rng: &Rng) -> Result<Estimate> {
    if n_runs == 0 {
        return Err(Error::arg("n_runs must be at least 1"));
    }
    let db = spec.database(which);
    let params = spec.gptt_params();
    let n = n_runs as usize;
    let chunks = n.div_ceil(MC_CHUNK);
    let run_chunk = |c: usize| -> Result<u64> {
        let start = c * MC_CHUNK;
        let end = (start + MC_CHUNK).min(n);
        let mut hits = 0;
        for i in start..end {
            let mut child = rng.child(i as u64);
            let out = mechanisms::gptt(db, &spec.queries, &params, &mut child)?;
            if out.answers.answers == spec.target {
                hits += 1;
            }
        }
        Ok(hits)
    };
    let hits: u64 = par_map(chunks, run_chunk).into_iter().sum::<Result<u64>>()?;
    let p = hits as f64 / n_runs as f64;
    let se = (p * (1.0 - p) / n_runs as f64).sqrt();
    Ok(Estimate {
        ln_mean: p.ln(),
        rel_std_error: if p > 0.0 { se / p } else { 0.0 },
        n_trials: Some(n_runs),
    })
}

/// Smallest copy count `t ≤ t_max` whose log-ratio exceeds `target`.
///
/// Relies on the log-ratio increasing in `t`; searches by doubling, then
/// bisection.
pub fn min_t_violating(target: f64, epsilon1: f64, epsilon2: f64, t_max: usize) -> Result<Option<usize>> {
    if !(target > 0.0) {
        return Err(Error::arg(format!("target privacy loss must be positive, got {target}")));
    }
    if !epsilon2.is_finite() {
        return Err(Error::arg("min_t_violating needs a finite epsilon2"));
    }
    let exceeds = |t: usize| -> Result<bool> { Ok(log_ratio(&CounterexampleSpec::new(t, epsilon1, epsilon2)?)? > target) };
    if t_max == 0 {
        return Ok(None);
    }
    let mut lo = 0;
    let mut hi = 1;
    loop {
        if exceeds(hi)? {
            break;
        }
        if hi == t_max {
            return Ok(None);
        }
        lo = hi;
        hi = (hi * 2).min(t_max);
    }
    // invariant: !exceeds(lo) (or lo == 0), exceeds(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if exceeds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Lower bound on the log-ratio implied by the non-privacy argument:
/// `t ln κ_min - ln 2`, with `κ_min` taken over `[-δ, δ]` and
/// `δ = |F₁⁻¹(V'/4)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofBound {
    pub delta: f64,
    pub kappa_min: f64,
    pub lower_bound: f64,
}

pub fn proof_bound(spec: &CounterexampleSpec) -> Result<ProofBound> {
    let ln_alpha = ln_exact_output_probability(spec, Database::DPrime)?;
    let delta = spec.threshold_dist().lower_quantile_ln(ln_alpha - 4f64.ln())?.abs();
    let kappa_min = kappa_min(-delta, delta, spec.epsilon2)?;
    Ok(ProofBound {
        delta,
        kappa_min,
        lower_bound: spec.copies as f64 * kappa_min.ln() - std::f64::consts::LN_2,
    })
}

#[cfg(feature = "parallel")]
fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}
