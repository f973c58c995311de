//! Threshold-testing mechanisms.
//!
//! * [`laplace_mechanism`]: independent Laplace noise on a batch of answers.
//! * [`svt`]: the sparse vector technique with a cutoff on positive answers.
//! * [`gptt`]: generalized private threshold testing, which shares one noisy
//!   threshold across an unbounded number of comparisons and never aborts.
//!   It is *not* differentially private; see [`crate::audit`].
//! * [`gptt_amplified`]: replicate every query `t` times under the same noisy
//!   threshold and majority-vote, which recovers the noiseless comparison as
//!   `t` grows.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::histogram::{Histogram, Query};
use crate::noise::{LaplaceDist, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    /// below the noisy threshold
    Bot,
    /// at or above the noisy threshold
    Top,
}

impl Answer {
    pub fn is_top(self) -> bool {
        self == Answer::Top
    }

    fn from_comparison(noisy_query: f64, noisy_threshold: f64) -> Self {
        if noisy_query < noisy_threshold {
            Answer::Bot
        } else {
            Answer::Top
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Bot => "bot",
            Answer::Top => "top",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnswerMode {
    #[default]
    Binary,
    /// Positive answers also release the noisy query value.
    NoisyValue,
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be positive and finite, got {value}")))
    }
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must be finite, got {value}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvtParams {
    pub threshold: f64,
    pub cutoff: usize,
    pub epsilon: f64,
    pub sensitivity: f64,
    pub answer_mode: AnswerMode,
}

impl SvtParams {
    pub fn new(threshold: f64, cutoff: usize, epsilon: f64, sensitivity: f64) -> Result<Self> {
        let params = SvtParams {
            threshold,
            cutoff,
            epsilon,
            sensitivity,
            answer_mode: AnswerMode::Binary,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_answer_mode(mut self, mode: AnswerMode) -> Self {
        self.answer_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("threshold", self.threshold)?;
        check_positive("epsilon", self.epsilon)?;
        check_positive("sensitivity", self.sensitivity)?;
        if self.cutoff == 0 {
            return Err(Error::arg("cutoff must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpttParams {
    pub threshold: f64,
    pub epsilon1: f64,
    /// `f64::INFINITY` compares the exact query answers against the noisy threshold.
    pub epsilon2: f64,
    pub sensitivity: f64,
}

impl GpttParams {
    pub fn new(threshold: f64, epsilon1: f64, epsilon2: f64, sensitivity: f64) -> Result<Self> {
        let params = GpttParams {
            threshold,
            epsilon1,
            epsilon2,
            sensitivity,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        check_finite("threshold", self.threshold)?;
        check_positive("epsilon1", self.epsilon1)?;
        check_positive("sensitivity", self.sensitivity)?;
        if !(self.epsilon2 > 0.0) {
            return Err(Error::arg(format!(
                "epsilon2 must be positive or infinite, got {}",
                self.epsilon2
            )));
        }
        Ok(())
    }

    pub fn threshold_noise(&self) -> LaplaceDist {
        LaplaceDist::new(0.0, self.sensitivity / self.epsilon1).expect("validated parameters")
    }

    /// Per-query noise, or `None` when `epsilon2` is infinite.
    pub fn query_noise(&self) -> Option<LaplaceDist> {
        self.epsilon2
            .is_finite()
            .then(|| LaplaceDist::new(0.0, self.sensitivity / self.epsilon2).expect("validated parameters"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdVector {
    pub answers: Vec<Answer>,
    /// Noisy query values for positive answers, `None` at negative positions.
    /// Only populated by SVT in [`AnswerMode::NoisyValue`].
    pub noisy_values: Option<Vec<Option<f64>>>,
    /// Index of the answer that exhausted the SVT cutoff.
    pub aborted_at: Option<usize>,
}

impl ThresholdVector {
    fn binary(answers: Vec<Answer>) -> Self {
        ThresholdVector {
            answers,
            noisy_values: None,
            aborted_at: None,
        }
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }

    pub fn top_count(&self) -> usize {
        self.answers.iter().filter(|a| a.is_top()).count()
    }
}

/// Full record of one GPTT run, including the internal noise.
#[derive(Debug, Clone, PartialEq)]
pub struct GpttTranscript {
    pub noisy_threshold: f64,
    pub noisy_queries: Vec<f64>,
    pub answers: ThresholdVector,
}

/// Adds independent `Lap(summed_sensitivity / epsilon)` noise to every value.
pub fn laplace_mechanism(values: &[f64], summed_sensitivity: f64, epsilon: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    check_positive("summed sensitivity", summed_sensitivity)?;
    check_positive("epsilon", epsilon)?;
    let noise = LaplaceDist::new(0.0, summed_sensitivity / epsilon)?;
    Ok(values.iter().map(|v| v + noise.sample(rng)).collect())
}

fn check_sensitivities(queries: &[Query], bound: f64) -> Result<()> {
    match queries.iter().position(|q| q.sensitivity() > bound) {
        Some(i) => Err(Error::arg(format!(
            "query {i} has sensitivity {} above the declared bound {bound}",
            queries[i].sensitivity()
        ))),
        None => Ok(()),
    }
}

fn evaluate_all(db: &Histogram, queries: &[Query]) -> Result<Vec<f64>> {
    queries.iter().map(|q| q.evaluate(db)).collect()
}

/// Sparse vector technique.
///
/// The threshold is perturbed once with `Lap(2Δ/ε)`, each query with
/// `Lap(2Δc/ε)`. A query is positive when its noisy value is at least the
/// noisy threshold; processing stops at the `c`-th positive answer.
pub fn svt(db: &Histogram, queries: &[Query], params: &SvtParams, rng: &mut Rng) -> Result<ThresholdVector> {
    params.validate()?;
    check_sensitivities(queries, params.sensitivity)?;
    let values = evaluate_all(db, queries)?;
    Ok(svt_on_values(&values, params, rng))
}

pub(crate) fn svt_on_values(values: &[f64], params: &SvtParams, rng: &mut Rng) -> ThresholdVector {
    let delta = params.sensitivity;
    let threshold_noise = LaplaceDist::new(0.0, 2.0 * delta / params.epsilon).expect("validated parameters");
    let query_noise =
        LaplaceDist::new(0.0, 2.0 * delta * params.cutoff as f64 / params.epsilon).expect("validated parameters");
    let noisy_threshold = params.threshold + threshold_noise.sample(rng);

    let keep_values = params.answer_mode == AnswerMode::NoisyValue;
    let mut answers = Vec::with_capacity(values.len());
    let mut noisy_values = Vec::new();
    let mut aborted_at = None;
    let mut positives = 0;
    for (i, &value) in values.iter().enumerate() {
        let noisy = value + query_noise.sample(rng);
        let answer = Answer::from_comparison(noisy, noisy_threshold);
        answers.push(answer);
        if keep_values {
            noisy_values.push(answer.is_top().then_some(noisy));
        }
        if answer.is_top() {
            positives += 1;
            if positives >= params.cutoff {
                aborted_at = Some(i);
                break;
            }
        }
    }
    ThresholdVector {
        answers,
        noisy_values: keep_values.then_some(noisy_values),
        aborted_at,
    }
}

/// A running GPTT instance: one noisy threshold, any number of comparisons.
///
/// Useful when the query stream is too large to materialize, e.g. all
/// ordered pairs of a large domain.
pub struct GpttSession<'a> {
    noisy_threshold: f64,
    query_noise: Option<LaplaceDist>,
    rng: &'a mut Rng,
}

impl<'a> GpttSession<'a> {
    pub fn start(params: &GpttParams, rng: &'a mut Rng) -> Result<Self> {
        params.validate()?;
        let noisy_threshold = params.threshold + params.threshold_noise().sample(rng);
        Ok(GpttSession {
            noisy_threshold,
            query_noise: params.query_noise(),
            rng,
        })
    }

    /// Bypasses the threshold noise. Test use only.
    #[cfg(test)]
    pub(crate) fn with_noisy_threshold(params: &GpttParams, noisy_threshold: f64, rng: &'a mut Rng) -> Self {
        GpttSession {
            noisy_threshold,
            query_noise: params.query_noise(),
            rng,
        }
    }

    pub fn noisy_threshold(&self) -> f64 {
        self.noisy_threshold
    }

    /// Compares one true query answer; returns the noisy answer and the outcome.
    pub fn compare(&mut self, value: f64) -> (f64, Answer) {
        let noisy = match &self.query_noise {
            Some(noise) => value + noise.sample(self.rng),
            None => value,
        };
        (noisy, Answer::from_comparison(noisy, self.noisy_threshold))
    }

    fn run(mut self, values: &[f64]) -> GpttTranscript {
        let (noisy_queries, answers) = values.iter().map(|&v| self.compare(v)).unzip();
        GpttTranscript {
            noisy_threshold: self.noisy_threshold,
            noisy_queries,
            answers: ThresholdVector::binary(answers),
        }
    }

    fn run_amplified(mut self, values: &[f64], copies: usize) -> AmplifiedTranscript {
        let mut top_votes = Vec::with_capacity(values.len());
        let answers = values
            .iter()
            .map(|&v| {
                let tops = (0..copies).filter(|_| self.compare(v).1.is_top()).count();
                top_votes.push(tops);
                if 2 * tops > copies {
                    Answer::Top
                } else {
                    Answer::Bot
                }
            })
            .collect();
        AmplifiedTranscript {
            noisy_threshold: self.noisy_threshold,
            top_votes,
            answers: ThresholdVector::binary(answers),
        }
    }
}

/// Generalized private threshold testing.
///
/// `θ̃ = θ + Lap(Δ/ε₁)` once; every query is compared as
/// `q(D) + Lap(Δ/ε₂) < θ̃ ⇒ Bot`, otherwise `Top`. No cutoff.
pub fn gptt(db: &Histogram, queries: &[Query], params: &GpttParams, rng: &mut Rng) -> Result<GpttTranscript> {
    params.validate()?;
    check_sensitivities(queries, params.sensitivity)?;
    let values = evaluate_all(db, queries)?;
    Ok(GpttSession::start(params, rng)?.run(&values))
}

/// GPTT on precomputed query answers.
pub fn gptt_on_values(values: &[f64], params: &GpttParams, rng: &mut Rng) -> Result<GpttTranscript> {
    Ok(GpttSession::start(params, rng)?.run(values))
}

#[cfg(test)]
pub(crate) fn gptt_at_threshold(values: &[f64], params: &GpttParams, noisy_threshold: f64, rng: &mut Rng) -> GpttTranscript {
    GpttSession::with_noisy_threshold(params, noisy_threshold, rng).run(values)
}

/// Published ways of splitting a total budget between threshold and query noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instantiation {
    /// frequent itemset mining: `ε₁ = ε/4`, `ε₂ = 3ε/4`
    LeeClifton,
    /// synthetic data: `ε₁ = ε₂ = ε/2`
    Chen,
    /// private threshold testing: `ε₁ = ε`, `ε₂ = ∞`
    Stoddard,
}

impl Instantiation {
    pub fn split(self, epsilon: f64) -> Result<(f64, f64)> {
        check_positive("epsilon", epsilon)?;
        Ok(match self {
            Instantiation::LeeClifton => (epsilon / 4.0, 3.0 * epsilon / 4.0),
            Instantiation::Chen => (epsilon / 2.0, epsilon / 2.0),
            Instantiation::Stoddard => (epsilon, f64::INFINITY),
        })
    }
}

impl FromStr for Instantiation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lee_clifton" => Ok(Instantiation::LeeClifton),
            "chen" => Ok(Instantiation::Chen),
            "stoddard" => Ok(Instantiation::Stoddard),
            other => Err(Error::arg(format!(
                "unknown GPTT instantiation {other:?} (expected lee_clifton, chen or stoddard)"
            ))),
        }
    }
}

pub fn gptt_instantiation(name: &str, epsilon: f64) -> Result<(f64, f64)> {
    name.parse::<Instantiation>()?.split(epsilon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplifiedTranscript {
    pub noisy_threshold: f64,
    /// Number of `Top` outcomes among the copies of each original query.
    pub top_votes: Vec<usize>,
    pub answers: ThresholdVector,
}

/// Majority vote over `copies` replicas of each query under one shared
/// noisy threshold. `copies` must be odd.
pub fn gptt_amplified(
    db: &Histogram,
    queries: &[Query],
    params: &GpttParams,
    copies: usize,
    rng: &mut Rng,
) -> Result<ThresholdVector> {
    Ok(gptt_amplified_transcript(db, queries, params, copies, rng)?.answers)
}

pub fn gptt_amplified_transcript(
    db: &Histogram,
    queries: &[Query],
    params: &GpttParams,
    copies: usize,
    rng: &mut Rng,
) -> Result<AmplifiedTranscript> {
    check_copies(copies)?;
    params.validate()?;
    check_sensitivities(queries, params.sensitivity)?;
    let values = evaluate_all(db, queries)?;
    Ok(GpttSession::start(params, rng)?.run_amplified(&values, copies))
}

fn check_copies(copies: usize) -> Result<()> {
    if copies == 0 || copies.is_multiple_of(2) {
        Err(Error::arg(format!("copy count must be a positive odd number, got {copies}")))
    } else {
        Ok(())
    }
}

#[cfg(test)]
fn amplified_at_threshold(
    values: &[f64],
    params: &GpttParams,
    copies: usize,
    noisy_threshold: f64,
    rng: &mut Rng,
) -> AmplifiedTranscript {
    GpttSession::with_noisy_threshold(params, noisy_threshold, rng).run_amplified(values, copies)
}

/// `(cΔ/ε)(ln k + ln(2/δ))`: the SVT accuracy radius with the big-O
/// constant set to 1. Only meaningful for relative comparisons.
pub fn svt_utility_bound(k: usize, cutoff: usize, sensitivity: f64, epsilon: f64, delta: f64) -> f64 {
    cutoff as f64 * sensitivity / epsilon * ((k as f64).ln() + (2.0 / delta).ln())
}

/// `(Δ/ε₁) ln(1/δ)`: with `ε₂ = ∞`, every answer is correct up to this
/// margin around the threshold with probability at least `1 - δ`.
pub fn gptt_utility_alpha(sensitivity: f64, epsilon1: f64, delta: f64) -> f64 {
    sensitivity / epsilon1 * (1.0 / delta).ln()
}
