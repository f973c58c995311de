//! Reconstruction attacks that use GPTT with `ε₂ = ∞` as a comparison oracle.
//!
//! [`partition_attack`] asks GPTT about every ordered difference query
//! `x_u - x_v` and groups cells by the set of cells reported as "larger".
//! Because the same noisy threshold is used for every comparison, those
//! sets form a chain under inclusion and order the cells by count.
//! [`reconstruct`] spends a second budget on noisy block totals and guesses
//! every cell of a block as the rounded block average.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::histogram::{Histogram, Query};
use crate::mechanisms::{GpttParams, GpttSession};
use crate::noise::{LaplaceDist, Rng};

/// Fixed-size set of domain indices.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IndexSet {
    words: Vec<u64>,
}

impl IndexSet {
    fn with_capacity(n: usize) -> Self {
        IndexSet {
            words: vec![0; n.div_ceil(64)],
        }
    }

    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w & (1 << (i % 64)) != 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64).filter(move |b| w & (1 << b) != 0).map(move |b| wi * 64 + b)
        })
    }
}

impl std::fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Domain cells grouped by identical `larger()` sets, smallest counts first.
#[derive(Debug, Clone)]
pub struct OrderedPartition {
    blocks: Vec<Vec<usize>>,
    larger_sets: Vec<IndexSet>,
    noisy_threshold: f64,
}

impl OrderedPartition {
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Cells `w` for which GPTT answered `Top` on `x_w - x_v` (`v` itself
    /// included when the noisy threshold is at most zero).
    pub fn larger(&self, v: usize) -> &IndexSet {
        &self.larger_sets[v]
    }

    pub fn domain_size(&self) -> usize {
        self.larger_sets.len()
    }

    /// The noisy threshold of the GPTT run. Not visible to a real attacker;
    /// kept for diagnostics.
    pub fn noisy_threshold(&self) -> f64 {
        self.noisy_threshold
    }

    /// Block index of every cell.
    pub fn block_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.domain_size()];
        for (b, block) in self.blocks.iter().enumerate() {
            for &u in block {
                out[u] = b;
            }
        }
        out
    }

    /// Blocks cover the domain disjointly, share `larger()` within a block,
    /// and strictly shrink `larger()` from one block to the next.
    pub fn check_invariants(&self) -> Result<()> {
        let k = self.domain_size();
        let mut seen = vec![false; k];
        for block in &self.blocks {
            if block.is_empty() {
                return Err(Error::Internal("empty block".into()));
            }
            for &u in block {
                if u >= k || std::mem::replace(&mut seen[u], true) {
                    return Err(Error::Internal(format!("cell {u} is out of range or in two blocks")));
                }
                if self.larger_sets[u] != self.larger_sets[block[0]] {
                    return Err(Error::Internal(format!("cell {u} disagrees with its block")));
                }
            }
        }
        if let Some(u) = seen.iter().position(|s| !s) {
            return Err(Error::Internal(format!("cell {u} is in no block")));
        }
        for pair in self.blocks.windows(2) {
            let earlier = &self.larger_sets[pair[0][0]];
            let later = &self.larger_sets[pair[1][0]];
            if !(later.is_subset(earlier) && later != earlier) {
                return Err(Error::Internal("larger() sets do not form a strict chain".into()));
            }
        }
        Ok(())
    }

    /// Every cell in an earlier block has a strictly smaller true count than
    /// every cell in a later block.
    pub fn ordering_holds(&self, db: &Histogram) -> bool {
        let counts = db.counts();
        let span = |b: &Vec<usize>| {
            let lo = b.iter().map(|&u| counts[u]).min().unwrap();
            let hi = b.iter().map(|&u| counts[u]).max().unwrap();
            (lo, hi)
        };
        self.blocks.windows(2).all(|w| span(&w[0]).1 < span(&w[1]).0)
    }
}

fn check_attack_args(db: &Histogram, epsilon: f64, delta: f64) -> Result<()> {
    if db.domain_size() < 2 {
        return Err(Error::arg("the attack needs a domain of at least two cells"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::arg(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::arg(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// `⌈(1/ε) ln(1/δ)⌉`, both the public threshold and the accuracy radius.
pub fn attack_threshold(epsilon: f64, delta: f64) -> u64 {
    ((1.0 / delta).ln() / epsilon).ceil() as u64
}

/// Runs GPTT(`ε₁ = ε`, `ε₂ = ∞`) on all ordered difference queries and
/// returns the induced ordered partition of the domain.
pub fn partition_attack(db: &Histogram, epsilon: f64, delta: f64, rng: &mut Rng) -> Result<OrderedPartition> {
    check_attack_args(db, epsilon, delta)?;
    let params = GpttParams::new(attack_threshold(epsilon, delta) as f64, epsilon, f64::INFINITY, 1.0)?;
    let session = GpttSession::start(&params, rng)?;
    partition_from_session(db, session)
}

#[cfg(test)]
pub(crate) fn partition_at_threshold(db: &Histogram, noisy_threshold: f64) -> Result<OrderedPartition> {
    let params = GpttParams::new(0.0, 1.0, f64::INFINITY, 1.0)?;
    let mut rng = Rng::new(0);
    partition_from_session(db, GpttSession::with_noisy_threshold(&params, noisy_threshold, &mut rng))
}

fn partition_from_session(db: &Histogram, mut session: GpttSession<'_>) -> Result<OrderedPartition> {
    let k = db.domain_size();
    // x_v - x_v = 0 is the same comparison for every v
    let self_top = session.compare(0.0).1.is_top();
    let mut larger_sets = vec![IndexSet::with_capacity(k); k];
    for (v, larger) in larger_sets.iter_mut().enumerate() {
        for u in 0..k {
            let top = if u == v {
                self_top
            } else {
                session.compare(Query::diff(u, v)?.evaluate(db)?).1.is_top()
            };
            if top {
                larger.insert(u);
            }
        }
    }

    let mut index: HashMap<&IndexSet, usize> = HashMap::new();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for (u, set) in larger_sets.iter().enumerate() {
        let b = *index.entry(set).or_insert_with(|| {
            blocks.push(Vec::new());
            blocks.len() - 1
        });
        blocks[b].push(u);
    }
    // with a shared exact comparison the sets form a chain, so sorting by
    // size is the inclusion order
    blocks.sort_by_key(|b| std::cmp::Reverse(larger_sets[b[0]].len()));

    let partition = OrderedPartition {
        blocks,
        larger_sets,
        noisy_threshold: session.noisy_threshold(),
    };
    partition.check_invariants()?;
    Ok(partition)
}

/// Outcome of repeated partition attacks against the level sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremCheck {
    /// Fraction of trials with `P_i = S_i` for every `i ∈ [0, m]`.
    pub fraction: f64,
    pub alpha: u64,
    /// Highest level compared, `k - 2α`.
    pub m: u64,
    pub n_trials: u64,
}

/// Repeats [`partition_attack`] and measures how often the first `m + 1`
/// blocks are exactly the level sets `S_0, ..., S_m`, `m = k - 2α`.
///
/// Requires every level `0..=k` to be present in `db` and `k > 2α`.
/// Trial `i` uses `rng.child(i)`.
pub fn reconstruction_theorem_check(
    db: &Histogram,
    k: u64,
    epsilon: f64,
    delta: f64,
    n_trials: u64,
    rng: &Rng,
) -> Result<TheoremCheck> {
    check_attack_args(db, epsilon, delta)?;
    if n_trials == 0 {
        return Err(Error::arg("n_trials must be at least 1"));
    }
    let alpha = attack_threshold(epsilon, delta);
    if k <= 2 * alpha {
        return Err(Error::Precondition(format!(
            "support level k = {k} must exceed 2α = {} (α = ⌈ln(1/δ)/ε⌉)",
            2 * alpha
        )));
    }
    let level_sets: Vec<Vec<usize>> = (0..=k).map(|i| db.level_set(i)).collect();
    if let Some(missing) = level_sets.iter().position(Vec::is_empty) {
        return Err(Error::Precondition(format!("no cell has count {missing}: level set S_{missing} is empty")));
    }
    let m = k - 2 * alpha;

    let trial = |i: u64| -> Result<bool> {
        let partition = partition_attack(db, epsilon, delta, &mut rng.child(i))?;
        let blocks = partition.blocks();
        Ok(blocks.len() > m as usize && (0..=m as usize).all(|i| blocks[i] == level_sets[i]))
    };
    let hits = par_count(n_trials, trial)?;
    Ok(TheoremCheck {
        fraction: hits as f64 / n_trials as f64,
        alpha,
        m,
        n_trials,
    })
}

/// Fraction of `n_trials` partition attacks whose blocks respect the true
/// count order. Trial `i` uses `rng.child(i)`.
pub fn ordering_lemma_rate(db: &Histogram, epsilon: f64, delta: f64, n_trials: u64, rng: &Rng) -> Result<f64> {
    if n_trials == 0 {
        return Err(Error::arg("n_trials must be at least 1"));
    }
    let hits = par_count(n_trials, |i| {
        Ok(partition_attack(db, epsilon, delta, &mut rng.child(i))?.ordering_holds(db))
    })?;
    Ok(hits as f64 / n_trials as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub guessed_counts: Vec<u64>,
    pub overall_accuracy: f64,
    /// Accuracy on cells whose true count lies in `[0, 5]`; `None` if there are none.
    pub small_count_accuracy: Option<f64>,
    pub epsilon_used: f64,
    pub trial_seed: u64,
    pub n_blocks: usize,
}

/// Partition attack with `split_fraction · ε`, then one noisy total per
/// block with the remaining budget; every cell is guessed as the rounded
/// block average, clamped at zero.
pub fn reconstruct(
    db: &Histogram,
    epsilon: f64,
    delta: f64,
    split_fraction: f64,
    rng: &mut Rng,
) -> Result<ReconstructionReport> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::arg(format!("split fraction must lie in (0, 1), got {split_fraction}")));
    }
    check_attack_args(db, epsilon, delta)?;
    let trial_seed = rng.key();
    let eps_partition = split_fraction * epsilon;
    let eps_totals = (1.0 - split_fraction) * epsilon;
    let partition = partition_attack(db, eps_partition, delta, rng)?;
    let noise = LaplaceDist::with_epsilon(eps_totals)?;

    let mut guessed = vec![0u64; db.domain_size()];
    for block in partition.blocks() {
        let total: u64 = block.iter().map(|&u| db.counts()[u]).sum();
        let average = (total as f64 + noise.sample(rng)) / block.len() as f64;
        // f64::round is half away from zero
        let guess = average.round().max(0.0) as u64;
        for &u in block {
            guessed[u] = guess;
        }
    }
    let (overall, small) = accuracy_metrics(db, &guessed)?;
    Ok(ReconstructionReport {
        guessed_counts: guessed,
        overall_accuracy: overall,
        small_count_accuracy: small,
        epsilon_used: epsilon,
        trial_seed,
        n_blocks: partition.blocks().len(),
    })
}

pub const SMALL_COUNT_MAX: u64 = 5;

/// Exact-match rate overall and on cells with true count in `[0, 5]`.
pub fn accuracy_metrics(true_db: &Histogram, guessed: &[u64]) -> Result<(f64, Option<f64>)> {
    let truth = true_db.counts();
    if truth.len() != guessed.len() {
        return Err(Error::arg(format!(
            "guess has {} cells, database has {}",
            guessed.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::arg("empty database"));
    }
    let (mut hits, mut small, mut small_hits) = (0usize, 0usize, 0usize);
    for (&t, &g) in truth.iter().zip(guessed) {
        hits += (t == g) as usize;
        if t <= SMALL_COUNT_MAX {
            small += 1;
            small_hits += (t == g) as usize;
        }
    }
    let overall = hits as f64 / truth.len() as f64;
    let small = (small > 0).then(|| small_hits as f64 / small as f64);
    Ok((overall, small))
}

#[cfg(feature = "parallel")]
fn par_count<F: Fn(u64) -> Result<bool> + Sync + Send>(n: u64, f: F) -> Result<u64> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(|i| f(i).map(u64::from)).sum()
}

#[cfg(not(feature = "parallel"))]
fn par_count<F: Fn(u64) -> Result<bool>>(n: u64, f: F) -> Result<u64> {
    (0..n).map(|i| f(i).map(u64::from)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{staircase_histogram, zipfian_histogram};
    use proptest::prelude::*;
    use crate::noise::Rng;

    #[test]
    fn fixed_threshold_blocks() {
        let db = Histogram::new(vec![0, 1, 2, 5, 5, 9]);
        let p = partition_at_threshold(&db, 0.5).unwrap();
        assert_eq!(p.blocks(), &[vec![0], vec![1], vec![2], vec![3, 4], vec![5]]);
        // larger(u) = {w : x_w - x_u >= 0.5}
        assert_eq!(p.larger(0).iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        assert_eq!(p.larger(3).iter().collect::<Vec<_>>(), vec![5]);
        assert!(p.larger(5).is_empty());
        assert!(p.ordering_holds(&db));
    }

    #[test]
    fn equal_counts_form_one_block() {
        let db = Histogram::new(vec![4; 7]);
        for theta in [-2.5, 0.5, 3.0] {
            let p = partition_at_threshold(&db, theta).unwrap();
            assert_eq!(p.blocks().len(), 1);
        }
        let p = partition_attack(&db, 1.0, 0.05, &mut Rng::new(0)).unwrap();
        assert_eq!(p.blocks(), &[(0..7).collect::<Vec<_>>()]);
    }

    #[test]
    fn attack_argument_errors() {
        let mut rng = Rng::new(0);
        assert!(partition_attack(&Histogram::new(vec![1]), 1.0, 0.05, &mut rng).is_err());
        let db = Histogram::new(vec![1, 2]);
        assert!(partition_attack(&db, 0.0, 0.05, &mut rng).is_err());
        assert!(partition_attack(&db, 1.0, 1.0, &mut rng).is_err());
        assert!(reconstruct(&db, 1.0, 0.05, 1.0, &mut rng).is_err());
    }

    #[test]
    fn threshold_uses_ceiling_of_natural_log() {
        assert_eq!(attack_threshold(1.0, 0.05), 3);
        assert_eq!(attack_threshold(0.5, 0.05), 6);
        assert_eq!(attack_threshold(0.05, 0.05), 60);
    }

    #[test]
    fn ordering_lemma_holds_mostly() {
        let counts: Vec<u64> = (0..40).map(|i| (i * 7 % 13) as u64).collect();
        let db = Histogram::new(counts);
        let rate = ordering_lemma_rate(&db, 1.0, 0.05, 1000, &Rng::new(4)).unwrap();
        assert!(rate >= 0.95, "rate {rate}");
    }

    #[test]
    fn theorem_check_preconditions() {
        let mut counts = vec![0, 1, 2, 4, 5, 6, 7, 8, 9, 10];
        let db = Histogram::new(counts.clone());
        let err = reconstruction_theorem_check(&db, 9, 1.0, 0.05, 10, &Rng::new(0)).unwrap_err();
        assert!(err.to_string().contains("S_3"), "{err}");

        counts.push(3);
        let db = Histogram::new(counts);
        // α = ⌈ln(1e6)⌉ = 14, 2α = 28 > 10
        assert!(reconstruction_theorem_check(&db, 10, 1.0, 1e-6, 10, &Rng::new(0)).is_err());

        let small = Histogram::new(vec![0, 1, 2, 3, 4, 5]);
        assert!(reconstruction_theorem_check(&small, 5, 1.0, 0.05, 10, &Rng::new(0)).is_err());
    }

    #[test]
    fn theorem_check_on_staircase() {
        let db = staircase_histogram(20, 10);
        let check = reconstruction_theorem_check(&db, 20, 1.0, 0.05, 200, &Rng::new(12)).unwrap();
        assert_eq!(check.alpha, 3);
        assert_eq!(check.m, 14);
        assert!(check.fraction >= 0.9, "{check:?}");
    }

    #[test]
    fn theorem_check_on_zipfian() {
        // the first seed whose Zipf draw supports level 30 is fixed by the
        // generator; scan deterministically
        let db = (0..)
            .map(|s| zipfian_histogram(4096, 60_000, 1.0, &mut Rng::new(s)).unwrap())
            .find(|db| (0..=30).all(|i| !db.level_set(i).is_empty()))
            .unwrap();
        let check = reconstruction_theorem_check(&db, 30, 1.0, 0.05, 50, &Rng::new(3)).unwrap();
        // 1 - δ with a 99% binomial margin for 50 trials
        let margin = 2.576 * (0.95f64 * 0.05 / 50.0).sqrt();
        assert!(check.fraction >= 0.95 - margin, "{check:?}");
    }

    #[test]
    fn accuracy_examples() {
        let db = Histogram::new(vec![0, 6, 7]);
        assert_eq!(accuracy_metrics(&db, &[0, 6, 7]).unwrap(), (1.0, Some(1.0)));
        assert_eq!(accuracy_metrics(&db, &[1, 7, 8]).unwrap(), (0.0, Some(0.0)));
        let (overall, small) = accuracy_metrics(&db, &[0, 6, 9]).unwrap();
        assert!((overall - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(small, Some(1.0));
        assert_eq!(accuracy_metrics(&Histogram::new(vec![9, 10]), &[9, 10]).unwrap().1, None);
        assert!(accuracy_metrics(&db, &[0, 6]).is_err());
    }

    #[test]
    fn reconstruct_is_exact_with_huge_budget() {
        // gaps of at least 2 so a noisy threshold just above 1 still separates counts
        let db = Histogram::new(vec![0, 2, 4, 10, 10, 18]);
        let exact = (0..100)
            .filter(|&s| {
                let r = reconstruct(&db, 1e4, 0.05, 0.5, &mut Rng::new(s)).unwrap();
                r.guessed_counts == db.counts() && r.overall_accuracy == 1.0
            })
            .count();
        assert!(exact >= 99, "{exact}");
    }

    #[test]
    fn adjacent_counts_merge_when_threshold_exceeds_one() {
        // θ = ⌈ln 20 / 5000⌉ = 1, so counts one apart separate only when θ̃ ≤ 1
        let db = Histogram::new(vec![0, 1, 2, 5, 5, 9]);
        let exact = (0..200)
            .filter(|&s| reconstruct(&db, 1e4, 0.05, 0.5, &mut Rng::new(s)).unwrap().guessed_counts == db.counts())
            .count();
        assert!((70..=130).contains(&exact), "{exact}");
    }

    #[test]
    fn reconstruct_reports_metadata() {
        let db = Histogram::new(vec![0, 3, 3, 8]);
        let mut rng = Rng::new(77);
        let r = reconstruct(&db, 2.0, 0.05, 0.5, &mut rng).unwrap();
        assert_eq!(r.trial_seed, 77);
        assert_eq!(r.epsilon_used, 2.0);
        assert_eq!(r.guessed_counts.len(), 4);
    }

    #[test]
    fn accuracy_drops_with_budget() {
        let db = zipfian_histogram(1024, 8000, 1.0, &mut Rng::new(5)).unwrap();
        let mean = |eps: f64| {
            (0..10)
                .map(|i| reconstruct(&db, eps, 0.05, 0.5, &mut Rng::new(100 + i)).unwrap().overall_accuracy)
                .sum::<f64>()
                / 10.0
        };
        assert!(mean(1.0) > mean(0.1));
    }

    fn arb_db() -> impl Strategy<Value = Histogram> {
        prop::collection::vec(0u64..12, 2..24).prop_map(Histogram::new)
    }

    proptest! {
        #[test]
        fn partition_invariants_hold(db in arb_db(), eps in 0.1f64..3.0, seed in any::<u64>()) {
            let p = partition_attack(&db, eps, 0.05, &mut Rng::new(seed)).unwrap();
            prop_assert!(p.check_invariants().is_ok());
            // level sets are never split
            let block_of = p.block_of();
            for level in 0..12 {
                let cells = db.level_set(level);
                prop_assert!(cells.windows(2).all(|w| block_of[w[0]] == block_of[w[1]]));
            }
        }

        #[test]
        fn fixed_threshold_keeps_equal_counts_together(db in arb_db(), theta in -5.0f64..8.0) {
            let p = partition_at_threshold(&db, theta).unwrap();
            let block_of = p.block_of();
            let c = db.counts();
            for u in 0..c.len() {
                for v in 0..c.len() {
                    if c[u] == c[v] {
                        prop_assert_eq!(block_of[u], block_of[v]);
                    }
                }
            }
        }

        #[test]
        fn reconstruct_never_negative_and_exact_in_limit(top in 1u64..8, extra in prop::collection::vec(0u64..8, 0..8), seed in any::<u64>()) {
            // even counts from 0 up to `2 * top`
            let mut counts: Vec<u64> = (0..=top).map(|c| 2 * c).collect();
            counts.extend(extra.into_iter().map(|e| 2 * (e % (top + 1))));
            let db = Histogram::new(counts);
            let r = reconstruct(&db, 1e5, 0.05, 0.5, &mut Rng::new(seed)).unwrap();
            prop_assert_eq!(&r.guessed_counts[..], db.counts());

            let noisy = reconstruct(&db, 0.05, 0.05, 0.5, &mut Rng::new(seed)).unwrap();
            prop_assert_eq!(noisy.guessed_counts.len(), db.domain_size());
        }
    }
}
