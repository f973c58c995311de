//! Databases as count histograms over a finite domain, linear queries on
//! them, and the neighboring relation.

use std::fmt;

use crate::error::{Error, Result};

/// A database represented as non-negative counts over `k` domain cells.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Histogram {
    counts: Vec<u64>,
}

impl Histogram {
    pub fn new(counts: Vec<u64>) -> Self {
        Histogram { counts }
    }

    /// Builds a histogram from signed counts, rejecting negatives.
    pub fn from_signed(counts: &[i64]) -> Result<Self> {
        let counts = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                u64::try_from(c).map_err(|_| Error::arg(format!("cell {i} has negative count {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Histogram { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn domain_size(&self) -> usize {
        self.counts.len()
    }

    /// Total number of entries `n`.
    pub fn scale(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, index: usize) -> Result<u64> {
        self.counts.get(index).copied().ok_or(Error::Domain {
            index,
            domain_size: self.counts.len(),
        })
    }

    /// Indices of the cells whose count is exactly `level` (the level set `S_level`).
    pub fn level_set(&self, level: u64) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| (c == level).then_some(i))
            .collect()
    }

    pub fn l1_distance(&self, other: &Histogram) -> Option<u64> {
        if self.domain_size() != other.domain_size() {
            return None;
        }
        Some(
            self.counts
                .iter()
                .zip(&other.counts)
                .map(|(&a, &b)| a.abs_diff(b))
                .sum(),
        )
    }
}

impl fmt::Debug for Histogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Histogram").field(&self.counts).finish()
    }
}

impl From<Vec<u64>> for Histogram {
    fn from(counts: Vec<u64>) -> Self {
        Histogram::new(counts)
    }
}

/// True iff both histograms share a domain and differ by exactly one entry.
pub fn are_neighbors(a: &Histogram, b: &Histogram) -> bool {
    a.l1_distance(b) == Some(1)
}

/// A pair of neighboring databases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborPair {
    left: Histogram,
    right: Histogram,
}

impl NeighborPair {
    pub fn new(left: Histogram, right: Histogram) -> Result<Self> {
        if left.domain_size() != right.domain_size() {
            return Err(Error::arg(format!(
                "neighbor pair domain sizes differ ({} vs {})",
                left.domain_size(),
                right.domain_size()
            )));
        }
        if !are_neighbors(&left, &right) {
            return Err(Error::arg(
                "histograms are not neighbors: L1 distance must be exactly 1",
            ));
        }
        Ok(NeighborPair { left, right })
    }

    pub fn left(&self) -> &Histogram {
        &self.left
    }

    pub fn right(&self) -> &Histogram {
        &self.right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryKind {
    /// `x[i]`
    Count(usize),
    /// `x[a] - x[b]`, with `a != b`
    Diff(usize, usize),
}

/// A linear query over a histogram together with its global sensitivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Query {
    kind: QueryKind,
    sensitivity: f64,
}

impl Query {
    pub fn count(index: usize) -> Self {
        Query {
            kind: QueryKind::Count(index),
            sensitivity: 1.0,
        }
    }

    pub fn diff(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::arg(format!("difference query needs two distinct cells, got ({a}, {a})")));
        }
        Ok(Query {
            kind: QueryKind::Diff(a, b),
            sensitivity: 1.0,
        })
    }

    pub fn kind(&self) -> QueryKind {
        self.kind
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn evaluate(&self, db: &Histogram) -> Result<f64> {
        match self.kind {
            QueryKind::Count(i) => Ok(db.count(i)? as f64),
            QueryKind::Diff(a, b) => Ok(db.count(a)? as f64 - db.count(b)? as f64),
        }
    }
}

pub fn evaluate(query: &Query, db: &Histogram) -> Result<f64> {
    query.evaluate(db)
}

/// The `Δ` bound for a query stream: the largest single-query sensitivity.
///
/// Threshold mechanisms scale their noise to this maximum. The batched
/// Laplace mechanism instead takes a summed sensitivity explicitly.
pub fn global_sensitivity(queries: &[Query]) -> Result<f64> {
    queries
        .iter()
        .map(Query::sensitivity)
        .reduce(f64::max)
        .ok_or_else(|| Error::arg("global sensitivity of an empty query set"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn evaluate_examples() {
        let db = Histogram::new(vec![3, 5]);
        assert_eq!(Query::count(0).evaluate(&db).unwrap(), 3.0);
        assert_eq!(Query::diff(1, 0).unwrap().evaluate(&db).unwrap(), 2.0);
        assert!(Query::diff(0, 0).is_err());
    }

    #[test]
    fn evaluate_out_of_range() {
        let db = Histogram::new(vec![3, 5]);
        assert!(matches!(
            Query::count(2).evaluate(&db),
            Err(Error::Domain { index: 2, domain_size: 2 })
        ));
        assert!(Query::diff(0, 7).unwrap().evaluate(&db).is_err());
    }

    #[test]
    fn neighbor_examples() {
        let h = |v: Vec<u64>| Histogram::new(v);
        assert!(are_neighbors(&h(vec![1, 2]), &h(vec![1, 3])));
        assert!(!are_neighbors(&h(vec![1, 2]), &h(vec![1, 2])));
        assert!(!are_neighbors(&h(vec![1, 2]), &h(vec![0, 3])));
        assert!(!are_neighbors(&h(vec![1, 2]), &h(vec![1, 2, 0])));
        assert!(NeighborPair::new(h(vec![0, 0]), h(vec![0, 2])).is_err());
    }

    #[test]
    fn sensitivity_examples() {
        assert_eq!(global_sensitivity(&[Query::count(0)]).unwrap(), 1.0);
        let diffs = [Query::diff(0, 1).unwrap(), Query::diff(2, 3).unwrap()];
        assert_eq!(global_sensitivity(&diffs).unwrap(), 1.0);
        let mixed = [Query::count(0), Query::diff(1, 2).unwrap()];
        assert_eq!(global_sensitivity(&mixed).unwrap(), 1.0);
        assert!(global_sensitivity(&[]).is_err());
    }

    #[test]
    fn signed_constructor_rejects_negatives() {
        assert!(Histogram::from_signed(&[1, -1]).is_err());
        assert_eq!(Histogram::from_signed(&[1, 4]).unwrap().counts(), &[1, 4]);
    }

    fn small_db() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(0u64..6, 2..6)
    }

    fn queries_for(k: usize) -> Vec<Query> {
        let mut qs: Vec<Query> = (0..k).map(Query::count).collect();
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    qs.push(Query::diff(a, b).unwrap());
                }
            }
        }
        qs
    }

    proptest! {
        #[test]
        fn sensitivity_bounds_every_neighbor(counts in small_db(), cell in 0usize..6, add in any::<bool>()) {
            let cell = cell % counts.len();
            let mut other = counts.clone();
            if add {
                other[cell] += 1;
            } else if other[cell] > 0 {
                other[cell] -= 1;
            } else {
                other[cell] += 1;
            }
            let d1 = Histogram::new(counts);
            let d2 = Histogram::new(other);
            prop_assert!(are_neighbors(&d1, &d2));
            prop_assert!(are_neighbors(&d2, &d1));
            for q in queries_for(d1.domain_size()) {
                let gap = (q.evaluate(&d1).unwrap() - q.evaluate(&d2).unwrap()).abs();
                prop_assert!(gap <= q.sensitivity());
            }
        }

        #[test]
        fn diff_is_antisymmetric(counts in small_db()) {
            let db = Histogram::new(counts);
            let k = db.domain_size();
            for a in 0..k {
                for b in 0..k {
                    if a == b { continue; }
                    let ab = Query::diff(a, b).unwrap().evaluate(&db).unwrap();
                    let ba = Query::diff(b, a).unwrap().evaluate(&db).unwrap();
                    prop_assert_eq!(ab, -ba);
                }
            }
        }

        #[test]
        fn neighbor_relation_is_symmetric(a in small_db(), b in small_db()) {
            let a = Histogram::new(a);
            let b = Histogram::new(b);
            prop_assert_eq!(are_neighbors(&a, &b), are_neighbors(&b, &a));
        }
    }
}
