//! Conflict specifications: for each transaction, the set of preceding
//! transactions it is known to be independent of (its cSet), plus a
//! per-transaction completeness flag.
//!
//! Blocks where most pairs are independent would make literal cSet storage
//! quadratic, so the spec is stored as the complement: the per-transaction
//! *dependency* list. The cSet view (`is_independent_of`, `cset_len`) is what
//! callers program against; `DepSet::All` compresses the fully-dependent case.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::TxnIndex;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("transaction {txn}: cSet/dependency entry {entry} is not strictly below it")]
    EntryOutOfRange { txn: TxnIndex, entry: TxnIndex },
    #[error("transaction {txn}: dependency list is not sorted and deduplicated")]
    Unsorted { txn: TxnIndex },
    #[error("spec covers {have} transactions, block has {want}")]
    LengthMismatch { have: usize, want: usize },
}

/// Dependency set of one transaction: the complement of its cSet among
/// predecessors.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DepSet {
    /// Dependent on every predecessor (an empty cSet).
    #[serde(with = "all_literal")]
    All,
    /// Sorted, deduplicated list of predecessor indices.
    List(Vec<TxnIndex>),
}

mod all_literal {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str("all")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<(), D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "all" {
            Ok(())
        } else {
            Err(D::Error::custom("expected \"all\""))
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
struct TxnEntry {
    deps: DepSet,
    complete: bool,
}

/// Per-block conflict specification.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ConflictSpec {
    txns: Vec<TxnEntry>,
}

impl ConflictSpec {
    /// The trivial sound spec: every transaction depends on all predecessors
    /// (all cSets empty). The empty cSet lists every independent predecessor
    /// there is, so entries are complete.
    pub fn conservative(n: usize) -> Self {
        ConflictSpec {
            txns: (0..n)
                .map(|_| TxnEntry { deps: DepSet::All, complete: true })
                .collect(),
        }
    }

    /// Full cSets: every pair independent.
    pub fn fully_independent(n: usize) -> Self {
        ConflictSpec {
            txns: (0..n)
                .map(|_| TxnEntry { deps: DepSet::List(Vec::new()), complete: true })
                .collect(),
        }
    }

    /// Builds a spec from per-transaction dependency sets.
    pub fn from_deps(deps: Vec<(DepSet, bool)>) -> Result<Self, SpecError> {
        let spec = ConflictSpec {
            txns: deps
                .into_iter()
                .map(|(deps, complete)| TxnEntry { deps, complete })
                .collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec from explicit cSets (`csets[k]` = predecessors k is
    /// independent of). Convenient for small hand-written specs.
    pub fn from_csets(csets: Vec<(Vec<TxnIndex>, bool)>) -> Result<Self, SpecError> {
        let n = csets.len();
        let mut txns = Vec::with_capacity(n);
        for (k, (cset, complete)) in csets.into_iter().enumerate() {
            let k = k as TxnIndex;
            let mut independent = vec![false; k as usize];
            for i in cset {
                if i >= k {
                    return Err(SpecError::EntryOutOfRange { txn: k, entry: i });
                }
                independent[i as usize] = true;
            }
            let deps: Vec<TxnIndex> = (0..k).filter(|&i| !independent[i as usize]).collect();
            let deps = if deps.len() == k as usize && k > 0 {
                DepSet::All
            } else {
                DepSet::List(deps)
            };
            txns.push(TxnEntry { deps, complete });
        }
        Ok(ConflictSpec { txns })
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        for (k, entry) in self.txns.iter().enumerate() {
            let k = k as TxnIndex;
            if let DepSet::List(list) = &entry.deps {
                let mut prev: Option<TxnIndex> = None;
                for &i in list {
                    if i >= k {
                        return Err(SpecError::EntryOutOfRange { txn: k, entry: i });
                    }
                    if prev.is_some_and(|p| p >= i) {
                        return Err(SpecError::Unsorted { txn: k });
                    }
                    prev = Some(i);
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.txns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.txns.is_empty()
    }

    /// Whether `i ∈ cset[k]`, i.e. k is known independent of i. Requires i < k.
    pub fn is_independent_of(&self, k: TxnIndex, i: TxnIndex) -> bool {
        debug_assert!(i < k);
        match &self.txns[k as usize].deps {
            DepSet::All => false,
            DepSet::List(list) => list.binary_search(&i).is_err(),
        }
    }

    /// |cset[k]|
    pub fn cset_len(&self, k: TxnIndex) -> usize {
        k as usize - self.deps_len(k)
    }

    /// |cSetComp(k)| = number of predecessors k must be treated as dependent on.
    pub fn deps_len(&self, k: TxnIndex) -> usize {
        match &self.txns[k as usize].deps {
            DepSet::All => k as usize,
            DepSet::List(list) => list.len(),
        }
    }

    /// Calls `f` for every i ∈ cSetComp(k), ascending.
    pub fn for_each_dep(&self, k: TxnIndex, mut f: impl FnMut(TxnIndex)) {
        match &self.txns[k as usize].deps {
            DepSet::All => (0..k).for_each(f),
            DepSet::List(list) => list.iter().copied().for_each(&mut f),
        }
    }

    pub fn complete(&self, k: TxnIndex) -> bool {
        self.txns[k as usize].complete
    }

    /// Whether cset[k] covers every predecessor.
    pub fn covers_all_predecessors(&self, k: TxnIndex) -> bool {
        self.deps_len(k) == 0
    }

    /// Σ|cset| / (n(n−1)/2): the share of predecessor pairs proven
    /// independent. Defined as 1.0 for n < 2.
    pub fn tuple_fraction(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 1.0;
        }
        let total_pairs = n as f64 * (n as f64 - 1.0) / 2.0;
        let independent: usize = (0..n as TxnIndex).map(|k| self.cset_len(k)).sum();
        independent as f64 / total_pairs
    }

    /// Total number of dependency tuples, Σ|cSetComp|; the "specification
    /// size" the spec subcommand reports.
    pub fn total_deps(&self) -> usize {
        (0..self.len() as TxnIndex).map(|k| self.deps_len(k)).sum()
    }
}
