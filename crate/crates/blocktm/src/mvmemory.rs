//! Shared multi-version memory: per-key ordered version lists tagged by
//! writer index, with estimate flags and largest-preceding-version reads.

use dashmap::DashMap;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::types::{BaseState, FinalState, StateKey, TxnIndex, Value};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MvError {
    #[error("no version of {key:?} written by transaction {txn}")]
    MissingEntry { txn: TxnIndex, key: StateKey },
    #[error("estimate left behind by transaction {txn} on {key:?}; execution incomplete")]
    EstimateRemaining { txn: TxnIndex, key: StateKey },
}

/// Where a read was served from.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VersionSource {
    /// Pre-block state.
    Base,
    /// The shared-memory version written by this transaction.
    Txn(TxnIndex),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ReadResult {
    pub value: Value,
    pub source: VersionSource,
    pub estimate: bool,
}

#[derive(Clone, Copy, Debug)]
struct VersionEntry {
    value: Value,
    estimate: bool,
}

/// Thread-safe multi-version store. Keys are sharded by a concurrent map;
/// within a key, versions are ordered by writer index. At most one entry per
/// (key, writer): re-writes by the same writer replace in place.
#[derive(Default)]
pub struct MvMemory {
    map: DashMap<StateKey, BTreeMap<TxnIndex, VersionEntry>>,
}

impl MvMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads the entry with the highest writer index strictly below `k`;
    /// falls back to the base value (0 for absent keys). A transaction never
    /// observes its own shared-memory version through this path.
    pub fn read_lvp(&self, k: TxnIndex, key: &StateKey, base: &BaseState) -> ReadResult {
        if let Some(versions) = self.map.get(key) {
            if let Some((&writer, entry)) = versions.range(..k).next_back() {
                return ReadResult {
                    value: entry.value,
                    source: VersionSource::Txn(writer),
                    estimate: entry.estimate,
                };
            }
        }
        ReadResult {
            value: base.get(key).copied().unwrap_or(0),
            source: VersionSource::Base,
            estimate: false,
        }
    }

    /// Inserts or replaces the version written by `k`, clearing any estimate
    /// flag.
    pub fn write_version(&self, k: TxnIndex, key: StateKey, value: Value) {
        self.map
            .entry(key)
            .or_default()
            .insert(k, VersionEntry { value, estimate: false });
    }

    /// Drops the version written by `k`, if any. Used when a re-execution no
    /// longer writes a previously written key.
    pub fn remove_version(&self, k: TxnIndex, key: &StateKey) {
        if let Some(mut versions) = self.map.get_mut(key) {
            versions.remove(&k);
        }
    }

    /// Flags the versions written by `k` as estimates; values are retained so
    /// readers can still identify the writer they would depend on.
    pub fn mark_estimates<'a>(
        &self,
        k: TxnIndex,
        keys: impl IntoIterator<Item = &'a StateKey>,
    ) -> Result<(), MvError> {
        for key in keys {
            let mut versions = self
                .map
                .get_mut(key)
                .ok_or(MvError::MissingEntry { txn: k, key: *key })?;
            let entry = versions
                .get_mut(&k)
                .ok_or(MvError::MissingEntry { txn: k, key: *key })?;
            entry.estimate = true;
        }
        Ok(())
    }

    /// Final state once every transaction has committed: per key the
    /// highest-writer version, else the base value. Any estimate left behind
    /// means the execution never completed and is an error.
    ///
    /// Requires quiescence; the caller guarantees all workers have stopped.
    pub fn snapshot_final(&self, base: &BaseState) -> Result<FinalState, MvError> {
        let mut state: FinalState = base
            .iter()
            .map(|(k, v)| (*k, *v))
            .collect();
        for item in self.map.iter() {
            let (key, versions) = item.pair();
            for (&writer, entry) in versions.iter() {
                if entry.estimate {
                    return Err(MvError::EstimateRemaining { txn: writer, key: *key });
                }
            }
            if let Some((_, entry)) = versions.iter().next_back() {
                state.insert(*key, entry.value);
            }
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Address;
    use std::sync::Arc;

    fn key(n: u64) -> StateKey {
        StateKey::slot(Address(0xc0), n)
    }

    #[test]
    fn read_lvp_strict_predecessor() {
        let mv = MvMemory::new();
        let base = BaseState::new();
        mv.write_version(1, key(0), 5);
        mv.write_version(3, key(0), 7);

        let r = mv.read_lvp(3, &key(0), &base);
        assert_eq!((r.value, r.source, r.estimate), (5, VersionSource::Txn(1), false));

        let r = mv.read_lvp(4, &key(0), &base);
        assert_eq!((r.value, r.source, r.estimate), (7, VersionSource::Txn(3), false));
    }

    #[test]
    fn read_lvp_falls_back_to_base() {
        let mv = MvMemory::new();
        let mut base = BaseState::new();
        base.insert(key(0), 42);
        let r = mv.read_lvp(0, &key(0), &base);
        assert_eq!((r.value, r.source, r.estimate), (42, VersionSource::Base, false));
        // Absent keys read as zero.
        let r = mv.read_lvp(5, &key(9), &base);
        assert_eq!(r.value, 0);
    }

    #[test]
    fn write_version_replaces_in_place() {
        let mv = MvMemory::new();
        let base = BaseState::new();
        mv.write_version(2, key(0), 9);
        assert_eq!(mv.read_lvp(3, &key(0), &base).value, 9);
        mv.write_version(2, key(0), 11);
        let r = mv.read_lvp(3, &key(0), &base);
        assert_eq!((r.value, r.source), (11, VersionSource::Txn(2)));
        assert_eq!(mv.map.get(&key(0)).unwrap().len(), 1);
    }

    #[test]
    fn own_version_is_invisible() {
        let mv = MvMemory::new();
        let base = BaseState::new();
        mv.write_version(1, key(0), 10);
        mv.write_version(2, key(0), 20);
        let r = mv.read_lvp(2, &key(0), &base);
        assert_eq!((r.value, r.source), (10, VersionSource::Txn(1)));
    }

    #[test]
    fn mark_estimates_flags_and_rewrite_clears() {
        let mv = MvMemory::new();
        let base = BaseState::new();
        mv.write_version(2, key(0), 9);
        mv.mark_estimates(2, [&key(0)]).unwrap();
        assert!(mv.read_lvp(3, &key(0), &base).estimate);

        mv.write_version(2, key(0), 12);
        let r = mv.read_lvp(3, &key(0), &base);
        assert!(!r.estimate);
        assert_eq!(r.value, 12);
    }

    #[test]
    fn mark_estimates_empty_set_is_noop() {
        let mv = MvMemory::new();
        mv.mark_estimates(7, std::iter::empty()).unwrap();
    }

    #[test]
    fn mark_estimates_missing_entry_is_internal_error() {
        let mv = MvMemory::new();
        let err = mv.mark_estimates(2, [&key(0)]).unwrap_err();
        assert_eq!(err, MvError::MissingEntry { txn: 2, key: key(0) });
    }

    #[test]
    fn snapshot_highest_writer_wins() {
        let mv = MvMemory::new();
        let mut base = BaseState::new();
        base.insert(key(1), 100);
        mv.write_version(1, key(0), 5);
        mv.write_version(3, key(0), 7);
        let snap = mv.snapshot_final(&base).unwrap();
        assert_eq!(snap[&key(0)], 7);
        // Untouched key keeps its base value.
        assert_eq!(snap[&key(1)], 100);
    }

    #[test]
    fn snapshot_section_skipped_by_reverted_writer() {
        // A reverted T2 commits an empty write set, so T1's version survives.
        let mv = MvMemory::new();
        let base = BaseState::new();
        mv.write_version(1, key(0), 5);
        let snap = mv.snapshot_final(&base).unwrap();
        assert_eq!(snap[&key(0)], 5);
    }

    #[test]
    fn snapshot_rejects_remaining_estimates() {
        let mv = MvMemory::new();
        let base = BaseState::new();
        mv.write_version(1, key(0), 5);
        mv.mark_estimates(1, [&key(0)]).unwrap();
        assert_eq!(
            mv.snapshot_final(&base).unwrap_err(),
            MvError::EstimateRemaining { txn: 1, key: key(0) }
        );
    }

    #[test]
    fn read_lvp_source_monotone_in_reader_index() {
        let mv = MvMemory::new();
        let base = BaseState::new();
        for writer in [2u32, 5, 9, 13] {
            mv.write_version(writer, key(0), writer as Value);
        }
        let mut last = -1i64;
        for k in 0..16u32 {
            let r = mv.read_lvp(k, &key(0), &base);
            let source = match r.source {
                VersionSource::Base => -1,
                VersionSource::Txn(i) => i as i64,
            };
            assert!(source >= last, "source regressed at k={k}");
            last = source;
        }
    }

    #[test]
    fn concurrent_readers_never_observe_torn_entries() {
        let mv = Arc::new(MvMemory::new());
        let base = Arc::new(BaseState::new());
        let writers: Vec<_> = (0..4u32)
            .map(|w| {
                let mv = Arc::clone(&mv);
                std::thread::spawn(move || {
                    for round in 0..500u64 {
                        mv.write_version(w, key(0), (w as Value) * 10_000 + round as Value);
                    }
                })
            })
            .collect();
        let readers: Vec<_> = (0..4)
            .map(|_| {
                let mv = Arc::clone(&mv);
                let base = Arc::clone(&base);
                std::thread::spawn(move || {
                    for k in 0..2000u32 {
                        let r = mv.read_lvp(k % 6, &key(0), &base);
                        if let VersionSource::Txn(w) = r.source {
                            assert!(w < k % 6);
                            assert_eq!(r.value / 10_000, w as Value);
                        }
                    }
                })
            })
            .collect();
        for h in writers.into_iter().chain(readers) {
            h.join().unwrap();
        }
    }
}
