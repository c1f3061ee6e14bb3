//! Execution reports, executor errors and the options shared by all
//! executors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mvmemory::MvError;
use crate::spec::SpecError;
use crate::types::{FinalState, TxnIndex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Memory(#[from] MvError),
    #[error("scheduler stalled with {committed} of {total} transactions committed: cycle or unsound indegree")]
    Stalled { committed: usize, total: usize },
    #[error("transaction {txn} exceeded {cap} incarnations: livelock")]
    Livelock { txn: TxnIndex, cap: u32 },
    #[error("indegree underflow at transaction {txn}")]
    IndegreeUnderflow { txn: TxnIndex },
    #[error("coinbase credit overflowed")]
    CoinbaseOverflow,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Sequential,
    Dag,
    Optimistic,
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EngineKind::Sequential => write!(f, "seq"),
            EngineKind::Dag => write!(f, "dag"),
            EngineKind::Optimistic => write!(f, "opt"),
        }
    }
}

/// Final state plus exact counters for one block execution.
#[derive(Clone, Debug)]
pub struct ExecutionReport {
    pub engine: EngineKind,
    pub final_state: FinalState,
    /// Validation failures that forced a re-execution.
    pub aborts: u64,
    /// Read-set validations actually performed (skipped ones not counted).
    pub validations: u64,
    /// Times a transaction suspended on an uncommitted dependency.
    pub dependency_waits: u64,
    /// VM runs beyond the first per transaction.
    pub re_executions: u64,
    /// Independence claims contradicted by the debug validator.
    pub spec_violations: u64,
    pub wall_ms: f64,
    pub threads: usize,
}

impl ExecutionReport {
    pub fn new(engine: EngineKind, final_state: FinalState, threads: usize) -> Self {
        ExecutionReport {
            engine,
            final_state,
            aborts: 0,
            validations: 0,
            dependency_waits: 0,
            re_executions: 0,
            spec_violations: 0,
            wall_ms: 0.0,
            threads,
        }
    }

    pub fn state_hash(&self) -> String {
        crate::types::state_hash(&self.final_state)
    }
}

/// Knobs shared by the executors. `Default` gives the standard benchmark
/// configuration.
#[derive(Clone, Debug)]
pub struct ExecOptions {
    pub threads: usize,
    /// Defer per-transaction fee credits to one post-block coinbase update.
    /// With this off, every paying transaction write-locks the coinbase
    /// balance, which chains the whole block.
    pub lazy_coinbase: bool,
    /// Inject randomized yields at shared-memory touch points. Used by the
    /// schedule-perturbation stress suite.
    pub chaos_seed: Option<u64>,
    /// Incarnation cap per transaction before the optimistic executor gives
    /// up and reports a livelock.
    pub livelock_cap: u32,
    /// Re-validate transactions the spec claims independent and count
    /// violations instead of trusting the claim.
    pub debug_validate_independent: bool,
    /// Drop DAG edges implied by longer paths before executing. Scheduling
    /// semantics are unchanged; only the decrement fan-out shrinks.
    pub dag_transitive_reduction: bool,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            threads: 1,
            lazy_coinbase: true,
            chaos_seed: None,
            livelock_cap: 1000,
            debug_validate_independent: false,
            dag_transitive_reduction: false,
        }
    }
}

impl ExecOptions {
    pub fn with_threads(threads: usize) -> Self {
        ExecOptions { threads: threads.max(1), ..Default::default() }
    }
}
