//! Deterministic parallel execution of ordered transaction blocks.
//!
//! A block fixes a total order over its transactions; every engine here must
//! produce exactly the state a sequential run in that order produces. What
//! varies is how much parallelism each engine extracts from an a priori
//! *conflict specification*: per transaction, the set of predecessors it is
//! known to be independent of.
//!
//! - [`sequential`]: the baseline and the correctness oracle.
//! - [`dag`]: builds a dependency DAG from the spec and runs transactions as
//!   their indegrees clear. Never aborts, never validates.
//! - [`optimistic`]: Block-STM-style speculative execution; the spec lets it
//!   skip read-set validation for provably independent transactions.
//! - [`adaptive`]: picks sequential or parallel execution per block from a
//!   cheap conflict metric.
//! - [`analyzer`]: derives specs (weak payload-based mode, strong
//!   call-graph/opcode mode, and the exact ground truth from a tracked run).
//! - [`workload`]: deterministic synthetic benchmark blocks.

pub mod adaptive;
pub mod analyzer;
pub mod chaos;
pub mod corpus;
pub mod dag;
pub mod mvmemory;
pub mod optimistic;
pub mod registry;
pub mod report;
pub mod sequential;
pub mod spec;
pub mod types;
pub mod vm;
pub mod wire;
pub mod workload;

pub use report::{EngineKind, ExecError, ExecOptions, ExecutionReport};
pub use spec::{ConflictSpec, DepSet, SpecError};
pub use types::{
    conflict, read_from_conflict, state_hash, AccessSets, Address, BaseState, Block, FinalState,
    FnSig, Payload, StateKey, Transaction, TxnIndex, Value,
};
