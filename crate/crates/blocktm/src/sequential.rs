//! Sequential baseline executor and ground-truth oracle: runs the block in
//! preset order against a plain single-version store. Its final state defines
//! correctness for every parallel executor.

use std::time::Instant;

use crate::registry::ContractRegistry;
use crate::report::{EngineKind, ExecOptions, ExecutionReport};
use crate::types::{BaseState, Block, StateKey, Value};
use crate::vm::{self, VmEnv, VmOutcome};

/// Output of one sequential run. `outcomes[k].access` are the exact access
/// sets of transaction k.
pub struct SeqRun {
    pub report: ExecutionReport,
    pub outcomes: Vec<VmOutcome>,
}

pub fn run_sequential(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    opts: &ExecOptions,
) -> SeqRun {
    run_inner(block, base, registry, opts, false)
}

/// Sequential run through the instrumented VM path; used when the recorded
/// access sets serve as ground truth for analyzer checks.
pub fn run_sequential_tracked(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    opts: &ExecOptions,
) -> SeqRun {
    run_inner(block, base, registry, opts, true)
}

fn run_inner(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    opts: &ExecOptions,
    tracked: bool,
) -> SeqRun {
    let env = VmEnv {
        registry,
        coinbase: block.coinbase,
        lazy_coinbase: opts.lazy_coinbase,
    };
    let start = Instant::now();
    let mut state = base.clone();
    let mut outcomes = Vec::with_capacity(block.len());
    let mut fees: Value = 0;
    for txn in &block.transactions {
        let outcome = if tracked {
            vm::execute_with_tracking(txn, &mut state, &env)
        } else {
            vm::execute(txn, &mut state, &env)
        }
        .expect("sequential view never interrupts a read");
        fees += outcome.fee_paid;
        outcomes.push(outcome);
    }
    if opts.lazy_coinbase && fees > 0 {
        let slot = state.entry(StateKey::balance(block.coinbase)).or_insert(0);
        *slot = slot.checked_add(fees).expect("coinbase credit overflowed");
    }
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut report = ExecutionReport::new(
        EngineKind::Sequential,
        state.into_iter().collect(),
        1,
    );
    report.wall_ms = wall_ms;
    SeqRun { report, outcomes }
}
