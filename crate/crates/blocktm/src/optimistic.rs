//! Optimistic executor: Block-STM-style speculative execution with
//! estimate-based dependency waiting, read-set validation against the
//! multi-version store, and validation skipping for transactions the
//! specification proves independent of all predecessors.
//!
//! Scheduling follows the classic two-cursor design: an execution index and a
//! validation index sweep the block; the validation index is dropped back
//! whenever a re-execution publishes new writes. With an empty specification
//! the engine degrades to plain optimistic execution.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::chaos::Chaos;
use crate::mvmemory::{MvMemory, VersionSource};
use crate::registry::ContractRegistry;
use crate::report::{EngineKind, ExecError, ExecOptions, ExecutionReport};
use crate::spec::ConflictSpec;
use crate::types::{BaseState, Block, StateKey, TxnIndex, Value};
use crate::vm::{self, ReadInterrupt, StorageView, VmEnv};

/// Transactions whose cSet covers every predecessor and is flagged complete.
/// These execute without validation; membership is fixed for the block.
pub struct IndependentSet {
    bits: Vec<bool>,
    count: usize,
}

impl IndependentSet {
    pub fn contains(&self, k: TxnIndex) -> bool {
        self.bits.get(k as usize).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Exactly the indices whose cSet covers every predecessor and whose entry is
/// complete. Transactions beyond the spec's coverage are treated as maximally
/// dependent.
pub fn compute_independent(n: usize, spec: &ConflictSpec) -> IndependentSet {
    let mut bits = vec![false; n];
    let mut count = 0;
    for k in 0..n.min(spec.len()) as TxnIndex {
        if spec.covers_all_predecessors(k) && spec.complete(k) {
            bits[k as usize] = true;
            count += 1;
        }
    }
    IndependentSet { bits, count }
}

type Version = (TxnIndex, u32);

enum Task {
    Execution(Version),
    Validation(Version),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Phase {
    Ready,
    Executing,
    Suspended,
    Executed,
    Aborting,
}

struct TxnState {
    incarnation: u32,
    phase: Phase,
}

#[derive(Clone, Copy)]
struct ReadRecord {
    key: StateKey,
    source: VersionSource,
    value: Value,
}

/// Per-transaction bookkeeping written at publish time.
#[derive(Default)]
struct TxnSlot {
    last_written: Vec<StateKey>,
    reads: Vec<ReadRecord>,
    fee: Value,
}

struct Scheduler {
    n: usize,
    execution_idx: AtomicUsize,
    validation_idx: AtomicUsize,
    decrease_cnt: AtomicUsize,
    num_active: AtomicUsize,
    done: AtomicBool,
    status: Vec<Mutex<TxnState>>,
    dependency: Vec<Mutex<Vec<TxnIndex>>>,
    chaos: Chaos,
}

impl Scheduler {
    fn new(n: usize, chaos: Chaos) -> Self {
        Scheduler {
            n,
            execution_idx: AtomicUsize::new(0),
            validation_idx: AtomicUsize::new(0),
            decrease_cnt: AtomicUsize::new(0),
            num_active: AtomicUsize::new(0),
            done: AtomicBool::new(false),
            status: (0..n)
                .map(|_| Mutex::new(TxnState { incarnation: 0, phase: Phase::Ready }))
                .collect(),
            dependency: (0..n).map(|_| Mutex::new(Vec::new())).collect(),
            chaos,
        }
    }

    fn is_done(&self) -> bool {
        self.done.load(Ordering::SeqCst)
    }

    fn check_done(&self) {
        let observed = self.decrease_cnt.load(Ordering::SeqCst);
        let exec = self.execution_idx.load(Ordering::SeqCst);
        let valid = self.validation_idx.load(Ordering::SeqCst);
        let active = self.num_active.load(Ordering::SeqCst);
        if exec.min(valid) >= self.n
            && active == 0
            && self.decrease_cnt.load(Ordering::SeqCst) == observed
        {
            self.done.store(true, Ordering::SeqCst);
        }
    }

    fn decrease_execution_idx(&self, to: usize) {
        self.execution_idx.fetch_min(to, Ordering::SeqCst);
        self.decrease_cnt.fetch_add(1, Ordering::SeqCst);
    }

    fn decrease_validation_idx(&self, to: usize) {
        self.validation_idx.fetch_min(to, Ordering::SeqCst);
        self.decrease_cnt.fetch_add(1, Ordering::SeqCst);
    }

    fn retire_task(&self) {
        self.num_active.fetch_sub(1, Ordering::SeqCst);
    }

    /// Ready -> Executing, claiming the task slot the caller already holds.
    /// Retires the slot when the transaction is not dispatchable.
    fn try_incarnate(&self, idx: usize) -> Option<Version> {
        if idx < self.n {
            self.chaos.touch();
            let mut st = self.status[idx].lock().unwrap();
            if st.phase == Phase::Ready {
                st.phase = Phase::Executing;
                return Some((idx as TxnIndex, st.incarnation));
            }
        }
        self.retire_task();
        None
    }

    fn next_version_to_execute(&self) -> Option<Task> {
        if self.execution_idx.load(Ordering::SeqCst) >= self.n {
            self.check_done();
            return None;
        }
        self.num_active.fetch_add(1, Ordering::SeqCst);
        let idx = self.execution_idx.fetch_add(1, Ordering::SeqCst);
        self.try_incarnate(idx).map(Task::Execution)
    }

    fn next_version_to_validate(&self) -> Option<Task> {
        if self.validation_idx.load(Ordering::SeqCst) >= self.n {
            self.check_done();
            return None;
        }
        self.num_active.fetch_add(1, Ordering::SeqCst);
        let idx = self.validation_idx.fetch_add(1, Ordering::SeqCst);
        if idx < self.n {
            self.chaos.touch();
            let st = self.status[idx].lock().unwrap();
            if st.phase == Phase::Executed {
                return Some(Task::Validation((idx as TxnIndex, st.incarnation)));
            }
        }
        self.retire_task();
        None
    }

    fn next_task(&self) -> Option<Task> {
        if self.validation_idx.load(Ordering::SeqCst) < self.execution_idx.load(Ordering::SeqCst) {
            self.next_version_to_validate()
        } else {
            self.next_version_to_execute()
        }
    }

    /// Registers `idx` to be resumed once `blocking` publishes. Returns false
    /// if `blocking` published in the meantime, in which case the caller
    /// simply re-reads. The dependency lock closes the register/publish race.
    fn add_dependency(&self, idx: TxnIndex, blocking: TxnIndex) -> bool {
        self.chaos.touch();
        let mut deps = self.dependency[blocking as usize].lock().unwrap();
        if self.status[blocking as usize].lock().unwrap().phase == Phase::Executed {
            return false;
        }
        {
            let mut st = self.status[idx as usize].lock().unwrap();
            debug_assert_eq!(st.phase, Phase::Executing);
            st.phase = Phase::Suspended;
        }
        deps.push(idx);
        true
    }

    /// Publish transition plus wakeups. Returns a follow-up validation task
    /// for the same transaction when nothing above it needs re-validation.
    fn finish_execution(&self, idx: TxnIndex, incarnation: u32, wrote_new: bool) -> Option<Task> {
        self.chaos.touch();
        {
            let mut st = self.status[idx as usize].lock().unwrap();
            debug_assert_eq!(st.phase, Phase::Executing);
            debug_assert_eq!(st.incarnation, incarnation);
            st.phase = Phase::Executed;
        }
        let resumed = std::mem::take(&mut *self.dependency[idx as usize].lock().unwrap());
        if !resumed.is_empty() {
            let mut min_dep = TxnIndex::MAX;
            for dep in resumed {
                let mut st = self.status[dep as usize].lock().unwrap();
                debug_assert_eq!(st.phase, Phase::Suspended);
                st.phase = Phase::Ready;
                min_dep = min_dep.min(dep);
            }
            self.decrease_execution_idx(min_dep as usize);
        }
        if self.validation_idx.load(Ordering::SeqCst) > idx as usize {
            if wrote_new {
                self.decrease_validation_idx(idx as usize);
            } else {
                return Some(Task::Validation((idx, incarnation)));
            }
        }
        self.retire_task();
        None
    }

    /// Executed -> Aborting, only if the incarnation still matches.
    fn try_validation_abort(&self, idx: TxnIndex, incarnation: u32) -> bool {
        self.chaos.touch();
        let mut st = self.status[idx as usize].lock().unwrap();
        if st.incarnation == incarnation && st.phase == Phase::Executed {
            st.phase = Phase::Aborting;
            true
        } else {
            false
        }
    }

    /// Completes a validation task; on abort, schedules the next incarnation
    /// and forces everything above to re-validate.
    fn finish_validation(
        &self,
        idx: TxnIndex,
        aborted: bool,
        livelock_cap: u32,
    ) -> Result<Option<Task>, ExecError> {
        if aborted {
            {
                let mut st = self.status[idx as usize].lock().unwrap();
                debug_assert_eq!(st.phase, Phase::Aborting);
                st.incarnation += 1;
                st.phase = Phase::Ready;
                if st.incarnation > livelock_cap {
                    return Err(ExecError::Livelock { txn: idx, cap: livelock_cap });
                }
            }
            self.decrease_validation_idx(idx as usize + 1);
            if self.execution_idx.load(Ordering::SeqCst) > idx as usize {
                return Ok(self.try_incarnate(idx as usize).map(Task::Execution));
            }
        }
        self.retire_task();
        Ok(None)
    }
}

/// Storage view for one optimistic incarnation: local write buffer underneath
/// the VM's own read-your-writes layer, shared reads through read_lvp with
/// estimate-based dependency detection.
struct OptView<'a> {
    idx: TxnIndex,
    mv: &'a MvMemory,
    base: &'a BaseState,
    scheduler: &'a Scheduler,
    reads: Vec<ReadRecord>,
    writes: Vec<(StateKey, Value)>,
    suspended_on: Option<TxnIndex>,
    chaos: &'a Chaos,
}

impl StorageView for OptView<'_> {
    fn get(&mut self, key: &StateKey) -> Result<Value, ReadInterrupt> {
        self.chaos.touch();
        let read = self.mv.read_lvp(self.idx, key, self.base);
        if read.estimate {
            let VersionSource::Txn(writer) = read.source else {
                unreachable!("estimates always carry a writer");
            };
            if self.scheduler.add_dependency(self.idx, writer) {
                self.suspended_on = Some(writer);
                return Err(ReadInterrupt::Dependency(writer));
            }
            // Writer published while we were about to wait: re-read.
            return self.get(key);
        }
        self.reads.push(ReadRecord { key: *key, source: read.source, value: read.value });
        Ok(read.value)
    }

    fn put(&mut self, key: StateKey, value: Value) {
        self.writes.push((key, value));
    }
}

#[derive(Default)]
struct WorkerCounters {
    vm_runs: u64,
    validations: u64,
    skipped_validations: u64,
    aborts: u64,
    dependency_waits: u64,
    spec_violations: u64,
}

/// Per-transaction statistics for assertions on top of the aggregate report.
pub struct OptDetail {
    pub validations: Vec<u32>,
    pub aborts: Vec<u32>,
    pub incarnations: Vec<u32>,
    pub independent: Vec<bool>,
    pub skipped_validations: u64,
}

pub fn run_opt(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    spec: &ConflictSpec,
    opts: &ExecOptions,
) -> Result<ExecutionReport, ExecError> {
    run_opt_detailed(block, base, registry, spec, opts).map(|(report, _)| report)
}

pub fn run_opt_detailed(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    spec: &ConflictSpec,
    opts: &ExecOptions,
) -> Result<(ExecutionReport, OptDetail), ExecError> {
    let n = block.len();
    let threads = opts.threads.max(1);
    let chaos = Chaos::from_seed(opts.chaos_seed);
    let env = VmEnv {
        registry,
        coinbase: block.coinbase,
        lazy_coinbase: opts.lazy_coinbase,
    };
    let start = Instant::now();
    let independent = compute_independent(n, spec);
    let mv = MvMemory::new();
    let scheduler = Scheduler::new(n, chaos.clone());
    let slots: Vec<Mutex<TxnSlot>> = (0..n).map(|_| Mutex::new(TxnSlot::default())).collect();
    let per_txn_validations: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(0)).collect();
    let per_txn_aborts: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(0)).collect();
    let error: Mutex<Option<ExecError>> = Mutex::new(None);
    let poisoned = AtomicBool::new(false);

    let worker = || -> WorkerCounters {
        let mut c = WorkerCounters::default();
        let mut task: Option<Task> = None;
        while !scheduler.is_done() {
            if poisoned.load(Ordering::SeqCst) {
                break;
            }
            task = match task {
                Some(Task::Execution(version)) => {
                    run_execution_task(version, block, base, &mv, &scheduler, &slots, &env, &chaos, &mut c)
                }
                Some(Task::Validation((idx, incarnation))) => {
                    let skip = independent.contains(idx) && !opts.debug_validate_independent;
                    let valid = if skip {
                        c.skipped_validations += 1;
                        true
                    } else {
                        c.validations += 1;
                        per_txn_validations[idx as usize].fetch_add(1, Ordering::Relaxed);
                        validate_read_set(idx, &mv, base, &slots)
                    };
                    if !valid && independent.contains(idx) {
                        // Only reachable in debug mode: the spec lied.
                        c.spec_violations += 1;
                    }
                    let aborted = !valid && scheduler.try_validation_abort(idx, incarnation);
                    if aborted {
                        c.aborts += 1;
                        per_txn_aborts[idx as usize].fetch_add(1, Ordering::Relaxed);
                        let keys = slots[idx as usize].lock().unwrap().last_written.clone();
                        mv.mark_estimates(idx, keys.iter())
                            .expect("aborted incarnation published these keys");
                    }
                    match scheduler.finish_validation(idx, aborted, opts.livelock_cap) {
                        Ok(next) => next,
                        Err(e) => {
                            let mut slot = error.lock().unwrap();
                            if slot.is_none() {
                                *slot = Some(e);
                            }
                            poisoned.store(true, Ordering::SeqCst);
                            break;
                        }
                    }
                }
                None => {
                    chaos.touch();
                    let next = scheduler.next_task();
                    if next.is_none() {
                        std::thread::yield_now();
                    }
                    next
                }
            };
        }
        c
    };

    let counters: Vec<WorkerCounters> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads).map(|_| scope.spawn(worker)).collect();
        handles.into_iter().map(|h| h.join().expect("optimistic worker panicked")).collect()
    });

    if let Some(err) = error.lock().unwrap().take() {
        return Err(err);
    }

    let mut state = mv.snapshot_final(base)?;
    let total_fees: Value = slots.iter().map(|s| s.lock().unwrap().fee).sum();
    if opts.lazy_coinbase && total_fees > 0 {
        let slot = state.entry(StateKey::balance(block.coinbase)).or_insert(0);
        *slot = slot.checked_add(total_fees).ok_or(ExecError::CoinbaseOverflow)?;
    }
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut report = ExecutionReport::new(EngineKind::Optimistic, state, threads);
    report.wall_ms = wall_ms;
    let mut skipped = 0;
    for c in counters {
        report.validations += c.validations;
        report.aborts += c.aborts;
        report.dependency_waits += c.dependency_waits;
        report.spec_violations += c.spec_violations;
        report.re_executions += c.vm_runs;
        skipped += c.skipped_validations;
    }
    report.re_executions = report.re_executions.saturating_sub(n as u64);

    let detail = OptDetail {
        validations: per_txn_validations.iter().map(|a| a.load(Ordering::Relaxed)).collect(),
        aborts: per_txn_aborts.iter().map(|a| a.load(Ordering::Relaxed)).collect(),
        incarnations: scheduler
            .status
            .iter()
            .map(|s| s.lock().unwrap().incarnation)
            .collect(),
        independent: (0..n as TxnIndex).map(|k| independent.contains(k)).collect(),
        skipped_validations: skipped,
    };
    Ok((report, detail))
}

#[allow(clippy::too_many_arguments)]
fn run_execution_task(
    version: Version,
    block: &Block,
    base: &BaseState,
    mv: &MvMemory,
    scheduler: &Scheduler,
    slots: &[Mutex<TxnSlot>],
    env: &VmEnv<'_>,
    chaos: &Chaos,
    c: &mut WorkerCounters,
) -> Option<Task> {
    let (idx, incarnation) = version;
    let mut view = OptView {
        idx,
        mv,
        base,
        scheduler,
        reads: Vec::new(),
        writes: Vec::new(),
        suspended_on: None,
        chaos,
    };
    c.vm_runs += 1;
    // A read that races with the blocking writer's publish re-reads inside
    // OptView::get; only a registered dependency aborts the run.
    match vm::execute(&block.transactions[idx as usize], &mut view, env) {
        Err(ReadInterrupt::Dependency(_)) => {
            debug_assert!(view.suspended_on.is_some());
            // Suspended; the task slot is released and the transaction is
            // re-enqueued when the blocking write publishes.
            c.dependency_waits += 1;
            scheduler.retire_task();
            None
        }
        Ok(outcome) => {
            let fee = outcome.fee_paid;
            let wrote_new = publish(idx, view.reads, view.writes, fee, mv, slots);
            scheduler.finish_execution(idx, incarnation, wrote_new)
        }
    }
}

/// Publishes the write set, drops stale locations from the previous
/// incarnation, and records reads and fee. Returns whether any location was
/// written that the previous incarnation did not write.
fn publish(
    idx: TxnIndex,
    reads: Vec<ReadRecord>,
    writes: Vec<(StateKey, Value)>,
    fee: Value,
    mv: &MvMemory,
    slots: &[Mutex<TxnSlot>],
) -> bool {
    let mut slot = slots[idx as usize].lock().unwrap();
    let new_keys: Vec<StateKey> = writes.iter().map(|(k, _)| *k).collect();
    for (key, value) in &writes {
        mv.write_version(idx, *key, *value);
    }
    let prev: HashSet<StateKey> = slot.last_written.iter().copied().collect();
    let new_set: HashSet<StateKey> = new_keys.iter().copied().collect();
    let wrote_new = new_keys.iter().any(|k| !prev.contains(k));
    for stale in prev.difference(&new_set) {
        mv.remove_version(idx, stale);
    }
    slot.last_written = new_keys;
    slot.reads = reads;
    slot.fee = fee;
    wrote_new
}

/// Re-runs read_lvp for every recorded read and compares (source, value)
/// pairs; reading an estimate fails validation outright.
fn validate_read_set(
    idx: TxnIndex,
    mv: &MvMemory,
    base: &BaseState,
    slots: &[Mutex<TxnSlot>],
) -> bool {
    let reads = slots[idx as usize].lock().unwrap().reads.clone();
    reads.iter().all(|r| {
        let cur = mv.read_lvp(idx, &r.key, base);
        !cur.estimate && cur.source == r.source && cur.value == r.value
    })
}
