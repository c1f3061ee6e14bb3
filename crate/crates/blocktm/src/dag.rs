//! DAG executor: builds a dependency graph from the conflict specification
//! and runs a scheduler-less worker pool. A transaction becomes runnable when
//! its indegree drops to zero, reads through the multi-version store, and on
//! commit decrements its dependents' indegrees. No aborts, no validations.

use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crossbeam::queue::SegQueue;

use crate::chaos::Chaos;
use crate::mvmemory::MvMemory;
use crate::registry::ContractRegistry;
use crate::report::{EngineKind, ExecError, ExecOptions, ExecutionReport};
use crate::spec::ConflictSpec;
use crate::types::{BaseState, Block, StateKey, TxnIndex, Value};
use crate::vm::{self, ReadInterrupt, StorageView, VmEnv};

/// Adjacency (dependents) plus indegree counters derived from the complement
/// of the cSets. Edges only point from lower to higher index, so the graph is
/// acyclic by construction.
pub struct DependencyDag {
    dependents: Vec<Vec<TxnIndex>>,
    indegree: Vec<AtomicU32>,
}

impl DependencyDag {
    pub fn len(&self) -> usize {
        self.indegree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indegree.is_empty()
    }

    pub fn indegree(&self, k: TxnIndex) -> u32 {
        self.indegree[k as usize].load(Ordering::Relaxed)
    }

    pub fn dependents(&self, k: TxnIndex) -> &[TxnIndex] {
        &self.dependents[k as usize]
    }

    /// Test hook: assemble a graph directly from adjacency and indegrees,
    /// bypassing `gen_dag`'s by-construction acyclicity.
    #[doc(hidden)]
    pub fn from_raw_parts(dependents: Vec<Vec<TxnIndex>>, indegree: Vec<u32>) -> Self {
        DependencyDag {
            dependents,
            indegree: indegree.into_iter().map(AtomicU32::new).collect(),
        }
    }

    /// Optional post-pass: drops edges already implied by a longer path.
    /// Reachability (and therefore the indegree-zero set and the execution
    /// semantics) is unchanged; only edge counts shrink. Quadratic bitset
    /// sweep, intended for small and mid-sized blocks.
    pub fn transitive_reduction(&self) -> DependencyDag {
        let n = self.len();
        let words = n.div_ceil(64);
        // reach[k] = all vertices reachable from k through dependents.
        let mut reach: Vec<Vec<u64>> = vec![vec![0u64; words]; n];
        for k in (0..n).rev() {
            let mut bits = vec![0u64; words];
            for &d in &self.dependents[k] {
                let d = d as usize;
                bits[d / 64] |= 1 << (d % 64);
                for (w, r) in bits.iter_mut().zip(&reach[d]) {
                    *w |= r;
                }
            }
            reach[k] = bits;
        }
        let mut dependents: Vec<Vec<TxnIndex>> = vec![Vec::new(); n];
        let mut indegree = vec![0u32; n];
        for (k, direct) in self.dependents.iter().enumerate() {
            for &target in direct {
                let covered = direct.iter().any(|&other| {
                    other != target
                        && reach[other as usize][target as usize / 64] >> (target % 64) & 1 == 1
                });
                if !covered {
                    dependents[k].push(target);
                    indegree[target as usize] += 1;
                }
            }
        }
        DependencyDag {
            dependents,
            indegree: indegree.into_iter().map(AtomicU32::new).collect(),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.dependents.iter().map(Vec::len).sum()
    }
}

/// Constructs the DAG: for each transaction k an edge i -> k exists for every
/// predecessor i not in cset[k], and indegree[k] counts those edges. A spec
/// shorter than the block treats the uncovered tail as maximally dependent.
pub fn gen_dag(n: usize, spec: &ConflictSpec) -> Result<DependencyDag, ExecError> {
    spec.validate()?;
    let mut dependents: Vec<Vec<TxnIndex>> = vec![Vec::new(); n];
    let mut indegree = Vec::with_capacity(n);
    for k in 0..n as TxnIndex {
        let mut count = 0u32;
        if (k as usize) < spec.len() {
            spec.for_each_dep(k, |i| {
                dependents[i as usize].push(k);
                count += 1;
            });
        } else {
            for i in 0..k {
                dependents[i as usize].push(k);
                count += 1;
            }
        }
        indegree.push(AtomicU32::new(count));
    }
    Ok(DependencyDag { dependents, indegree })
}

struct DagView<'a> {
    k: TxnIndex,
    mv: &'a MvMemory,
    base: &'a BaseState,
    chaos: &'a Chaos,
    writes: Vec<(StateKey, Value)>,
}

impl StorageView for DagView<'_> {
    fn get(&mut self, key: &StateKey) -> Result<Value, ReadInterrupt> {
        self.chaos.touch();
        let read = self.mv.read_lvp(self.k, key, self.base);
        // All dependencies committed before this transaction started, and
        // this executor never marks estimates.
        debug_assert!(!read.estimate);
        Ok(read.value)
    }

    fn put(&mut self, key: StateKey, value: Value) {
        self.writes.push((key, value));
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TxnTiming {
    /// Nanoseconds from run start to execution start.
    pub start_ns: u64,
    /// Nanoseconds from run start to commit (dependents decremented).
    pub commit_ns: u64,
}

pub fn run_dag(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    spec: &ConflictSpec,
    opts: &ExecOptions,
) -> Result<ExecutionReport, ExecError> {
    run_inner(block, base, registry, spec, opts, false).map(|(report, _)| report)
}

/// `run_dag` plus per-transaction start/commit timestamps, for schedule
/// assertions in tests.
pub fn run_dag_traced(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    spec: &ConflictSpec,
    opts: &ExecOptions,
) -> Result<(ExecutionReport, Vec<TxnTiming>), ExecError> {
    run_inner(block, base, registry, spec, opts, true)
        .map(|(report, trace)| (report, trace.expect("trace requested")))
}

fn run_inner(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    spec: &ConflictSpec,
    opts: &ExecOptions,
    trace: bool,
) -> Result<(ExecutionReport, Option<Vec<TxnTiming>>), ExecError> {
    let n = block.len();
    let threads = opts.threads.max(1);
    let chaos = Chaos::from_seed(opts.chaos_seed);
    let env = VmEnv {
        registry,
        coinbase: block.coinbase,
        lazy_coinbase: opts.lazy_coinbase,
    };

    let start = Instant::now();
    let mut dag = gen_dag(n, spec)?;
    if opts.dag_transitive_reduction {
        dag = dag.transitive_reduction();
    }
    let mv = MvMemory::new();
    let queue: SegQueue<TxnIndex> = SegQueue::new();
    // Enqueued or executing transactions; when this hits zero with commits
    // outstanding, the graph cannot make progress.
    let pending = AtomicUsize::new(0);
    let committed = AtomicUsize::new(0);
    for k in 0..n as TxnIndex {
        if dag.indegree(k) == 0 {
            pending.fetch_add(1, Ordering::SeqCst);
            queue.push(k);
        }
    }
    let failure: Mutex<Option<ExecError>> = Mutex::new(None);
    let failed = AtomicBool::new(false);
    let timings: Vec<(AtomicU64, AtomicU64)> = if trace {
        (0..n).map(|_| (AtomicU64::new(0), AtomicU64::new(0))).collect()
    } else {
        Vec::new()
    };
    let fail = |err: ExecError| {
        let mut slot = failure.lock().unwrap();
        if slot.is_none() {
            *slot = Some(err);
        }
        failed.store(true, Ordering::SeqCst);
    };

    let total_fees = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for _ in 0..threads {
            handles.push(scope.spawn(|| {
                let mut fees: Value = 0;
                loop {
                    if failed.load(Ordering::SeqCst) {
                        break;
                    }
                    chaos.touch();
                    let Some(k) = queue.pop() else {
                        if committed.load(Ordering::SeqCst) == n {
                            break;
                        }
                        if pending.load(Ordering::SeqCst) == 0 {
                            // Re-read after the pending check; see ordering note
                            // at the commit site.
                            let done = committed.load(Ordering::SeqCst);
                            if done == n {
                                break;
                            }
                            fail(ExecError::Stalled { committed: done, total: n });
                            break;
                        }
                        std::thread::yield_now();
                        continue;
                    };

                    if trace {
                        timings[k as usize]
                            .0
                            .store(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
                    }
                    let mut view = DagView {
                        k,
                        mv: &mv,
                        base,
                        chaos: &chaos,
                        writes: Vec::new(),
                    };
                    let txn = &block.transactions[k as usize];
                    let outcome = vm::execute(txn, &mut view, &env)
                        .expect("DAG reads are never interrupted");
                    if outcome.status.is_committed() {
                        for (key, value) in view.writes {
                            chaos.touch();
                            mv.write_version(k, key, value);
                        }
                        fees += outcome.fee_paid;
                    }
                    // The writes are published; dependents released from here
                    // on may start immediately.
                    if trace {
                        timings[k as usize]
                            .1
                            .store(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
                    }
                    // Reverted transactions publish nothing but still release
                    // their dependents.
                    for &dep in dag.dependents(k) {
                        chaos.touch();
                        let prev = dag.indegree[dep as usize].fetch_sub(1, Ordering::AcqRel);
                        match prev {
                            0 => {
                                fail(ExecError::IndegreeUnderflow { txn: dep });
                                return fees;
                            }
                            1 => {
                                pending.fetch_add(1, Ordering::SeqCst);
                                queue.push(dep);
                            }
                            _ => {}
                        }
                    }
                    // Count the commit before retiring the pending slot so
                    // that pending == 0 implies the committed counter is final.
                    committed.fetch_add(1, Ordering::SeqCst);
                    pending.fetch_sub(1, Ordering::SeqCst);
                }
                fees
            }));
        }
        handles.into_iter().map(|h| h.join().expect("dag worker panicked")).sum::<Value>()
    });

    if let Some(err) = failure.lock().unwrap().take() {
        return Err(err);
    }

    let mut state = mv.snapshot_final(base)?;
    if opts.lazy_coinbase && total_fees > 0 {
        let slot = state.entry(StateKey::balance(block.coinbase)).or_insert(0);
        *slot = slot.checked_add(total_fees).ok_or(ExecError::CoinbaseOverflow)?;
    }
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut report = ExecutionReport::new(EngineKind::Dag, state, threads);
    report.wall_ms = wall_ms;
    let trace_out = trace.then(|| {
        timings
            .iter()
            .map(|(s, c)| TxnTiming {
                start_ns: s.load(Ordering::Relaxed),
                commit_ns: c.load(Ordering::Relaxed),
            })
            .collect()
    });
    Ok((report, trace_out))
}
