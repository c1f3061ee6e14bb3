//! Conflict-threshold dispatch: compute a cheap conflict metric from the
//! specification and pick sequential or parallel execution per block.

use std::time::Instant;

use crate::dag::run_dag;
use crate::optimistic::{compute_independent, run_opt};
use crate::registry::ContractRegistry;
use crate::report::{EngineKind, ExecError, ExecOptions, ExecutionReport};
use crate::sequential::run_sequential;
use crate::spec::ConflictSpec;
use crate::types::{BaseState, Block, TxnIndex};

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ConflictMetrics {
    /// Share of predecessor pairs the spec cannot prove independent.
    pub dependent_pair_fraction: f64,
    /// Share of transactions independent of all their predecessors.
    pub independent_txn_fraction: f64,
    /// Longest dependency chain, in transactions (1 for an edgeless block).
    pub longest_chain: usize,
}

/// Full metric set. The chain length walks every dependency edge; the
/// dispatch path below only needs the O(n) pair fraction.
pub fn conflict_metrics(n: usize, spec: &ConflictSpec) -> ConflictMetrics {
    let mut chain = vec![0usize; n];
    let mut prefix_max = 0usize;
    for k in 0..n as TxnIndex {
        let mut best = 0usize;
        if (k as usize) < spec.len() {
            if spec.deps_len(k) == k as usize {
                // Depends on every predecessor.
                best = prefix_max;
            } else {
                spec.for_each_dep(k, |i| best = best.max(chain[i as usize]));
            }
        } else {
            best = prefix_max;
        }
        chain[k as usize] = best + 1;
        prefix_max = prefix_max.max(best + 1);
    }
    ConflictMetrics {
        dependent_pair_fraction: dependent_pair_fraction(n, spec),
        independent_txn_fraction: if n == 0 {
            0.0
        } else {
            compute_independent(n, spec).len() as f64 / n as f64
        },
        longest_chain: if n == 0 { 0 } else { *chain.iter().max().unwrap() },
    }
}

fn dependent_pair_fraction(n: usize, spec: &ConflictSpec) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let total_pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    let deps: usize = (0..n as TxnIndex)
        .map(|k| {
            if (k as usize) < spec.len() {
                spec.deps_len(k)
            } else {
                k as usize
            }
        })
        .sum();
    deps as f64 / total_pairs
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParallelEngine {
    Dag,
    Opt,
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptivePolicy {
    /// Fall back to sequential above this dependent-pair fraction.
    pub threshold_high: f64,
    /// Blocks smaller than this always run sequentially.
    pub min_parallel_size: usize,
    pub parallel_engine: ParallelEngine,
}

impl Default for AdaptivePolicy {
    fn default() -> Self {
        AdaptivePolicy {
            threshold_high: 0.5,
            min_parallel_size: 64,
            parallel_engine: ParallelEngine::Opt,
        }
    }
}

pub struct AdaptiveRun {
    pub report: ExecutionReport,
    /// Engine the policy dispatched to; also reflected in `report.engine`.
    pub dispatched: EngineKind,
    pub dependent_pair_fraction: f64,
}

/// Dispatches on the conflict threshold and block size. Metric computation is
/// O(n) over the stored spec and is included in the reported wall time.
pub fn run_adaptive(
    block: &Block,
    base: &BaseState,
    registry: &ContractRegistry,
    spec: &ConflictSpec,
    opts: &ExecOptions,
    policy: &AdaptivePolicy,
) -> Result<AdaptiveRun, ExecError> {
    let start = Instant::now();
    let n = block.len();
    let fraction = dependent_pair_fraction(n, spec);
    let sequential = fraction > policy.threshold_high || n < policy.min_parallel_size;
    let mut report = if sequential {
        run_sequential(block, base, registry, opts).report
    } else {
        match policy.parallel_engine {
            ParallelEngine::Dag => run_dag(block, base, registry, spec, opts)?,
            ParallelEngine::Opt => run_opt(block, base, registry, spec, opts)?,
        }
    };
    report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let dispatched = report.engine;
    Ok(AdaptiveRun { report, dispatched, dependent_pair_fraction: fraction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::get_cset_weak;
    use crate::spec::DepSet;
    use crate::workload::{generate, WorkloadKind, WorkloadParams};

    #[test]
    fn metrics_full_csets() {
        let m = conflict_metrics(8, &ConflictSpec::fully_independent(8));
        assert_eq!(m.dependent_pair_fraction, 0.0);
        assert_eq!(m.independent_txn_fraction, 1.0);
        assert_eq!(m.longest_chain, 1);
    }

    #[test]
    fn metrics_empty_csets() {
        let n = 8;
        let m = conflict_metrics(n, &ConflictSpec::conservative(n));
        assert_eq!(m.dependent_pair_fraction, 1.0);
        assert!((m.independent_txn_fraction - 1.0 / n as f64).abs() < 1e-12);
        assert_eq!(m.longest_chain, n);
    }

    /// The best-case historical profile: ~38% independent transactions and a
    /// dependency chain spanning 50 of 136.
    #[test]
    fn metrics_best_case_block_profile() {
        let n = 136usize;
        let mut deps = Vec::with_capacity(n);
        for k in 0..n as TxnIndex {
            let d = if (1..50).contains(&k) {
                DepSet::List(vec![k - 1]) // 50-transaction chain over 0..=49
            } else if k >= 101 {
                DepSet::List(vec![0])
            } else {
                DepSet::List(vec![]) // 0 and 50..=100 stand alone
            };
            deps.push((d, true));
        }
        let spec = ConflictSpec::from_deps(deps).unwrap();
        let m = conflict_metrics(n, &spec);
        assert_eq!(m.longest_chain, 50);
        assert!(
            (m.independent_txn_fraction - 0.38).abs() < 0.01,
            "fraction = {}",
            m.independent_txn_fraction
        );
    }

    fn workload(alpha: f64, size: usize) -> (crate::types::Block, crate::types::BaseState, ContractRegistry) {
        let mut p = WorkloadParams::new(WorkloadKind::Erc20, size, alpha, 77);
        p.synthetic_work = 50;
        let w = generate(&p).unwrap();
        (w.block, w.base, w.registry)
    }

    #[test]
    fn high_conflict_block_falls_back_to_sequential() {
        let (block, base, registry) = workload(5.0, 128);
        let spec = get_cset_weak(&block, &registry);
        let run = run_adaptive(
            &block,
            &base,
            &registry,
            &spec,
            &ExecOptions::with_threads(4),
            &AdaptivePolicy::default(),
        )
        .unwrap();
        assert_eq!(run.dispatched, EngineKind::Sequential);
        assert!(run.dependent_pair_fraction > 0.5);
    }

    #[test]
    fn low_conflict_block_runs_parallel() {
        let (block, base, registry) = workload(0.1, 128);
        let spec = get_cset_weak(&block, &registry);
        let run = run_adaptive(
            &block,
            &base,
            &registry,
            &spec,
            &ExecOptions::with_threads(4),
            &AdaptivePolicy::default(),
        )
        .unwrap();
        assert_eq!(run.dispatched, EngineKind::Optimistic);
        assert!(run.dependent_pair_fraction < 0.5);
    }

    #[test]
    fn tiny_blocks_stay_sequential() {
        let (block, base, registry) = workload(0.1, 1);
        let spec = get_cset_weak(&block, &registry);
        let run = run_adaptive(
            &block,
            &base,
            &registry,
            &spec,
            &ExecOptions::with_threads(4),
            &AdaptivePolicy::default(),
        )
        .unwrap();
        assert_eq!(run.dispatched, EngineKind::Sequential);
    }

    #[test]
    fn adaptive_state_matches_sequential_on_both_branches() {
        for alpha in [0.1, 5.0] {
            let (block, base, registry) = workload(alpha, 128);
            let spec = get_cset_weak(&block, &registry);
            let seq = run_sequential(&block, &base, &registry, &ExecOptions::default());
            for engine in [ParallelEngine::Dag, ParallelEngine::Opt] {
                let run = run_adaptive(
                    &block,
                    &base,
                    &registry,
                    &spec,
                    &ExecOptions::with_threads(4),
                    &AdaptivePolicy { parallel_engine: engine, ..Default::default() },
                )
                .unwrap();
                assert_eq!(run.report.final_state, seq.report.final_state, "alpha={alpha}");
            }
        }
    }
}
