//! Deterministic synthetic workload generator: ERC-20 clusters, mixed,
//! peer-to-peer, batch-transfer and generic blocks, with contention steered
//! by the tail factor alpha.
//!
//! Cluster and account weights are Pareto variates drawn by the inverse CDF
//! `x = x_m * U^(-1/shape)`, x_m = 1. The generator uses `shape = 1/alpha`,
//! so larger alpha concentrates load onto fewer clusters: alpha = 0.1 spreads
//! transactions nearly uniformly (few conflicts) while alpha = 5 funnels them
//! into a handful of hot clusters (maximum conflicts).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{ContractDef, ContractRegistry, FunctionDef};
use crate::types::{Address, BaseState, Block, FnSig, Payload, StateKey, Transaction, Value};

const EOA_BASE: u64 = 0x1_0000_0000;
const CONTRACT_BASE: u64 = 0xc0_0000_0000;
const COINBASE: Address = Address(0xfee0_0000);
const TOKEN_SUPPLY: Value = 1_000_000_000_000;
const BATCH_FANOUT: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorkloadError {
    #[error("invalid workload parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadKind {
    Erc20,
    Mix,
    P2p,
    Batch,
    Generic,
}

impl WorkloadKind {
    pub const ALL: [WorkloadKind; 5] = [
        WorkloadKind::Erc20,
        WorkloadKind::Mix,
        WorkloadKind::P2p,
        WorkloadKind::Batch,
        WorkloadKind::Generic,
    ];
}

impl std::fmt::Display for WorkloadKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            WorkloadKind::Erc20 => "erc20",
            WorkloadKind::Mix => "mix",
            WorkloadKind::P2p => "p2p",
            WorkloadKind::Batch => "batch",
            WorkloadKind::Generic => "generic",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for WorkloadKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "erc20" => Ok(WorkloadKind::Erc20),
            "mix" => Ok(WorkloadKind::Mix),
            "p2p" => Ok(WorkloadKind::P2p),
            "batch" => Ok(WorkloadKind::Batch),
            "generic" => Ok(WorkloadKind::Generic),
            other => Err(format!("unknown workload kind {other:?}")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub kind: WorkloadKind,
    pub block_size: usize,
    pub alpha: f64,
    pub accounts: usize,
    pub clusters: usize,
    pub seed: u64,
    pub synthetic_work: u64,
    pub initial_balance: Value,
    pub gas_fee: Value,
    /// Fraction of transactions rewritten to revert deterministically.
    pub revert_rate: f64,
}

impl WorkloadParams {
    /// Standard parameterization for a kind; cluster and account counts
    /// follow the benchmark defaults (ERC-20: one cluster and one EOA per
    /// transaction; Mix: clusters = block_size / 4).
    pub fn new(kind: WorkloadKind, block_size: usize, alpha: f64, seed: u64) -> Self {
        let clusters = match kind {
            WorkloadKind::Erc20 => block_size.max(1),
            WorkloadKind::Mix => (block_size / 4).max(1),
            _ => 1,
        };
        let accounts = match kind {
            WorkloadKind::Erc20 => clusters,
            _ => block_size.max(8),
        };
        WorkloadParams {
            kind,
            block_size,
            alpha,
            accounts,
            clusters,
            seed,
            synthetic_work: 2000,
            initial_balance: 1_000_000_000,
            gas_fee: 1,
            revert_rate: 0.0,
        }
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        if self.block_size == 0 {
            return Err(WorkloadError::InvalidParams("block_size must be >= 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 {
            return Err(WorkloadError::InvalidParams("alpha must be positive".into()));
        }
        if self.accounts == 0 || self.clusters == 0 {
            return Err(WorkloadError::InvalidParams("accounts and clusters must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.revert_rate) {
            return Err(WorkloadError::InvalidParams("revert_rate must be in [0, 1]".into()));
        }
        Ok(())
    }
}

pub struct GeneratedWorkload {
    pub block: Block,
    pub base: BaseState,
    pub registry: ContractRegistry,
}

/// Pareto variate by inverse CDF; `shape` is the tail index.
fn pareto(rng: &mut impl Rng, shape: f64) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
    u.powf(-1.0 / shape).clamp(1.0, 1e300)
}

/// Contention weight: Pareto with tail index 1/alpha (see module docs).
fn conflict_weight(rng: &mut impl Rng, alpha: f64) -> f64 {
    pareto(rng, 1.0 / alpha)
}

/// Splits `total` across weights, exact by largest-remainder rounding.
fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let mut counts = Vec::with_capacity(weights.len());
    let mut fracs = Vec::with_capacity(weights.len());
    let mut allocated = 0usize;
    for (i, &w) in weights.iter().enumerate() {
        let share = total as f64 * w / sum;
        let floor = share.floor() as usize;
        allocated += floor;
        counts.push(floor);
        fracs.push((i, share - floor as f64));
    }
    fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut leftover = total - allocated;
    for (i, _) in fracs {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    counts
}

/// Weighted account picker over cumulative sums.
struct WeightedSampler {
    cumulative: Vec<f64>,
}

impl WeightedSampler {
    fn new(rng: &mut impl Rng, n: usize, alpha: f64) -> Self {
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        for _ in 0..n {
            acc += conflict_weight(rng, alpha);
            cumulative.push(acc);
        }
        WeightedSampler { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x).min(self.cumulative.len() - 1)
    }

    fn sample_distinct_pair(&self, rng: &mut impl Rng) -> (usize, usize) {
        let a = self.sample(rng);
        for _ in 0..32 {
            let b = self.sample(rng);
            if b != a {
                return (a, b);
            }
        }
        (a, (a + 1) % self.cumulative.len())
    }
}

pub fn generate(params: &WorkloadParams) -> Result<GeneratedWorkload, WorkloadError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut registry = ContractRegistry::new();
    let mut base = BaseState::new();
    let mut txns = match params.kind {
        WorkloadKind::Erc20 => {
            erc20_txns(params, params.clusters, params.block_size, &mut rng, &mut registry, &mut base)
        }
        WorkloadKind::Mix => {
            let n_token = params.block_size / 2;
            let n_native = params.block_size - n_token;
            let token = erc20_txns(params, params.clusters, n_token, &mut rng, &mut registry, &mut base);
            let native = p2p_txns(params, n_native, &mut rng, &mut base);
            interleave(native, token)
        }
        WorkloadKind::P2p => p2p_txns(params, params.block_size, &mut rng, &mut base),
        WorkloadKind::Batch => {
            batch_txns(params, params.block_size, &mut rng, &mut registry, &mut base)
        }
        WorkloadKind::Generic => {
            let n_batch = params.block_size / 2;
            let n_p2p = params.block_size - n_batch;
            let p2p = p2p_txns(params, n_p2p, &mut rng, &mut base);
            let batch = batch_txns(params, n_batch, &mut rng, &mut registry, &mut base);
            interleave(p2p, batch)
        }
    };
    if params.kind == WorkloadKind::Erc20 {
        // Spread clusters over the preset order.
        txns.shuffle(&mut rng);
    }
    for (k, txn) in txns.iter_mut().enumerate() {
        txn.index = k as u32;
    }
    Ok(GeneratedWorkload {
        block: Block::new(COINBASE, txns),
        base,
        registry,
    })
}

fn erc20_contract() -> ContractDef {
    let mut def = ContractDef { erc20: true, ..Default::default() };
    def.functions.insert(FnSig::TRANSFER, FunctionDef::default());
    def.functions.insert(FnSig::TRANSFER_FROM, FunctionDef::default());
    def.functions.insert(FnSig::APPROVE, FunctionDef::default());
    def
}

fn erc20_txns(
    params: &WorkloadParams,
    clusters: usize,
    count: usize,
    rng: &mut ChaCha8Rng,
    registry: &mut ContractRegistry,
    base: &mut BaseState,
) -> Vec<Transaction> {
    let weights: Vec<f64> = (0..clusters).map(|_| conflict_weight(rng, params.alpha)).collect();
    let per_cluster = largest_remainder(count, &weights);
    let members_per_cluster = (params.accounts / clusters).max(1);
    let mut txns = Vec::with_capacity(count);
    for (c, &cluster_count) in per_cluster.iter().enumerate() {
        if cluster_count == 0 {
            continue;
        }
        let contract = Address(CONTRACT_BASE + c as u64);
        registry.insert(contract, erc20_contract());
        let member = |m: usize| Address(EOA_BASE + (c * members_per_cluster + m) as u64);
        for m in 0..members_per_cluster {
            base.insert(StateKey::balance(member(m)), params.initial_balance);
            base.insert(StateKey::token_balance(contract, member(m)), TOKEN_SUPPLY);
        }
        for _ in 0..cluster_count {
            let sender = member(rng.gen_range(0..members_per_cluster));
            let receiver = member(rng.gen_range(0..members_per_cluster));
            let amount = if rng.gen_bool(params.revert_rate) {
                TOKEN_SUPPLY * 2
            } else {
                rng.gen_range(1..=100)
            };
            txns.push(Transaction {
                index: 0,
                origin: sender,
                dest: contract,
                value: 0,
                payload: Payload::TokenTransfer { target: receiver, amount },
                gas_fee: params.gas_fee,
                synthetic_work: params.synthetic_work,
            });
        }
    }
    txns
}

fn p2p_txns(
    params: &WorkloadParams,
    count: usize,
    rng: &mut ChaCha8Rng,
    base: &mut BaseState,
) -> Vec<Transaction> {
    let sampler = WeightedSampler::new(rng, params.accounts, params.alpha);
    let account = |i: usize| Address(EOA_BASE + i as u64);
    for i in 0..params.accounts {
        base.insert(StateKey::balance(account(i)), params.initial_balance);
    }
    (0..count)
        .map(|_| {
            let (from, to) = sampler.sample_distinct_pair(rng);
            let value = if rng.gen_bool(params.revert_rate) {
                params.initial_balance * 2
            } else {
                rng.gen_range(1..=100)
            };
            Transaction {
                index: 0,
                origin: account(from),
                dest: account(to),
                value,
                payload: Payload::Native,
                gas_fee: params.gas_fee,
                synthetic_work: params.synthetic_work,
            }
        })
        .collect()
}

/// Batch transfers: each group is one sender fanning out token transfers to
/// several receivers on a single shared token contract.
fn batch_txns(
    params: &WorkloadParams,
    count: usize,
    rng: &mut ChaCha8Rng,
    registry: &mut ContractRegistry,
    base: &mut BaseState,
) -> Vec<Transaction> {
    let contract = Address(CONTRACT_BASE + 0xba7c4);
    registry.insert(contract, erc20_contract());
    let sampler = WeightedSampler::new(rng, params.accounts, params.alpha);
    let account = |i: usize| Address(EOA_BASE + i as u64);
    for i in 0..params.accounts {
        base.insert(StateKey::balance(account(i)), params.initial_balance);
        base.insert(StateKey::token_balance(contract, account(i)), TOKEN_SUPPLY);
    }
    let mut txns = Vec::with_capacity(count);
    while txns.len() < count {
        let sender = sampler.sample(rng);
        for _ in 0..BATCH_FANOUT.min(count - txns.len()) {
            let mut receiver = rng.gen_range(0..params.accounts);
            if receiver == sender {
                receiver = (receiver + 1) % params.accounts;
            }
            let amount = if rng.gen_bool(params.revert_rate) {
                TOKEN_SUPPLY * 2
            } else {
                rng.gen_range(1..=100)
            };
            txns.push(Transaction {
                index: 0,
                origin: account(sender),
                dest: contract,
                value: 0,
                payload: Payload::TokenTransfer { target: account(receiver), amount },
                gas_fee: params.gas_fee,
                synthetic_work: params.synthetic_work,
            });
        }
    }
    txns
}

fn interleave(a: Vec<Transaction>, b: Vec<Transaction>) -> Vec<Transaction> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut a = a.into_iter();
    let mut b = b.into_iter();
    loop {
        match (a.next(), b.next()) {
            (Some(x), Some(y)) => {
                out.push(x);
                out.push(y);
            }
            (Some(x), None) => out.push(x),
            (None, Some(y)) => out.push(y),
            (None, None) => break,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::conflict_metrics;
    use crate::analyzer::ground_truth_cset;
    use crate::report::ExecOptions;

    fn gen(kind: WorkloadKind, size: usize, alpha: f64, seed: u64) -> GeneratedWorkload {
        let mut p = WorkloadParams::new(kind, size, alpha, seed);
        p.synthetic_work = 0;
        generate(&p).unwrap()
    }

    #[test]
    fn deterministic_output() {
        for kind in WorkloadKind::ALL {
            let a = gen(kind, 100, 0.7, 11);
            let b = gen(kind, 100, 0.7, 11);
            assert_eq!(a.block, b.block, "{kind} block must be seed-deterministic");
            assert_eq!(a.base, b.base);
            assert_eq!(a.registry, b.registry);
            assert_eq!(
                serde_json::to_vec(&a.block).unwrap(),
                serde_json::to_vec(&b.block).unwrap()
            );
        }
    }

    #[test]
    fn single_transaction_block() {
        for kind in WorkloadKind::ALL {
            let w = gen(kind, 1, 1.0, 5);
            assert_eq!(w.block.len(), 1);
            w.block.validate().unwrap();
        }
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = WorkloadParams::new(WorkloadKind::Erc20, 10, 1.0, 0);
        p.block_size = 0;
        assert!(matches!(generate(&p), Err(WorkloadError::InvalidParams(_))));
        let mut p = WorkloadParams::new(WorkloadKind::P2p, 10, 0.0, 0);
        p.alpha = 0.0;
        assert!(matches!(generate(&p), Err(WorkloadError::InvalidParams(_))));
    }

    #[test]
    fn erc20_low_alpha_is_one_eoa_per_cluster_shape() {
        let w = gen(WorkloadKind::Erc20, 256, 0.1, 7);
        assert_eq!(w.block.len(), 256);
        // Nearly every transaction is a self-transfer on its own contract.
        let self_transfers = w
            .block
            .transactions
            .iter()
            .filter(|t| matches!(&t.payload, Payload::TokenTransfer { target, .. } if *target == t.origin))
            .count();
        assert!(self_transfers == w.block.len(), "single-member clusters self-transfer");
        let contracts: std::collections::HashSet<_> =
            w.block.transactions.iter().map(|t| t.dest).collect();
        assert!(contracts.len() > 200, "alpha=0.1 spreads over most clusters, got {}", contracts.len());
    }

    #[test]
    fn high_alpha_concentrates_clusters() {
        let w = gen(WorkloadKind::Erc20, 256, 5.0, 7);
        let mut by_contract: std::collections::HashMap<Address, usize> = Default::default();
        for t in &w.block.transactions {
            *by_contract.entry(t.dest).or_default() += 1;
        }
        let hottest = by_contract.values().copied().max().unwrap();
        assert!(hottest > 128, "alpha=5 should funnel most txns into one cluster, got {hottest}");
    }

    #[test]
    fn alpha_raises_dependency_chain_length() {
        let opts = ExecOptions::default();
        let chain = |alpha: f64| {
            let w = gen(WorkloadKind::Erc20, 192, alpha, 13);
            let spec = ground_truth_cset(&w.block, &w.base, &w.registry, &opts);
            conflict_metrics(w.block.len(), &spec).longest_chain
        };
        assert!(chain(5.0) > chain(0.1));
    }

    #[test]
    fn conflict_edges_grow_with_alpha_over_seeds() {
        // Statistical monotonicity: mean ground-truth dependency count at
        // alpha=5 exceeds alpha=0.1, per kind, over 20 seeds.
        let opts = ExecOptions::default();
        for kind in WorkloadKind::ALL {
            let mean_edges = |alpha: f64| -> f64 {
                (0..20u64)
                    .map(|seed| {
                        let w = gen(kind, 64, alpha, seed);
                        ground_truth_cset(&w.block, &w.base, &w.registry, &opts).total_deps() as f64
                    })
                    .sum::<f64>()
                    / 20.0
            };
            let lo = mean_edges(0.1);
            let hi = mean_edges(5.0);
            assert!(hi > lo, "{kind}: edges at alpha=5 ({hi}) must exceed alpha=0.1 ({lo})");
        }
    }

    #[test]
    fn no_spurious_reverts_by_default() {
        for kind in WorkloadKind::ALL {
            let w = gen(kind, 128, 1.0, 3);
            let run = crate::sequential::run_sequential(
                &w.block,
                &w.base,
                &w.registry,
                &ExecOptions::default(),
            );
            assert!(
                run.outcomes.iter().all(|o| o.status.is_committed()),
                "{kind}: default workload must not revert"
            );
        }
    }

    #[test]
    fn revert_injection_produces_reverts() {
        let mut p = WorkloadParams::new(WorkloadKind::P2p, 128, 1.0, 3);
        p.synthetic_work = 0;
        p.revert_rate = 0.3;
        let w = generate(&p).unwrap();
        let run = crate::sequential::run_sequential(
            &w.block,
            &w.base,
            &w.registry,
            &ExecOptions::default(),
        );
        let reverted = run.outcomes.iter().filter(|o| !o.status.is_committed()).count();
        assert!(reverted > 10, "expected injected reverts, got {reverted}");
    }

    #[test]
    fn largest_remainder_is_exact() {
        let counts = largest_remainder(10, &[1.0, 1.0, 1.0]);
        assert_eq!(counts.iter().sum::<usize>(), 10);
        let counts = largest_remainder(7, &[5.0, 1.0, 1.0]);
        assert_eq!(counts.iter().sum::<usize>(), 7);
        assert!(counts[0] >= 5);
    }
}
