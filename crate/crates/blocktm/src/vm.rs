//! The toy VM: deterministic execution semantics for every payload against an
//! abstract storage view. This is the single definition of what a transaction
//! does; every executor injects its own view underneath.

use std::collections::{BTreeMap, BTreeSet};

use crate::registry::{AddrExpr, ContractRegistry, Instr, KeyExpr, ValueExpr};
use crate::types::{AccessSets, Address, CallArg, Payload, StateKey, Transaction, TxnIndex, Value};

/// A read had to stop the VM run: the view observed a value that is not safe
/// to use yet. Only the optimistic executor produces this.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ReadInterrupt {
    /// The latest preceding version was an estimate written by this
    /// still-uncommitted transaction.
    Dependency(TxnIndex),
}

/// Storage seam between the VM and an executor. Absent keys read as zero.
pub trait StorageView {
    fn get(&mut self, key: &StateKey) -> Result<Value, ReadInterrupt>;
    fn put(&mut self, key: StateKey, value: Value);
}

/// Plain map-backed view; the sequential executor's storage.
impl StorageView for std::collections::HashMap<StateKey, Value> {
    fn get(&mut self, key: &StateKey) -> Result<Value, ReadInterrupt> {
        Ok(std::collections::HashMap::get(self, key).copied().unwrap_or(0))
    }

    fn put(&mut self, key: StateKey, value: Value) {
        self.insert(key, value);
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RevertReason {
    InsufficientBalance,
    InsufficientTokens,
    InsufficientAllowance,
    Overflow,
    Underflow,
    NoFunction,
    RequireFailed,
    BadArgument,
}

impl std::fmt::Display for RevertReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            RevertReason::InsufficientBalance => "insufficient_balance",
            RevertReason::InsufficientTokens => "insufficient_tokens",
            RevertReason::InsufficientAllowance => "insufficient_allowance",
            RevertReason::Overflow => "overflow",
            RevertReason::Underflow => "underflow",
            RevertReason::NoFunction => "no_function",
            RevertReason::RequireFailed => "require_failed",
            RevertReason::BadArgument => "bad_argument",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VmStatus {
    Committed,
    Reverted(RevertReason),
}

impl VmStatus {
    pub fn is_committed(&self) -> bool {
        matches!(self, VmStatus::Committed)
    }
}

/// Result of one VM run. A reverted transaction keeps the reads it made
/// before the revert but exposes an empty write set; no partial writes
/// escape. `fee_paid` is zero unless the transaction committed.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VmOutcome {
    pub status: VmStatus,
    pub access: AccessSets,
    pub fee_paid: Value,
}

/// Execution environment fixed for the whole block.
#[derive(Clone, Copy)]
pub struct VmEnv<'a> {
    pub registry: &'a ContractRegistry,
    pub coinbase: Address,
    /// Collect fees per transaction and credit the coinbase once after the
    /// block, instead of writing the coinbase balance in every transaction.
    pub lazy_coinbase: bool,
}

/// Burns deterministic busywork standing in for real execution cost.
#[inline]
pub fn spin(iters: u64) {
    let mut acc = 0u64;
    for i in 0..iters {
        acc = acc.wrapping_mul(6364136223846793005).wrapping_add(i | 1);
        std::hint::black_box(acc);
    }
}

enum Halt {
    Revert(RevertReason),
    Interrupt(ReadInterrupt),
}

impl From<ReadInterrupt> for Halt {
    fn from(i: ReadInterrupt) -> Self {
        Halt::Interrupt(i)
    }
}

/// Write-buffering wrapper giving read-your-writes within one transaction.
/// Shared reads are recorded exactly once per distinct key; reads served from
/// the transaction's own pending writes are local and not part of the rset.
struct TxnBuffer<'a, V: StorageView> {
    view: &'a mut V,
    reads: BTreeSet<StateKey>,
    writes: BTreeMap<StateKey, Value>,
}

impl<'a, V: StorageView> TxnBuffer<'a, V> {
    fn new(view: &'a mut V) -> Self {
        TxnBuffer { view, reads: BTreeSet::new(), writes: BTreeMap::new() }
    }

    fn get(&mut self, key: &StateKey) -> Result<Value, ReadInterrupt> {
        if let Some(v) = self.writes.get(key) {
            return Ok(*v);
        }
        let v = self.view.get(key)?;
        self.reads.insert(*key);
        Ok(v)
    }

    fn put(&mut self, key: StateKey, value: Value) {
        self.writes.insert(key, value);
    }

    fn commit(self) -> AccessSets {
        let wset: BTreeSet<StateKey> = self.writes.keys().copied().collect();
        for (key, value) in self.writes {
            self.view.put(key, value);
        }
        AccessSets { rset: self.reads, wset }
    }

    fn discard(self) -> AccessSets {
        AccessSets { rset: self.reads, wset: BTreeSet::new() }
    }
}

/// Runs one transaction against `view`. Deterministic: the outcome is a pure
/// function of the transaction and the values read. The returned access sets
/// are exact (each shared get/put recorded once per distinct key).
pub fn execute<V: StorageView>(
    txn: &Transaction,
    view: &mut V,
    env: &VmEnv<'_>,
) -> Result<VmOutcome, ReadInterrupt> {
    spin(txn.synthetic_work);
    let mut buf = TxnBuffer::new(view);
    match run_txn(txn, &mut buf, env) {
        Ok(()) => Ok(VmOutcome {
            status: VmStatus::Committed,
            access: buf.commit(),
            fee_paid: txn.gas_fee,
        }),
        Err(Halt::Revert(reason)) => Ok(VmOutcome {
            status: VmStatus::Reverted(reason),
            access: buf.discard(),
            fee_paid: 0,
        }),
        Err(Halt::Interrupt(i)) => Err(i),
    }
}

/// `execute`, cross-checked against an independent instrumentation of the
/// storage view. Used where the access sets serve as ground truth.
pub fn execute_with_tracking<V: StorageView>(
    txn: &Transaction,
    view: &mut V,
    env: &VmEnv<'_>,
) -> Result<VmOutcome, ReadInterrupt> {
    struct Recorder<'a, V: StorageView> {
        inner: &'a mut V,
        reads: BTreeSet<StateKey>,
        writes: BTreeSet<StateKey>,
    }

    impl<V: StorageView> StorageView for Recorder<'_, V> {
        fn get(&mut self, key: &StateKey) -> Result<Value, ReadInterrupt> {
            let v = self.inner.get(key)?;
            self.reads.insert(*key);
            Ok(v)
        }

        fn put(&mut self, key: StateKey, value: Value) {
            self.writes.insert(key);
            self.inner.put(key, value);
        }
    }

    let mut rec = Recorder { inner: view, reads: BTreeSet::new(), writes: BTreeSet::new() };
    let outcome = execute(txn, &mut rec, env)?;
    assert_eq!(outcome.access.rset, rec.reads, "recorded rset diverged from observed reads");
    assert_eq!(outcome.access.wset, rec.writes, "recorded wset diverged from observed writes");
    Ok(outcome)
}

fn run_txn<V: StorageView>(
    txn: &Transaction,
    buf: &mut TxnBuffer<'_, V>,
    env: &VmEnv<'_>,
) -> Result<(), Halt> {
    native_part(txn, buf, env)?;
    match &txn.payload {
        Payload::Native => Ok(()),
        Payload::TokenTransfer { target, amount } => {
            token_transfer(buf, txn.dest, txn.origin, *target, *amount)
        }
        Payload::TokenTransferFrom { from, to, amount } => {
            let c = txn.dest;
            let allowance_key = StateKey::allowance(c, *from, txn.origin);
            let allowance = buf.get(&allowance_key)?;
            if allowance < *amount {
                return Err(Halt::Revert(RevertReason::InsufficientAllowance));
            }
            buf.put(allowance_key, allowance - *amount);
            token_transfer(buf, c, *from, *to, *amount)
        }
        Payload::TokenApprove { spender, amount } => {
            buf.put(StateKey::allowance(txn.dest, txn.origin, *spender), *amount);
            Ok(())
        }
        Payload::ContractCall { sig, args } => {
            let Some(function) = env.registry.function(txn.dest, *sig) else {
                return Err(Halt::Revert(RevertReason::NoFunction));
            };
            run_body(&function.body.clone(), txn, args, buf)
        }
    }
}

/// Fee debit plus the attached-value movement, common to every payload.
fn native_part<V: StorageView>(
    txn: &Transaction,
    buf: &mut TxnBuffer<'_, V>,
    env: &VmEnv<'_>,
) -> Result<(), Halt> {
    let fee = txn.gas_fee;
    let total = txn
        .value
        .checked_add(fee)
        .ok_or(Halt::Revert(RevertReason::Overflow))?;
    if total == 0 {
        return Ok(());
    }
    let origin_key = StateKey::balance(txn.origin);
    let origin_balance = buf.get(&origin_key)?;
    if origin_balance < total {
        return Err(Halt::Revert(RevertReason::InsufficientBalance));
    }
    if txn.value > 0 {
        buf.put(origin_key, origin_balance - total);
        let dest_key = StateKey::balance(txn.dest);
        let dest_balance = buf.get(&dest_key)?;
        let credited = dest_balance
            .checked_add(txn.value)
            .ok_or(Halt::Revert(RevertReason::Overflow))?;
        buf.put(dest_key, credited);
    } else {
        buf.put(origin_key, origin_balance - fee);
    }
    if !env.lazy_coinbase && fee > 0 {
        let coinbase_key = StateKey::balance(env.coinbase);
        let coinbase_balance = buf.get(&coinbase_key)?;
        let credited = coinbase_balance
            .checked_add(fee)
            .ok_or(Halt::Revert(RevertReason::Overflow))?;
        buf.put(coinbase_key, credited);
    }
    Ok(())
}

fn token_transfer<V: StorageView>(
    buf: &mut TxnBuffer<'_, V>,
    contract: Address,
    from: Address,
    to: Address,
    amount: Value,
) -> Result<(), Halt> {
    let from_key = StateKey::token_balance(contract, from);
    let from_balance = buf.get(&from_key)?;
    if from_balance < amount {
        return Err(Halt::Revert(RevertReason::InsufficientTokens));
    }
    buf.put(from_key, from_balance - amount);
    let to_key = StateKey::token_balance(contract, to);
    let to_balance = buf.get(&to_key)?;
    let credited = to_balance
        .checked_add(amount)
        .ok_or(Halt::Revert(RevertReason::Overflow))?;
    buf.put(to_key, credited);
    Ok(())
}

fn run_body<V: StorageView>(
    body: &[Instr],
    txn: &Transaction,
    args: &[CallArg],
    buf: &mut TxnBuffer<'_, V>,
) -> Result<(), Halt> {
    let mut acc: Value = 0;
    for instr in body {
        match instr {
            Instr::Get(key) => acc = buf.get(&resolve_key(key, txn, args)?)?,
            Instr::Set(v) => acc = eval(v, txn, args)?,
            Instr::Add(v) => {
                acc = acc
                    .checked_add(eval(v, txn, args)?)
                    .ok_or(Halt::Revert(RevertReason::Overflow))?;
            }
            Instr::Sub(v) => {
                acc = acc
                    .checked_sub(eval(v, txn, args)?)
                    .ok_or(Halt::Revert(RevertReason::Underflow))?;
            }
            Instr::Put(key) => {
                let key = resolve_key(key, txn, args)?;
                buf.put(key, acc);
            }
            Instr::Require { key, min } => {
                let have = buf.get(&resolve_key(key, txn, args)?)?;
                if have < eval(min, txn, args)? {
                    return Err(Halt::Revert(RevertReason::RequireFailed));
                }
            }
            Instr::Spin(iters) => spin(*iters),
        }
    }
    Ok(())
}

fn resolve_addr(expr: &AddrExpr, txn: &Transaction, args: &[CallArg]) -> Result<Address, Halt> {
    match expr {
        AddrExpr::Origin => Ok(txn.origin),
        AddrExpr::Dest => Ok(txn.dest),
        AddrExpr::Const(a) => Ok(*a),
        AddrExpr::Arg(i) => args
            .get(*i)
            .and_then(CallArg::as_addr)
            .ok_or(Halt::Revert(RevertReason::BadArgument)),
    }
}

fn resolve_key(expr: &KeyExpr, txn: &Transaction, args: &[CallArg]) -> Result<StateKey, Halt> {
    Ok(match expr {
        KeyExpr::Balance { owner } => StateKey::balance(resolve_addr(owner, txn, args)?),
        KeyExpr::TokenBalance { contract, owner } => StateKey::token_balance(
            resolve_addr(contract, txn, args)?,
            resolve_addr(owner, txn, args)?,
        ),
        KeyExpr::TokenAllowance { contract, owner, spender } => StateKey::allowance(
            resolve_addr(contract, txn, args)?,
            resolve_addr(owner, txn, args)?,
            resolve_addr(spender, txn, args)?,
        ),
        KeyExpr::Slot { contract, slot } => {
            StateKey::slot(resolve_addr(contract, txn, args)?, *slot)
        }
    })
}

fn eval(expr: &ValueExpr, txn: &Transaction, args: &[CallArg]) -> Result<Value, Halt> {
    match expr {
        ValueExpr::Const(v) => Ok(*v),
        ValueExpr::Value => Ok(txn.value),
        ValueExpr::Arg(i) => args
            .get(*i)
            .and_then(CallArg::as_val)
            .ok_or(Halt::Revert(RevertReason::BadArgument)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::{ContractDef, FunctionDef};
    use crate::types::FnSig;
    use std::collections::HashMap;

    const COINBASE: Address = Address(0xc01b);

    fn env(registry: &ContractRegistry) -> VmEnv<'_> {
        VmEnv { registry, coinbase: COINBASE, lazy_coinbase: true }
    }

    fn txn(origin: u64, dest: u64, value: Value, payload: Payload, fee: Value) -> Transaction {
        Transaction {
            index: 0,
            origin: Address(origin),
            dest: Address(dest),
            value,
            payload,
            gas_fee: fee,
            synthetic_work: 0,
        }
    }

    #[test]
    fn native_payment_debits_and_credits() {
        let reg = ContractRegistry::new();
        let mut state = HashMap::new();
        state.insert(StateKey::balance(Address(1)), 100);
        let t = txn(1, 2, 30, Payload::Native, 1);
        let out = execute_with_tracking(&t, &mut state, &env(&reg)).unwrap();
        assert!(out.status.is_committed());
        assert_eq!(state[&StateKey::balance(Address(1))], 69);
        assert_eq!(state[&StateKey::balance(Address(2))], 30);
        assert_eq!(out.fee_paid, 1);
        let expect: BTreeSet<_> =
            [StateKey::balance(Address(1)), StateKey::balance(Address(2))].into_iter().collect();
        assert_eq!(out.access.rset, expect);
        assert_eq!(out.access.wset, expect);
    }

    #[test]
    fn token_transfer_with_zero_balance_reverts() {
        let reg = ContractRegistry::new();
        let mut state = HashMap::new();
        state.insert(StateKey::balance(Address(1)), 100);
        let t = txn(
            1,
            0xc0,
            0,
            Payload::TokenTransfer { target: Address(2), amount: 5 },
            0,
        );
        let out = execute_with_tracking(&t, &mut state, &env(&reg)).unwrap();
        assert_eq!(out.status, VmStatus::Reverted(RevertReason::InsufficientTokens));
        assert!(out.access.wset.is_empty());
        assert_eq!(out.fee_paid, 0);
        // The token balance read before the revert is still reported.
        assert!(out.access.rset.contains(&StateKey::token_balance(Address(0xc0), Address(1))));
        // No partial writes escaped.
        assert_eq!(state.get(&StateKey::token_balance(Address(0xc0), Address(1))), None);
    }

    #[test]
    fn zero_value_self_transfer_only_pays_fee() {
        let reg = ContractRegistry::new();
        let mut state = HashMap::new();
        state.insert(StateKey::balance(Address(7)), 50);
        let t = txn(7, 7, 0, Payload::Native, 3);
        let out = execute_with_tracking(&t, &mut state, &env(&reg)).unwrap();
        assert!(out.status.is_committed());
        assert_eq!(state[&StateKey::balance(Address(7))], 47);
        assert_eq!(out.access.wset.len(), 1);
    }

    #[test]
    fn positive_value_self_transfer_nets_to_fee() {
        let reg = ContractRegistry::new();
        let mut state = HashMap::new();
        state.insert(StateKey::balance(Address(7)), 50);
        let t = txn(7, 7, 20, Payload::Native, 3);
        let out = execute(&t, &mut state, &env(&reg)).unwrap();
        assert!(out.status.is_committed());
        assert_eq!(state[&StateKey::balance(Address(7))], 47);
    }

    #[test]
    fn execution_is_deterministic() {
        let reg = ContractRegistry::new();
        let t = txn(
            1,
            0xc0,
            0,
            Payload::TokenTransfer { target: Address(2), amount: 5 },
            1,
        );
        let mut base = HashMap::new();
        base.insert(StateKey::balance(Address(1)), 10);
        base.insert(StateKey::token_balance(Address(0xc0), Address(1)), 9);
        let mut s1 = base.clone();
        let mut s2 = base.clone();
        let o1 = execute(&t, &mut s1, &env(&reg)).unwrap();
        let o2 = execute(&t, &mut s2, &env(&reg)).unwrap();
        assert_eq!(o1, o2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn token_transfer_reads_sender_balance() {
        let reg = ContractRegistry::new();
        let c = Address(0xc0);
        let mut state = HashMap::new();
        state.insert(StateKey::token_balance(c, Address(1)), 10);
        let t = txn(1, 0xc0, 0, Payload::TokenTransfer { target: Address(2), amount: 4 }, 0);
        let out = execute_with_tracking(&t, &mut state, &env(&reg)).unwrap();
        assert!(out.status.is_committed());
        assert!(out.access.rset.contains(&StateKey::token_balance(c, Address(1))));
        assert_eq!(state[&StateKey::token_balance(c, Address(1))], 6);
        assert_eq!(state[&StateKey::token_balance(c, Address(2))], 4);
    }

    #[test]
    fn transfer_from_consumes_allowance() {
        let reg = ContractRegistry::new();
        let c = Address(0xc0);
        let mut state = HashMap::new();
        state.insert(StateKey::token_balance(c, Address(1)), 10);
        state.insert(StateKey::allowance(c, Address(1), Address(3)), 5);
        let t = txn(
            3,
            0xc0,
            0,
            Payload::TokenTransferFrom { from: Address(1), to: Address(2), amount: 4 },
            0,
        );
        let out = execute_with_tracking(&t, &mut state, &env(&reg)).unwrap();
        assert!(out.status.is_committed());
        assert_eq!(state[&StateKey::allowance(c, Address(1), Address(3))], 1);
        assert_eq!(state[&StateKey::token_balance(c, Address(2))], 4);

        let over = txn(
            3,
            0xc0,
            0,
            Payload::TokenTransferFrom { from: Address(1), to: Address(2), amount: 4 },
            0,
        );
        let out = execute(&over, &mut state, &env(&reg)).unwrap();
        assert_eq!(out.status, VmStatus::Reverted(RevertReason::InsufficientAllowance));
    }

    #[test]
    fn approve_overwrites_allowance_blindly() {
        let reg = ContractRegistry::new();
        let c = Address(0xc0);
        let mut state = HashMap::new();
        let t = txn(1, 0xc0, 0, Payload::TokenApprove { spender: Address(3), amount: 9 }, 0);
        let out = execute_with_tracking(&t, &mut state, &env(&reg)).unwrap();
        assert!(out.status.is_committed());
        assert!(out.access.rset.is_empty());
        assert_eq!(state[&StateKey::allowance(c, Address(1), Address(3))], 9);
    }

    #[test]
    fn unknown_function_reverts() {
        let reg = ContractRegistry::new();
        let mut state = HashMap::new();
        let t = txn(1, 0xc0, 0, Payload::ContractCall { sig: FnSig(0xdead), args: vec![] }, 0);
        let out = execute(&t, &mut state, &env(&reg)).unwrap();
        assert_eq!(out.status, VmStatus::Reverted(RevertReason::NoFunction));
    }

    #[test]
    fn credit_overflow_reverts_cleanly() {
        let reg = ContractRegistry::new();
        let mut state = HashMap::new();
        state.insert(StateKey::balance(Address(1)), Value::MAX);
        state.insert(StateKey::balance(Address(2)), Value::MAX);
        let t = txn(1, 2, 1, Payload::Native, 0);
        let out = execute(&t, &mut state, &env(&reg)).unwrap();
        assert_eq!(out.status, VmStatus::Reverted(RevertReason::Overflow));
        assert_eq!(state[&StateKey::balance(Address(1))], Value::MAX);
    }

    #[test]
    fn coinbase_credited_inline_when_lazy_off() {
        let reg = ContractRegistry::new();
        let mut state = HashMap::new();
        state.insert(StateKey::balance(Address(1)), 10);
        let t = txn(1, 2, 2, Payload::Native, 1);
        let e = VmEnv { registry: &reg, coinbase: COINBASE, lazy_coinbase: false };
        let out = execute_with_tracking(&t, &mut state, &e).unwrap();
        assert!(out.status.is_committed());
        assert_eq!(state[&StateKey::balance(COINBASE)], 1);
        assert!(out.access.wset.contains(&StateKey::balance(COINBASE)));
    }

    #[test]
    fn contract_body_require_and_arithmetic() {
        let mut reg = ContractRegistry::new();
        let wallet = Address(0xa11);
        let sig = FnSig(0x1234);
        // withdraw(amount): require(balances[origin] >= amount); balances[origin] -= amount
        let mut def = ContractDef::default();
        def.functions.insert(
            sig,
            FunctionDef {
                body: vec![
                    Instr::Require {
                        key: KeyExpr::TokenBalance { contract: AddrExpr::Dest, owner: AddrExpr::Origin },
                        min: ValueExpr::Arg(0),
                    },
                    Instr::Get(KeyExpr::TokenBalance { contract: AddrExpr::Dest, owner: AddrExpr::Origin }),
                    Instr::Sub(ValueExpr::Arg(0)),
                    Instr::Put(KeyExpr::TokenBalance { contract: AddrExpr::Dest, owner: AddrExpr::Origin }),
                ],
                ..Default::default()
            },
        );
        reg.insert(wallet, def);

        let mut state = HashMap::new();
        state.insert(StateKey::token_balance(wallet, Address(1)), 10);
        let ok = txn(
            1,
            0xa11,
            0,
            Payload::ContractCall { sig, args: vec![CallArg::Val(4)] },
            0,
        );
        let out = execute_with_tracking(&ok, &mut state, &env(&reg)).unwrap();
        assert!(out.status.is_committed());
        assert_eq!(state[&StateKey::token_balance(wallet, Address(1))], 6);

        let too_much = txn(
            1,
            0xa11,
            0,
            Payload::ContractCall { sig, args: vec![CallArg::Val(100)] },
            0,
        );
        let out = execute(&too_much, &mut state, &env(&reg)).unwrap();
        assert_eq!(out.status, VmStatus::Reverted(RevertReason::RequireFailed));
        assert_eq!(state[&StateKey::token_balance(wallet, Address(1))], 6);
    }

    #[test]
    fn conservation_of_native_value() {
        // For committed native payments, total balance plus fees paid is constant.
        let reg = ContractRegistry::new();
        let mut state = HashMap::new();
        for a in 1..=4u64 {
            state.insert(StateKey::balance(Address(a)), 1000);
        }
        let before: Value = state.values().sum();
        let mut fees = 0;
        for (i, (from, to)) in [(1u64, 2u64), (2, 3), (3, 4), (4, 1)].iter().enumerate() {
            let mut t = txn(*from, *to, 37, Payload::Native, 2);
            t.index = i as TxnIndex;
            let out = execute(&t, &mut state, &env(&reg)).unwrap();
            assert!(out.status.is_committed());
            fees += out.fee_paid;
        }
        let after: Value = state.values().sum();
        assert_eq!(before, after + fees);
    }
}
