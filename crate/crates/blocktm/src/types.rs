//! Domain types shared by every executor: addresses, state keys, transactions,
//! blocks, access sets and the final-state hash.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Transaction index within a block (0-based preset position).
pub type TxnIndex = u32;

/// Unsigned 128-bit value; wei-equivalent for balances, unitless for slots.
/// All arithmetic on values must be checked (overflow is an execution error).
pub type Value = u128;

/// Pre-block state. Absent keys read as zero.
pub type BaseState = HashMap<StateKey, Value>;

/// Post-block state in canonical (sorted) order.
pub type FinalState = BTreeMap<StateKey, Value>;

/// Account identifier. Synthetic workloads use a 64-bit token; the wire format
/// is a lowercase `0x`-prefixed hex string.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub u64);

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:x}", self.0)
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl std::str::FromStr for Address {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix("0x")
            .ok_or_else(|| format!("address {s:?} missing 0x prefix"))?;
        u64::from_str_radix(hex, 16)
            .map(Address)
            .map_err(|e| format!("bad address {s:?}: {e}"))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Four-byte function selector, printed as `0x`-prefixed hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FnSig(pub u32);

impl FnSig {
    /// `transfer(address,uint256)`
    pub const TRANSFER: FnSig = FnSig(0xa9059cbb);
    /// `transferFrom(address,address,uint256)`
    pub const TRANSFER_FROM: FnSig = FnSig(0x23b872dd);
    /// `approve(address,uint256)`
    pub const APPROVE: FnSig = FnSig(0x095ea7b3);

    pub fn is_erc20(self) -> bool {
        matches!(self, Self::TRANSFER | Self::TRANSFER_FROM | Self::APPROVE)
    }
}

impl fmt::Display for FnSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:08x}", self.0)
    }
}

impl fmt::Debug for FnSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl std::str::FromStr for FnSig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix("0x")
            .ok_or_else(|| format!("signature {s:?} missing 0x prefix"))?;
        u32::from_str_radix(hex, 16)
            .map(FnSig)
            .map_err(|e| format!("bad signature {s:?}: {e}"))
    }
}

impl Serialize for FnSig {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for FnSig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// Wire helper for 128-bit amounts nested inside internally tagged enums,
/// where serde's content buffering cannot carry native 128-bit integers:
/// values up to u64::MAX travel as JSON numbers, larger ones as decimal
/// strings.
mod value_wire {
    use super::Value;
    use serde::de::{Error, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Value, serializer: S) -> Result<S::Ok, S::Error> {
        if *v <= u64::MAX as Value {
            serializer.serialize_u64(*v as u64)
        } else {
            serializer.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Value, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Value;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an unsigned amount (number or decimal string)")
            }

            fn visit_u64<E: Error>(self, v: u64) -> Result<Value, E> {
                Ok(v as Value)
            }

            fn visit_u128<E: Error>(self, v: u128) -> Result<Value, E> {
                Ok(v)
            }

            fn visit_str<E: Error>(self, v: &str) -> Result<Value, E> {
                v.parse().map_err(|e| E::custom(format!("bad amount {v:?}: {e}")))
            }
        }
        deserializer.deserialize_any(V)
    }
}

/// A single addressable piece of chain state.
///
/// Every key is owned by exactly one address (`owner`): native balances by the
/// account itself, token balances / allowances / raw slots by the contract
/// that holds them. The analyzers' disjointness arguments rest on this.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateKey {
    Balance { owner: Address },
    TokenBalance { contract: Address, owner: Address },
    TokenAllowance { contract: Address, owner: Address, spender: Address },
    Slot { contract: Address, slot: u64 },
}

impl StateKey {
    pub fn balance(owner: Address) -> Self {
        StateKey::Balance { owner }
    }

    pub fn token_balance(contract: Address, owner: Address) -> Self {
        StateKey::TokenBalance { contract, owner }
    }

    pub fn allowance(contract: Address, owner: Address, spender: Address) -> Self {
        StateKey::TokenAllowance { contract, owner, spender }
    }

    pub fn slot(contract: Address, slot: u64) -> Self {
        StateKey::Slot { contract, slot }
    }

    /// The address whose storage this key belongs to.
    pub fn owner_address(&self) -> Address {
        match *self {
            StateKey::Balance { owner } => owner,
            StateKey::TokenBalance { contract, .. }
            | StateKey::TokenAllowance { contract, .. }
            | StateKey::Slot { contract, .. } => contract,
        }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match *self {
            StateKey::Balance { owner } => {
                out.push(0);
                out.extend_from_slice(&owner.0.to_le_bytes());
            }
            StateKey::TokenBalance { contract, owner } => {
                out.push(1);
                out.extend_from_slice(&contract.0.to_le_bytes());
                out.extend_from_slice(&owner.0.to_le_bytes());
            }
            StateKey::TokenAllowance { contract, owner, spender } => {
                out.push(2);
                out.extend_from_slice(&contract.0.to_le_bytes());
                out.extend_from_slice(&owner.0.to_le_bytes());
                out.extend_from_slice(&spender.0.to_le_bytes());
            }
            StateKey::Slot { contract, slot } => {
                out.push(3);
                out.extend_from_slice(&contract.0.to_le_bytes());
                out.extend_from_slice(&slot.to_le_bytes());
            }
        }
    }
}

/// Argument of a scripted contract call.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallArg {
    Addr(Address),
    Val(#[serde(with = "value_wire")] Value),
}

impl CallArg {
    pub fn as_addr(&self) -> Option<Address> {
        match self {
            CallArg::Addr(a) => Some(*a),
            CallArg::Val(_) => None,
        }
    }

    pub fn as_val(&self) -> Option<Value> {
        match self {
            CallArg::Val(v) => Some(*v),
            CallArg::Addr(_) => None,
        }
    }
}

/// Transaction payload variants understood by the VM.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Native,
    TokenTransfer {
        target: Address,
        #[serde(with = "value_wire")]
        amount: Value,
    },
    TokenTransferFrom {
        from: Address,
        to: Address,
        #[serde(with = "value_wire")]
        amount: Value,
    },
    TokenApprove {
        spender: Address,
        #[serde(with = "value_wire")]
        amount: Value,
    },
    ContractCall { sig: FnSig, args: Vec<CallArg> },
}

impl Payload {
    pub fn is_token_op(&self) -> bool {
        matches!(
            self,
            Payload::TokenTransfer { .. }
                | Payload::TokenTransferFrom { .. }
                | Payload::TokenApprove { .. }
        )
    }
}

/// One transaction in a block. `index` equals its preset position.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Transaction {
    pub index: TxnIndex,
    pub origin: Address,
    pub dest: Address,
    pub value: Value,
    pub payload: Payload,
    pub gas_fee: Value,
    #[serde(rename = "work")]
    pub synthetic_work: u64,
}

/// An ordered block of transactions plus the fee-recipient account.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Block {
    pub coinbase: Address,
    #[serde(rename = "txns")]
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn new(coinbase: Address, transactions: Vec<Transaction>) -> Self {
        Block { coinbase, transactions }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Checks `transactions[k].index == k` for all k.
    pub fn validate(&self) -> Result<(), String> {
        for (k, txn) in self.transactions.iter().enumerate() {
            if txn.index as usize != k {
                return Err(format!(
                    "transaction at position {k} carries index {}",
                    txn.index
                ));
            }
        }
        Ok(())
    }
}

/// Exact read/write sets of one transaction.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct AccessSets {
    pub rset: BTreeSet<StateKey>,
    pub wset: BTreeSet<StateKey>,
}

impl AccessSets {
    /// dset = rset ∪ wset, derived on demand.
    pub fn dset(&self) -> BTreeSet<StateKey> {
        self.rset.union(&self.wset).copied().collect()
    }
}

/// True iff `wset(i) ∩ rset(j) ≠ ∅`, with `i` before `j` in the preset order
/// (the caller's responsibility).
pub fn read_from_conflict(i_sets: &AccessSets, j_sets: &AccessSets) -> bool {
    !i_sets.wset.is_disjoint(&j_sets.rset)
}

/// True iff some key is in both data sets and in at least one write set.
pub fn conflict(i_sets: &AccessSets, j_sets: &AccessSets) -> bool {
    !i_sets.wset.is_disjoint(&j_sets.rset)
        || !i_sets.wset.is_disjoint(&j_sets.wset)
        || !i_sets.rset.is_disjoint(&j_sets.wset)
}

/// Canonical hash over sorted (key, value) pairs; equal states give equal
/// hashes and vice versa (modulo SHA-256 collisions).
pub fn state_hash(state: &FinalState) -> String {
    let mut hasher = Sha256::new();
    let mut buf = Vec::with_capacity(64);
    for (key, value) in state {
        buf.clear();
        key.encode_into(&mut buf);
        buf.extend_from_slice(&value.to_le_bytes());
        hasher.update(&buf);
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
