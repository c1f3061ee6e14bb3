//! Contract registry: the declared model of every contract the VM and the
//! conflict analyzers can see. Each function carries a straight-line body for
//! the interpreter plus the abstract opcode set and call edges the strong
//! analyzer reasons over.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::types::{Address, FnSig, Value};

/// Abstract opcodes relevant to conflict analysis.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum Opcode {
    #[serde(rename = "CALL")]
    Call,
    #[serde(rename = "STATICCALL")]
    StaticCall,
    #[serde(rename = "SELFDESTRUCT")]
    SelfDestruct,
    #[serde(rename = "CREATE")]
    Create,
    #[serde(rename = "CREATE2")]
    Create2,
    #[serde(rename = "BALANCE")]
    Balance,
}

impl Opcode {
    /// Opcodes through which a function can write outside its own contract.
    pub fn exits_contract(self) -> bool {
        matches!(self, Opcode::Call | Opcode::SelfDestruct | Opcode::Create | Opcode::Create2)
    }

    /// Opcodes through which a function can read (but not write) outside its
    /// own contract.
    pub fn static_exits_contract(self) -> bool {
        matches!(self, Opcode::StaticCall | Opcode::Balance)
    }
}

/// Callee of an internal call edge: a declared contract or a target resolved
/// only at runtime.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CallTarget {
    #[serde(with = "dynamic_literal")]
    Dynamic,
    Contract(Address),
}

mod dynamic_literal {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str("dynamic")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<(), D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "dynamic" {
            Ok(())
        } else {
            Err(D::Error::custom("expected \"dynamic\""))
        }
    }
}

/// Address operand inside a function body, resolved against the transaction.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddrExpr {
    Origin,
    Dest,
    /// Address-typed call argument by position.
    Arg(usize),
    Const(Address),
}

/// Value operand inside a function body.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueExpr {
    Const(Value),
    /// Value-typed call argument by position.
    Arg(usize),
    /// The transaction's attached value.
    Value,
}

/// State key operand inside a function body.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyExpr {
    Balance { owner: AddrExpr },
    TokenBalance { contract: AddrExpr, owner: AddrExpr },
    TokenAllowance { contract: AddrExpr, owner: AddrExpr, spender: AddrExpr },
    Slot { contract: AddrExpr, slot: u64 },
}

/// One straight-line instruction. Bodies run over a single accumulator; the
/// only conditional form is `require(get(key) >= min)`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instr {
    /// acc := get(key)
    Get(KeyExpr),
    /// acc := value
    Set(ValueExpr),
    /// acc := acc + value (checked)
    Add(ValueExpr),
    /// acc := acc - value (checked)
    Sub(ValueExpr),
    /// put(key, acc)
    Put(KeyExpr),
    /// revert unless get(key) >= min
    Require { key: KeyExpr, min: ValueExpr },
    Spin(u64),
}

/// A declared public entry function.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct FunctionDef {
    #[serde(default)]
    pub opcodes: BTreeSet<Opcode>,
    #[serde(default)]
    pub calls: Vec<(CallTarget, FnSig)>,
    #[serde(default)]
    pub body: Vec<Instr>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct ContractDef {
    /// Trusted flag: the contract faithfully implements the designated ERC-20
    /// functions.
    #[serde(default)]
    pub erc20: bool,
    #[serde(default)]
    pub functions: BTreeMap<FnSig, FunctionDef>,
}

/// All declared contracts, keyed by address.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContractRegistry {
    pub contracts: BTreeMap<Address, ContractDef>,
}

impl ContractRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contract(&self, addr: Address) -> Option<&ContractDef> {
        self.contracts.get(&addr)
    }

    pub fn function(&self, addr: Address, sig: FnSig) -> Option<&FunctionDef> {
        self.contracts.get(&addr)?.functions.get(&sig)
    }

    pub fn is_erc20_wellformed(&self, addr: Address) -> bool {
        self.contracts.get(&addr).is_some_and(|c| c.erc20)
    }

    pub fn insert(&mut self, addr: Address, def: ContractDef) {
        self.contracts.insert(addr, def);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_json_shape() {
        let mut reg = ContractRegistry::new();
        let mut token = ContractDef { erc20: true, ..Default::default() };
        token.functions.insert(
            FnSig(0x11223344),
            FunctionDef {
                opcodes: [Opcode::StaticCall].into_iter().collect(),
                calls: vec![(CallTarget::Dynamic, FnSig(0x1)), (CallTarget::Contract(Address(5)), FnSig(0x2))],
                body: vec![
                    Instr::Get(KeyExpr::Slot { contract: AddrExpr::Const(Address(9)), slot: 0 }),
                    Instr::Set(ValueExpr::Value),
                    Instr::Put(KeyExpr::TokenBalance { contract: AddrExpr::Dest, owner: AddrExpr::Origin }),
                ],
            },
        );
        reg.insert(Address(0xc0), token);

        let json = serde_json::to_string_pretty(&reg).unwrap();
        assert!(json.contains("\"0xc0\""));
        assert!(json.contains("\"STATICCALL\""));
        assert!(json.contains("\"dynamic\""));
        let back: ContractRegistry = serde_json::from_str(&json).unwrap();
        assert_eq!(back, reg);
    }

    #[test]
    fn opcode_classes() {
        assert!(Opcode::Call.exits_contract());
        assert!(Opcode::Create2.exits_contract());
        assert!(!Opcode::StaticCall.exits_contract());
        assert!(Opcode::Balance.static_exits_contract());
        assert!(!Opcode::Call.static_exits_contract());
    }
}
