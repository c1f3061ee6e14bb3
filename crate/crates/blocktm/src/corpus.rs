//! A small synthetic contract world: a trusted token, a wallet, a read-only
//! price oracle, and a few call-graph shapes (internal call chains, dynamic
//! dispatch). Used by the analyzer tests and the acceptance suite as the
//! scripted-contract workload.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::registry::{
    AddrExpr, CallTarget, ContractDef, ContractRegistry, FunctionDef, Instr, KeyExpr, Opcode,
    ValueExpr,
};
use crate::types::{Address, BaseState, Block, CallArg, FnSig, Payload, StateKey, Transaction, Value};

pub const SIG_ADD_TO_WALLET: FnSig = FnSig(0x0a11e7);
pub const SIG_WITHDRAW: FnSig = FnSig(0x3ccfd60b);
pub const SIG_TURN_ETHER_TO_TOKEN: FnSig = FnSig(0x7ea2e70a);
pub const SIG_ROUTE: FnSig = FnSig(0x10075e);
pub const SIG_HOP: FnSig = FnSig(0x100701);
pub const SIG_FIRE: FnSig = FnSig(0x100702);
pub const SIG_FORWARD: FnSig = FnSig(0xf0a4a4d);

/// The deployed contracts and their addresses.
pub struct World {
    pub registry: ContractRegistry,
    pub token: Address,
    pub wallet: Address,
    pub oracle: Address,
    pub router: Address,
    pub middle: Address,
    pub leaf: Address,
    pub proxy: Address,
    /// Shared account the exiting call chain writes to.
    pub sink: Address,
    pub coinbase: Address,
}

impl Default for World {
    fn default() -> Self {
        Self::new()
    }
}

impl World {
    pub fn new() -> Self {
        let token = Address(0xc0_0001);
        let wallet = Address(0xc0_0002);
        let oracle = Address(0xc0_0003);
        let router = Address(0xc0_0004);
        let middle = Address(0xc0_0005);
        let leaf = Address(0xc0_0006);
        let proxy = Address(0xc0_0007);
        let sink = Address(0xc0_00ff);
        let mut registry = ContractRegistry::new();

        let tb_origin = KeyExpr::TokenBalance { contract: AddrExpr::Dest, owner: AddrExpr::Origin };

        let mut token_def = ContractDef { erc20: true, ..Default::default() };
        token_def.functions.insert(
            FnSig::TRANSFER,
            FunctionDef {
                body: vec![
                    Instr::Require { key: tb_origin, min: ValueExpr::Arg(1) },
                    Instr::Get(tb_origin),
                    Instr::Sub(ValueExpr::Arg(1)),
                    Instr::Put(tb_origin),
                    Instr::Get(KeyExpr::TokenBalance { contract: AddrExpr::Dest, owner: AddrExpr::Arg(0) }),
                    Instr::Add(ValueExpr::Arg(1)),
                    Instr::Put(KeyExpr::TokenBalance { contract: AddrExpr::Dest, owner: AddrExpr::Arg(0) }),
                ],
                ..Default::default()
            },
        );
        // Reads the oracle's price slot (a STATICCALL at the opcode level),
        // then mints against the attached value.
        token_def.functions.insert(
            SIG_TURN_ETHER_TO_TOKEN,
            FunctionDef {
                opcodes: [Opcode::StaticCall].into_iter().collect(),
                body: vec![
                    Instr::Get(KeyExpr::Slot { contract: AddrExpr::Const(oracle), slot: 0 }),
                    Instr::Get(tb_origin),
                    Instr::Add(ValueExpr::Value),
                    Instr::Put(tb_origin),
                ],
                ..Default::default()
            },
        );
        registry.insert(token, token_def);

        let mut wallet_def = ContractDef::default();
        wallet_def.functions.insert(
            SIG_ADD_TO_WALLET,
            FunctionDef {
                body: vec![
                    Instr::Get(tb_origin),
                    Instr::Add(ValueExpr::Value),
                    Instr::Put(tb_origin),
                ],
                ..Default::default()
            },
        );
        // withdraw(amount): the transfer back to the sender is a CALL.
        wallet_def.functions.insert(
            SIG_WITHDRAW,
            FunctionDef {
                opcodes: [Opcode::Call].into_iter().collect(),
                body: vec![
                    Instr::Require { key: tb_origin, min: ValueExpr::Arg(0) },
                    Instr::Get(tb_origin),
                    Instr::Sub(ValueExpr::Arg(0)),
                    Instr::Put(tb_origin),
                    Instr::Get(KeyExpr::Balance { owner: AddrExpr::Dest }),
                    Instr::Sub(ValueExpr::Arg(0)),
                    Instr::Put(KeyExpr::Balance { owner: AddrExpr::Dest }),
                    Instr::Get(KeyExpr::Balance { owner: AddrExpr::Origin }),
                    Instr::Add(ValueExpr::Arg(0)),
                    Instr::Put(KeyExpr::Balance { owner: AddrExpr::Origin }),
                ],
                ..Default::default()
            },
        );
        registry.insert(wallet, wallet_def);

        // Price oracle: storage only, no callable functions, never written.
        registry.insert(oracle, ContractDef::default());

        // router.route -> middle.hop -> leaf.fire, where only the leaf holds
        // a CALL. Bodies inline the transitive effect: bumping a counter on a
        // shared sink account.
        let bump_sink = vec![
            Instr::Get(KeyExpr::Slot { contract: AddrExpr::Const(sink), slot: 0 }),
            Instr::Add(ValueExpr::Const(1)),
            Instr::Put(KeyExpr::Slot { contract: AddrExpr::Const(sink), slot: 0 }),
        ];
        let mut router_def = ContractDef::default();
        router_def.functions.insert(
            SIG_ROUTE,
            FunctionDef {
                calls: vec![(CallTarget::Contract(middle), SIG_HOP)],
                body: bump_sink.clone(),
                ..Default::default()
            },
        );
        registry.insert(router, router_def);
        let mut middle_def = ContractDef::default();
        middle_def.functions.insert(
            SIG_HOP,
            FunctionDef {
                calls: vec![(CallTarget::Contract(leaf), SIG_FIRE)],
                body: bump_sink.clone(),
                ..Default::default()
            },
        );
        registry.insert(middle, middle_def);
        let mut leaf_def = ContractDef::default();
        leaf_def.functions.insert(
            SIG_FIRE,
            FunctionDef {
                opcodes: [Opcode::Call].into_iter().collect(),
                body: bump_sink,
                ..Default::default()
            },
        );
        registry.insert(leaf, leaf_def);

        // Proxy forwarding to a target picked from calldata.
        let mut proxy_def = ContractDef::default();
        proxy_def.functions.insert(
            SIG_FORWARD,
            FunctionDef {
                calls: vec![(CallTarget::Dynamic, SIG_FIRE)],
                body: vec![
                    Instr::Get(tb_origin),
                    Instr::Add(ValueExpr::Const(1)),
                    Instr::Put(tb_origin),
                ],
                ..Default::default()
            },
        );
        registry.insert(proxy, proxy_def);
        registry.insert(sink, ContractDef::default());

        World {
            registry,
            token,
            wallet,
            oracle,
            router,
            middle,
            leaf,
            proxy,
            sink,
            coinbase: Address(0xfee0),
        }
    }

    pub fn call_add_to_wallet(&self, index: u32, origin: u64, value: Value) -> Transaction {
        Transaction {
            index,
            origin: Address(origin),
            dest: self.wallet,
            value,
            payload: Payload::ContractCall { sig: SIG_ADD_TO_WALLET, args: vec![] },
            gas_fee: 1,
            synthetic_work: 0,
        }
    }

    pub fn call_withdraw(&self, index: u32, origin: u64, amount: Value) -> Transaction {
        Transaction {
            index,
            origin: Address(origin),
            dest: self.wallet,
            value: 0,
            payload: Payload::ContractCall { sig: SIG_WITHDRAW, args: vec![CallArg::Val(amount)] },
            gas_fee: 1,
            synthetic_work: 0,
        }
    }

    pub fn call_turn_ether(&self, index: u32, origin: u64, value: Value) -> Transaction {
        Transaction {
            index,
            origin: Address(origin),
            dest: self.token,
            value,
            payload: Payload::ContractCall { sig: SIG_TURN_ETHER_TO_TOKEN, args: vec![] },
            gas_fee: 1,
            synthetic_work: 0,
        }
    }

    pub fn call_route(&self, index: u32, origin: u64) -> Transaction {
        Transaction {
            index,
            origin: Address(origin),
            dest: self.router,
            value: 0,
            payload: Payload::ContractCall { sig: SIG_ROUTE, args: vec![] },
            gas_fee: 1,
            synthetic_work: 0,
        }
    }

    pub fn call_forward(&self, index: u32, origin: u64) -> Transaction {
        Transaction {
            index,
            origin: Address(origin),
            dest: self.proxy,
            value: 0,
            payload: Payload::ContractCall { sig: SIG_FORWARD, args: vec![] },
            gas_fee: 1,
            synthetic_work: 0,
        }
    }

    pub fn funded_base(&self, accounts: &[u64]) -> BaseState {
        let mut base = BaseState::new();
        for &a in accounts {
            base.insert(StateKey::balance(Address(a)), 1_000_000);
        }
        base
    }
}

/// A mixed block over the corpus world: payments, token transfers and
/// scripted calls of every label class, with a base state that funds the
/// common case while leaving a deterministic share of reverts.
pub fn corpus_block(size: usize, seed: u64, work: u64) -> (Block, BaseState, World) {
    let world = World::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0_95);
    let eoa_pool: Vec<u64> = (0..size.max(8) as u64).map(|i| 0x1_0000 + i).collect();
    let mut base = BaseState::new();
    for &a in &eoa_pool {
        base.insert(StateKey::balance(Address(a)), 1_000_000);
        base.insert(StateKey::token_balance(world.token, Address(a)), 10_000);
        base.insert(StateKey::token_balance(world.wallet, Address(a)), 100);
    }
    base.insert(StateKey::balance(world.wallet), 5_000);
    base.insert(StateKey::slot(world.oracle, 0), 250);

    let mut txns = Vec::with_capacity(size);
    for index in 0..size as u32 {
        let o = *eoa_pool.choose(&mut rng).unwrap();
        let txn = match rng.gen_range(0..100u32) {
            0..=29 => {
                let d = *eoa_pool.choose(&mut rng).unwrap();
                Transaction {
                    index,
                    origin: Address(o),
                    dest: Address(d),
                    value: rng.gen_range(1..50),
                    payload: Payload::Native,
                    gas_fee: 1,
                    synthetic_work: work,
                }
            }
            30..=54 => {
                let t = *eoa_pool.choose(&mut rng).unwrap();
                Transaction {
                    index,
                    origin: Address(o),
                    dest: world.token,
                    value: 0,
                    payload: Payload::TokenTransfer {
                        target: Address(t),
                        amount: rng.gen_range(1..20),
                    },
                    gas_fee: 1,
                    synthetic_work: work,
                }
            }
            55..=74 => world.call_add_to_wallet(index, o, rng.gen_range(1..10)),
            75..=84 => world.call_turn_ether(index, o, rng.gen_range(0..5)),
            // Some withdrawals exceed the funded wallet balance and revert.
            85..=91 => world.call_withdraw(index, o, rng.gen_range(1..200)),
            92..=96 => world.call_route(index, o),
            _ => world.call_forward(index, o),
        };
        let mut txn = txn;
        txn.synthetic_work = work;
        txns.push(txn);
    }
    (Block::new(world.coinbase, txns), base, world)
}
