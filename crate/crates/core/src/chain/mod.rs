//! Idealized smart-contract platform: balances, an append-only log and a clock.
//!
//! All mutation goes through [`ChainState::submit`] and [`ChainState::advance_time`].
//! A contract call runs synchronously inside transaction processing; if it returns
//! an error every balance and contract change it made is rolled back, but the
//! transaction still appears in the log with a failed effect.

mod condition;

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use condition::{TxPredicate, VerifiableCondition};

/// First id handed out to deployed contracts; EOAs live below it.
pub const CONTRACT_ID_BASE: u64 = 1 << 40;

/// Nested contract calls deeper than this fail.
pub const MAX_CALL_DEPTH: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(pub u64);

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountKind {
    Eoa,
    Contract,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Account {
    pub id: AccountId,
    pub balance: u64,
    pub kind: AccountKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub issuer: AccountId,
    pub target: AccountId,
    pub function: String,
    #[serde(default)]
    pub args: Vec<Value>,
    #[serde(default)]
    pub attached_coins: u64,
    pub issue_time: u64,
}

impl Transaction {
    pub fn call(issuer: AccountId, target: AccountId, function: &str, args: Vec<Value>, coins: u64, at: u64) -> Self {
        Transaction { issuer, target, function: function.to_string(), args, attached_coins: coins, issue_time: at }
    }

    pub fn transfer(issuer: AccountId, target: AccountId, coins: u64, at: u64) -> Self {
        Self::call(issuer, target, "transfer", Vec::new(), coins, at)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Effect {
    Applied { result: Value },
    Failed { reason: String },
}

impl Effect {
    pub fn is_applied(&self) -> bool {
        matches!(self, Effect::Applied { .. })
    }
}

/// One processed transaction (or a contract tick that changed something).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub time: u64,
    pub issuer: AccountId,
    pub target: AccountId,
    pub function: String,
    pub args: Vec<Value>,
    pub attached_coins: u64,
    pub effect: Effect,
    pub balances_after: BTreeMap<AccountId, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("account {0} is not an externally owned account")]
    NonEoaIssuer(AccountId),
    #[error("transaction time {issue_time} precedes the clock ({clock})")]
    StaleTimestamp { issue_time: u64, clock: u64 },
    #[error("account {0} already exists")]
    DuplicateAccount(AccountId),
}

/// Failure inside contract logic; the call's effects are rolled back.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("insufficient balance: {account} holds {balance}, needs {needed}")]
    InsufficientBalance { account: AccountId, balance: u64, needed: u64 },
    #[error("unknown account {0}")]
    UnknownAccount(AccountId),
    #[error("call depth limit {MAX_CALL_DEPTH} exceeded")]
    CallDepthExceeded,
    #[error("re-entrant call into {0}")]
    Reentrant(AccountId),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("{0}")]
    Rejected(String),
}

/// Contract logic hosted on the platform.
pub trait Contract: Send + Sync + 'static {
    fn call(&mut self, ctx: &mut CallContext<'_>, function: &str, args: &[Value]) -> Result<Value, ContractError>;

    /// Runs after every clock advance and every processed transaction. Returning
    /// `Some` records a tick entry in the log.
    fn on_tick(&mut self, _ctx: &mut CallContext<'_>) -> Option<Value> {
        None
    }

    fn clone_box(&self) -> Box<dyn Contract>;

    fn as_any(&self) -> &dyn Any;
}

impl Clone for Box<dyn Contract> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

type Ledger = BTreeMap<AccountId, Account>;
type Contracts = BTreeMap<AccountId, Box<dyn Contract>>;

/// Execution environment handed to contract code.
pub struct CallContext<'a> {
    pub self_id: AccountId,
    pub caller: AccountId,
    /// The EOA that issued the enclosing transaction.
    pub origin: AccountId,
    pub attached: u64,
    pub now: u64,
    pub log: &'a [LogEntry],
    ledger: &'a mut Ledger,
    contracts: &'a mut Contracts,
    depth: usize,
}

impl CallContext<'_> {
    pub fn balance(&self, id: AccountId) -> Option<u64> {
        self.ledger.get(&id).map(|a| a.balance)
    }

    pub fn own_balance(&self) -> u64 {
        self.balance(self.self_id).unwrap_or(0)
    }

    /// Pays `amount` out of the calling contract's balance.
    pub fn transfer(&mut self, to: AccountId, amount: u64) -> Result<(), ContractError> {
        move_coins(self.ledger, self.self_id, to, amount)
    }

    pub fn matured(&self, cnd: &VerifiableCondition) -> bool {
        cnd.matured(self.now, self.log)
    }

    pub fn mature_time(&self, cnd: &VerifiableCondition) -> Option<u64> {
        cnd.mature_time(self.now, self.log)
    }

    /// Synchronous call into another contract, atomic on its own.
    pub fn call(
        &mut self,
        target: AccountId,
        function: &str,
        args: &[Value],
        coins: u64,
    ) -> Result<Value, ContractError> {
        if self.depth + 1 >= MAX_CALL_DEPTH {
            return Err(ContractError::CallDepthExceeded);
        }
        invoke(
            self.ledger,
            self.contracts,
            self.log,
            Frame { target, caller: self.self_id, origin: self.origin, coins, now: self.now, depth: self.depth + 1 },
            function,
            args,
        )
    }
}

struct Frame {
    target: AccountId,
    caller: AccountId,
    origin: AccountId,
    coins: u64,
    now: u64,
    depth: usize,
}

fn move_coins(ledger: &mut Ledger, from: AccountId, to: AccountId, amount: u64) -> Result<(), ContractError> {
    if !ledger.contains_key(&to) {
        return Err(ContractError::UnknownAccount(to));
    }
    let src = ledger.get_mut(&from).ok_or(ContractError::UnknownAccount(from))?;
    if src.balance < amount {
        return Err(ContractError::InsufficientBalance { account: from, balance: src.balance, needed: amount });
    }
    src.balance -= amount;
    ledger.get_mut(&to).expect("checked above").balance += amount;
    Ok(())
}

fn invoke(
    ledger: &mut Ledger,
    contracts: &mut Contracts,
    log: &[LogEntry],
    frame: Frame,
    function: &str,
    args: &[Value],
) -> Result<Value, ContractError> {
    let ledger_before = ledger.clone();
    let contracts_before = contracts.clone();
    let result = (|| {
        move_coins(ledger, frame.caller, frame.target, frame.coins)?;
        let Some(mut contract) = contracts.remove(&frame.target) else {
            // a contract missing from the map is somewhere up the call stack
            return match ledger.get(&frame.target).map(|a| a.kind) {
                Some(AccountKind::Eoa) => Ok(Value::Null),
                Some(AccountKind::Contract) => Err(ContractError::Reentrant(frame.target)),
                None => Err(ContractError::UnknownAccount(frame.target)),
            };
        };
        let mut ctx = CallContext {
            self_id: frame.target,
            caller: frame.caller,
            origin: frame.origin,
            attached: frame.coins,
            now: frame.now,
            log,
            ledger,
            contracts,
            depth: frame.depth,
        };
        let out = contract.call(&mut ctx, function, args);
        contracts.insert(frame.target, contract);
        out
    })();
    if result.is_err() {
        *ledger = ledger_before;
        *contracts = contracts_before;
    }
    result
}

/// The platform state. Cloning yields an independent snapshot.
#[derive(Clone, Default)]
pub struct ChainState {
    accounts: Ledger,
    contracts: Contracts,
    log: Vec<LogEntry>,
    clock: u64,
    next_contract_id: u64,
}

impl fmt::Debug for ChainState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChainState")
            .field("accounts", &self.accounts)
            .field("contracts", &self.contracts.keys().collect::<Vec<_>>())
            .field("log_len", &self.log.len())
            .field("clock", &self.clock)
            .finish()
    }
}

impl ChainState {
    /// Genesis with the given EOA balances.
    pub fn genesis(balances: impl IntoIterator<Item = (AccountId, u64)>) -> Result<Self, ChainError> {
        let mut state = ChainState { next_contract_id: CONTRACT_ID_BASE, ..Default::default() };
        for (id, balance) in balances {
            state.create_eoa(id, balance)?;
        }
        Ok(state)
    }

    /// Adds an externally owned account. Only meaningful at genesis: coins created
    /// here are part of the conserved supply from then on.
    pub fn create_eoa(&mut self, id: AccountId, balance: u64) -> Result<(), ChainError> {
        if id.0 >= CONTRACT_ID_BASE || self.accounts.contains_key(&id) {
            return Err(ChainError::DuplicateAccount(id));
        }
        self.accounts.insert(id, Account { id, balance, kind: AccountKind::Eoa });
        Ok(())
    }

    /// Deploys a contract with zero balance under the next reserved id.
    pub fn deploy(&mut self, contract: Box<dyn Contract>) -> AccountId {
        let id = AccountId(self.next_contract_id);
        self.next_contract_id += 1;
        self.accounts.insert(id, Account { id, balance: 0, kind: AccountKind::Contract });
        self.contracts.insert(id, contract);
        id
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn account(&self, id: AccountId) -> Option<&Account> {
        self.accounts.get(&id)
    }

    pub fn balance(&self, id: AccountId) -> u64 {
        self.accounts.get(&id).map_or(0, |a| a.balance)
    }

    pub fn balances(&self) -> BTreeMap<AccountId, u64> {
        self.accounts.iter().map(|(id, a)| (*id, a.balance)).collect()
    }

    pub fn total_supply(&self) -> u64 {
        self.accounts.values().map(|a| a.balance).sum()
    }

    pub fn matured(&self, cnd: &VerifiableCondition) -> bool {
        cnd.matured(self.clock, &self.log)
    }

    /// Typed read access to a deployed contract.
    pub fn contract<C: Contract>(&self, id: AccountId) -> Option<&C> {
        self.contracts.get(&id).and_then(|c| c.as_any().downcast_ref::<C>())
    }

    /// Appends and processes a batch. Transactions are ordered by issue time, then
    /// by issuer id. Structural problems (unknown accounts, contract issuers, times
    /// in the past) reject the whole batch before anything is logged.
    pub fn submit(&mut self, mut txs: Vec<Transaction>) -> Result<Vec<u64>, ChainError> {
        txs.sort_by_key(|tx| (tx.issue_time, tx.issuer));
        for tx in &txs {
            let issuer = self.accounts.get(&tx.issuer).ok_or(ChainError::UnknownAccount(tx.issuer))?;
            if issuer.kind != AccountKind::Eoa {
                return Err(ChainError::NonEoaIssuer(tx.issuer));
            }
            if !self.accounts.contains_key(&tx.target) {
                return Err(ChainError::UnknownAccount(tx.target));
            }
            if tx.issue_time < self.clock {
                return Err(ChainError::StaleTimestamp { issue_time: tx.issue_time, clock: self.clock });
            }
        }
        let mut seqs = Vec::with_capacity(txs.len());
        for tx in txs {
            if tx.issue_time > self.clock {
                self.advance_time(tx.issue_time - self.clock);
            }
            seqs.push(self.process(tx));
            self.run_ticks();
        }
        Ok(seqs)
    }

    fn process(&mut self, tx: Transaction) -> u64 {
        let balance = self.balance(tx.issuer);
        let effect = if balance < tx.attached_coins {
            Effect::Failed {
                reason: ContractError::InsufficientBalance { account: tx.issuer, balance, needed: tx.attached_coins }
                    .to_string(),
            }
        } else {
            let frame = Frame {
                target: tx.target,
                caller: tx.issuer,
                origin: tx.issuer,
                coins: tx.attached_coins,
                now: self.clock,
                depth: 0,
            };
            match invoke(&mut self.accounts, &mut self.contracts, &self.log, frame, &tx.function, &tx.args) {
                Ok(result) => Effect::Applied { result },
                Err(e) => Effect::Failed { reason: e.to_string() },
            }
        };
        self.append(tx.issuer, tx.target, tx.function, tx.args, tx.attached_coins, effect)
    }

    fn append(
        &mut self,
        issuer: AccountId,
        target: AccountId,
        function: String,
        args: Vec<Value>,
        attached_coins: u64,
        effect: Effect,
    ) -> u64 {
        let seq = self.log.len() as u64;
        let entry = LogEntry {
            seq,
            time: self.clock,
            issuer,
            target,
            function,
            args,
            attached_coins,
            effect,
            balances_after: self.balances(),
        };
        self.log.push(entry);
        seq
    }

    /// Moves the clock forward and fires contract ticks in ascending id order.
    pub fn advance_time(&mut self, dt: u64) {
        if dt == 0 {
            return;
        }
        self.clock += dt;
        self.run_ticks();
    }

    fn run_ticks(&mut self) {
        let ids: Vec<AccountId> = self.contracts.keys().copied().collect();
        for id in ids {
            let mut contract = self.contracts.remove(&id).expect("listed above");
            let mut ctx = CallContext {
                self_id: id,
                caller: id,
                origin: id,
                attached: 0,
                now: self.clock,
                log: &self.log,
                ledger: &mut self.accounts,
                contracts: &mut self.contracts,
                depth: 0,
            };
            let event = contract.on_tick(&mut ctx);
            self.contracts.insert(id, contract);
            if let Some(result) = event {
                self.append(id, id, "tick".to_string(), Vec::new(), 0, Effect::Applied { result });
            }
        }
    }

    /// One JSON line per log entry, keys in a fixed order.
    pub fn trace_lines(&self) -> Vec<String> {
        self.log.iter().map(|e| serde_json::to_string(e).expect("log entries serialize")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    /// Stores attached coins; `payout` sends them to an account; `fail` always errors
    /// after paying out, to check rollback; `relay` calls another contract.
    #[derive(Clone, Default)]
    struct Vault {
        calls: u64,
    }

    impl Contract for Vault {
        fn call(&mut self, ctx: &mut CallContext<'_>, function: &str, args: &[Value]) -> Result<Value, ContractError> {
            self.calls += 1;
            match function {
                "deposit" => Ok(json!(ctx.own_balance())),
                "payout" => {
                    let to = AccountId(args[0].as_u64().unwrap());
                    ctx.transfer(to, args[1].as_u64().unwrap())?;
                    Ok(Value::Null)
                }
                "fail" => {
                    ctx.transfer(ctx.origin, ctx.own_balance())?;
                    Err(ContractError::Rejected("nope".into()))
                }
                "relay" => {
                    let target = AccountId(args[0].as_u64().unwrap());
                    ctx.call(target, "relay", args, 0)
                }
                other => Err(ContractError::UnknownFunction(other.into())),
            }
        }

        fn clone_box(&self) -> Box<dyn Contract> {
            Box::new(self.clone())
        }

        fn as_any(&self) -> &dyn Any {
            self
        }
    }

    fn chain() -> ChainState {
        ChainState::genesis([(AccountId(3), 3), (AccountId(4), 4), (AccountId(5), 5)]).unwrap()
    }

    #[test]
    fn genesis_supply() {
        assert_eq!(chain().total_supply(), 12);
    }

    #[test]
    fn transfer_conserves_supply() {
        let mut c = chain();
        c.submit(vec![Transaction::transfer(AccountId(5), AccountId(3), 5, 0)]).unwrap();
        assert_eq!(c.balance(AccountId(5)), 0);
        assert_eq!(c.balance(AccountId(3)), 8);
        assert_eq!(c.total_supply(), 12);
    }

    #[test]
    fn empty_batch_is_identity() {
        let mut c = chain();
        let before = (c.balances(), c.log().len(), c.clock());
        c.submit(vec![]).unwrap();
        assert_eq!(before, (c.balances(), c.log().len(), c.clock()));
        c.advance_time(0);
        assert_eq!(before, (c.balances(), c.log().len(), c.clock()));
    }

    #[test]
    fn equal_time_ordered_by_issuer() {
        let mut c = ChainState::genesis([(AccountId(3), 1), (AccountId(7), 1)]).unwrap();
        let vault = c.deploy(Box::new(Vault::default()));
        c.submit(vec![
            Transaction::call(AccountId(7), vault, "deposit", vec![], 1, 10),
            Transaction::call(AccountId(3), vault, "deposit", vec![], 1, 10),
        ])
        .unwrap();
        let issuers: Vec<_> = c.log().iter().map(|e| e.issuer).collect();
        assert_eq!(issuers, vec![AccountId(3), AccountId(7)]);
        assert_eq!(c.log()[0].effect, Effect::Applied { result: json!(1) });
    }

    #[test]
    fn insufficient_balance_is_logged_noop() {
        let mut c = chain();
        c.submit(vec![Transaction::transfer(AccountId(3), AccountId(4), 4, 0)]).unwrap();
        assert_eq!(c.log().len(), 1);
        assert!(!c.log()[0].effect.is_applied());
        assert_eq!(c.balance(AccountId(3)), 3);
    }

    #[test]
    fn structural_errors_reject_before_logging() {
        let mut c = chain();
        let vault = c.deploy(Box::new(Vault::default()));
        assert_eq!(
            c.submit(vec![Transaction::transfer(vault, AccountId(3), 0, 0)]),
            Err(ChainError::NonEoaIssuer(vault))
        );
        assert_eq!(
            c.submit(vec![Transaction::transfer(AccountId(99), AccountId(3), 0, 0)]),
            Err(ChainError::UnknownAccount(AccountId(99)))
        );
        c.advance_time(5);
        assert!(matches!(
            c.submit(vec![Transaction::transfer(AccountId(3), AccountId(4), 1, 2)]),
            Err(ChainError::StaleTimestamp { .. })
        ));
        assert!(c.log().is_empty());
    }

    #[test]
    fn failed_call_rolls_back_but_is_logged() {
        let mut c = chain();
        let vault = c.deploy(Box::new(Vault::default()));
        c.submit(vec![Transaction::call(AccountId(4), vault, "deposit", vec![], 4, 0)]).unwrap();
        c.submit(vec![Transaction::call(AccountId(3), vault, "fail", vec![], 2, 0)]).unwrap();
        assert_eq!(c.balance(vault), 4);
        assert_eq!(c.balance(AccountId(3)), 3);
        assert_eq!(c.contract::<Vault>(vault).unwrap().calls, 1);
        assert_eq!(c.log().len(), 2);
        assert_eq!(c.total_supply(), 12);
    }

    #[test]
    fn call_depth_is_bounded() {
        let mut c = chain();
        let a = c.deploy(Box::new(Vault::default()));
        let b = c.deploy(Box::new(Vault::default()));
        // a -> b -> a is re-entrant
        c.submit(vec![Transaction::call(AccountId(3), a, "relay", vec![json!(b.0)], 0, 0)]).unwrap();
        let Effect::Failed { reason } = &c.log()[0].effect else { panic!() };
        assert!(reason.contains("re-entrant"), "{reason}");
    }

    #[test]
    fn conditions() {
        let mut c = chain();
        let t100 = VerifiableCondition::time_at_least(100);
        c.advance_time(99);
        assert!(!c.matured(&t100));
        c.advance_time(1);
        assert!(c.matured(&t100));

        let pred = TxPredicate { issuer: Some(AccountId(4)), function: Some("transfer".into()), ..Default::default() };
        let present = VerifiableCondition::TxPresent { pred };
        let both = VerifiableCondition::And { all: vec![VerifiableCondition::time_at_least(10), present.clone()] };
        assert!(!c.matured(&present));
        assert!(!c.matured(&both));
        c.submit(vec![Transaction::transfer(AccountId(4), AccountId(5), 1, 120)]).unwrap();
        assert!(c.matured(&present));
        assert_eq!(both.mature_time(c.clock(), c.log()), Some(120));
        let either = VerifiableCondition::Or { any: vec![t100, present] };
        assert_eq!(either.mature_time(c.clock(), c.log()), Some(100));
    }

    #[test]
    fn condition_serde_shape() {
        let cnd: VerifiableCondition =
            serde_json::from_value(json!({"kind": "and", "all": [{"kind": "time_at_least", "at": 5}]})).unwrap();
        assert_eq!(cnd, VerifiableCondition::And { all: vec![VerifiableCondition::time_at_least(5)] });
    }
}
