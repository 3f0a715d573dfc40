use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{valid_transition, EscrowConfig, EscrowError, EscrowParams, EscrowPhase, MIN_PLAYERS};
use crate::chain::{AccountId, CallContext, Contract, ContractError, VerifiableCondition};
use crate::groupcrypto::{
    commit_digest, extract_bits, ver, vrf_verify, Digest, DleqProof, FeldmanCommitment, GroupElement, GroupParams,
    Scalar,
};
use crate::scalar::GroupInt;

/// The value released at a round: `x` for single-shot runs, `(sigma, proof)` for
/// multi-shot ones.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, bound = "")]
pub enum RoundSecret<T: GroupInt> {
    Scalar(Scalar<T>),
    Vrf { sigma: GroupElement<T>, proof: DleqProof<T> },
}

impl<T: GroupInt> RoundSecret<T> {
    /// Bytes hashed into an inform commitment.
    pub fn encoding(&self, params: &GroupParams<T>) -> Vec<u8> {
        match self {
            RoundSecret::Scalar(x) => params.encode_scalar(x),
            RoundSecret::Vrf { sigma, .. } => params.encode_element(sigma),
        }
    }

    pub fn inform_digest(&self, params: &GroupParams<T>, acc: AccountId) -> Digest {
        commit_digest(&self.encoding(params), acc)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("secrets serialize")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payout {
    pub to: AccountId,
    pub amount: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Settlement {
    /// Informant paid `ell`, every deposit forfeited.
    Informed { informant: AccountId },
    /// Every deposit returned after the last round.
    Repaid,
    /// A reveal window closed; every deposit stays in the contract.
    Confiscated,
    /// Commit failed; honest slots refunded, the rest kept.
    CommitFailed { refunded: Vec<u64>, confiscated: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RevealedRound<T: GroupInt> {
    pub round: u32,
    pub sigma: GroupElement<T>,
    pub proof: DleqProof<T>,
    pub random_bits: Digest,
    pub time: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingInform {
    pub digest: Digest,
    pub depositor: AccountId,
    pub commit_time: u64,
    pub deposit: u64,
}

/// Everything an application or test may read.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EscrowView<T: GroupInt> {
    #[serde(flatten)]
    pub phase: EscrowPhase,
    #[serde(rename = "verCom")]
    pub ver_com: Option<bool>,
    #[serde(rename = "verRev")]
    pub ver_rev: Vec<Option<bool>>,
    #[serde(rename = "X")]
    pub public_key: Option<GroupElement<T>>,
    pub x: Option<Scalar<T>>,
    pub params: Option<EscrowParams>,
    pub accounts: Vec<AccountId>,
    pub rounds: Vec<RevealedRound<T>>,
    pub payouts: Vec<Payout>,
    pub settlement: Option<Settlement>,
    pub pending_inform: Option<PendingInform>,
    pub confiscated_inform_deposits: u64,
    pub history: Vec<(u64, EscrowPhase)>,
}

#[derive(Clone, Debug)]
pub struct EscrowContract<T: GroupInt> {
    group: GroupParams<T>,
    config: EscrowConfig,
    phase: EscrowPhase,
    accounts: Vec<AccountId>,
    params: Option<EscrowParams>,
    commit_start: u64,
    commitments: BTreeMap<u64, FeldmanCommitment<T>>,
    complaints: BTreeSet<(u64, u64)>,
    public_key: Option<GroupElement<T>>,
    x: Option<Scalar<T>>,
    rounds: Vec<RevealedRound<T>>,
    ver_com: Option<bool>,
    ver_rev: Vec<Option<bool>>,
    pending_inform: Option<PendingInform>,
    /// When the current round entered `Pending`.
    round_open: u64,
    /// Start of the current reveal window.
    reveal_start: u64,
    payouts: Vec<Payout>,
    settlement: Option<Settlement>,
    history: Vec<(u64, EscrowPhase)>,
    confiscated_inform_deposits: u64,
}

impl<T: GroupInt> EscrowContract<T> {
    pub fn new(group: GroupParams<T>, config: EscrowConfig) -> Self {
        assert!(config.rounds >= 1, "at least one round");
        if let Some(ms) = &config.messages {
            assert_eq!(ms.len(), config.rounds as usize, "one message per round");
        }
        EscrowContract {
            group,
            config,
            phase: EscrowPhase::Registration,
            accounts: Vec::new(),
            params: None,
            commit_start: 0,
            commitments: BTreeMap::new(),
            complaints: BTreeSet::new(),
            public_key: None,
            x: None,
            rounds: Vec::new(),
            ver_com: None,
            ver_rev: Vec::new(),
            pending_inform: None,
            round_open: 0,
            reveal_start: 0,
            payouts: Vec::new(),
            settlement: None,
            history: vec![(0, EscrowPhase::Registration)],
            confiscated_inform_deposits: 0,
        }
    }

    pub fn phase(&self) -> EscrowPhase {
        self.phase
    }

    pub fn group(&self) -> &GroupParams<T> {
        &self.group
    }

    pub fn config(&self) -> &EscrowConfig {
        &self.config
    }

    pub fn params(&self) -> Option<&EscrowParams> {
        self.params.as_ref()
    }

    pub fn accounts(&self) -> &[AccountId] {
        &self.accounts
    }

    pub fn public_key(&self) -> Option<&GroupElement<T>> {
        self.public_key.as_ref()
    }

    pub fn payouts(&self) -> &[Payout] {
        &self.payouts
    }

    pub fn settlement(&self) -> Option<&Settlement> {
        self.settlement.as_ref()
    }

    pub fn view(&self) -> EscrowView<T> {
        EscrowView {
            phase: self.phase,
            ver_com: self.ver_com,
            ver_rev: self.ver_rev.clone(),
            public_key: self.public_key.clone(),
            x: self.x.clone(),
            params: self.params.clone(),
            accounts: self.accounts.clone(),
            rounds: self.rounds.clone(),
            payouts: self.payouts.clone(),
            settlement: self.settlement.clone(),
            pending_inform: self.pending_inform.clone(),
            confiscated_inform_deposits: self.confiscated_inform_deposits,
            history: self.history.clone(),
        }
    }

    fn set_phase(&mut self, now: u64, to: EscrowPhase) {
        assert!(valid_transition(self.phase, to, self.config.rounds), "illegal transition {} -> {}", self.phase, to);
        self.phase = to;
        self.history.push((now, to));
    }

    fn wrong_phase(&self, function: &str) -> EscrowError {
        EscrowError::WrongPhase { function: function.to_string(), phase: self.phase }
    }

    fn pay(
        &mut self,
        ctx: &mut CallContext<'_>,
        to: AccountId,
        amount: u64,
        reason: &str,
    ) -> Result<(), ContractError> {
        ctx.transfer(to, amount)?;
        self.payouts.push(Payout { to, amount, reason: reason.to_string() });
        Ok(())
    }

    fn fixed(&self) -> &EscrowParams {
        self.params.as_ref().expect("params are set once the commit phase starts")
    }

    fn slot_owner(&self, slot: u64) -> Option<AccountId> {
        slot.checked_sub(1).and_then(|i| self.accounts.get(i as usize)).copied()
    }

    fn register(&mut self, ctx: &mut CallContext<'_>, args: &[Value], count: u64) -> Result<Value, ContractError> {
        if self.phase != EscrowPhase::Registration {
            return Err(self.wrong_phase("register").into());
        }
        if count == 0 || ctx.attached != count {
            return Err(EscrowError::WrongDeposit { attached: ctx.attached, expected: count }.into());
        }
        let acc = match args.first() {
            None => ctx.caller,
            Some(v) => parse::<AccountId>(v)?,
        };
        if ctx.balance(acc).is_none() {
            return Err(ContractError::UnknownAccount(acc));
        }
        let first = self.accounts.len() as u64 + 1;
        self.accounts.extend(std::iter::repeat_n(acc, count as usize));
        Ok(json!({ "slots": (first..first + count).collect::<Vec<_>>() }))
    }

    fn com_trigger(&mut self, ctx: &mut CallContext<'_>, args: &[Value]) -> Result<Value, ContractError> {
        if self.phase != EscrowPhase::Registration {
            return Err(self.wrong_phase("comTrigger").into());
        }
        if ctx.caller != self.config.application {
            return Err(EscrowError::NotApplication(ctx.caller).into());
        }
        let n = self.accounts.len() as u64;
        if n < MIN_PLAYERS {
            return Err(EscrowError::TooFewPlayers(n).into());
        }
        let need = self.config.rounds as usize;
        if args.len() != need {
            return Err(EscrowError::WrongConditionCount { got: args.len(), need }.into());
        }
        let cnd = args.iter().map(parse::<VerifiableCondition>).collect::<Result<Vec<_>, _>>()?;
        let params = EscrowParams::for_n(n, cnd);
        let out = json!({ "n": params.n, "t": params.t, "P": params.p, "ell": params.ell });
        self.params = Some(params);
        self.commit_start = ctx.now;
        self.ver_rev = vec![None; need];
        self.set_phase(ctx.now, EscrowPhase::Commit);
        Ok(out)
    }

    fn interact_commit(&mut self, ctx: &mut CallContext<'_>, args: &[Value]) -> Result<Value, ContractError> {
        if self.phase != EscrowPhase::Commit {
            return Err(self.wrong_phase("interactCommit").into());
        }
        let frag = args.first().ok_or_else(|| EscrowError::BadArgs("missing fragment".into()))?;
        let n = self.fixed().n;
        let t = self.fixed().t;
        let owns = |slot: u64| self.slot_owner(slot) == Some(ctx.caller);
        if let Some(dealer) = frag.get("dealer") {
            let slot: u64 = parse(dealer)?;
            if !owns(slot) {
                return Err(EscrowError::NotSlotOwner { caller: ctx.caller, slot }.into());
            }
            if self.commitments.contains_key(&slot) {
                return Err(EscrowError::DuplicateFragment(slot).into());
            }
            let raw: Vec<String> = parse(frag.get("commitment").unwrap_or(&Value::Null))?;
            if raw.len() as u64 != t + 1 {
                return Err(EscrowError::BadArgs(format!("commitment needs {} elements", t + 1)).into());
            }
            let mut coeff_commits = Vec::with_capacity(raw.len());
            for s in raw {
                let v: T = s.parse().map_err(|_| EscrowError::BadArgs(format!("not an integer: {s}")))?;
                let e = self.group.element(v).map_err(|e| EscrowError::BadArgs(e.to_string()))?;
                coeff_commits.push(e);
            }
            self.commitments.insert(slot, FeldmanCommitment { coeff_commits });
            Ok(json!({ "dealer": slot }))
        } else if let Some(c) = frag.get("complaint") {
            let (a, b): (u64, u64) = parse(c)?;
            if !owns(a) {
                return Err(EscrowError::NotSlotOwner { caller: ctx.caller, slot: a }.into());
            }
            if a == b || !(1..=n).contains(&b) {
                return Err(EscrowError::BadArgs(format!("cannot accuse slot {b}")).into());
            }
            self.complaints.insert((a, b));
            Ok(json!({ "complaint": [a, b] }))
        } else {
            Err(EscrowError::BadArgs("fragment needs `dealer` or `complaint`".into()).into())
        }
    }

    fn finish_commit(&mut self, ctx: &mut CallContext<'_>) -> Value {
        let n = self.fixed().n;
        if self.complaints.is_empty() && self.commitments.len() as u64 == n {
            let x =
                self.commitments.values().fold(self.group.identity(), |acc, c| self.group.mul(&acc, c.public_key()));
            self.public_key = Some(x.clone());
            self.ver_com = Some(true);
            self.round_open = ctx.now;
            self.set_phase(ctx.now, EscrowPhase::Pending(1));
            return json!({ "event": "commit_succeeded", "X": x });
        }
        self.ver_com = Some(false);
        let accused: BTreeSet<u64> = self.complaints.iter().map(|&(_, b)| b).collect();
        let (mut refunded, mut confiscated) = (Vec::new(), Vec::new());
        for slot in 1..=n {
            if self.commitments.contains_key(&slot) && !accused.contains(&slot) {
                let to = self.slot_owner(slot).expect("slot in range");
                self.pay(ctx, to, 1, "commit_refund").expect("contract holds every deposit");
                refunded.push(slot);
            } else {
                confiscated.push(slot);
            }
        }
        let event = json!({ "event": "commit_failed", "refunded": refunded, "confiscated": confiscated });
        self.settlement = Some(Settlement::CommitFailed { refunded, confiscated });
        self.set_phase(ctx.now, EscrowPhase::Abort);
        event
    }

    fn parse_secret(&self, v: &Value) -> Result<RoundSecret<T>, ContractError> {
        let secret: RoundSecret<T> = parse(v)?;
        match (&secret, self.config.multi_shot()) {
            (RoundSecret::Scalar(_), false) | (RoundSecret::Vrf { .. }, true) => Ok(secret),
            _ => Err(EscrowError::BadArgs("secret kind does not match the run".into()).into()),
        }
    }

    /// Checks a released value against `X` (single-shot) or the round-`i` VRF.
    fn verify_secret(&self, secret: &RoundSecret<T>, round: u32) -> bool {
        let pk = self.public_key.as_ref().expect("set after commit");
        match secret {
            RoundSecret::Scalar(x) => x.0 < self.group.q && ver(&self.group, x, pk),
            RoundSecret::Vrf { sigma, proof } => vrf_verify(&self.group, pk, &self.config.message(round), sigma, proof),
        }
    }

    fn record_secret(&mut self, secret: RoundSecret<T>, round: u32, now: u64) {
        match secret {
            RoundSecret::Scalar(x) => self.x = Some(x),
            RoundSecret::Vrf { sigma, proof } => {
                let random_bits = extract_bits(&self.group, &sigma);
                self.rounds.push(RevealedRound { round, sigma, proof, random_bits, time: now });
            }
        }
    }

    fn inform_commit(&mut self, ctx: &mut CallContext<'_>, args: &[Value]) -> Result<Value, ContractError> {
        if !matches!(self.phase, EscrowPhase::Pending(_)) {
            return Err(self.wrong_phase("informCommit").into());
        }
        if let Some(p) = &self.pending_inform {
            return Err(EscrowError::AlreadyPending(p.depositor).into());
        }
        let needed = self.config.inform_deposit;
        if ctx.attached < needed {
            return Err(EscrowError::MissingDeposit { attached: ctx.attached, needed }.into());
        }
        if ctx.attached > needed {
            return Err(EscrowError::WrongDeposit { attached: ctx.attached, expected: needed }.into());
        }
        let digest: Digest = parse(args.first().unwrap_or(&Value::Null))?;
        self.pending_inform =
            Some(PendingInform { digest, depositor: ctx.caller, commit_time: ctx.now, deposit: needed });
        Ok(json!({ "ready_at": ctx.now + self.config.inform_delay }))
    }

    fn inform_reveal(&mut self, ctx: &mut CallContext<'_>, args: &[Value]) -> Result<Value, ContractError> {
        let round = match self.phase {
            EscrowPhase::Pending(i) => i,
            EscrowPhase::Reveal(_) => return Err(EscrowError::CndMatured.into()),
            _ => return Err(self.wrong_phase("informReveal").into()),
        };
        let pending = self.pending_inform.clone().ok_or(EscrowError::NoPendingInform)?;
        let ready_at = pending.commit_time + self.config.inform_delay;
        if ctx.now < ready_at {
            return Err(EscrowError::TooEarly { ready_at }.into());
        }
        let [secret, acc] = args else {
            return Err(EscrowError::BadArgs("expected [secret, acc]".into()).into());
        };
        let secret = self.parse_secret(secret)?;
        let acc: AccountId = parse(acc)?;
        if secret.inform_digest(&self.group, acc) != pending.digest {
            return Err(EscrowError::DigestMismatch.into());
        }
        self.pending_inform = None;
        let ok = self.verify_secret(&secret, round);
        self.ver_rev[round as usize - 1] = Some(ok);
        if !ok {
            self.confiscated_inform_deposits += pending.deposit;
            return Ok(json!({ "informed": false }));
        }
        self.pay(ctx, pending.depositor, pending.deposit, "inform_deposit_refund")?;
        self.settle_inform(ctx, secret, round, acc)
    }

    /// One-step `inform(x, acc)`, no front-running protection.
    fn inform_atomic(&mut self, ctx: &mut CallContext<'_>, args: &[Value]) -> Result<Value, ContractError> {
        let round = match self.phase {
            EscrowPhase::Pending(i) => i,
            EscrowPhase::Reveal(_) => return Err(EscrowError::CndMatured.into()),
            _ => return Err(self.wrong_phase("inform").into()),
        };
        let [secret, acc] = args else {
            return Err(EscrowError::BadArgs("expected [secret, acc]".into()).into());
        };
        let secret = self.parse_secret(secret)?;
        let acc: AccountId = parse(acc)?;
        let ok = self.verify_secret(&secret, round);
        self.ver_rev[round as usize - 1] = Some(ok);
        if !ok {
            return Ok(json!({ "informed": false }));
        }
        self.settle_inform(ctx, secret, round, acc)
    }

    fn settle_inform(
        &mut self,
        ctx: &mut CallContext<'_>,
        secret: RoundSecret<T>,
        round: u32,
        acc: AccountId,
    ) -> Result<Value, ContractError> {
        let ell = self.fixed().ell;
        self.pay(ctx, acc, ell, "inform_reward")?;
        self.record_secret(secret, round, ctx.now);
        self.settlement = Some(Settlement::Informed { informant: acc });
        self.set_phase(ctx.now, EscrowPhase::Abort);
        Ok(json!({ "informed": true, "reward": ell }))
    }

    fn reveal(&mut self, ctx: &mut CallContext<'_>, args: &[Value]) -> Result<Value, ContractError> {
        let round = match self.phase {
            EscrowPhase::Reveal(i) => i,
            EscrowPhase::Abort if self.settlement == Some(Settlement::Confiscated) => {
                return Err(EscrowError::TooLate.into())
            }
            _ => return Err(self.wrong_phase("reveal").into()),
        };
        let secret = self.parse_secret(args.first().unwrap_or(&Value::Null))?;
        if !self.verify_secret(&secret, round) {
            return Err(EscrowError::BadSecret.into());
        }
        self.ver_rev[round as usize - 1] = Some(true);
        self.record_secret(secret, round, ctx.now);
        if round < self.config.rounds {
            self.round_open = ctx.now;
            self.set_phase(ctx.now, EscrowPhase::Pending(round + 1));
            return Ok(json!({ "round": round }));
        }
        for acc in self.accounts.clone() {
            self.pay(ctx, acc, 1, "deposit_return")?;
        }
        self.settlement = Some(Settlement::Repaid);
        self.set_phase(ctx.now, EscrowPhase::Final);
        Ok(json!({ "round": round, "final": true }))
    }

    fn drop_pending_inform(&mut self) -> Option<Value> {
        let p = self.pending_inform.take()?;
        self.confiscated_inform_deposits += p.deposit;
        Some(json!({ "event": "inform_deposit_confiscated", "depositor": p.depositor }))
    }

    /// Applies every time-driven transition due at `ctx.now`.
    fn poll(&mut self, ctx: &mut CallContext<'_>) -> Vec<Value> {
        let mut events = Vec::new();
        loop {
            match self.phase {
                EscrowPhase::Commit if ctx.now >= self.commit_start + self.config.t_com => {
                    events.push(self.finish_commit(ctx));
                }
                EscrowPhase::Pending(i) => {
                    let stale = self
                        .pending_inform
                        .as_ref()
                        .is_some_and(|p| ctx.now >= p.commit_time + 2 * self.config.inform_delay);
                    if stale {
                        events.extend(self.drop_pending_inform());
                    }
                    let cnd = &self.fixed().cnd[i as usize - 1];
                    let Some(matured_at) = ctx.mature_time(cnd) else { break };
                    events.extend(self.drop_pending_inform());
                    self.reveal_start = matured_at.max(self.round_open);
                    self.set_phase(ctx.now, EscrowPhase::Reveal(i));
                    events.push(json!({ "event": "reveal_open", "round": i, "since": self.reveal_start }));
                }
                EscrowPhase::Reveal(i) if ctx.now >= self.reveal_start + self.config.t_rev => {
                    self.ver_rev[i as usize - 1] = Some(false);
                    self.settlement = Some(Settlement::Confiscated);
                    self.set_phase(ctx.now, EscrowPhase::Abort);
                    events.push(json!({ "event": "reveal_timeout", "round": i }));
                }
                _ => break,
            }
        }
        events
    }
}

fn parse<D: serde::de::DeserializeOwned>(v: &Value) -> Result<D, ContractError> {
    serde_json::from_value(v.clone()).map_err(|e| ContractError::BadArgs(e.to_string()))
}

impl<T: GroupInt> Contract for EscrowContract<T> {
    fn call(&mut self, ctx: &mut CallContext<'_>, function: &str, args: &[Value]) -> Result<Value, ContractError> {
        match function {
            "read" => Ok(serde_json::to_value(self.view()).expect("view serializes")),
            "register" => self.register(ctx, args, 1),
            "registerBatch" => {
                let count: u64 = parse(args.first().unwrap_or(&Value::Null))?;
                self.register(ctx, &args[1..], count)
            }
            "comTrigger" => self.com_trigger(ctx, args),
            "interactCommit" => self.interact_commit(ctx, args),
            "informCommit" if !self.config.atomic_inform => self.inform_commit(ctx, args),
            "informReveal" if !self.config.atomic_inform => self.inform_reveal(ctx, args),
            "inform" if self.config.atomic_inform => self.inform_atomic(ctx, args),
            "reveal" => self.reveal(ctx, args),
            other => Err(ContractError::UnknownFunction(other.to_string())),
        }
    }

    fn on_tick(&mut self, ctx: &mut CallContext<'_>) -> Option<Value> {
        let events = self.poll(ctx);
        (!events.is_empty()).then(|| json!({ "events": events }))
    }

    fn clone_box(&self) -> Box<dyn Contract> {
        Box::new(self.clone())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
