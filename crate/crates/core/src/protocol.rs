//! End-to-end driver: genesis, escrow deployment, registration, the DKG commit run
//! and the off-chain side of informing and revealing, all through chain
//! transactions. Used by the CLI, the game harness and the integration tests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::chain::{AccountId, ChainError, ChainState, Transaction, VerifiableCondition};
use crate::dkg::{dkg_commit_run, Deviation, DkgConfig, DkgTranscript};
use crate::escrow::{
    valid_transition, EscrowConfig, EscrowContract, EscrowParams, EscrowPhase, EscrowView, RoundSecret, Settlement,
};
use crate::game::Redirector;
use crate::groupcrypto::{reconstruct, CryptoError, GroupParams, Share};
use crate::multishot::{produce_round, RoundSchedule};
use crate::scalar::GroupInt;

/// The application account allowed to trigger the commit phase.
pub const APPLICATION: AccountId = AccountId(1_000_000);
/// Fresh informant accounts live at `INFORMANT_BASE + player`.
pub const INFORMANT_BASE: u64 = 2_000_000;

/// Player `i` (0-based) owns EOA `i + 1`, so player order is account order.
pub fn player_account(i: usize) -> AccountId {
    AccountId(i as u64 + 1)
}

/// A payout account no side contract can reach.
pub fn informant_account(i: usize) -> AccountId {
    AccountId(INFORMANT_BASE + i as u64 + 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timeline {
    pub trigger_at: u64,
    pub t_com: u64,
    pub t_rev: u64,
    /// When informants commit; the reveal follows `inform_delay` later.
    pub inform_at: u64,
    /// Maturity time of each round's condition.
    pub cnd_at: Vec<u64>,
}

impl Default for Timeline {
    fn default() -> Self {
        Timeline { trigger_at: 1, t_com: 10, t_rev: 10, inform_at: 20, cnd_at: vec![100] }
    }
}

#[derive(Clone, Debug)]
pub struct Setup<T: GroupInt> {
    pub group: GroupParams<T>,
    /// `a_i`: coins (and share slots) each player registers.
    pub deposits: Vec<u64>,
    /// `e_i`: coins each player keeps outside the escrow.
    pub external: Vec<u64>,
    pub timeline: Timeline,
    pub inform_delay: u64,
    pub inform_deposit: u64,
    pub atomic_inform: bool,
    pub messages: Option<Vec<Vec<u8>>>,
    pub misbehavior: Vec<(u64, Deviation)>,
    /// `redirect[i] = Some(j)`: player `i` registers through a [`Redirector`]
    /// forwarding to player `j`. Missing entries mean a direct registration.
    pub redirect: Vec<Option<usize>>,
    pub seed: u64,
}

impl<T: GroupInt> Setup<T> {
    pub fn new(group: GroupParams<T>, deposits: Vec<u64>) -> Self {
        let external = vec![0; deposits.len()];
        Setup {
            group,
            deposits,
            external,
            timeline: Timeline::default(),
            inform_delay: crate::escrow::DEFAULT_INFORM_DELAY,
            inform_deposit: crate::escrow::DEFAULT_INFORM_DEPOSIT,
            atomic_inform: false,
            messages: None,
            misbehavior: Vec::new(),
            redirect: Vec::new(),
            seed: 0,
        }
    }

    pub fn n(&self) -> u64 {
        self.deposits.iter().sum()
    }

    pub fn rounds(&self) -> u32 {
        self.timeline.cnd_at.len() as u32
    }

    fn escrow_config(&self) -> EscrowConfig {
        let mut cfg = EscrowConfig::new(APPLICATION, self.timeline.t_com, self.timeline.t_rev);
        cfg.inform_delay = self.inform_delay;
        cfg.inform_deposit = self.inform_deposit;
        cfg.atomic_inform = self.atomic_inform;
        cfg.rounds = self.rounds();
        cfg.messages = self.messages.clone();
        cfg
    }

    fn schedule(&self) -> RoundSchedule {
        let mut s = RoundSchedule::at_times(&self.timeline.cnd_at);
        if let Some(ms) = &self.messages {
            s.messages = ms.clone();
        }
        s
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// A run in progress. Cloning snapshots the chain, so one prepared run can be
/// replayed under many different stage-2 behaviors.
#[derive(Clone, Debug)]
pub struct Protocol<T: GroupInt> {
    pub setup: Setup<T>,
    pub chain: ChainState,
    pub escrow: AccountId,
    /// `slot_owner[slot - 1]` = owning player.
    pub slot_owner: Vec<usize>,
    pub transcript: Option<DkgTranscript<T>>,
    /// Side contract each player registered through, if any.
    pub redirectors: Vec<Option<AccountId>>,
    genesis_supply: u64,
}

impl<T: GroupInt> Protocol<T> {
    /// Runs registration, `comTrigger` and the commit phase. The returned run is in
    /// `Pending(1)` (or `Abort` if injected misbehavior failed the commit).
    pub fn start(setup: Setup<T>) -> Result<Self, ProtocolError> {
        let n_players = setup.deposits.len();
        if setup.external.len() != n_players {
            return Err(ProtocolError::Setup("deposits and external balances differ in length".into()));
        }
        if setup.rounds() == 0 {
            return Err(ProtocolError::Setup("at least one round condition is required".into()));
        }
        if setup.messages.as_ref().is_some_and(|m| m.len() != setup.rounds() as usize) {
            return Err(ProtocolError::Setup("one message per round".into()));
        }
        let tl = &setup.timeline;
        if tl.cnd_at.windows(2).any(|w| w[0] > w[1]) || tl.trigger_at + tl.t_com > tl.inform_at {
            return Err(ProtocolError::Setup("timeline must be ordered".into()));
        }
        let mut balances: Vec<(AccountId, u64)> =
            (0..n_players).map(|i| (player_account(i), setup.deposits[i] + setup.external[i])).collect();
        balances.extend((0..n_players).map(|i| (informant_account(i), setup.inform_deposit)));
        balances.push((APPLICATION, 0));
        let mut chain = ChainState::genesis(balances)?;
        let escrow = chain.deploy(Box::new(EscrowContract::new(setup.group.clone(), setup.escrow_config())));
        let genesis_supply = chain.total_supply();
        let mut redirectors = vec![None; n_players];
        for (i, r) in setup.redirect.iter().enumerate().take(n_players) {
            if let Some(j) = *r {
                if j >= n_players {
                    return Err(ProtocolError::Setup(format!("redirect target {j} is not a player")));
                }
                let side = Redirector { owner: player_account(i), beneficiary: player_account(j), escrow };
                redirectors[i] = Some(chain.deploy(Box::new(side)));
            }
        }
        let call_escrow = |i: usize, function: &str, args: Vec<Value>, coins: u64, at: u64| match redirectors[i] {
            None => Transaction::call(player_account(i), escrow, function, args, coins, at),
            Some(side) => {
                Transaction::call(player_account(i), side, "relay", vec![json!(function), json!(args)], coins, at)
            }
        };

        let registrations = (0..n_players)
            .filter(|&i| setup.deposits[i] > 0)
            .map(|i| {
                let k = setup.deposits[i];
                call_escrow(i, "registerBatch", vec![json!(k)], k, 0)
            })
            .collect();
        chain.submit(registrations)?;
        let slot_owner: Vec<usize> =
            (0..n_players).flat_map(|i| std::iter::repeat_n(i, setup.deposits[i] as usize)).collect();

        let cnds: Vec<Value> = tl
            .cnd_at
            .iter()
            .map(|&t| serde_json::to_value(VerifiableCondition::time_at_least(t)).expect("serializes"))
            .collect();
        chain.submit(vec![Transaction::call(APPLICATION, escrow, "comTrigger", cnds, 0, tl.trigger_at)])?;

        let mut run = Protocol { setup, chain, escrow, slot_owner, transcript: None, redirectors, genesis_supply };
        if run.view().phase != EscrowPhase::Commit {
            // comTrigger rejected (too few players); the log says why
            return Ok(run);
        }
        let n = run.slot_owner.len() as u64;
        let t = run.params().expect("set by comTrigger").t;
        let cfg = DkgConfig { n, t, params: run.setup.group.clone(), misbehavior: run.setup.misbehavior.clone() };
        let transcript = dkg_commit_run(&cfg, run.setup.seed)?;
        let at = run.setup.timeline.trigger_at;
        let txs = transcript
            .fragments()
            .into_iter()
            .map(|(slot, frag)| run.escrow_call(run.slot_owner[slot as usize - 1], "interactCommit", vec![frag], at))
            .collect();
        run.chain.submit(txs)?;
        run.transcript = Some(transcript);
        let deadline = at + run.setup.timeline.t_com;
        run.advance_to(deadline);
        Ok(run)
    }

    /// A call to the escrow issued by player `i`, relayed through its side
    /// contract if it registered through one.
    fn escrow_call(&self, i: usize, function: &str, args: Vec<Value>, at: u64) -> Transaction {
        match self.redirectors[i] {
            None => Transaction::call(player_account(i), self.escrow, function, args, 0, at),
            Some(side) => {
                Transaction::call(player_account(i), side, "relay", vec![json!(function), json!(args)], 0, at)
            }
        }
    }

    pub fn contract(&self) -> &EscrowContract<T> {
        self.chain.contract::<EscrowContract<T>>(self.escrow).expect("escrow deployed")
    }

    pub fn view(&self) -> EscrowView<T> {
        self.contract().view()
    }

    pub fn params(&self) -> Option<&EscrowParams> {
        self.contract().params()
    }

    pub fn phase(&self) -> EscrowPhase {
        self.contract().phase()
    }

    pub fn n_players(&self) -> usize {
        self.setup.deposits.len()
    }

    pub fn advance_to(&mut self, time: u64) {
        let now = self.chain.clock();
        if time > now {
            self.chain.advance_time(time - now);
        }
    }

    pub fn slots_of(&self, player: usize) -> BTreeSet<u64> {
        (1..=self.slot_owner.len() as u64).filter(|s| self.slot_owner[*s as usize - 1] == player).collect()
    }

    /// Final DKG shares for the given slots.
    pub fn shares(&self, slots: &BTreeSet<u64>) -> Vec<Share<T>> {
        let Some(tr) = &self.transcript else { return Vec::new() };
        slots.iter().filter_map(|s| tr.share(*s).cloned()).collect()
    }

    /// The round's secret computed off-chain from `slots`, if they suffice.
    pub fn round_secret(&self, round: u32, slots: &BTreeSet<u64>) -> Option<RoundSecret<T>> {
        let tr = self.transcript.as_ref()?;
        let t = tr.t as usize;
        let shares = self.shares(slots);
        if shares.len() <= t {
            return None;
        }
        if self.setup.rounds() == 1 {
            return reconstruct(&tr.params, &shares, t).ok().map(RoundSecret::Scalar);
        }
        let out =
            produce_round(&tr.params, &shares, &tr.share_keys(), t, round, &self.setup.schedule(), &tr.public_key)
                .ok()?;
        Some(RoundSecret::Vrf { sigma: out.sigma, proof: out.proof })
    }

    fn current_round(&self) -> Option<u32> {
        match self.phase() {
            EscrowPhase::Pending(i) | EscrowPhase::Reveal(i) => Some(i),
            _ => None,
        }
    }

    /// Every informant (player, slots it holds) tries to inform on the current
    /// round at `inform_at`. Competing commits land at the same time, so the chain
    /// orders them by account id and the lowest-id informant takes the lock.
    pub fn inform(&mut self, informants: &[(usize, BTreeSet<u64>)]) -> Result<(), ProtocolError> {
        let Some(round) = self.current_round() else { return Ok(()) };
        let at = self.setup.timeline.inform_at.max(self.chain.clock());
        let mut commits = Vec::new();
        let mut reveals = Vec::new();
        for (player, slots) in informants {
            let Some(secret) = self.round_secret(round, slots) else { continue };
            let acc = informant_account(*player);
            let secret_json = secret.to_json();
            if self.setup.atomic_inform {
                reveals.push(Transaction::call(acc, self.escrow, "inform", vec![secret_json, json!(acc)], 0, at));
                continue;
            }
            let digest = secret.inform_digest(&self.setup.group, acc);
            commits.push(Transaction::call(
                acc,
                self.escrow,
                "informCommit",
                vec![json!(digest)],
                self.setup.inform_deposit,
                at,
            ));
            reveals.push(Transaction::call(
                acc,
                self.escrow,
                "informReveal",
                vec![secret_json, json!(acc)],
                0,
                at + self.setup.inform_delay,
            ));
        }
        self.chain.submit(commits)?;
        self.chain.submit(reveals)?;
        Ok(())
    }

    /// Plays out every remaining round: once a round's condition matures, the
    /// compliers pool their slots and the lowest-id complier publishes the secret.
    /// Without enough shares nobody reveals and the window runs out.
    pub fn reveal_all(&mut self, compliers: &[(usize, BTreeSet<u64>)]) -> Result<(), ProtocolError> {
        let pooled: BTreeSet<u64> = compliers.iter().flat_map(|(_, s)| s.iter().copied()).collect();
        let publisher = compliers.iter().map(|(p, _)| *p).min();
        while let Some(round) = self.current_round() {
            let mature = self.setup.timeline.cnd_at[round as usize - 1];
            self.advance_to(mature);
            let secret = publisher.zip(self.round_secret(round, &pooled));
            match secret {
                Some((p, s)) => {
                    let at = self.chain.clock();
                    let tx = Transaction::call(player_account(p), self.escrow, "reveal", vec![s.to_json()], 0, at);
                    self.chain.submit(vec![tx])?;
                    if self.current_round() == Some(round) {
                        return Err(ProtocolError::Setup(format!("reveal for round {round} was rejected")));
                    }
                }
                None => {
                    let close = self.chain.clock() + self.setup.timeline.t_rev;
                    self.advance_to(close);
                }
            }
        }
        Ok(())
    }

    /// Default behavior: nobody informs, every player broadcasts its own shares.
    pub fn run_honest(&mut self) -> Result<(), ProtocolError> {
        let everyone: Vec<(usize, BTreeSet<u64>)> = (0..self.n_players()).map(|i| (i, self.slots_of(i))).collect();
        self.reveal_all(&everyone)
    }

    /// Net coins each player received from the escrow, informant accounts included.
    pub fn payouts_by_player(&self) -> Vec<u64> {
        let mut out = vec![0; self.n_players()];
        for p in self.contract().payouts() {
            let player = (0..self.n_players()).find(|&i| player_account(i) == p.to || informant_account(i) == p.to);
            if let Some(i) = player {
                if p.reason != "inform_deposit_refund" {
                    out[i] += p.amount;
                }
            }
        }
        out
    }

    pub fn genesis_supply(&self) -> u64 {
        self.genesis_supply
    }

    /// Audits the run; an empty list means every invariant held.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let supply = self.genesis_supply;
        if self.chain.total_supply() != supply {
            bad.push(format!("total supply {} != genesis {}", self.chain.total_supply(), supply));
        }
        for e in self.chain.log() {
            let s: u64 = e.balances_after.values().sum();
            if s != supply {
                bad.push(format!("log entry {} has supply {s}", e.seq));
            }
        }
        let view = self.view();
        let k = self.setup.rounds();
        for w in view.history.windows(2) {
            if !valid_transition(w[0].1, w[1].1, k) {
                bad.push(format!("illegal transition {} -> {}", w[0].1, w[1].1));
            }
        }
        if let Some(p) = &view.params {
            if p.t != 2 * p.n / 3 || p.p != p.n - p.t || p.ell != p.n {
                bad.push("parameter law violated".into());
            }
        }
        let held = self.chain.balance(self.escrow);
        let n = view.accounts.len() as u64;
        let paid: u64 = view.payouts.iter().filter(|p| p.reason != "inform_deposit_refund").map(|p| p.amount).sum();
        match (&view.settlement, view.phase) {
            (None, phase) if !phase.is_terminal() => {
                let pending = view.pending_inform.as_ref().map_or(0, |p| p.deposit);
                if held != n + pending + view.confiscated_inform_deposits || paid != 0 {
                    bad.push(format!("escrow holds {held} before settlement"));
                }
            }
            (Some(Settlement::Repaid), EscrowPhase::Final) => {
                if paid != n {
                    bad.push(format!("repaid {paid} of {n}"));
                }
            }
            (Some(Settlement::Informed { .. }), EscrowPhase::Abort) => {
                if paid != n || view.payouts.iter().filter(|p| p.reason == "inform_reward").count() != 1 {
                    bad.push("informing paid more than one reward".into());
                }
            }
            (Some(Settlement::Confiscated), EscrowPhase::Abort) => {
                if paid != 0 {
                    bad.push("confiscation paid out coins".into());
                }
            }
            (Some(Settlement::CommitFailed { refunded, .. }), EscrowPhase::Abort) => {
                if paid != refunded.len() as u64 {
                    bad.push("commit refunds mismatch".into());
                }
            }
            (None, EscrowPhase::Abort) if view.ver_com.is_none() => {}
            (s, phase) => bad.push(format!("settlement {s:?} inconsistent with phase {phase}")),
        }
        bad
    }

    /// One JSON line per log entry, then a summary line with the escrow's view.
    pub fn trace_lines(&self) -> Vec<String> {
        let mut lines = self.chain.trace_lines();
        let mut summary = serde_json::to_value(self.view()).expect("view serializes");
        summary["total_supply"] = json!(self.chain.total_supply());
        summary["balances"] = json!(self.chain.balances());
        lines.push(serde_json::to_string(&json!({ "final": summary })).expect("serializes"));
        lines
    }

    /// Final balances of the player EOAs.
    pub fn player_balances(&self) -> BTreeMap<usize, u64> {
        (0..self.n_players()).map(|i| (i, self.chain.balance(player_account(i)))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(deposits: Vec<u64>) -> Setup<u64> {
        Setup::new(GroupParams::tiny(), deposits)
    }

    #[test]
    fn honest_single_shot() {
        let mut run = Protocol::start(tiny(vec![1, 1, 1])).unwrap();
        assert_eq!(run.phase(), EscrowPhase::Pending(1));
        run.run_honest().unwrap();
        assert_eq!(run.phase(), EscrowPhase::Final);
        assert_eq!(run.chain.balance(run.escrow), 0);
        assert_eq!(run.payouts_by_player(), vec![1, 1, 1]);
        assert!(run.check_invariants().is_empty(), "{:?}", run.check_invariants());
    }

    #[test]
    fn too_few_slots_never_commit() {
        let run = Protocol::start(tiny(vec![1, 1])).unwrap();
        assert_eq!(run.phase(), EscrowPhase::Registration);
        assert!(run.chain.log().last().map(|e| !e.effect.is_applied()).unwrap());
    }

    #[test]
    fn traces_are_reproducible() {
        let lines = |seed| {
            let mut s = tiny(vec![2, 2, 2]);
            s.seed = seed;
            let mut run = Protocol::start(s).unwrap();
            run.run_honest().unwrap();
            run.trace_lines()
        };
        assert_eq!(lines(5), lines(5));
        assert_ne!(lines(5), lines(6));
    }
}
