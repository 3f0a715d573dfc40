//! The escrow service as a contract on [`crate::chain`].
//!
//! Phase flow: `Registration -> Commit -> Pending(i) -> Reveal(i) -> ...` ending in
//! `Final` or `Abort`. Time-driven transitions (commit deadline, maturity of the
//! round condition, reveal timeout, stale informs) happen in `on_tick`, which the
//! chain fires after every clock advance and every transaction, so the phase is
//! always current when a call is processed.
//!
//! Informing is two-phase by default: `informCommit(hash(secret || acc))` with a
//! deposit, then `informReveal(secret, acc)` no earlier than `inform_delay` later.
//! A committed inform that is not revealed by `commit_time + 2 * inform_delay`
//! goes stale; its deposit is kept and the slot freed.

mod contract;
mod phase;

pub use contract::{EscrowContract, EscrowView, Payout, PendingInform, RevealedRound, RoundSecret, Settlement};
pub use phase::{valid_transition, EscrowPhase};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{AccountId, ContractError, VerifiableCondition};

pub const DEFAULT_INFORM_DELAY: u64 = 30;
pub const DEFAULT_INFORM_DEPOSIT: u64 = 1;
pub const MIN_PLAYERS: u64 = 3;

/// Protocol parameters derived from the registration count at `comTrigger`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowParams {
    pub n: u64,
    pub t: u64,
    #[serde(rename = "P")]
    pub p: u64,
    #[serde(rename = "ell")]
    pub ell: u64,
    pub cnd: Vec<VerifiableCondition>,
}

impl EscrowParams {
    /// `t = floor(2n/3)`, `P = n - t`, `ell = n`.
    pub fn for_n(n: u64, cnd: Vec<VerifiableCondition>) -> Self {
        let t = 2 * n / 3;
        EscrowParams { n, t, p: n - t, ell: n, cnd }
    }
}

/// Fixed at deployment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscrowConfig {
    /// The only account allowed to call `comTrigger`.
    pub application: AccountId,
    pub t_com: u64,
    pub t_rev: u64,
    pub inform_delay: u64,
    pub inform_deposit: u64,
    /// Expose a one-step `inform(x, acc)` instead of the commit/reveal pair.
    /// It is open to front-running and kept for comparison.
    pub atomic_inform: bool,
    /// Number of reveal rounds. One round reveals the secret `x`; more rounds
    /// reveal VRF outputs `sigma_i` under the shared key.
    pub rounds: u32,
    /// Per-round VRF messages; defaults to the 8-byte big-endian round index.
    pub messages: Option<Vec<Vec<u8>>>,
}

impl EscrowConfig {
    pub fn new(application: AccountId, t_com: u64, t_rev: u64) -> Self {
        EscrowConfig {
            application,
            t_com,
            t_rev,
            inform_delay: DEFAULT_INFORM_DELAY,
            inform_deposit: DEFAULT_INFORM_DEPOSIT,
            atomic_inform: false,
            rounds: 1,
            messages: None,
        }
    }

    pub fn multi_shot(&self) -> bool {
        self.rounds > 1
    }

    /// Message for round `i` (1-based).
    pub fn message(&self, i: u32) -> Vec<u8> {
        match &self.messages {
            Some(ms) => ms[(i - 1) as usize].clone(),
            None => round_message(i),
        }
    }
}

/// Canonical message for round `i`.
pub fn round_message(i: u32) -> Vec<u8> {
    u64::from(i).to_be_bytes().to_vec()
}

/// Contract-level failures. The display string starts with the variant name, which
/// is what ends up in the chain log.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EscrowError {
    #[error("WrongPhase: {function} not allowed in {phase}")]
    WrongPhase { function: String, phase: EscrowPhase },
    #[error("WrongDeposit: attached {attached}, expected {expected}")]
    WrongDeposit { attached: u64, expected: u64 },
    #[error("NotApplication: caller {0}")]
    NotApplication(AccountId),
    #[error("TooFewPlayers: {0} registered, need {MIN_PLAYERS}")]
    TooFewPlayers(u64),
    #[error("WrongConditionCount: got {got}, need {need}")]
    WrongConditionCount { got: usize, need: usize },
    #[error("NotSlotOwner: caller {caller} does not own slot {slot}")]
    NotSlotOwner { caller: AccountId, slot: u64 },
    #[error("DuplicateFragment: slot {0} already committed")]
    DuplicateFragment(u64),
    #[error("BadArgs: {0}")]
    BadArgs(String),
    #[error("AlreadyPending: inform from {0} outstanding")]
    AlreadyPending(AccountId),
    #[error("MissingDeposit: attached {attached}, need {needed}")]
    MissingDeposit { attached: u64, needed: u64 },
    #[error("NoPendingInform")]
    NoPendingInform,
    #[error("TooEarly: reveal allowed from {ready_at}")]
    TooEarly { ready_at: u64 },
    #[error("DigestMismatch")]
    DigestMismatch,
    #[error("CndMatured")]
    CndMatured,
    #[error("BadSecret")]
    BadSecret,
    #[error("TooLate")]
    TooLate,
}

impl EscrowError {
    /// The variant name, as logged.
    pub fn code(reason: &str) -> &str {
        reason.split(':').next().unwrap_or(reason)
    }
}

impl From<EscrowError> for ContractError {
    fn from(e: EscrowError) -> Self {
        ContractError::Rejected(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_law() {
        for (n, t, p) in [(3, 2, 1), (4, 2, 2), (6, 4, 2), (9, 6, 3)] {
            let params = EscrowParams::for_n(n, vec![]);
            assert_eq!((params.t, params.p, params.ell), (t, p, n));
        }
    }

    #[test]
    fn error_codes() {
        assert_eq!(EscrowError::code(&EscrowError::TooEarly { ready_at: 5 }.to_string()), "TooEarly");
        assert_eq!(EscrowError::code(&EscrowError::DigestMismatch.to_string()), "DigestMismatch");
    }

    #[test]
    fn round_messages() {
        let cfg = EscrowConfig::new(AccountId(1), 10, 10);
        assert_eq!(cfg.message(2), vec![0, 0, 0, 0, 0, 0, 0, 2]);
    }
}
