use serde::{Deserialize, Serialize};

use super::{AccountId, LogEntry};

/// Matches log entries by any combination of issuer, target and function name.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxPredicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuer: Option<AccountId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<AccountId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    /// Only count entries whose effect was applied.
    #[serde(default)]
    pub succeeded: bool,
}

impl TxPredicate {
    pub fn matches(&self, entry: &LogEntry) -> bool {
        self.issuer.is_none_or(|i| i == entry.issuer)
            && self.target.is_none_or(|t| t == entry.target)
            && self.function.as_deref().is_none_or(|f| f == entry.function)
            && (!self.succeeded || entry.effect.is_applied())
    }
}

/// A monotone predicate over the platform state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VerifiableCondition {
    TimeAtLeast { at: u64 },
    TxPresent { pred: TxPredicate },
    And { all: Vec<VerifiableCondition> },
    Or { any: Vec<VerifiableCondition> },
}

impl VerifiableCondition {
    pub fn time_at_least(at: u64) -> Self {
        VerifiableCondition::TimeAtLeast { at }
    }

    /// Earliest time at which the condition held, if it holds now.
    ///
    /// Log entries are time-ordered, so the first match is the maturity time of a
    /// `TxPresent`; composites take the max (`And`) or min (`Or`) of their parts.
    pub fn mature_time(&self, now: u64, log: &[LogEntry]) -> Option<u64> {
        match self {
            VerifiableCondition::TimeAtLeast { at } => (now >= *at).then_some(*at),
            VerifiableCondition::TxPresent { pred } => log.iter().find(|e| pred.matches(e)).map(|e| e.time),
            VerifiableCondition::And { all } => {
                all.iter().map(|c| c.mature_time(now, log)).try_fold(0, |acc, t| t.map(|t| acc.max(t)))
            }
            VerifiableCondition::Or { any } => any.iter().filter_map(|c| c.mature_time(now, log)).min(),
        }
    }

    pub fn matured(&self, now: u64, log: &[LogEntry]) -> bool {
        self.mature_time(now, log).is_some()
    }
}
