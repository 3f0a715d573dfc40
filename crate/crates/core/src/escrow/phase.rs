use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "phase", content = "round", rename_all = "snake_case")]
pub enum EscrowPhase {
    Registration,
    Commit,
    Pending(u32),
    Reveal(u32),
    Final,
    Abort,
}

impl EscrowPhase {
    pub fn is_terminal(self) -> bool {
        matches!(self, EscrowPhase::Final | EscrowPhase::Abort)
    }
}

impl fmt::Display for EscrowPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EscrowPhase::Registration => f.write_str("registration"),
            EscrowPhase::Commit => f.write_str("commit"),
            EscrowPhase::Pending(i) => write!(f, "pending({i})"),
            EscrowPhase::Reveal(i) => write!(f, "reveal({i})"),
            EscrowPhase::Final => f.write_str("final"),
            EscrowPhase::Abort => f.write_str("abort"),
        }
    }
}

/// The allowed edges for a run with `k` rounds.
pub fn valid_transition(from: EscrowPhase, to: EscrowPhase, k: u32) -> bool {
    use EscrowPhase::*;
    match (from, to) {
        (Registration, Commit) => true,
        (Commit, Pending(1)) | (Commit, Abort) => true,
        (Pending(i), Reveal(j)) => i == j,
        (Pending(_), Abort) => true,
        (Reveal(i), Pending(j)) => i < k && j == i + 1,
        (Reveal(i), Final) => i == k,
        (Reveal(_), Abort) => true,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::EscrowPhase::*;
    use super::*;

    #[test]
    fn graph() {
        assert!(valid_transition(Registration, Commit, 1));
        assert!(valid_transition(Reveal(1), Final, 1));
        assert!(!valid_transition(Reveal(1), Final, 3));
        assert!(valid_transition(Reveal(2), Pending(3), 3));
        assert!(!valid_transition(Reveal(3), Pending(4), 3));
        assert!(!valid_transition(Pending(1), Final, 1));
        assert!(!valid_transition(Final, Abort, 1));
        assert!(!valid_transition(Registration, Pending(1), 1));
    }

    #[test]
    fn serde_shape() {
        assert_eq!(serde_json::to_string(&Pending(2)).unwrap(), r#"{"phase":"pending","round":2}"#);
        assert_eq!(serde_json::to_string(&Final).unwrap(), r#"{"phase":"final"}"#);
    }
}
