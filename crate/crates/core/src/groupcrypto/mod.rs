//! Prime-order group arithmetic, Shamir/Feldman sharing, commitments and the VRF.

pub mod group;
pub mod hash;
pub mod shamir;
pub mod vectors;
pub mod vrf;

use thiserror::Error;

pub use group::{GroupElement, GroupParams, Profile, Scalar};
pub use hash::{commit_digest, extract_bits, hash_commit, hash_to_group, Digest};
pub use shamir::{
    lagrange_at_zero, reconstruct, shamir_share, ver, verify_share, FeldmanCommitment, Polynomial, Share, ShareSet,
};
pub use vectors::{KnownAnswerVector, VrfVector};
pub use vrf::{
    combine_partials, partial_eval, threshold_prove, vrf_eval, vrf_keygen, vrf_verify, DleqProof, PartialEval,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("invalid group parameters: {0}")]
    InvalidParams(String),
    #[error("invalid threshold t={t} for n={n}")]
    InvalidThreshold { t: usize, n: usize },
    #[error("need {need} shares, have {have}")]
    NotEnoughShares { have: usize, need: usize },
    #[error("duplicate share index {0}")]
    DuplicateIndex(u64),
    #[error("share index {0} out of range")]
    InvalidIndex(u64),
    #[error("partial evaluation from index {0} failed verification")]
    InvalidPartial(u64),
    #[error("value is not in the prime-order subgroup")]
    NotInSubgroup,
}
