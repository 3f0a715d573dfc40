//! k-round reveal schedule: round `i` releases `sigma_i = H1(m_i)^x` under the
//! shared key, computed from partial evaluations of the participating shares.
//!
//! Maturity of `cnd_i` and completion of round `i - 1` are enforced by the escrow,
//! which rejects an early or out-of-order reveal; this module only computes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::VerifiableCondition;
use crate::escrow::round_message;
use crate::groupcrypto::{
    combine_partials, extract_bits, partial_eval, threshold_prove, vrf_verify, CryptoError, Digest, DleqProof,
    GroupElement, GroupParams, Share,
};
use crate::scalar::GroupInt;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSchedule {
    pub cnds: Vec<VerifiableCondition>,
    pub messages: Vec<Vec<u8>>,
}

impl RoundSchedule {
    /// Messages default to the round index.
    pub fn new(cnds: Vec<VerifiableCondition>) -> Self {
        assert!(!cnds.is_empty(), "k >= 1");
        let messages = (1..=cnds.len() as u32).map(round_message).collect();
        RoundSchedule { cnds, messages }
    }

    /// Rounds maturing at the given times.
    pub fn at_times(times: &[u64]) -> Self {
        Self::new(times.iter().map(|&t| VerifiableCondition::time_at_least(t)).collect())
    }

    pub fn k(&self) -> u32 {
        self.cnds.len() as u32
    }

    pub fn message(&self, i: u32) -> &[u8] {
        &self.messages[i as usize - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RoundOutput<T: GroupInt> {
    pub round: u32,
    pub sigma: GroupElement<T>,
    pub proof: DleqProof<T>,
    pub random_bits: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoundError {
    #[error("round {round}: {have} participating shares, need {need}")]
    Timeout { round: u32, have: usize, need: usize },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Combines the participants' partials for round `i` and proves the result
/// against the group key.
pub fn produce_round<T: GroupInt>(
    params: &GroupParams<T>,
    shares: &[Share<T>],
    share_keys: &BTreeMap<u64, GroupElement<T>>,
    t: usize,
    i: u32,
    schedule: &RoundSchedule,
    pk: &GroupElement<T>,
) -> Result<RoundOutput<T>, RoundError> {
    if shares.len() <= t {
        return Err(RoundError::Timeout { round: i, have: shares.len(), need: t + 1 });
    }
    let m = schedule.message(i);
    let partials: Vec<_> = shares.iter().map(|s| partial_eval(params, s, m)).collect();
    let sigma = combine_partials(params, &partials, t, m, share_keys)?;
    let (proved, proof) = threshold_prove(params, shares, t, m, pk)?;
    debug_assert_eq!(proved, sigma);
    if !vrf_verify(params, pk, m, &sigma, &proof) {
        return Err(CryptoError::InvalidPartial(0).into());
    }
    Ok(RoundOutput { round: i, random_bits: extract_randomness(params, &sigma), sigma, proof })
}

/// `H(canonical(sigma))`.
pub fn extract_randomness<T: GroupInt>(params: &GroupParams<T>, sigma: &GroupElement<T>) -> Digest {
    extract_bits(params, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dkg::{dkg_commit_run, dkg_reveal_run, DkgConfig};
    use crate::groupcrypto::hash_to_group;

    #[test]
    fn rounds_match_direct_evaluation() {
        let params = GroupParams::<u64>::medium();
        let tr = dkg_commit_run(&DkgConfig::honest(params.clone(), 6, 4), 11).unwrap();
        let x = dkg_reveal_run(&tr, &(1..=6).collect(), 4).unwrap();
        let keys = tr.share_keys();
        let sched = RoundSchedule::at_times(&[10, 20, 30]);
        let mut bits = Vec::new();
        for i in 1..=3 {
            let out = produce_round(&params, &tr.final_shares, &keys, 4, i, &sched, &tr.public_key).unwrap();
            assert_eq!(out.sigma, params.exp(&hash_to_group(&params, sched.message(i)), &x));
            // a different qualifying subset gives the same value
            let other = produce_round(&params, &tr.final_shares[1..], &keys, 4, i, &sched, &tr.public_key).unwrap();
            assert_eq!(other.sigma, out.sigma);
            bits.push(out.random_bits);
        }
        assert!(bits[0] != bits[1] && bits[1] != bits[2]);
    }

    #[test]
    fn threshold_participation_times_out() {
        let params = GroupParams::<u64>::tiny();
        let tr = dkg_commit_run(&DkgConfig::honest(params.clone(), 6, 4), 12).unwrap();
        let sched = RoundSchedule::at_times(&[10, 20]);
        let err = produce_round(&params, &tr.final_shares[..4], &tr.share_keys(), 4, 2, &sched, &tr.public_key);
        assert_eq!(err, Err(RoundError::Timeout { round: 2, have: 4, need: 5 }));
    }

    #[test]
    fn extraction_is_32_bytes_and_deterministic() {
        let params = GroupParams::<u64>::tiny();
        let g = params.generator();
        assert_eq!(extract_randomness(&params, &g), extract_randomness(&params, &g));
        assert_eq!(extract_randomness(&params, &g).as_bytes().len(), 32);
    }
}
