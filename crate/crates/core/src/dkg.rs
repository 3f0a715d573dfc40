//! Joint-Feldman style key generation among the registered share slots.
//!
//! Every slot deals a random degree-`t` polynomial, publishes its Feldman
//! commitment and hands sub-share `f_d(j)` to slot `j`. Receivers check each
//! sub-share against the dealer's commitment and complain on failure. Dispute
//! arbitration is collapsed to these truthful complaints: any complaint fails
//! the whole run.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::groupcrypto::{
    reconstruct, ver, verify_share, CryptoError, FeldmanCommitment, GroupElement, GroupParams, Polynomial, Scalar,
    Share,
};
use crate::scalar::GroupInt;

/// Injectable dealer misbehavior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Deviation {
    /// Sends `f_d(to) + 1` instead of `f_d(to)`.
    CorruptSubShare { to: u64 },
    /// Sends nothing to `to`.
    WithholdSubShare { to: u64 },
    /// Publishes `A_1 * g` instead of `A_1`, so no honest sub-share verifies.
    CorruptCommitment,
}

#[derive(Clone, Debug)]
pub struct DkgConfig<T: GroupInt> {
    pub n: u64,
    pub t: u64,
    pub params: GroupParams<T>,
    pub misbehavior: Vec<(u64, Deviation)>,
}

impl<T: GroupInt> DkgConfig<T> {
    pub fn honest(params: GroupParams<T>, n: u64, t: u64) -> Self {
        DkgConfig { n, t, params, misbehavior: Vec::new() }
    }

    fn validate(&self) -> Result<(), CryptoError> {
        let q_ok = T::from_u64(self.n) < self.params.q;
        if self.n < 3 || self.t == 0 || self.t >= self.n || !q_ok {
            return Err(CryptoError::InvalidThreshold { t: self.t as usize, n: self.n as usize });
        }
        for (slot, dev) in &self.misbehavior {
            let to = match dev {
                Deviation::CorruptSubShare { to } | Deviation::WithholdSubShare { to } => Some(*to),
                Deviation::CorruptCommitment => None,
            };
            if !(1..=self.n).contains(slot) || to.is_some_and(|to| !(1..=self.n).contains(&to) || to == *slot) {
                return Err(CryptoError::InvalidIndex(*slot));
            }
        }
        Ok(())
    }
}

/// Public output of a commit run plus each slot's private final share.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DkgTranscript<T: GroupInt> {
    pub params: GroupParams<T>,
    pub n: u64,
    pub t: u64,
    pub dealer_commitments: BTreeMap<u64, FeldmanCommitment<T>>,
    #[serde(rename = "X")]
    pub public_key: GroupElement<T>,
    pub final_shares: Vec<Share<T>>,
    /// `(accuser, accused)` pairs, sorted.
    pub complaints: Vec<(u64, u64)>,
}

impl<T: GroupInt> DkgTranscript<T> {
    pub fn is_clean(&self) -> bool {
        self.complaints.is_empty()
    }

    /// Commitment to the summed polynomial; verifies every final share.
    pub fn aggregate_commitment(&self) -> FeldmanCommitment<T> {
        FeldmanCommitment::aggregate(&self.params, self.dealer_commitments.values())
            .expect("dealers share one threshold")
    }

    /// `g^{share_i}` for every slot, derived from the public commitments only.
    pub fn share_keys(&self) -> BTreeMap<u64, GroupElement<T>> {
        let agg = self.aggregate_commitment();
        (1..=self.n).map(|i| (i, agg.share_public_key(&self.params, i))).collect()
    }

    pub fn share(&self, slot: u64) -> Option<&Share<T>> {
        self.final_shares.iter().find(|s| s.index == slot)
    }

    /// Accused slots, deduplicated.
    pub fn accused(&self) -> BTreeSet<u64> {
        self.complaints.iter().map(|&(_, b)| b).collect()
    }

    /// The on-chain part of the transcript, one fragment per message, in the
    /// argument format of the escrow's `interactCommit`.
    pub fn fragments(&self) -> Vec<(u64, Value)> {
        let mut out: Vec<(u64, Value)> = self
            .dealer_commitments
            .iter()
            .map(|(d, c)| {
                let coeffs: Vec<String> = c.coeff_commits.iter().map(|a| a.0.to_string()).collect();
                (*d, json!({ "dealer": d, "commitment": coeffs }))
            })
            .collect();
        out.extend(self.complaints.iter().map(|&(a, b)| (a, json!({ "complaint": [a, b] }))));
        out
    }
}

/// Runs the sharing round. Failures show up as complaints, never as errors;
/// the `Err` case is reserved for an invalid configuration.
pub fn dkg_commit_run<T: GroupInt>(cfg: &DkgConfig<T>, rng_seed: u64) -> Result<DkgTranscript<T>, CryptoError> {
    cfg.validate()?;
    let params = &cfg.params;
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);

    let mut commitments = BTreeMap::new();
    // inbox[j][d] = sub-share from dealer d to slot j
    let mut inbox: BTreeMap<u64, BTreeMap<u64, Scalar<T>>> = BTreeMap::new();
    for d in 1..=cfg.n {
        let secret = params.random_scalar(&mut rng);
        let poly = Polynomial::random(params, secret, cfg.t as usize, &mut rng);
        let mut com = poly.commit(params);
        let deviations: Vec<&Deviation> = cfg.misbehavior.iter().filter(|(s, _)| *s == d).map(|(_, k)| k).collect();
        if deviations.contains(&&Deviation::CorruptCommitment) {
            com.coeff_commits[1] = params.mul(&com.coeff_commits[1], &params.generator());
        }
        commitments.insert(d, com);
        for j in 1..=cfg.n {
            let mut value = poly.eval(params, j);
            if deviations.contains(&&Deviation::WithholdSubShare { to: j }) {
                continue;
            }
            if deviations.contains(&&Deviation::CorruptSubShare { to: j }) {
                value = params.add(&value, &params.scalar_u64(1));
            }
            inbox.entry(j).or_default().insert(d, value);
        }
    }

    let mut complaints = Vec::new();
    let mut final_shares = Vec::new();
    for j in 1..=cfg.n {
        let received = inbox.remove(&j).unwrap_or_default();
        let mut sum = params.scalar_u64(0);
        for (d, com) in &commitments {
            match received.get(d) {
                Some(v) => {
                    // a dealer does not accuse itself
                    if *d != j && !verify_share(params, &Share { index: j, value: v.clone() }, com) {
                        complaints.push((j, *d));
                    }
                    sum = params.add(&sum, v);
                }
                None => complaints.push((j, *d)),
            }
        }
        final_shares.push(Share { index: j, value: sum });
    }
    complaints.sort_unstable();

    let public_key = commitments.values().fold(params.identity(), |acc, c| params.mul(&acc, c.public_key()));
    Ok(DkgTranscript {
        params: params.clone(),
        n: cfg.n,
        t: cfg.t,
        dealer_commitments: commitments,
        public_key,
        final_shares,
        complaints,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevealError {
    #[error("only {have} of the required {need} shares were broadcast")]
    Timeout { have: usize, need: usize },
    #[error("commit run has complaints; nothing to reveal")]
    FailedCommit,
    #[error("reconstructed value does not match the public key")]
    Inconsistent,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Off-chain broadcast of the participating slots' shares and reconstruction.
pub fn dkg_reveal_run<T: GroupInt>(
    transcript: &DkgTranscript<T>,
    participating: &BTreeSet<u64>,
    t: u64,
) -> Result<Scalar<T>, RevealError> {
    if !transcript.is_clean() {
        return Err(RevealError::FailedCommit);
    }
    let shares: Vec<Share<T>> =
        transcript.final_shares.iter().filter(|s| participating.contains(&s.index)).cloned().collect();
    let need = t as usize + 1;
    if shares.len() < need {
        return Err(RevealError::Timeout { have: shares.len(), need });
    }
    let x = reconstruct(&transcript.params, &shares, t as usize)?;
    if !ver(&transcript.params, &x, &transcript.public_key) {
        return Err(RevealError::Inconsistent);
    }
    Ok(x)
}
