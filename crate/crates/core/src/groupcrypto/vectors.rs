//! Known-answer vectors for cross-implementation checks.

use serde::{Deserialize, Serialize};

use super::group::{hex_bytes, GroupElement, GroupParams, Scalar};
use super::shamir::{reconstruct, shamir_share, ver, verify_share, FeldmanCommitment, Share};
use super::vrf::{vrf_eval, vrf_verify, DleqProof};
use super::CryptoError;
use crate::scalar::GroupInt;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VrfVector<T: GroupInt> {
    #[serde(with = "hex_bytes")]
    pub m: Vec<u8>,
    pub sigma: GroupElement<T>,
    pub proof: DleqProof<T>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct KnownAnswerVector<T: GroupInt> {
    pub params: GroupParams<T>,
    pub x: Scalar<T>,
    pub t: usize,
    pub n: usize,
    pub shares: Vec<Share<T>>,
    pub commitments: FeldmanCommitment<T>,
    #[serde(rename = "X")]
    pub public_key: GroupElement<T>,
    pub vrf: Vec<VrfVector<T>>,
}

impl<T: GroupInt> KnownAnswerVector<T> {
    /// Deterministic vector: secret and polynomial from `seed`, VRF over `messages`.
    pub fn generate(
        params: &GroupParams<T>,
        t: usize,
        n: usize,
        seed: u64,
        messages: &[Vec<u8>],
    ) -> Result<Self, CryptoError> {
        let (x, _) = super::vrf::vrf_keygen(params, seed);
        let (shares, commitments) = shamir_share(params, &x, t, n, seed.wrapping_add(1))?;
        let vrf = messages
            .iter()
            .map(|m| {
                let (sigma, proof) = vrf_eval(params, &x, m);
                VrfVector { m: m.clone(), sigma, proof }
            })
            .collect();
        Ok(KnownAnswerVector {
            params: params.clone(),
            public_key: commitments.public_key().clone(),
            x,
            t,
            n,
            shares,
            commitments,
            vrf,
        })
    }

    /// Re-derives every relation the vector claims; returns a list of failures.
    pub fn check(&self) -> Vec<String> {
        let p = &self.params;
        let mut bad = Vec::new();
        if !ver(p, &self.x, &self.public_key) {
            bad.push("X != g^x".to_string());
        }
        if self.commitments.public_key() != &self.public_key {
            bad.push("A_0 != X".to_string());
        }
        if self.commitments.coeff_commits.len() != self.t + 1 || self.shares.len() != self.n {
            bad.push("shape mismatch".to_string());
        }
        for s in &self.shares {
            if !verify_share(p, s, &self.commitments) {
                bad.push(format!("share {} fails Feldman check", s.index));
            }
        }
        match reconstruct(p, &self.shares, self.t) {
            Ok(x) if x == self.x => {}
            _ => bad.push("shares do not reconstruct x".to_string()),
        }
        for v in &self.vrf {
            if !vrf_verify(p, &self.public_key, &v.m, &v.sigma, &v.proof) {
                bad.push(format!("vrf vector for m={:?} rejected", v.m));
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_vector_roundtrips_and_checks() {
        let params = GroupParams::<u64>::tiny();
        let v = KnownAnswerVector::generate(&params, 4, 6, 7, &[b"1".to_vec(), b"2".to_vec()]).unwrap();
        assert!(v.check().is_empty());
        let json = serde_json::to_string_pretty(&v).unwrap();
        let back: KnownAnswerVector<u64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(json.contains("\"X\""));
        let mut broken = v.clone();
        broken.shares[0].value = params.add(&broken.shares[0].value, &Scalar(1));
        assert!(!broken.check().is_empty());
    }
}
