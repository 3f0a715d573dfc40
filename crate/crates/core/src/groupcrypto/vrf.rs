//! Hashed-exponentiation VRF with Chaum-Pedersen DLEQ proofs, plus its threshold
//! evaluation over Shamir shares.
//!
//! `sigma = H1(m)^sk`, and the proof shows `log_g(pk) = log_{H1(m)}(sigma)`.
//!
//! `H1(m) = g^{h(m)}` has a public discrete log, so the verifier additionally checks
//! the proven relation directly (`sigma == pk^{h(m)}`). On production-size groups
//! the extra check is redundant with DLEQ soundness; on the tiny exhaustive-test
//! groups it is what makes uniqueness unconditional, because a challenge space of
//! size q admits hash-collision forgeries that an exhaustive search will find.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::group::{GroupElement, GroupParams, Scalar};
use super::hash::{h1_exponent, hash_to_group, length_prefixed, sha256};
use super::shamir::{lagrange_at_zero, Share};
use super::CryptoError;
use crate::scalar::GroupInt;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DleqProof<T: GroupInt> {
    pub challenge: Scalar<T>,
    pub response: Scalar<T>,
}

/// One share-holder's contribution to a threshold evaluation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PartialEval<T: GroupInt> {
    pub index: u64,
    pub sigma: GroupElement<T>,
    pub proof: DleqProof<T>,
}

pub fn vrf_keygen<T: GroupInt>(params: &GroupParams<T>, rng_seed: u64) -> (Scalar<T>, GroupElement<T>) {
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let sk = params.random_scalar(&mut rng);
    let pk = params.exp_g(&sk);
    (sk, pk)
}

fn challenge<T: GroupInt>(params: &GroupParams<T>, points: [&GroupElement<T>; 6]) -> Scalar<T> {
    let mut buf = b"evr/dleq/v1".to_vec();
    for p in points {
        buf.extend(params.encode_element(p));
    }
    Scalar(T::from_be_bytes_mod(&sha256(&[&buf]).0, &params.q))
}

fn nonce<T: GroupInt>(params: &GroupParams<T>, secret: &Scalar<T>, m: &[u8]) -> Scalar<T> {
    let d = sha256(&[b"evr/nonce/v1", &params.encode_scalar(secret), &length_prefixed(m)]);
    Scalar(T::from_be_bytes_mod(&d.0, &params.q))
}

/// Proves `log_g(pk) = log_h(sigma)` for witness `sk`.
pub fn dleq_prove<T: GroupInt>(params: &GroupParams<T>, h: &GroupElement<T>, sk: &Scalar<T>, m: &[u8]) -> DleqProof<T> {
    let g = params.generator();
    let pk = params.exp_g(sk);
    let sigma = params.exp(h, sk);
    let k = nonce(params, sk, m);
    let a1 = params.exp_g(&k);
    let a2 = params.exp(h, &k);
    let c = challenge(params, [&g, h, &pk, &sigma, &a1, &a2]);
    let s = params.sub(&k, &params.mul_scalar(&c, sk));
    DleqProof { challenge: c, response: s }
}

/// The Chaum-Pedersen check alone, without the direct relation check.
pub fn dleq_verify<T: GroupInt>(
    params: &GroupParams<T>,
    h: &GroupElement<T>,
    pk: &GroupElement<T>,
    sigma: &GroupElement<T>,
    proof: &DleqProof<T>,
) -> bool {
    if proof.challenge.0 >= params.q || proof.response.0 >= params.q {
        return false;
    }
    let g = params.generator();
    let a1 = params.mul(&params.exp_g(&proof.response), &params.exp(pk, &proof.challenge));
    let a2 = params.mul(&params.exp(h, &proof.response), &params.exp(sigma, &proof.challenge));
    challenge(params, [&g, h, pk, sigma, &a1, &a2]) == proof.challenge
}

pub fn vrf_eval<T: GroupInt>(params: &GroupParams<T>, sk: &Scalar<T>, m: &[u8]) -> (GroupElement<T>, DleqProof<T>) {
    let h = hash_to_group(params, m);
    let sigma = params.exp(&h, sk);
    (sigma, dleq_prove(params, &h, sk, m))
}

pub fn vrf_verify<T: GroupInt>(
    params: &GroupParams<T>,
    pk: &GroupElement<T>,
    m: &[u8],
    sigma: &GroupElement<T>,
    proof: &DleqProof<T>,
) -> bool {
    if !params.contains(pk) || !params.contains(sigma) {
        return false;
    }
    let h = hash_to_group(params, m);
    dleq_verify(params, &h, pk, sigma, proof) && params.exp(pk, &h1_exponent(params, m)) == *sigma
}

/// `H1(m)^{share}` with a proof against the share's public key `g^{share}`.
pub fn partial_eval<T: GroupInt>(params: &GroupParams<T>, share: &Share<T>, m: &[u8]) -> PartialEval<T> {
    let (sigma, proof) = vrf_eval(params, &share.value, m);
    PartialEval { index: share.index, sigma, proof }
}

/// Lagrange combination in the exponent of `t + 1` verified partials.
///
/// Every partial is checked against `share_keys[index]` before anything is combined;
/// the lowest `t + 1` indices are used.
pub fn combine_partials<T: GroupInt>(
    params: &GroupParams<T>,
    partials: &[PartialEval<T>],
    t: usize,
    m: &[u8],
    share_keys: &BTreeMap<u64, GroupElement<T>>,
) -> Result<GroupElement<T>, CryptoError> {
    for p in partials {
        let key = share_keys.get(&p.index).ok_or(CryptoError::InvalidPartial(p.index))?;
        if !vrf_verify(params, key, m, &p.sigma, &p.proof) {
            return Err(CryptoError::InvalidPartial(p.index));
        }
    }
    if partials.len() < t + 1 {
        return Err(CryptoError::NotEnoughShares { have: partials.len(), need: t + 1 });
    }
    let mut chosen: Vec<&PartialEval<T>> = partials.iter().collect();
    chosen.sort_by_key(|p| p.index);
    chosen.dedup_by_key(|p| p.index);
    if chosen.len() < t + 1 {
        return Err(CryptoError::NotEnoughShares { have: chosen.len(), need: t + 1 });
    }
    chosen.truncate(t + 1);
    let indices: Vec<u64> = chosen.iter().map(|p| p.index).collect();
    let lambdas = lagrange_at_zero(params, &indices)?;
    Ok(chosen.iter().zip(&lambdas).fold(params.identity(), |acc, (p, l)| params.mul(&acc, &params.exp(&p.sigma, l))))
}

/// Two-round threshold Chaum-Pedersen proof for the combined `sigma`, run among
/// the holders of `shares` (at least `t + 1`, lowest indices used).
///
/// Round one publishes per-holder nonce commitments, which are combined with the
/// same Lagrange weights as the partials; round two returns response shares that
/// sum to a standard proof verifiable against the group key `pk`.
pub fn threshold_prove<T: GroupInt>(
    params: &GroupParams<T>,
    shares: &[Share<T>],
    t: usize,
    m: &[u8],
    pk: &GroupElement<T>,
) -> Result<(GroupElement<T>, DleqProof<T>), CryptoError> {
    let mut chosen: Vec<&Share<T>> = shares.iter().collect();
    chosen.sort_by_key(|s| s.index);
    chosen.dedup_by_key(|s| s.index);
    if chosen.len() < t + 1 {
        return Err(CryptoError::NotEnoughShares { have: chosen.len(), need: t + 1 });
    }
    chosen.truncate(t + 1);
    let indices: Vec<u64> = chosen.iter().map(|s| s.index).collect();
    let lambdas = lagrange_at_zero(params, &indices)?;
    let h = hash_to_group(params, m);
    let g = params.generator();

    let nonces: Vec<Scalar<T>> = chosen.iter().map(|s| nonce(params, &s.value, m)).collect();
    let mut sigma = params.identity();
    let mut a1 = params.identity();
    let mut a2 = params.identity();
    for ((share, k), l) in chosen.iter().zip(&nonces).zip(&lambdas) {
        sigma = params.mul(&sigma, &params.exp(&params.exp(&h, &share.value), l));
        a1 = params.mul(&a1, &params.exp(&params.exp_g(k), l));
        a2 = params.mul(&a2, &params.exp(&params.exp(&h, k), l));
    }
    let c = challenge(params, [&g, &h, pk, &sigma, &a1, &a2]);
    let response = chosen.iter().zip(&nonces).zip(&lambdas).fold(params.scalar_u64(0), |acc, ((share, k), l)| {
        let s_i = params.sub(k, &params.mul_scalar(&c, &share.value));
        params.add(&acc, &params.mul_scalar(l, &s_i))
    });
    Ok((sigma, DleqProof { challenge: c, response }))
}
