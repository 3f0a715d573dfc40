//! Hashing with bit-exact canonical encodings.
//!
//! * integers: big-endian, fixed width (`byte_width(p)` for elements, `byte_width(q)`
//!   for scalars, 8 bytes for account ids and round indices)
//! * byte strings: 4-byte big-endian length prefix, then the bytes

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use super::group::{from_hex, to_hex, GroupElement, GroupParams, Scalar};
use crate::chain::AccountId;
use crate::scalar::GroupInt;

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|b| b.count_ones()).sum()
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", to_hex(&self.0))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_hex(&self.0))
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_hex(&self.0))
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        let bytes = from_hex(&raw).ok_or_else(|| D::Error::custom("invalid hex digest"))?;
        let arr: [u8; 32] = bytes.try_into().map_err(|_| D::Error::custom("digest must be 32 bytes"))?;
        Ok(Digest(arr))
    }
}

pub fn sha256(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

pub fn length_prefixed(bytes: &[u8]) -> Vec<u8> {
    let len = u32::try_from(bytes.len()).expect("message shorter than 4 GiB");
    let mut out = len.to_be_bytes().to_vec();
    out.extend_from_slice(bytes);
    out
}

/// Digest binding a secret encoding to the account that will collect the reward.
pub fn commit_digest(secret_encoding: &[u8], acc: AccountId) -> Digest {
    sha256(&[secret_encoding, &acc.0.to_be_bytes()])
}

/// `hash(x || acc)` over the canonical scalar encoding.
pub fn hash_commit<T: GroupInt>(params: &GroupParams<T>, x: &Scalar<T>, acc: AccountId) -> Digest {
    commit_digest(&params.encode_scalar(x), acc)
}

/// Exponent of H1(m), always in [1, q-1] so H1(m) is never the identity.
pub fn h1_exponent<T: GroupInt>(params: &GroupParams<T>, m: &[u8]) -> Scalar<T> {
    let d = sha256(&[&length_prefixed(&params.h1_domain_tag), &length_prefixed(m)]);
    let q_minus_one = params.q.clone() - T::one();
    Scalar(T::from_be_bytes_mod(&d.0, &q_minus_one) + T::one())
}

/// Hash-to-group. Its discrete log base g is public (see `h1_exponent`).
pub fn hash_to_group<T: GroupInt>(params: &GroupParams<T>, m: &[u8]) -> GroupElement<T> {
    params.exp_g(&h1_exponent(params, m))
}

/// 256 output bits derived from a group element.
pub fn extract_bits<T: GroupInt>(params: &GroupParams<T>, e: &GroupElement<T>) -> Digest {
    sha256(&[b"evr/extract/v1", &params.encode_element(e)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_digest_binds_account() {
        let params = GroupParams::<u64>::tiny();
        let x = params.scalar_u64(42);
        let a = hash_commit(&params, &x, AccountId(7));
        assert_eq!(a, hash_commit(&params, &x, AccountId(7)));
        assert_ne!(a, hash_commit(&params, &x, AccountId(8)));
        assert_ne!(a, hash_commit(&params, &params.scalar_u64(43), AccountId(7)));
        assert_eq!(a.as_bytes().len(), 32);
    }

    #[test]
    fn commit_digest_known_answer() {
        // q = 101 fits one byte: sha256(0x2a || 0x0000000000000007)
        let params = GroupParams::<u64>::tiny();
        let d = hash_commit(&params, &params.scalar_u64(42), AccountId(7));
        assert_eq!(d.to_string(), "6cecfca666cdffad23a356af67d1087372b574ea03a717a2ab61790618b99a43");
    }

    #[test]
    fn h1_lands_in_subgroup_and_avoids_identity() {
        let params = GroupParams::<u64>::tiny();
        for i in 0u32..500 {
            let m = i.to_be_bytes();
            let h = hash_to_group(&params, &m);
            assert!(params.contains(&h));
            assert_ne!(h, params.identity());
        }
    }

    #[test]
    fn digest_serde_roundtrip() {
        let d = sha256(&[b"abc"]);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, "\"ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad\"");
        assert_eq!(serde_json::from_str::<Digest>(&json).unwrap(), d);
    }
}
