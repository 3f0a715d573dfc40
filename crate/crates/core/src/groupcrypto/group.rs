use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::groupcrypto::CryptoError;
use crate::scalar::GroupInt;

/// 2048-bit MODP safe prime (RFC 3526, group 14).
const MODP_2048_HEX: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F14374\
FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7EDEE\
386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598D\
A48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB9ED5\
29077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3BE39E7\
72C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF6955817183995497\
CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

pub const DEFAULT_DOMAIN_TAG: &[u8] = b"evr/h1/v1";

/// Named parameter sets selectable from scenario files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// p = 607, q = 101: small enough for exhaustive oracles.
    Tiny,
    /// p = 23, q = 11: used for exhaustive polynomial enumeration.
    Toy,
    /// 64-bit safe prime; fast enough for statistical smoke tests.
    Medium,
    /// 2048-bit safe prime.
    Standard,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tiny" => Ok(Profile::Tiny),
            "toy" => Ok(Profile::Toy),
            "medium" => Ok(Profile::Medium),
            "standard" => Ok(Profile::Standard),
            other => Err(format!("unknown group profile `{other}`")),
        }
    }
}

/// A prime-order subgroup of Z_p^*.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GroupParams<T: GroupInt> {
    #[serde(with = "dec")]
    pub p: T,
    #[serde(with = "dec")]
    pub q: T,
    #[serde(with = "dec")]
    pub g: T,
    #[serde(with = "hex_bytes")]
    pub h1_domain_tag: Vec<u8>,
}

impl<T: GroupInt> GroupParams<T> {
    /// Validates `q | p-1`, `g != 1` and `g^q = 1`. Primality of `p` and `q` is
    /// checked with a Miller-Rabin test.
    pub fn new(p: T, q: T, g: T, h1_domain_tag: Vec<u8>) -> Result<Self, CryptoError> {
        let one = T::one();
        if q <= one || p <= q {
            return Err(CryptoError::InvalidParams("require 1 < q < p".into()));
        }
        if !((p.clone() - one.clone()) % q.clone()).is_zero() {
            return Err(CryptoError::InvalidParams("q does not divide p-1".into()));
        }
        if !is_probable_prime(&p.to_biguint()) || !is_probable_prime(&q.to_biguint()) {
            return Err(CryptoError::InvalidParams("p and q must be prime".into()));
        }
        let g = g % p.clone();
        if g.is_zero() || g.is_one() || !g.pow_mod(&q, &p).is_one() {
            return Err(CryptoError::InvalidParams("g must generate the order-q subgroup".into()));
        }
        Ok(GroupParams { p, q, g, h1_domain_tag })
    }

    fn from_u64s(p: u64, q: u64, g: u64) -> Self {
        Self::new(T::from_u64(p), T::from_u64(q), T::from_u64(g), DEFAULT_DOMAIN_TAG.to_vec())
            .expect("built-in parameters are valid")
    }

    pub fn tiny() -> Self {
        Self::from_u64s(607, 101, 64)
    }

    pub fn toy() -> Self {
        Self::from_u64s(23, 11, 4)
    }

    pub fn medium() -> Self {
        Self::from_u64s(9_223_372_036_854_778_487, 4_611_686_018_427_389_243, 4)
    }

    /// Only representable by wide backends; `None` for `u64`.
    pub fn standard() -> Option<Self> {
        let p = BigUint::parse_bytes(MODP_2048_HEX.as_bytes(), 16).expect("valid hex");
        let q = (&p - 1u32) >> 1;
        let p = T::from_biguint(&p)?;
        let q = T::from_biguint(&q)?;
        Some(Self::new(p, q, T::from_u64(4), DEFAULT_DOMAIN_TAG.to_vec()).expect("valid group"))
    }

    pub fn profile(profile: Profile) -> Option<Self> {
        match profile {
            Profile::Tiny => Some(Self::tiny()),
            Profile::Toy => Some(Self::toy()),
            Profile::Medium => Some(Self::medium()),
            Profile::Standard => Self::standard(),
        }
    }

    pub fn generator(&self) -> GroupElement<T> {
        GroupElement(self.g.clone())
    }

    pub fn identity(&self) -> GroupElement<T> {
        GroupElement(T::one())
    }

    pub fn scalar(&self, v: T) -> Scalar<T> {
        Scalar(v % self.q.clone())
    }

    pub fn scalar_u64(&self, v: u64) -> Scalar<T> {
        self.scalar(T::from_u64(v))
    }

    pub fn element(&self, v: T) -> Result<GroupElement<T>, CryptoError> {
        let e = GroupElement(v);
        if self.contains(&e) {
            Ok(e)
        } else {
            Err(CryptoError::NotInSubgroup)
        }
    }

    /// Membership in the order-q subgroup.
    pub fn contains(&self, e: &GroupElement<T>) -> bool {
        !e.0.is_zero() && e.0 < self.p && e.0.pow_mod(&self.q, &self.p).is_one()
    }

    /// g^x
    pub fn exp_g(&self, x: &Scalar<T>) -> GroupElement<T> {
        GroupElement(self.g.pow_mod(&x.0, &self.p))
    }

    pub fn exp(&self, base: &GroupElement<T>, x: &Scalar<T>) -> GroupElement<T> {
        GroupElement(base.0.pow_mod(&x.0, &self.p))
    }

    pub fn mul(&self, a: &GroupElement<T>, b: &GroupElement<T>) -> GroupElement<T> {
        GroupElement(a.0.mul_mod(&b.0, &self.p))
    }

    pub fn add(&self, a: &Scalar<T>, b: &Scalar<T>) -> Scalar<T> {
        Scalar(a.0.add_mod(&b.0, &self.q))
    }

    pub fn sub(&self, a: &Scalar<T>, b: &Scalar<T>) -> Scalar<T> {
        Scalar(a.0.sub_mod(&b.0, &self.q))
    }

    pub fn mul_scalar(&self, a: &Scalar<T>, b: &Scalar<T>) -> Scalar<T> {
        Scalar(a.0.mul_mod(&b.0, &self.q))
    }

    pub fn inv_scalar(&self, a: &Scalar<T>) -> Scalar<T> {
        Scalar(a.0.inv_mod_prime(&self.q))
    }

    /// Uniform-enough sampling: 16 surplus bytes before reduction.
    pub fn random_scalar(&self, rng: &mut impl RngCore) -> Scalar<T> {
        let mut buf = vec![0u8; self.scalar_width() + 16];
        rng.fill_bytes(&mut buf);
        Scalar(T::from_be_bytes_mod(&buf, &self.q))
    }

    pub fn element_width(&self) -> usize {
        self.p.byte_width()
    }

    pub fn scalar_width(&self) -> usize {
        self.q.byte_width()
    }

    pub fn encode_scalar(&self, s: &Scalar<T>) -> Vec<u8> {
        s.0.to_be_bytes_padded(self.scalar_width())
    }

    pub fn encode_element(&self, e: &GroupElement<T>) -> Vec<u8> {
        e.0.to_be_bytes_padded(self.element_width())
    }

    /// Every subgroup element, in ascending exponent order. Only sensible for tiny groups.
    pub fn enumerate_subgroup(&self) -> Vec<GroupElement<T>> {
        let q = self.q.low_u64();
        (0..q).map(|k| self.exp_g(&self.scalar_u64(k))).collect()
    }
}

/// An element of Z_q.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar<T: GroupInt>(pub T);

/// An element of the order-q subgroup of Z_p^*.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement<T: GroupInt>(pub T);

impl<T: GroupInt> Scalar<T> {
    pub fn value(&self) -> &T {
        &self.0
    }
}

impl<T: GroupInt> GroupElement<T> {
    pub fn value(&self) -> &T {
        &self.0
    }
}

impl<T: GroupInt> fmt::Display for Scalar<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl<T: GroupInt> fmt::Display for GroupElement<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

macro_rules! decimal_serde {
    ($ty:ident) => {
        impl<T: GroupInt> Serialize for $ty<T> {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(&self.0)
            }
        }

        impl<'de, T: GroupInt> Deserialize<'de> for $ty<T> {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                dec::deserialize(d).map($ty)
            }
        }
    };
}

decimal_serde!(Scalar);
decimal_serde!(GroupElement);

/// Decimal-string serde for backend integers (JSON numbers cannot hold 2048 bits).
pub(crate) mod dec {
    use super::*;

    pub fn serialize<T: GroupInt, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T: GroupInt, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse::<T>().map_err(|_| D::Error::custom(format!("invalid integer `{raw}`")))
    }
}

pub(crate) mod hex_bytes {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_hex(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let raw = String::deserialize(d)?;
        from_hex(&raw).ok_or_else(|| D::Error::custom("invalid hex string"))
    }
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn from_hex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok()).collect()
}

/// Deterministic Miller-Rabin with fixed small-prime bases.
pub fn is_probable_prime(n: &BigUint) -> bool {
    const BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for b in BASES {
        let b = BigUint::from(b);
        if *n == b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let mut d = n_minus_one.clone();
    let mut r = 0u32;
    while (&d % &two).is_zero() {
        d >>= 1;
        r += 1;
    }
    'witness: for b in BASES {
        let mut x = BigUint::from(b).modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..r {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_validate() {
        let tiny = GroupParams::<u64>::tiny();
        assert_eq!((tiny.p, tiny.q), (607, 101));
        assert_eq!(GroupParams::<u64>::toy().q, 11);
        assert!(GroupParams::<u64>::standard().is_none());
        let std = GroupParams::<BigUint>::standard().unwrap();
        assert_eq!(std.p.bits(), 2048);
        assert!(std.q.bits() >= 255);
    }

    #[test]
    fn medium_profile_in_u64_and_biguint_agree() {
        let small = GroupParams::<u64>::medium();
        let wide = GroupParams::<BigUint>::medium();
        assert_eq!(small.p, wide.p.low_u64());
        assert!(small.q > 1 << 31);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(GroupParams::<u64>::new(607, 101, 1, vec![]).is_err());
        assert!(GroupParams::<u64>::new(607, 101, 2, vec![]).is_err()); // order 606, not 101
        assert!(GroupParams::<u64>::new(605, 101, 4, vec![]).is_err());
        assert!(GroupParams::<u64>::new(23, 7, 4, vec![]).is_err());
    }

    #[test]
    fn subgroup_enumeration_is_complete() {
        let params = GroupParams::<u64>::tiny();
        let mut all = params.enumerate_subgroup();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 101);
        let members = (1..607).filter(|v| params.contains(&GroupElement(*v))).count();
        assert_eq!(members, 101);
    }

    #[test]
    fn serde_is_decimal() {
        let params = GroupParams::<u64>::tiny();
        let json = serde_json::to_string(&params).unwrap();
        assert_eq!(json, r#"{"p":"607","q":"101","g":"64","h1_domain_tag":"6576722f68312f7631"}"#);
        let back: GroupParams<u64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn miller_rabin_small_cases() {
        let primes: Vec<u32> = (2..200u32).filter(|n| is_probable_prime(&BigUint::from(*n))).collect();
        let naive: Vec<u32> = (2..200u32).filter(|n| (2..*n).all(|d| n % d != 0)).collect();
        assert_eq!(primes, naive);
    }
}
