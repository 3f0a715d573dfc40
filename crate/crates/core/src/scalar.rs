//! Integer backends for modular group arithmetic.
//!
//! Everything cryptographic in this crate is written against [`GroupInt`], a thin
//! extension of the `num-traits` integer vocabulary. Two backends ship with the
//! crate: `u64` (products are widened through `u128`, so any modulus below 2^64
//! works) and [`BigUint`] for the 2048-bit profile.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::Unsigned;

/// Unsigned integer type usable as a modulus, exponent and residue.
pub trait GroupInt: Unsigned + Clone + Ord + Hash + Debug + Display + FromStr + Send + Sync + 'static {
    fn from_u64(v: u64) -> Self;

    /// Lossy conversion used for indices and small test values.
    fn low_u64(&self) -> u64;

    fn to_biguint(&self) -> BigUint;

    fn from_biguint(v: &BigUint) -> Option<Self>;

    fn bits(&self) -> u64;

    fn mul_mod(&self, rhs: &Self, m: &Self) -> Self {
        (self.clone() * rhs.clone()) % m.clone()
    }

    fn add_mod(&self, rhs: &Self, m: &Self) -> Self {
        // both operands are reduced, so the sum never exceeds 2m - 2
        let a = self.clone() % m.clone();
        let b = rhs.clone() % m.clone();
        let gap = m.clone() - b.clone();
        if a >= gap {
            a - gap
        } else {
            a + b
        }
    }

    fn sub_mod(&self, rhs: &Self, m: &Self) -> Self {
        let a = self.clone() % m.clone();
        let b = rhs.clone() % m.clone();
        if a >= b {
            a - b
        } else {
            m.clone() - (b - a)
        }
    }

    fn neg_mod(&self, m: &Self) -> Self {
        Self::zero().sub_mod(self, m)
    }

    /// Square-and-multiply; backends may override with a native routine.
    fn pow_mod(&self, exp: &Self, m: &Self) -> Self {
        square_and_multiply(self, exp, m)
    }

    /// Inverse modulo a prime, via Fermat. Returns zero for zero.
    fn inv_mod_prime(&self, p: &Self) -> Self {
        let exp = p.clone() - Self::from_u64(2);
        self.pow_mod(&exp, p)
    }

    /// Interprets big-endian bytes and reduces modulo `m`.
    fn from_be_bytes_mod(bytes: &[u8], m: &Self) -> Self {
        let v = BigUint::from_bytes_be(bytes) % m.to_biguint();
        Self::from_biguint(&v).expect("residue below modulus fits the backend")
    }

    /// Big-endian encoding left-padded with zeros to `width` bytes.
    fn to_be_bytes_padded(&self, width: usize) -> Vec<u8> {
        let raw = self.to_biguint().to_bytes_be();
        let raw: &[u8] = if raw == [0] { &[] } else { &raw };
        assert!(raw.len() <= width, "value wider than {width} bytes");
        let mut out = vec![0u8; width - raw.len()];
        out.extend_from_slice(raw);
        out
    }

    /// Number of bytes needed for values strictly below `self`.
    fn byte_width(&self) -> usize {
        let bits = (self.clone() - Self::one()).bits().max(1);
        bits.div_ceil(8) as usize
    }
}

pub fn square_and_multiply<T: GroupInt>(base: &T, exp: &T, m: &T) -> T {
    let mut result = T::one() % m.clone();
    let mut base = base.clone() % m.clone();
    let two = T::from_u64(2);
    let mut e = exp.clone();
    while !e.is_zero() {
        if (e.clone() % two.clone()).is_one() {
            result = result.mul_mod(&base, m);
        }
        base = base.mul_mod(&base, m);
        e = e / two.clone();
    }
    result
}

impl GroupInt for u64 {
    fn from_u64(v: u64) -> Self {
        v
    }

    fn low_u64(&self) -> u64 {
        *self
    }

    fn to_biguint(&self) -> BigUint {
        BigUint::from(*self)
    }

    fn from_biguint(v: &BigUint) -> Option<Self> {
        let digits = v.to_u64_digits();
        match digits.len() {
            0 => Some(0),
            1 => Some(digits[0]),
            _ => None,
        }
    }

    fn bits(&self) -> u64 {
        u64::from(64 - self.leading_zeros())
    }

    fn mul_mod(&self, rhs: &Self, m: &Self) -> Self {
        ((u128::from(*self) * u128::from(*rhs)) % u128::from(*m)) as u64
    }

    fn add_mod(&self, rhs: &Self, m: &Self) -> Self {
        ((u128::from(*self % m) + u128::from(*rhs % m)) % u128::from(*m)) as u64
    }
}

impl GroupInt for BigUint {
    fn from_u64(v: u64) -> Self {
        BigUint::from(v)
    }

    fn low_u64(&self) -> u64 {
        self.iter_u64_digits().next().unwrap_or(0)
    }

    fn to_biguint(&self) -> BigUint {
        self.clone()
    }

    fn from_biguint(v: &BigUint) -> Option<Self> {
        Some(v.clone())
    }

    fn bits(&self) -> u64 {
        BigUint::bits(self)
    }

    fn pow_mod(&self, exp: &Self, m: &Self) -> Self {
        self.modpow(exp, m)
    }
}
