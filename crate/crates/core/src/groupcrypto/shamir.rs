use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::group::{GroupElement, GroupParams, Scalar};
use super::CryptoError;
use crate::scalar::GroupInt;

/// Evaluation of the sharing polynomial at `index`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Share<T: GroupInt> {
    pub index: u64,
    pub value: Scalar<T>,
}

pub type ShareSet<T> = Vec<Share<T>>;

/// Public commitments `A_k = g^{a_k}` to the coefficients of a sharing polynomial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeldmanCommitment<T: GroupInt> {
    pub coeff_commits: Vec<GroupElement<T>>,
}

impl<T: GroupInt> FeldmanCommitment<T> {
    pub fn threshold(&self) -> usize {
        self.coeff_commits.len().saturating_sub(1)
    }

    /// `A_0`, the commitment to the shared secret.
    pub fn public_key(&self) -> &GroupElement<T> {
        &self.coeff_commits[0]
    }

    /// `prod_k A_k^{index^k}`, i.e. the value `g^{f(index)}` should equal.
    pub fn share_public_key(&self, params: &GroupParams<T>, index: u64) -> GroupElement<T> {
        let i = params.scalar_u64(index);
        let mut power = params.scalar_u64(1);
        let mut acc = params.identity();
        for a in &self.coeff_commits {
            acc = params.mul(&acc, &params.exp(a, &power));
            power = params.mul_scalar(&power, &i);
        }
        acc
    }

    /// Componentwise product: the commitment to the sum of the polynomials.
    pub fn aggregate<'a>(
        params: &GroupParams<T>,
        parts: impl IntoIterator<Item = &'a FeldmanCommitment<T>>,
    ) -> Option<FeldmanCommitment<T>> {
        let mut iter = parts.into_iter();
        let mut acc = iter.next()?.clone();
        for c in iter {
            if c.coeff_commits.len() != acc.coeff_commits.len() {
                return None;
            }
            for (a, b) in acc.coeff_commits.iter_mut().zip(&c.coeff_commits) {
                *a = params.mul(a, b);
            }
        }
        Some(acc)
    }
}

/// Coefficients `a_0..a_t` over Z_q, `a_0` being the secret.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial<T: GroupInt> {
    pub coeffs: Vec<Scalar<T>>,
}

impl<T: GroupInt> Polynomial<T> {
    pub fn random(params: &GroupParams<T>, secret: Scalar<T>, degree: usize, rng: &mut ChaCha20Rng) -> Self {
        let mut coeffs = Vec::with_capacity(degree + 1);
        coeffs.push(secret);
        coeffs.extend((0..degree).map(|_| params.random_scalar(rng)));
        Polynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Horner evaluation mod q.
    pub fn eval(&self, params: &GroupParams<T>, at: u64) -> Scalar<T> {
        let x = params.scalar_u64(at);
        self.coeffs.iter().rev().fold(params.scalar_u64(0), |acc, c| params.add(&params.mul_scalar(&acc, &x), c))
    }

    pub fn commit(&self, params: &GroupParams<T>) -> FeldmanCommitment<T> {
        FeldmanCommitment { coeff_commits: self.coeffs.iter().map(|c| params.exp_g(c)).collect() }
    }

    /// Shares for indices `1..=n`.
    pub fn deal(&self, params: &GroupParams<T>, n: usize) -> ShareSet<T> {
        (1..=n as u64).map(|i| Share { index: i, value: self.eval(params, i) }).collect()
    }
}

fn check_threshold<T: GroupInt>(params: &GroupParams<T>, t: usize, n: usize) -> Result<(), CryptoError> {
    if t == 0 || t >= n {
        return Err(CryptoError::InvalidThreshold { t, n });
    }
    if T::from_u64(n as u64) >= params.q {
        return Err(CryptoError::InvalidThreshold { t, n });
    }
    Ok(())
}

/// Splits `x` into `n` shares, any `t + 1` of which reconstruct it.
pub fn shamir_share<T: GroupInt>(
    params: &GroupParams<T>,
    x: &Scalar<T>,
    t: usize,
    n: usize,
    rng_seed: u64,
) -> Result<(ShareSet<T>, FeldmanCommitment<T>), CryptoError> {
    check_threshold(params, t, n)?;
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let poly = Polynomial::random(params, x.clone(), t, &mut rng);
    Ok((poly.deal(params, n), poly.commit(params)))
}

/// Feldman check `g^{value} == prod_k A_k^{index^k}`.
pub fn verify_share<T: GroupInt>(params: &GroupParams<T>, share: &Share<T>, com: &FeldmanCommitment<T>) -> bool {
    if share.index == 0 || com.coeff_commits.is_empty() {
        return false;
    }
    if !com.coeff_commits.iter().all(|a| params.contains(a)) {
        return false;
    }
    params.exp_g(&share.value) == com.share_public_key(params, share.index)
}

/// Lagrange coefficients at zero for the given distinct, non-zero indices.
pub fn lagrange_at_zero<T: GroupInt>(params: &GroupParams<T>, indices: &[u64]) -> Result<Vec<Scalar<T>>, CryptoError> {
    let mut seen = BTreeSet::new();
    for &i in indices {
        if i == 0 || T::from_u64(i) >= params.q {
            return Err(CryptoError::InvalidIndex(i));
        }
        if !seen.insert(i) {
            return Err(CryptoError::DuplicateIndex(i));
        }
    }
    let coeffs = indices
        .iter()
        .map(|&i| {
            let xi = params.scalar_u64(i);
            let mut num = params.scalar_u64(1);
            let mut den = params.scalar_u64(1);
            for &j in indices.iter().filter(|&&j| j != i) {
                let xj = params.scalar_u64(j);
                // λ_i = Π x_j / (x_j - x_i)
                num = params.mul_scalar(&num, &xj);
                den = params.mul_scalar(&den, &params.sub(&xj, &xi));
            }
            params.mul_scalar(&num, &params.inv_scalar(&den))
        })
        .collect();
    Ok(coeffs)
}

/// Interpolates `f(0)` from at least `t + 1` shares with distinct indices.
pub fn reconstruct<T: GroupInt>(
    params: &GroupParams<T>,
    shares: &[Share<T>],
    t: usize,
) -> Result<Scalar<T>, CryptoError> {
    let indices: Vec<u64> = shares.iter().map(|s| s.index).collect();
    let lambdas = lagrange_at_zero(params, &indices)?;
    if shares.len() < t + 1 {
        return Err(CryptoError::NotEnoughShares { have: shares.len(), need: t + 1 });
    }
    Ok(shares
        .iter()
        .zip(&lambdas)
        .fold(params.scalar_u64(0), |acc, (s, l)| params.add(&acc, &params.mul_scalar(&s.value, l))))
}

/// The escrow's discrete-log commitment check: `X == g^x`.
pub fn ver<T: GroupInt>(params: &GroupParams<T>, x: &Scalar<T>, big_x: &GroupElement<T>) -> bool {
    &params.exp_g(x) == big_x
}
