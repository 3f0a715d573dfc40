use std::collections::BTreeSet;

use evr_core::dkg::{dkg_commit_run, dkg_reveal_run, DkgConfig};
use evr_core::escrow::round_message;
use evr_core::groupcrypto::{
    hash_to_group, reconstruct, shamir_share, ver, vrf_eval, vrf_keygen, vrf_verify, KnownAnswerVector, Scalar,
};
use evr_core::multishot::{extract_randomness, produce_round, RoundSchedule};
use evr_core::{BigUint, SmallGroup, StandardGroup};

/// Sigmas from the DKG shares match the oracle `H1(m_i)^x`, where `x` comes from
/// an off-chain reconstruction, for every qualifying subset of slots.
#[test]
fn multishot_rounds_match_the_oracle_for_every_subset() {
    let params = SmallGroup::tiny();
    let (n, t) = (6u64, 4u64);
    let tr = dkg_commit_run(&DkgConfig::honest(params.clone(), n, t), 31).unwrap();
    let everyone: BTreeSet<u64> = (1..=n).collect();
    let x = dkg_reveal_run(&tr, &everyone, t).unwrap();
    let keys = tr.share_keys();
    let schedule = RoundSchedule::at_times(&[100, 200, 300]);
    let mut bits = Vec::new();
    for i in 1..=3 {
        let oracle = params.exp(&hash_to_group(&params, &round_message(i)), &x);
        for mask in 0u32..64 {
            if mask.count_ones() <= t as u32 {
                continue;
            }
            let shares: Vec<_> = tr.final_shares.iter().filter(|s| mask & (1 << (s.index - 1)) != 0).cloned().collect();
            let out = produce_round(&params, &shares, &keys, t as usize, i, &schedule, &tr.public_key).unwrap();
            assert_eq!(out.sigma, oracle, "round {i}, subset {mask:06b}");
            assert!(vrf_verify(&params, &tr.public_key, &round_message(i), &out.sigma, &out.proof));
            assert_eq!(out.random_bits, extract_randomness(&params, &oracle));
        }
        bits.push(extract_randomness(&params, &oracle));
    }
    assert!(bits[0] != bits[1] && bits[1] != bits[2] && bits[0] != bits[2]);
}

/// Over 10^4 VRF outputs on the 64-bit group the extracted bits are balanced
/// within three standard deviations.
#[test]
fn extracted_bits_are_balanced() {
    let params = SmallGroup::medium();
    let (sk, _) = vrf_keygen(&params, 2024);
    let samples = 10_000u64;
    let mut ones = 0u64;
    for k in 0..samples {
        let (sigma, _) = vrf_eval(&params, &sk, &k.to_be_bytes());
        ones += u64::from(extract_randomness(&params, &sigma).count_ones());
    }
    let total = (samples * 256) as f64;
    let sd = (total * 0.25).sqrt();
    let dev = (ones as f64 - total / 2.0).abs();
    assert!(dev <= 3.0 * sd, "{ones} ones of {total}, {dev:.0} > 3 sd = {:.0}", 3.0 * sd);
}

#[test]
fn standard_profile_shares_and_evaluates() {
    let params = StandardGroup::standard().expect("RFC 3526 group validates");
    let x = Scalar(BigUint::from(123_456_789u64));
    let (shares, com) = shamir_share(&params, &x, 2, 4, 3).unwrap();
    assert_eq!(reconstruct(&params, &shares[1..], 2).unwrap(), x);
    assert!(ver(&params, &x, com.public_key()));
    let (sk, pk) = vrf_keygen(&params, 8);
    let (sigma, proof) = vrf_eval(&params, &sk, b"round");
    assert!(vrf_verify(&params, &pk, b"round", &sigma, &proof));
    assert!(!vrf_verify(&params, &pk, b"other", &sigma, &proof));
}

#[test]
fn known_answer_vectors_are_stable() {
    let params = SmallGroup::tiny();
    let messages: Vec<Vec<u8>> = (1..=3).map(round_message).collect();
    let a = KnownAnswerVector::generate(&params, 4, 6, 5, &messages).unwrap();
    assert_eq!(a, KnownAnswerVector::generate(&params, 4, 6, 5, &messages).unwrap());
    assert!(a.check().is_empty());
    let mut broken = a.clone();
    broken.shares[2].value = Scalar((broken.shares[2].value.0 + 1) % params.q);
    let failures = broken.check();
    assert!(failures.iter().any(|f| f.contains("share 3")), "{failures:?}");
}
