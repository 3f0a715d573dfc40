//! Economically viable randomness on an idealized smart-contract platform.

pub mod chain;
pub mod dkg;
pub mod escrow;
pub mod game;
pub mod groupcrypto;
pub mod multishot;
pub mod protocol;
pub mod scalar;

pub use num_bigint::BigUint;

/// Group arithmetic over machine words (tiny, toy and medium profiles).
pub type SmallGroup = groupcrypto::GroupParams<u64>;
/// Group arithmetic over arbitrary-precision integers (standard profile).
pub type StandardGroup = groupcrypto::GroupParams<BigUint>;
/// Game played over the small-integer groups.
pub type SmallGame = game::Game<u64>;
