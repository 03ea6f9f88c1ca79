//! Simulation core for a hybrid quantum/classical authentication protocol.
//!
//! A trusted server shares a symmetric key with each party and distributes
//! streams of entangled photon pairs (the authentication key bits) with
//! identically polarized tamper-detection pairs randomly interspersed.
//! Parties measure their halves, check the tamper bits against the server's
//! encrypted description, and authenticate by disclosing measured key bits.
//!
//! The crate models the photon channel ([`qchannel`]), the classical channel
//! with a toy keyed cipher ([`classical`]), the three-party protocol state
//! machines ([`protocol`]), pluggable eavesdropper strategies ([`adversary`]),
//! and the closed-form security bounds with exact big-integer combinatorics
//! ([`analysis`]). Everything is deterministic given a seed and usable without
//! the standard library (`alloc` is required).

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

// Re-exported so downstream crates can work with the exact rationals the
// analysis module produces.
pub use num_bigint;
pub use num_rational;

pub mod adversary;
pub mod analysis;
pub mod classical;
pub mod protocol;
pub mod qchannel;
pub mod rng;

pub use adversary::{AdversaryStrategy, EveKnowledge, StrategyKind};
pub use analysis::ExactProb;
pub use classical::{ChannelTranscript, ClassicalMessage, Party, SecretKey};
pub use protocol::{
    run_protocol, EvePlacement, ProtocolParams, TamperSpec, TrialOutcome,
};
pub use qchannel::{Basis, Bit, PairRegistry, Photon, PhotonSourceModel, SignalPair};
pub use rng::SplitMix64;
