//! The authentication protocol: trusted server, Alice, and Bob.
//!
//! One round proceeds as follows. Alice asks the server (encrypted under her
//! key) for an exchange with Bob. The server describes the location, basis,
//! and polarization of `d` tamper-detection slots to both parties under their
//! respective keys, then sends a stream of `k + d` signal pairs: entangled
//! key pairs at the non-tamper slots, identically polarized twin pairs at the
//! tamper slots. Each party measures key slots in the fixed public key basis
//! and tamper slots in the bases from the server's message, checks the tamper
//! bits against the announced polarizations, and restarts the protocol when
//! the observed error rate exceeds the threshold. On a clean round Alice
//! discloses her first `m` measured key bits and Bob accepts when they all
//! match his own.
//!
//! The server never learns the measured key bits: it keeps only the tamper
//! spec and the pair identifiers, and the measurement outcomes are never
//! transmitted to it.

use alloc::vec::Vec;

use crate::adversary::{self, AdversaryStrategy, EveKnowledge, StrategyKind};
use crate::classical::{AuthRequest, ChannelTranscript, Party, SecretKey};
use crate::qchannel::{
    emit_signal, measure, Basis, Bit, Emission, PairId, PairRegistry, Photon, PhotonSourceModel,
};
use crate::rng::SplitMix64;

/// Protocol sizing and policy parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    /// `k`, the number of entangled key slots.
    pub key_count: u32,
    /// `d`, the number of tamper-detection slots.
    pub tamper_count: u32,
    /// Target probability `D` bounding both forgery and evasion.
    pub security_target: f64,
    /// Maximum tolerated tamper-bit error fraction before a restart.
    pub error_threshold: f64,
    /// `m`, how many key bits Alice discloses for authentication; the
    /// remaining `k - m` stay a shared secret.
    pub disclosed_count: u32,
    /// The pre-agreed basis in which every key slot is measured.
    pub key_basis: Basis,
    /// How many restarts are attempted after failed tamper checks.
    pub max_restarts: u32,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        // Balanced sizing at D = 2^-17: k = 17, d = 41.
        Self {
            key_count: 17,
            tamper_count: 41,
            security_target: 7.62939453125e-6,
            error_threshold: 0.0,
            disclosed_count: 17,
            key_basis: Basis::Rectilinear,
            max_restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamError {
    #[error("key_count must be at least 1")]
    NoKeyBits,
    #[error("disclosed_count must lie in 1..=key_count, got {got} with key_count {key_count}")]
    BadDisclosedCount { got: u32, key_count: u32 },
    #[error("error_threshold must lie in [0, 1)")]
    BadErrorThreshold,
    #[error("security_target must lie strictly between 0 and 1")]
    BadSecurityTarget,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.key_count == 0 {
            return Err(ParamError::NoKeyBits);
        }
        if self.disclosed_count == 0 || self.disclosed_count > self.key_count {
            return Err(ParamError::BadDisclosedCount {
                got: self.disclosed_count,
                key_count: self.key_count,
            });
        }
        if !(self.error_threshold >= 0.0 && self.error_threshold < 1.0) {
            return Err(ParamError::BadErrorThreshold);
        }
        if !(self.security_target > 0.0 && self.security_target < 1.0) {
            return Err(ParamError::BadSecurityTarget);
        }
        Ok(())
    }

    pub fn total_slots(&self) -> u32 {
        self.key_count + self.tamper_count
    }
}

/// Location, basis, and polarization of every tamper-detection slot — the
/// content of the server's encrypted spec message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TamperSpec {
    entries: Vec<TamperEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TamperEntry {
    pub position: u32,
    pub basis: Basis,
    pub bit: Bit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SpecParseError {
    #[error("tamper spec truncated")]
    Truncated,
    #[error("tamper spec has trailing bytes")]
    TrailingBytes,
    #[error("invalid basis code {0}")]
    InvalidBasis(u8),
    #[error("invalid bit value {0}")]
    InvalidBit(u8),
    #[error("tamper positions must be strictly increasing")]
    NonIncreasingPositions,
}

impl TamperSpec {
    pub fn new(entries: Vec<TamperEntry>) -> Result<Self, SpecParseError> {
        if !entries.windows(2).all(|w| w[0].position < w[1].position) {
            return Err(SpecParseError::NonIncreasingPositions);
        }
        if let Some(bad) = entries.iter().find(|e| e.bit > 1) {
            return Err(SpecParseError::InvalidBit(bad.bit));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TamperEntry] {
        &self.entries
    }

    /// Number of tamper slots, `d`.
    pub fn count(&self) -> u32 {
        self.entries.len() as u32
    }

    pub fn positions(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|e| e.position)
    }

    pub fn is_tamper_slot(&self, slot: u32) -> bool {
        self.entry_for(slot).is_some()
    }

    pub fn entry_for(&self, slot: u32) -> Option<&TamperEntry> {
        self.entries
            .binary_search_by_key(&slot, |e| e.position)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// The key slots: every index in `[0, total)` that is not a tamper slot,
    /// ascending.
    pub fn key_slots(&self, total: u32) -> Vec<u32> {
        let mut slots = Vec::with_capacity(total as usize - self.entries.len());
        let mut tamper = self.positions().peekable();
        for slot in 0..total {
            if tamper.peek() == Some(&slot) {
                tamper.next();
            } else {
                slots.push(slot);
            }
        }
        slots
    }

    /// Wire encoding: `d` as `u32`, then `d` triples of
    /// `(position: u32, basis: u8, bit: u8)`, all little-endian.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 6 * self.entries.len());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for entry in &self.entries {
            out.extend_from_slice(&entry.position.to_le_bytes());
            out.push(entry.basis.code());
            out.push(entry.bit);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, SpecParseError> {
        if bytes.len() < 4 {
            return Err(SpecParseError::Truncated);
        }
        let count = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        let body = &bytes[4..];
        if body.len() < count * 6 {
            return Err(SpecParseError::Truncated);
        }
        if body.len() > count * 6 {
            return Err(SpecParseError::TrailingBytes);
        }
        let mut entries = Vec::with_capacity(count);
        for chunk in body.chunks_exact(6) {
            let position = u32::from_le_bytes(chunk[..4].try_into().unwrap());
            let basis =
                Basis::from_code(chunk[4]).ok_or(SpecParseError::InvalidBasis(chunk[4]))?;
            if chunk[5] > 1 {
                return Err(SpecParseError::InvalidBit(chunk[5]));
            }
            entries.push(TamperEntry { position, basis, bit: chunk[5] });
        }
        Self::new(entries)
    }
}

/// Draw a tamper spec: a uniform `d`-subset of the `k + d` slots, each with
/// an independent uniform basis and bit.
pub fn build_tamper_spec(key_count: u32, tamper_count: u32, rng: &mut SplitMix64) -> TamperSpec {
    let positions = rng.subset(key_count + tamper_count, tamper_count);
    let entries = positions
        .into_iter()
        .map(|position| TamperEntry {
            position,
            basis: Basis::random(rng),
            bit: rng.bit(),
        })
        .collect();
    TamperSpec { entries }
}

/// Tamper-check outcome of one party.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

/// One party's measurement record for a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyResult {
    /// Measured key bits, in ascending key-slot order.
    pub key_bits: Vec<Bit>,
    pub tamper_errors: u32,
    pub tamper_checked: u32,
    pub verdict: Verdict,
}

impl PartyResult {
    pub fn tamper_error_rate(&self) -> f64 {
        if self.tamper_checked == 0 {
            0.0
        } else {
            f64::from(self.tamper_errors) / f64::from(self.tamper_checked)
        }
    }
}

/// Measure one party's photon stream against the decoded tamper spec.
///
/// Key slots are measured in the protocol key basis, tamper slots in the
/// basis the server announced; only the first photon of a multi-photon arm is
/// measured, siblings are discarded. The verdict passes when the tamper error
/// fraction stays within the threshold (trivially so when `d = 0`).
pub fn party_measure(
    arms: Vec<Vec<Photon>>,
    spec: &TamperSpec,
    params: &ProtocolParams,
    registry: &mut PairRegistry,
    rng: &mut SplitMix64,
) -> PartyResult {
    debug_assert_eq!(arms.len() as u32, params.total_slots());
    let mut key_bits = Vec::with_capacity(params.key_count as usize);
    let mut tamper_errors = 0u32;
    let mut tamper_checked = 0u32;
    for (slot, arm) in arms.into_iter().enumerate() {
        let mut photon = arm.into_iter().next().expect("lossless channel arm");
        match spec.entry_for(slot as u32) {
            Some(entry) => {
                let observed = measure(&mut photon, entry.basis, registry, rng)
                    .expect("stream photons are fresh");
                tamper_checked += 1;
                if observed != entry.bit {
                    tamper_errors += 1;
                }
            }
            None => {
                let bit = measure(&mut photon, params.key_basis, registry, rng)
                    .expect("stream photons are fresh");
                key_bits.push(bit);
            }
        }
    }
    let pass = if tamper_checked == 0 {
        true
    } else {
        f64::from(tamper_errors) / f64::from(tamper_checked) <= params.error_threshold
    };
    PartyResult {
        key_bits,
        tamper_errors,
        tamper_checked,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    }
}

/// Alice's disclosure: which key slots she announces (as ordinals
/// into the key-slot sequence) and her measured bits there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disclosure {
    pub key_ordinals: Vec<u32>,
    pub bits: Vec<Bit>,
}

/// Bob's acceptance check: every disclosed bit must equal his own
/// measurement at the same key slot. Exact match, no tolerance.
pub fn authenticate(disclosure: &Disclosure, bob: &PartyResult) -> bool {
    debug_assert_eq!(disclosure.key_ordinals.len(), disclosure.bits.len());
    debug_assert!(!disclosure.key_ordinals.is_empty());
    disclosure
        .key_ordinals
        .iter()
        .zip(&disclosure.bits)
        .all(|(&ordinal, &bit)| bob.key_bits.get(ordinal as usize) == Some(&bit))
}

/// Keys the two parties share with the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionKeys {
    pub alice: SecretKey,
    pub bob: SecretKey,
}

/// Everything the server retains after distributing a round: the tamper spec
/// and the identifiers of the entangled pairs it emitted. Measurement
/// outcomes are never part of this state, so the server cannot know the
/// resulting key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerState {
    pub spec: TamperSpec,
    pub pair_ids: Vec<PairId>,
}

/// Output of the server's half of one round.
#[derive(Debug)]
pub struct ServerRound {
    pub server_state: ServerState,
    /// Transcript indices of the encrypted tamper-spec messages.
    pub msg_alice: usize,
    pub msg_bob: usize,
    /// Per-slot photon arms addressed to each party.
    pub alice_arms: Vec<Vec<Photon>>,
    pub bob_arms: Vec<Vec<Photon>>,
}

/// Distribute spec messages and emit the photon stream, with a freshly
/// drawn tamper spec.
#[allow(clippy::too_many_arguments)]
pub fn server_round(
    params: &ProtocolParams,
    keys: &SessionKeys,
    source: &PhotonSourceModel,
    registry: &mut PairRegistry,
    transcript: &mut ChannelTranscript,
    nonce_seq: &mut u64,
    rng: &mut SplitMix64,
) -> ServerRound {
    let spec = build_tamper_spec(params.key_count, params.tamper_count, rng);
    server_round_with_spec(params, spec, keys, source, registry, transcript, nonce_seq, rng)
}

/// Spec distribution and stream emission with a caller-provided tamper
/// spec (used by fixtures).
#[allow(clippy::too_many_arguments)]
pub fn server_round_with_spec(
    params: &ProtocolParams,
    spec: TamperSpec,
    keys: &SessionKeys,
    source: &PhotonSourceModel,
    registry: &mut PairRegistry,
    transcript: &mut ChannelTranscript,
    nonce_seq: &mut u64,
    rng: &mut SplitMix64,
) -> ServerRound {
    debug_assert_eq!(spec.count(), params.tamper_count);
    let plaintext = spec.encode();
    let msg_alice = transcript.send(
        Party::Server,
        Party::Alice,
        keys.alice,
        next_nonce(nonce_seq),
        &plaintext,
    );
    let msg_bob = transcript.send(
        Party::Server,
        Party::Bob,
        keys.bob,
        next_nonce(nonce_seq),
        &plaintext,
    );

    let total = params.total_slots();
    let mut alice_arms = Vec::with_capacity(total as usize);
    let mut bob_arms = Vec::with_capacity(total as usize);
    let mut pair_ids = Vec::with_capacity(params.key_count as usize);
    for slot in 0..total {
        let emission = match spec.entry_for(slot) {
            Some(entry) => Emission::Tamper { basis: entry.basis, bit: entry.bit },
            None => Emission::Key,
        };
        let signal = emit_signal(emission, source, registry, rng);
        if let crate::qchannel::PhotonState::EntangledHalf { pair } = signal.alice_arm[0].state()
        {
            pair_ids.push(pair);
        }
        alice_arms.push(signal.alice_arm);
        bob_arms.push(signal.bob_arm);
    }
    ServerRound {
        server_state: ServerState { spec, pair_ids },
        msg_alice,
        msg_bob,
        alice_arms,
        bob_arms,
    }
}

fn next_nonce(seq: &mut u64) -> u64 {
    let n = *seq;
    *seq += 1;
    n
}

/// Which quantum arm(s) the eavesdropper taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvePlacement {
    /// The server-to-Alice arm (the analysis default).
    #[default]
    AliceArm,
    BobArm,
    BothArms,
}

/// Per-trial record of one full protocol execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Bob accepted a token — Alice's honest one or a forged one.
    pub authenticated: bool,
    /// Bob accepted Alice's honest disclosure.
    pub honest_token_accepted: bool,
    /// The forged token matched every disclosed slot (implies
    /// `authenticated`).
    pub eve_forged_auth: bool,
    /// The first round's tamper check failed at either party. Because a
    /// passing first round ends the protocol, this is also "any round
    /// flagged".
    pub eavesdropping_detected: bool,
    pub restarts: u32,
    /// Every round up to the restart budget failed its tamper check.
    pub restart_limit_exceeded: bool,
    /// Key slots whose bit Eve reliably knows after the final round.
    pub eve_key_bits_known: u32,
    /// Eve measured every key slot in the first round (the coverage event of
    /// the subset-guessing analysis, which counts any measured bit as known).
    pub eve_all_key_slots_measured: bool,
    /// How many disclosed bits the forged token had to guess blind.
    pub forged_bits_guessed: u32,
    /// First-round tamper tallies, an unconditioned per-bit sample.
    pub alice_tamper_errors: u32,
    pub bob_tamper_errors: u32,
    pub tamper_checked: u32,
    /// Key slots where Alice's and Bob's first-round bits agreed; like the
    /// tamper tallies this is sampled before any restart can condition it.
    pub key_agreements: u32,
    /// Key bits Alice withheld as a shared secret (`k - m` on honest
    /// acceptance).
    pub retained_secret_bits: u32,
}

impl TrialOutcome {
    pub fn alice_tamper_error_rate(&self) -> f64 {
        rate(self.alice_tamper_errors, self.tamper_checked)
    }

    pub fn bob_tamper_error_rate(&self) -> f64 {
        rate(self.bob_tamper_errors, self.tamper_checked)
    }
}

fn rate(count: u32, total: u32) -> f64 {
    if total == 0 {
        0.0
    } else {
        f64::from(count) / f64::from(total)
    }
}

struct RoundRecord {
    alice: PartyResult,
    bob: PartyResult,
    knowledge: EveKnowledge,
    key_slots: Vec<u32>,
}

impl RoundRecord {
    fn key_agreements(&self) -> u32 {
        self.alice
            .key_bits
            .iter()
            .zip(&self.bob.key_bits)
            .filter(|(a, b)| a == b)
            .count() as u32
    }
}

/// Unconditioned statistics of the first round, recorded before any restart.
struct FirstRound {
    alice_errors: u32,
    bob_errors: u32,
    tamper_checked: u32,
    detected: bool,
    covered_all_key_slots: bool,
    key_agreements: u32,
}

/// Execute the protocol end to end: request, spec distribution, photon
/// streams with the eavesdropper applied to the configured arm(s),
/// measurement, tamper check with restarts, disclosure, and verdicts.
///
/// Everything is deterministic given `rng`. The forged token's blind guesses
/// are drawn last, so honest statistics are identical whether `adversary` is
/// `None` or a passive strategy.
pub fn run_protocol(
    params: &ProtocolParams,
    source: &PhotonSourceModel,
    adversary: Option<&AdversaryStrategy>,
    placement: EvePlacement,
    rng: &mut SplitMix64,
) -> TrialOutcome {
    debug_assert!(params.validate().is_ok());
    debug_assert!(source.validate().is_ok());

    let keys = SessionKeys {
        alice: SecretKey(rng.next_u64()),
        bob: SecretKey(rng.next_u64()),
    };
    let mut transcript = ChannelTranscript::new();
    let mut nonce_seq = 0u64;

    // Alice's encrypted session request opens the exchange.
    let request = AuthRequest { initiator: Party::Alice, peer: Party::Bob };
    let request_idx = transcript.send(
        Party::Alice,
        Party::Server,
        keys.alice,
        next_nonce(&mut nonce_seq),
        &request.encode(),
    );
    let opened = transcript
        .receive(request_idx, keys.alice)
        .expect("request just sent");
    debug_assert_eq!(AuthRequest::decode(&opened), Ok(request));

    let mut restarts = 0u32;
    let mut first_round: Option<FirstRound> = None;
    let mut restart_limit_exceeded = false;

    let record = loop {
        let record = execute_round(
            params,
            source,
            adversary,
            placement,
            &keys,
            &mut transcript,
            &mut nonce_seq,
            rng,
        );
        let detected =
            record.alice.verdict == Verdict::Fail || record.bob.verdict == Verdict::Fail;
        if first_round.is_none() {
            first_round = Some(FirstRound {
                alice_errors: record.alice.tamper_errors,
                bob_errors: record.bob.tamper_errors,
                tamper_checked: record.alice.tamper_checked,
                detected,
                covered_all_key_slots: record
                    .key_slots
                    .iter()
                    .all(|slot| record.knowledge.measured_slots().contains(slot)),
                key_agreements: record.key_agreements(),
            });
        }
        if !detected {
            break record;
        }
        if restarts == params.max_restarts {
            restart_limit_exceeded = true;
            break record;
        }
        restarts += 1;
    };

    let first = first_round.expect("first round always recorded");

    let eve_key_bits_known = record
        .key_slots
        .iter()
        .filter(|slot| record.knowledge.known_bit(**slot).is_some())
        .count() as u32;

    let mut honest_token_accepted = false;
    let mut eve_forged_auth = false;
    let mut forged_bits_guessed = 0u32;
    let mut retained_secret_bits = 0u32;

    if !restart_limit_exceeded {
        let m = params.disclosed_count as usize;
        // Alice discloses her first m key slots.
        let disclosure = Disclosure {
            key_ordinals: (0..m as u32).collect(),
            bits: record.alice.key_bits[..m].to_vec(),
        };
        honest_token_accepted = authenticate(&disclosure, &record.bob);
        if honest_token_accepted {
            retained_secret_bits = params.key_count - params.disclosed_count;
        }

        // Eve submits her own token for the same slots; drawn last so her
        // guesses never perturb the honest statistics above.
        let disclosed_slots = &record.key_slots[..m];
        let forged = adversary::forge_attempt(&record.knowledge, disclosed_slots, rng);
        forged_bits_guessed = forged.guessed;
        eve_forged_auth = forged
            .bits
            .iter()
            .zip(&record.bob.key_bits[..m])
            .all(|(f, b)| f == b);
    }

    TrialOutcome {
        authenticated: honest_token_accepted || eve_forged_auth,
        honest_token_accepted,
        eve_forged_auth,
        eavesdropping_detected: first.detected,
        restarts,
        restart_limit_exceeded,
        eve_key_bits_known,
        eve_all_key_slots_measured: first.covered_all_key_slots,
        forged_bits_guessed,
        alice_tamper_errors: first.alice_errors,
        bob_tamper_errors: first.bob_errors,
        tamper_checked: first.tamper_checked,
        key_agreements: first.key_agreements,
        retained_secret_bits,
    }
}

#[allow(clippy::too_many_arguments)]
fn execute_round(
    params: &ProtocolParams,
    source: &PhotonSourceModel,
    adversary: Option<&AdversaryStrategy>,
    placement: EvePlacement,
    keys: &SessionKeys,
    transcript: &mut ChannelTranscript,
    nonce_seq: &mut u64,
    rng: &mut SplitMix64,
) -> RoundRecord {
    let mut registry = PairRegistry::new();
    let round = server_round(params, keys, source, &mut registry, transcript, nonce_seq, rng);

    // Each party decodes its own copy of the spec from the transcript.
    let alice_spec = TamperSpec::decode(
        &transcript
            .receive(round.msg_alice, keys.alice)
            .expect("spec message just sent"),
    )
    .expect("honest decryption parses");
    let bob_spec = TamperSpec::decode(
        &transcript
            .receive(round.msg_bob, keys.bob)
            .expect("spec message just sent"),
    )
    .expect("honest decryption parses");
    debug_assert_eq!(alice_spec, bob_spec);

    let mut alice_arms = round.alice_arms;
    let mut bob_arms = round.bob_arms;
    let mut tap = adversary::EveTap::default();
    if let Some(strategy) = adversary {
        // The oracle-locations cheat (and the decrypt-in-time threat model)
        // hand Eve the decoded spec; every other strategy runs blind.
        let spec_for_eve = (strategy.kind == StrategyKind::OracleLocations
            || strategy.knows_plaintext)
            .then_some(&alice_spec);
        if matches!(placement, EvePlacement::AliceArm | EvePlacement::BothArms) {
            let (forwarded, t) =
                adversary::apply(strategy, alice_arms, spec_for_eve, params, &mut registry, rng)
                    .expect("strategy preconditions hold");
            alice_arms = forwarded;
            tap.merge(t);
        }
        if matches!(placement, EvePlacement::BobArm | EvePlacement::BothArms) {
            let (forwarded, t) =
                adversary::apply(strategy, bob_arms, spec_for_eve, params, &mut registry, rng)
                    .expect("strategy preconditions hold");
            bob_arms = forwarded;
            tap.merge(t);
        }
    }

    let alice = party_measure(alice_arms, &alice_spec, params, &mut registry, rng);
    let bob = party_measure(bob_arms, &bob_spec, params, &mut registry, rng);

    // Photon-number-splitting Eve measures her retained photons only now,
    // after the honest measurements collapsed the key pairs.
    let knowledge = tap.resolve(params.key_basis, &round.server_state.spec, &mut registry, rng);
    let key_slots = round.server_state.spec.key_slots(params.total_slots());

    RoundRecord { alice, bob, knowledge, key_slots }
}
