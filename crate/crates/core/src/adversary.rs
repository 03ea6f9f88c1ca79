//! Eavesdropper strategies on the quantum channel.
//!
//! Eve taps one photon arm (plus the ciphertext transcript, which tells her
//! nothing without a key) and forwards whatever she chooses downstream. The
//! strategies implement the attacks of the security analysis:
//!
//! * `InterceptResendAll` — measure the first photon of every slot in a
//!   uniformly random basis and forward a fresh photon in the observed state;
//! * `SubsetGuess(g)` — intercept-resend only a uniform `g`-subset of slots,
//!   hoping to cover every key slot while leaving tamper slots untouched;
//! * `PhotonNumberSplitting` — quietly keep one photon of every multi-photon
//!   signal (measured in the key basis after the honest measurements collapse
//!   the pairs) and intercept-resend single-photon signals;
//! * `OracleLocations` — a deliberate cheat given the decoded tamper spec,
//!   demonstrating why the spec's secrecy matters: measure exactly the key
//!   slots in the key basis and leave tamper slots undisturbed.
//!
//! A measured key bit counts as known only when Eve happened to use the key
//! basis; the classical analysis instead credits her with every measured key
//! slot, and that coverage event is tracked separately so both accountings
//! can be compared.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::protocol::{ProtocolParams, TamperSpec};
use crate::qchannel::{measure, split_arm, Basis, Bit, PairRegistry, Photon};
use crate::rng::SplitMix64;

/// Which attack Eve runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    /// Listen to the classical channel only; never touch a photon.
    Passive,
    InterceptResendAll,
    /// Intercept-resend a uniform subset of `guesses` slots.
    SubsetGuess { guesses: u32 },
    PhotonNumberSplitting,
    /// Cheat: Eve is handed the tamper spec and avoids every tamper slot.
    OracleLocations,
}

/// Eve's configuration: the attack plus whether the model grants her the
/// decrypted classical messages (the decrypt-in-time threat).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdversaryStrategy {
    pub kind: StrategyKind,
    pub knows_plaintext: bool,
}

impl AdversaryStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self { kind, knows_plaintext: false }
    }

    /// A subset guess smaller than `k` can never cover the key; such sizes
    /// are permitted for testing but are not a rational forgery attempt.
    pub fn is_rational_forgery(&self, key_count: u32) -> bool {
        match self.kind {
            StrategyKind::SubsetGuess { guesses } => guesses >= key_count,
            _ => true,
        }
    }

    pub fn validate(&self, params: &ProtocolParams) -> Result<(), StrategyError> {
        if let StrategyKind::SubsetGuess { guesses } = self.kind {
            let total = params.total_slots();
            if guesses > total {
                return Err(StrategyError::SubsetTooLarge { guesses, total });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StrategyError {
    #[error("subset of {guesses} slots exceeds the {total}-slot stream")]
    SubsetTooLarge { guesses: u32, total: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AdversaryError {
    #[error("oracle-locations strategy requires the tamper spec")]
    MissingSpec,
}

/// Raw record of Eve's interference with one round, before her deferred
/// measurements happen.
#[derive(Debug, Default)]
pub struct EveTap {
    /// Every measurement she made: (slot, basis used, bit observed). A slot
    /// can appear twice when she taps both arms.
    measured: Vec<(u32, Basis, Bit)>,
    /// Slots where the forwarded photon was re-prepared rather than passed
    /// through; only these can flag a tamper error.
    resent_slots: Vec<u32>,
    /// Photons split off multi-photon signals, measured after the honest
    /// parties collapse the pairs.
    retained: Vec<(u32, Photon)>,
}

impl EveTap {
    pub fn merge(&mut self, other: EveTap) {
        self.measured.extend(other.measured);
        self.resent_slots.extend(other.resent_slots);
        self.retained.extend(other.retained);
    }

    /// Measure any retained photons in the key basis and distill what Eve
    /// knows. Retained key photons are measured only now, after the pair has
    /// collapsed, so they reproduce the shared key bit.
    pub fn resolve(
        mut self,
        key_basis: Basis,
        spec: &TamperSpec,
        registry: &mut PairRegistry,
        rng: &mut SplitMix64,
    ) -> EveKnowledge {
        for (slot, mut photon) in core::mem::take(&mut self.retained) {
            let bit = measure(&mut photon, key_basis, registry, rng)
                .expect("retained photons are unmeasured");
            self.measured.push((slot, key_basis, bit));
        }
        // Only key-basis measurements are reliable knowledge; for a key slot
        // they repeat the collapsed pair bit, so duplicates agree.
        let slot_bits: BTreeMap<u32, Bit> = self
            .measured
            .iter()
            .filter(|(_, basis, _)| *basis == key_basis)
            .map(|&(slot, _, bit)| (slot, bit))
            .collect();
        let measured_slots: BTreeSet<u32> =
            self.measured.iter().map(|&(slot, _, _)| slot).collect();
        let disturbed_tamper_slots = self
            .resent_slots
            .iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|&&slot| spec.is_tamper_slot(slot))
            .count() as u32;
        EveKnowledge { slot_bits, measured_slots, disturbed_tamper_slots }
    }
}

/// What Eve has learned about one round.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EveKnowledge {
    /// Bits Eve can rely on: slots she measured in the key basis.
    slot_bits: BTreeMap<u32, Bit>,
    /// Every slot she measured, in any basis.
    measured_slots: BTreeSet<u32>,
    /// Tamper slots whose forwarded photon she re-prepared.
    disturbed_tamper_slots: u32,
}

impl EveKnowledge {
    pub fn known_bit(&self, slot: u32) -> Option<Bit> {
        self.slot_bits.get(&slot).copied()
    }

    pub fn known_count(&self) -> usize {
        self.slot_bits.len()
    }

    pub fn measured_slots(&self) -> &BTreeSet<u32> {
        &self.measured_slots
    }

    pub fn disturbed_tamper_slots(&self) -> u32 {
        self.disturbed_tamper_slots
    }
}

/// Run Eve's strategy over one arm stream, yielding the arms to forward
/// downstream and the raw tap record.
pub fn apply(
    strategy: &AdversaryStrategy,
    arms: Vec<Vec<Photon>>,
    spec: Option<&TamperSpec>,
    params: &ProtocolParams,
    registry: &mut PairRegistry,
    rng: &mut SplitMix64,
) -> Result<(Vec<Vec<Photon>>, EveTap), AdversaryError> {
    let mut tap = EveTap::default();
    match strategy.kind {
        StrategyKind::Passive => Ok((arms, tap)),
        StrategyKind::InterceptResendAll => {
            let forwarded = arms
                .into_iter()
                .enumerate()
                .map(|(slot, arm)| intercept_resend(slot as u32, arm, &mut tap, registry, rng))
                .collect();
            Ok((forwarded, tap))
        }
        StrategyKind::SubsetGuess { guesses } => {
            let chosen = rng.subset(arms.len() as u32, guesses.min(arms.len() as u32));
            let mut chosen = chosen.into_iter().peekable();
            let forwarded = arms
                .into_iter()
                .enumerate()
                .map(|(slot, arm)| {
                    if chosen.peek() == Some(&(slot as u32)) {
                        chosen.next();
                        intercept_resend(slot as u32, arm, &mut tap, registry, rng)
                    } else {
                        arm
                    }
                })
                .collect();
            Ok((forwarded, tap))
        }
        StrategyKind::PhotonNumberSplitting => {
            let forwarded = arms
                .into_iter()
                .enumerate()
                .map(|(slot, arm)| {
                    if arm.len() >= 2 {
                        let (kept, rest) =
                            split_arm(arm, 1).expect("multiplicity checked above");
                        tap.retained.push((slot as u32, kept[0]));
                        rest
                    } else {
                        intercept_resend(slot as u32, arm, &mut tap, registry, rng)
                    }
                })
                .collect();
            Ok((forwarded, tap))
        }
        StrategyKind::OracleLocations => {
            let spec = spec.ok_or(AdversaryError::MissingSpec)?;
            let forwarded = arms
                .into_iter()
                .enumerate()
                .map(|(slot, arm)| {
                    if spec.is_tamper_slot(slot as u32) {
                        arm
                    } else {
                        resend_in_basis(slot as u32, arm, params.key_basis, &mut tap, registry, rng)
                    }
                })
                .collect();
            Ok((forwarded, tap))
        }
    }
}

/// Measure the first photon in a uniformly random basis and forward a fresh
/// photon prepared in the observed state. Sibling photons are absorbed.
fn intercept_resend(
    slot: u32,
    arm: Vec<Photon>,
    tap: &mut EveTap,
    registry: &mut PairRegistry,
    rng: &mut SplitMix64,
) -> Vec<Photon> {
    let basis = Basis::random(rng);
    resend_in_basis(slot, arm, basis, tap, registry, rng)
}

fn resend_in_basis(
    slot: u32,
    arm: Vec<Photon>,
    basis: Basis,
    tap: &mut EveTap,
    registry: &mut PairRegistry,
    rng: &mut SplitMix64,
) -> Vec<Photon> {
    let mut photon = arm.into_iter().next().expect("lossless channel arm");
    let bit = measure(&mut photon, basis, registry, rng).expect("stream photons are fresh");
    tap.measured.push((slot, basis, bit));
    tap.resent_slots.push(slot);
    alloc::vec![Photon::product(basis, bit)]
}

/// Eve's authentication token for the disclosed slots: known bits where she
/// has them, uniform guesses elsewhere. She always produces a token; the
/// result records how much of it was guesswork.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgedToken {
    pub bits: Vec<Bit>,
    pub guessed: u32,
}

pub fn forge_attempt(
    knowledge: &EveKnowledge,
    disclosed_slots: &[u32],
    rng: &mut SplitMix64,
) -> ForgedToken {
    let mut guessed = 0u32;
    let bits = disclosed_slots
        .iter()
        .map(|&slot| {
            knowledge.known_bit(slot).unwrap_or_else(|| {
                guessed += 1;
                rng.bit()
            })
        })
        .collect();
    ForgedToken { bits, guessed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{build_tamper_spec, ProtocolParams, TamperEntry};
    use crate::qchannel::{emit_signal, Emission, PhotonSourceModel, PhotonState};

    fn params(k: u32, d: u32) -> ProtocolParams {
        ProtocolParams {
            key_count: k,
            tamper_count: d,
            disclosed_count: k,
            ..ProtocolParams::default()
        }
    }

    fn honest_arms(
        spec: &TamperSpec,
        p: &ProtocolParams,
        registry: &mut PairRegistry,
        rng: &mut SplitMix64,
    ) -> Vec<Vec<Photon>> {
        (0..p.total_slots())
            .map(|slot| {
                let emission = match spec.entry_for(slot) {
                    Some(e) => Emission::Tamper { basis: e.basis, bit: e.bit },
                    None => Emission::Key,
                };
                emit_signal(emission, &PhotonSourceModel::ideal(), registry, rng).alice_arm
            })
            .collect()
    }

    #[test]
    fn passive_leaves_arms_untouched() {
        let p = params(3, 2);
        let mut registry = PairRegistry::new();
        let mut rng = SplitMix64::new(1);
        let spec = build_tamper_spec(3, 2, &mut rng);
        let arms = honest_arms(&spec, &p, &mut registry, &mut rng);
        let states: Vec<_> = arms.iter().map(|a| a[0].state()).collect();
        let strategy = AdversaryStrategy::new(StrategyKind::Passive);
        let (forwarded, tap) =
            apply(&strategy, arms, None, &p, &mut registry, &mut rng).unwrap();
        let after: Vec<_> = forwarded.iter().map(|a| a[0].state()).collect();
        assert_eq!(states, after);
        let knowledge = tap.resolve(p.key_basis, &spec, &mut registry, &mut rng);
        assert_eq!(knowledge.known_count(), 0);
        assert_eq!(knowledge.disturbed_tamper_slots(), 0);
    }

    #[test]
    fn intercept_resend_touches_every_slot() {
        let p = params(4, 3);
        let mut registry = PairRegistry::new();
        let mut rng = SplitMix64::new(2);
        let spec = build_tamper_spec(4, 3, &mut rng);
        let arms = honest_arms(&spec, &p, &mut registry, &mut rng);
        let strategy = AdversaryStrategy::new(StrategyKind::InterceptResendAll);
        let (forwarded, tap) =
            apply(&strategy, arms, None, &p, &mut registry, &mut rng).unwrap();
        assert!(forwarded
            .iter()
            .all(|arm| matches!(arm[0].state(), PhotonState::Product { .. })));
        let knowledge = tap.resolve(p.key_basis, &spec, &mut registry, &mut rng);
        assert_eq!(knowledge.measured_slots().len(), 7);
        assert_eq!(knowledge.disturbed_tamper_slots(), 3);
    }

    #[test]
    fn full_subset_guess_equals_intercept_all() {
        let p = params(2, 2);
        let mut registry = PairRegistry::new();
        let mut rng = SplitMix64::new(3);
        let spec = build_tamper_spec(2, 2, &mut rng);
        let arms = honest_arms(&spec, &p, &mut registry, &mut rng);
        let strategy = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: 4 });
        let (forwarded, tap) =
            apply(&strategy, arms, None, &p, &mut registry, &mut rng).unwrap();
        assert!(forwarded
            .iter()
            .all(|arm| matches!(arm[0].state(), PhotonState::Product { .. })));
        let knowledge = tap.resolve(p.key_basis, &spec, &mut registry, &mut rng);
        assert_eq!(knowledge.measured_slots().len(), 4);
    }

    #[test]
    fn subset_guess_measures_exactly_g_slots() {
        let p = params(3, 3);
        let mut rng = SplitMix64::new(4);
        for _ in 0..50 {
            let mut registry = PairRegistry::new();
            let spec = build_tamper_spec(3, 3, &mut rng);
            let arms = honest_arms(&spec, &p, &mut registry, &mut rng);
            let strategy = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: 4 });
            let (_, tap) = apply(&strategy, arms, None, &p, &mut registry, &mut rng).unwrap();
            let knowledge = tap.resolve(p.key_basis, &spec, &mut registry, &mut rng);
            assert_eq!(knowledge.measured_slots().len(), 4);
        }
    }

    #[test]
    fn subset_choice_is_uniform_over_subsets() {
        // k + d = 5, g = 2: all C(5,2) = 10 subsets equally likely.
        let p = params(3, 2);
        let mut rng = SplitMix64::new(5);
        let spec = TamperSpec::new(vec![
            TamperEntry { position: 1, basis: Basis::Rectilinear, bit: 0 },
            TamperEntry { position: 3, basis: Basis::Diagonal, bit: 1 },
        ])
        .unwrap();
        let n = 100_000u32;
        let mut counts: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
        for _ in 0..n {
            let mut registry = PairRegistry::new();
            let arms = honest_arms(&spec, &p, &mut registry, &mut rng);
            let strategy = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: 2 });
            let (_, tap) = apply(&strategy, arms, None, &p, &mut registry, &mut rng).unwrap();
            let knowledge = tap.resolve(p.key_basis, &spec, &mut registry, &mut rng);
            let subset: Vec<u32> = knowledge.measured_slots().iter().copied().collect();
            *counts.entry(subset).or_default() += 1;
        }
        assert_eq!(counts.len(), 10);
        let expected = f64::from(n) / 10.0;
        let sigma = (f64::from(n) * 0.1 * 0.9).sqrt();
        for (subset, count) in counts {
            assert!(
                (f64::from(count) - expected).abs() < 4.0 * sigma,
                "subset {subset:?} count {count}"
            );
        }
    }

    #[test]
    fn pns_splits_multiphoton_and_resends_singles() {
        let p = params(2, 2);
        let mut registry = PairRegistry::new();
        let mut rng = SplitMix64::new(6);
        let spec = TamperSpec::new(vec![
            TamperEntry { position: 0, basis: Basis::Diagonal, bit: 1 },
            TamperEntry { position: 2, basis: Basis::Rectilinear, bit: 0 },
        ])
        .unwrap();
        // Hand-build arms: slots 0 and 1 multi-photon, slots 2 and 3 single.
        let pair_a = registry.new_pair();
        let pair_b = registry.new_pair();
        let arms = vec![
            vec![Photon::product(Basis::Diagonal, 1); 2],
            vec![Photon::entangled_half(pair_a); 3],
            vec![Photon::product(Basis::Rectilinear, 0)],
            vec![Photon::entangled_half(pair_b)],
        ];
        let strategy = AdversaryStrategy::new(StrategyKind::PhotonNumberSplitting);
        let (forwarded, tap) =
            apply(&strategy, arms, None, &p, &mut registry, &mut rng).unwrap();
        // Multi-photon arms lose exactly one photon and stay unmeasured.
        assert_eq!(forwarded[0].len(), 1);
        assert_eq!(forwarded[1].len(), 2);
        assert_eq!(
            forwarded[0][0].state(),
            PhotonState::Product { basis: Basis::Diagonal, bit: 1 }
        );
        // Single-photon arms were intercept-resent.
        assert_eq!(forwarded[2].len(), 1);
        assert!(matches!(forwarded[3][0].state(), PhotonState::Product { .. }));
        let knowledge = tap.resolve(p.key_basis, &spec, &mut registry, &mut rng);
        // All four slots measured: two retained, two resent.
        assert_eq!(knowledge.measured_slots().len(), 4);
        // Only resent tamper slots can be disturbed; slot 0 was split, not
        // resent, so at most tamper slot 2 counts.
        assert_eq!(knowledge.disturbed_tamper_slots(), 1);
    }

    #[test]
    fn pns_retained_key_photon_learns_collapsed_bit() {
        let p = params(1, 0);
        let mut registry = PairRegistry::new();
        let mut rng = SplitMix64::new(7);
        let spec = TamperSpec::new(vec![]).unwrap();
        let pair = registry.new_pair();
        let arms = vec![vec![Photon::entangled_half(pair); 2]];
        let strategy = AdversaryStrategy::new(StrategyKind::PhotonNumberSplitting);
        let (forwarded, tap) =
            apply(&strategy, arms, None, &p, &mut registry, &mut rng).unwrap();
        // Honest parties measure in the key basis, collapsing the pair.
        let mut alice_photon = forwarded[0][0];
        let alice_bit = measure(&mut alice_photon, p.key_basis, &mut registry, &mut rng).unwrap();
        let knowledge = tap.resolve(p.key_basis, &spec, &mut registry, &mut rng);
        assert_eq!(knowledge.known_bit(0), Some(alice_bit));
    }

    #[test]
    fn oracle_locations_requires_spec() {
        let p = params(2, 1);
        let mut registry = PairRegistry::new();
        let mut rng = SplitMix64::new(8);
        let spec = build_tamper_spec(2, 1, &mut rng);
        let arms = honest_arms(&spec, &p, &mut registry, &mut rng);
        let strategy = AdversaryStrategy::new(StrategyKind::OracleLocations);
        assert_eq!(
            apply(&strategy, arms, None, &p, &mut registry, &mut rng).map(|_| ()),
            Err(AdversaryError::MissingSpec)
        );
    }

    #[test]
    fn oracle_locations_measures_only_key_slots() {
        let p = params(3, 2);
        let mut rng = SplitMix64::new(9);
        for _ in 0..20 {
            let mut registry = PairRegistry::new();
            let spec = build_tamper_spec(3, 2, &mut rng);
            let arms = honest_arms(&spec, &p, &mut registry, &mut rng);
            let strategy = AdversaryStrategy::new(StrategyKind::OracleLocations);
            let (_, tap) =
                apply(&strategy, arms, Some(&spec), &p, &mut registry, &mut rng).unwrap();
            let knowledge = tap.resolve(p.key_basis, &spec, &mut registry, &mut rng);
            assert_eq!(knowledge.disturbed_tamper_slots(), 0);
            let key_slots = spec.key_slots(p.total_slots());
            assert_eq!(knowledge.known_count(), key_slots.len());
            for slot in key_slots {
                assert!(knowledge.known_bit(slot).is_some());
            }
        }
    }

    #[test]
    fn forge_uses_knowledge_and_guesses_the_rest() {
        let mut rng = SplitMix64::new(10);
        let mut tap = EveTap::default();
        tap.measured.push((2, Basis::Rectilinear, 1));
        tap.measured.push((5, Basis::Diagonal, 0));
        let spec = TamperSpec::new(vec![]).unwrap();
        let mut registry = PairRegistry::new();
        let knowledge = tap.resolve(Basis::Rectilinear, &spec, &mut registry, &mut rng);
        // Only the key-basis measurement is reliable knowledge.
        assert_eq!(knowledge.known_count(), 1);
        let token = forge_attempt(&knowledge, &[2, 5, 7], &mut rng);
        assert_eq!(token.bits.len(), 3);
        assert_eq!(token.bits[0], 1);
        assert_eq!(token.guessed, 2);
    }

    #[test]
    fn subset_validation() {
        let p = params(2, 3);
        let ok = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: 5 });
        assert_eq!(ok.validate(&p), Ok(()));
        let too_big = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: 6 });
        assert!(too_big.validate(&p).is_err());
        let small = AdversaryStrategy::new(StrategyKind::SubsetGuess { guesses: 1 });
        assert_eq!(small.validate(&p), Ok(()));
        assert!(!small.is_rational_forgery(2));
        assert!(ok.is_rational_forgery(2));
    }
}
