//! Photon and polarization model for the quantum channel.
//!
//! Only two quantum behaviors matter to the protocol and both are modeled
//! directly rather than through a state-vector simulation:
//!
//! * a polarized (product-state) photon measured in its preparation basis
//!   yields its bit deterministically; measured in the conjugate basis it
//!   yields a uniform bit and is re-polarized accordingly;
//! * the two halves of an entangled pair measured in the same basis always
//!   agree, which is tracked through a shared [`PairRegistry`] entry that
//!   collapses on the first measurement.
//!
//! Sources may emit more than one photon per signal arm; that multi-photon
//! leakage is what the photon-number-splitting attack exploits.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::SplitMix64;

/// A measured or prepared bit value, 0 or 1.
pub type Bit = u8;

/// Polarization measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Basis {
    /// Horizontal/vertical polarization.
    Rectilinear,
    /// The +45/-45 degree polarization, conjugate to rectilinear.
    Diagonal,
}

impl Basis {
    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Rectilinear => Basis::Diagonal,
            Basis::Diagonal => Basis::Rectilinear,
        }
    }

    /// Uniform random basis choice.
    pub fn random(rng: &mut SplitMix64) -> Basis {
        if rng.bit() == 0 {
            Basis::Rectilinear
        } else {
            Basis::Diagonal
        }
    }

    /// Wire encoding: 0 = rectilinear, 1 = diagonal.
    pub fn code(self) -> u8 {
        match self {
            Basis::Rectilinear => 0,
            Basis::Diagonal => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Basis> {
        match code {
            0 => Some(Basis::Rectilinear),
            1 => Some(Basis::Diagonal),
            _ => None,
        }
    }
}

/// Handle into a [`PairRegistry`], shared by every photon of one entangled
/// signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairId(u32);

impl PairId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Collapse state of one entangled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairState {
    Unmeasured,
    Collapsed { basis: Basis, bit: Bit },
}

/// Shared collapse bookkeeping for the entangled pairs of one trial.
///
/// A pair transitions `Unmeasured -> Collapsed` exactly once, on the first
/// measurement of either half.
#[derive(Debug, Default, Clone)]
pub struct PairRegistry {
    entries: Vec<PairState>,
}

impl PairRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn new_pair(&mut self) -> PairId {
        let id = PairId(self.entries.len() as u32);
        self.entries.push(PairState::Unmeasured);
        id
    }

    pub fn state(&self, id: PairId) -> PairState {
        self.entries[id.index()]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn collapse(&mut self, id: PairId, basis: Basis, bit: Bit) {
        debug_assert_eq!(self.entries[id.index()], PairState::Unmeasured);
        self.entries[id.index()] = PairState::Collapsed { basis, bit };
    }
}

/// Quantum state carried by a single photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonState {
    /// Definite polarization: `bit` in `basis`.
    Product { basis: Basis, bit: Bit },
    /// One half of an entangled pair; the outcome lives in the registry.
    EntangledHalf { pair: PairId },
}

/// A single photon in flight. Measuring it consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Photon {
    state: PhotonState,
    consumed: bool,
}

impl Photon {
    pub fn product(basis: Basis, bit: Bit) -> Photon {
        debug_assert!(bit <= 1);
        Photon {
            state: PhotonState::Product { basis, bit },
            consumed: false,
        }
    }

    pub fn entangled_half(pair: PairId) -> Photon {
        Photon {
            state: PhotonState::EntangledHalf { pair },
            consumed: false,
        }
    }

    pub fn state(&self) -> PhotonState {
        self.state
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MeasureError {
    #[error("photon was already measured")]
    AlreadyConsumed,
}

/// Measure a photon in `basis`, consuming it.
///
/// Product photons answer deterministically in their own basis and uniformly
/// in the conjugate basis, after which their state is rewritten to the
/// measured polarization. Entangled halves collapse the shared registry entry
/// on first measurement; later same-basis measurements of the pair repeat the
/// collapsed bit, conjugate-basis measurements are uniform. Sibling photons in
/// a multi-photon arm are unaffected.
pub fn measure(
    photon: &mut Photon,
    basis: Basis,
    registry: &mut PairRegistry,
    rng: &mut SplitMix64,
) -> Result<Bit, MeasureError> {
    if photon.consumed {
        return Err(MeasureError::AlreadyConsumed);
    }
    photon.consumed = true;
    let outcome = match photon.state {
        PhotonState::Product { basis: prepared, bit } => {
            if prepared == basis {
                bit
            } else {
                let flip = rng.bit();
                photon.state = PhotonState::Product { basis, bit: flip };
                flip
            }
        }
        PhotonState::EntangledHalf { pair } => match registry.state(pair) {
            PairState::Unmeasured => {
                let bit = rng.bit();
                registry.collapse(pair, basis, bit);
                bit
            }
            PairState::Collapsed { basis: collapsed, bit } => {
                if collapsed == basis {
                    bit
                } else {
                    rng.bit()
                }
            }
        },
    };
    Ok(outcome)
}

/// Signal classification within a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Entangled pair contributing an authentication key bit.
    Key,
    /// Identically polarized twin pair at a secret tamper-detection slot.
    Tamper,
}

/// What the server's source should emit for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Emission {
    Key,
    Tamper { basis: Basis, bit: Bit },
}

/// One emission from the server: an arm of photons for Alice and an arm for
/// Bob. Arms may carry more than one photon when the source is imperfect.
#[derive(Debug, Clone)]
pub struct SignalPair {
    pub kind: SignalKind,
    pub alice_arm: Vec<Photon>,
    pub bob_arm: Vec<Photon>,
}

impl SignalPair {
    pub fn alice_multiplicity(&self) -> usize {
        self.alice_arm.len()
    }

    pub fn bob_multiplicity(&self) -> usize {
        self.bob_arm.len()
    }
}

/// Photon-count distribution of the source.
///
/// A single photon is emitted with probability `p1`; otherwise the arm
/// carries a multi-photon signal, uniform over `2..=max_photons`. The default
/// two-point model (`max_photons = 2`) emits two photons with probability
/// `1 - p1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonSourceModel {
    pub p1: f64,
    pub max_photons: u32,
}

impl PhotonSourceModel {
    /// Perfect single-photon source.
    pub fn ideal() -> Self {
        Self { p1: 1.0, max_photons: 1 }
    }

    /// Two-point source: one photon with probability `p1`, else two.
    pub fn two_point(p1: f64) -> Self {
        Self { p1, max_photons: 2 }
    }

    pub fn validate(&self) -> Result<(), SourceModelError> {
        if !(self.p1 > 0.0 && self.p1 <= 1.0) {
            return Err(SourceModelError::SingleProbOutOfRange(self.p1));
        }
        if self.max_photons == 0 {
            return Err(SourceModelError::ZeroMaxPhotons);
        }
        Ok(())
    }

    /// Sample the photon count of one arm.
    pub fn sample_multiplicity(&self, rng: &mut SplitMix64) -> u32 {
        if self.max_photons <= 1 || rng.chance(self.p1) {
            1
        } else if self.max_photons == 2 {
            2
        } else {
            2 + rng.below((self.max_photons - 1) as u64) as u32
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum SourceModelError {
    #[error("single-photon probability {0} outside (0, 1]")]
    SingleProbOutOfRange(f64),
    #[error("max_photons must be at least 1")]
    ZeroMaxPhotons,
}

/// Emit one signal pair from the server's source.
///
/// Arm multiplicities are sampled independently (Alice's arm first). Key
/// emissions allocate one registry pair shared by every photon in both arms,
/// so any photon of the signal tracks the collapsed key bit.
pub fn emit_signal(
    emission: Emission,
    source: &PhotonSourceModel,
    registry: &mut PairRegistry,
    rng: &mut SplitMix64,
) -> SignalPair {
    let alice_count = source.sample_multiplicity(rng);
    let bob_count = source.sample_multiplicity(rng);
    match emission {
        Emission::Key => {
            let pair = registry.new_pair();
            SignalPair {
                kind: SignalKind::Key,
                alice_arm: vec![Photon::entangled_half(pair); alice_count as usize],
                bob_arm: vec![Photon::entangled_half(pair); bob_count as usize],
            }
        }
        Emission::Tamper { basis, bit } => SignalPair {
            kind: SignalKind::Tamper,
            alice_arm: vec![Photon::product(basis, bit); alice_count as usize],
            bob_arm: vec![Photon::product(basis, bit); bob_count as usize],
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("cannot keep {requested} of {available} photons")]
    InsufficientPhotons { available: usize, requested: usize },
}

/// Split `n_keep` photons off an arm, leaving the rest to travel on
/// undisturbed. Neither part is measured or otherwise altered.
pub fn split_arm(
    mut arm: Vec<Photon>,
    n_keep: usize,
) -> Result<(Vec<Photon>, Vec<Photon>), SplitError> {
    if n_keep >= arm.len() {
        return Err(SplitError::InsufficientPhotons {
            available: arm.len(),
            requested: n_keep,
        });
    }
    let forwarded = arm.split_off(n_keep);
    Ok((arm, forwarded))
}
