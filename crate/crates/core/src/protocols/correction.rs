use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::Serialize;

use super::{chain, swapper, teleporter, InputQubit};
use crate::error::{Error, Result};
use crate::fock::{ModeLinearMap, Polarization, PureState, SpatialMode};
use crate::measurement::{bell_state, BellLabel};
use crate::optics::{phase_shift, wave_plate, WavePlateSpec};
use crate::rng::trial_rng;

/// Local Pauli correction on one polarization qubit.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Correction {
    I,
    X,
    Z,
    /// X followed by Z.
    XZ,
}

impl Correction {
    pub const ALL: [Correction; 4] = [Correction::I, Correction::X, Correction::Z, Correction::XZ];

    /// Optical elements realizing the correction: X is a wave plate at
    /// `θ = π/2, φ = π`, Z a `π` phase on the V rail.
    pub fn maps(self, mode: SpatialMode) -> Result<Vec<ModeLinearMap>> {
        let x = || {
            wave_plate(WavePlateSpec {
                mode,
                theta: FRAC_PI_2,
                phi: PI,
            })
        };
        let z = || phase_shift(mode, Polarization::V, PI);
        Ok(match self {
            Correction::I => vec![],
            Correction::X => vec![x()?],
            Correction::Z => vec![z()?],
            Correction::XZ => vec![x()?, z()?],
        })
    }

    pub fn apply(self, state: &PureState, mode: SpatialMode) -> Result<PureState> {
        self.maps(mode)?
            .iter()
            .try_fold(state.clone(), |s, m| s.apply_map(m))
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Map from a Bell-measurement outcome to the correction that undoes it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrectionTable(BTreeMap<BellLabel, Correction>);

impl CorrectionTable {
    pub fn from_pairs<I: IntoIterator<Item = (BellLabel, Correction)>>(pairs: I) -> Self {
        CorrectionTable(pairs.into_iter().collect())
    }

    pub fn get(&self, label: BellLabel) -> Option<Correction> {
        self.0.get(&label).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BellLabel, Correction)> + '_ {
        self.0.iter().map(|(l, c)| (*l, *c))
    }

    /// Teleporter outcomes in `{Φ±, Ξ±}` on (1′, 2″) to the correction on 3′.
    pub fn teleporter() -> Self {
        use BellLabel::*;
        Self::from_pairs([
            (PhiPlus, Correction::I),
            (PhiMinus, Correction::Z),
            (XiPlus, Correction::X),
            (XiMinus, Correction::XZ),
        ])
    }

    /// Swap outcomes in `{Ψ±, Ξ±}` to the correction on the last photon that
    /// turns the heralded pair into `Ψ-`.
    pub fn swap_to_singlet() -> Self {
        use BellLabel::*;
        Self::from_pairs([
            (PsiPlus, Correction::XZ),
            (PsiMinus, Correction::X),
            (XiPlus, Correction::Z),
            (XiMinus, Correction::I),
        ])
    }

    /// Complete polarization Bell measurement against a `Ψ-` pair.
    pub fn pair_teleport() -> Self {
        use BellLabel::*;
        Self::from_pairs([
            (PsiPlus, Correction::Z),
            (PsiMinus, Correction::I),
            (PhiPlus, Correction::XZ),
            (PhiMinus, Correction::X),
        ])
    }
}

const FIDELITY_ONE: f64 = 1.0 - 1e-10;
const DERIVATION_QUBITS: u64 = 128;
const DERIVATION_SEED: u64 = 0x7e1e_0c0d;

/// Searches `{I, X, Z, XZ}` per label; `samples` holds
/// (label, state before correction, target) on a single `mode`.
fn search(samples: &[(BellLabel, PureState, PureState)], mode: SpatialMode) -> Result<CorrectionTable> {
    let mut by_label: BTreeMap<BellLabel, Vec<(&PureState, &PureState)>> = BTreeMap::new();
    for (l, raw, target) in samples {
        by_label.entry(*l).or_default().push((raw, target));
    }
    let mut table = BTreeMap::new();
    for (label, cases) in by_label {
        let mut winners = Vec::new();
        for c in Correction::ALL {
            let mut ok = true;
            for (raw, target) in &cases {
                if c.apply(raw, mode)?.fidelity(target)? < FIDELITY_ONE {
                    ok = false;
                    break;
                }
            }
            if ok {
                winners.push(c);
            }
        }
        match winners.as_slice() {
            [c] => {
                table.insert(label, *c);
            }
            [] => return Err(Error::NoCorrectionFound(label.to_string())),
            _ => {
                return Err(Error::Invariant(format!(
                    "several corrections fit outcome {label}: {winners:?}"
                )))
            }
        }
    }
    Ok(CorrectionTable(table))
}

fn derivation_qubits() -> impl Iterator<Item = InputQubit> {
    let mut rng = trial_rng(DERIVATION_SEED, 0);
    (0..DERIVATION_QUBITS).map(move |_| InputQubit::random(&mut rng))
}

/// Derives the teleporter table from the engine over random input qubits.
pub fn derive_correction_table() -> Result<CorrectionTable> {
    let bob = teleporter::TELEPORTER.bob;
    let mut samples = Vec::new();
    for q in derivation_qubits() {
        let target = q.state_on(bob)?;
        for (label, _, state) in teleporter::bob_states(&q)? {
            samples.push((label, state, target.clone()));
        }
    }
    search(&samples, bob)
}

/// Derives the swap-to-singlet table from the exhaustive swapper run.
pub fn derive_swap_table() -> Result<CorrectionTable> {
    let m = swapper::SWAPPER;
    let target = bell_state(BellLabel::PsiMinus, m.b, m.d)?;
    let samples: Vec<_> = swapper::run_swapper_exhaustive()?
        .into_iter()
        .map(|(r, _)| (r.bsm_label, r.heralded_state, target.clone()))
        .collect();
    search(&samples, m.d)
}

/// Derives the table for teleporting through a `Ψ-` pair with a complete
/// polarization Bell measurement.
pub fn derive_pair_teleport_table() -> Result<CorrectionTable> {
    let (q_mode, a, b) = (SpatialMode(0), SpatialMode(1), SpatialMode(2));
    let pair = bell_state(BellLabel::PsiMinus, a, b)?;
    let mut samples = Vec::new();
    for q in derivation_qubits() {
        let target = q.state_on(b)?;
        let joint = q.state_on(q_mode)?.tensor(&pair)?;
        for branch in chain::pair_teleport_branches(&joint, q_mode, a)?.branches() {
            let (label, state) = chain::far_state(branch, q_mode, a)?;
            samples.push((label, state, target.clone()));
        }
    }
    search(&samples, b)
}
