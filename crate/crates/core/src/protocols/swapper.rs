//! Entanglement swapping of two `Ψ-` pairs with one PBS.
//!
//! Pairs (1, 2) and (3, 4) are prepared in `Ψ-`; photons 1 and 3 meet on a
//! PBS with outputs 1′ and 3′. A bare PBS sends the two-mode coincidences to
//! `HH`/`VV`; a bit flip on 3′ turns them into `HV`/`VH`, so Alice's
//! measurement is in `{Ψ±, Ξ±}` on (1′, 3′). Photons 2 and 4 end up in a Bell
//! state fixed by her outcome.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use super::prepare_bell;
use crate::error::{Error, Result};
use crate::fock::{ModeLinearMap, PureState, SpatialMode};
use crate::measurement::{
    bell_state, bsm_standard, sample, BellLabel, Branch, OutcomeDistribution, OutcomeLabel,
};
use crate::optics::{pbs, wave_plate, PbsSpec, WavePlateSpec};
use crate::rng::trial_rng;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SwapperModes {
    pub a: SpatialMode,
    pub b: SpatialMode,
    pub c: SpatialMode,
    pub d: SpatialMode,
    /// 1′ and 3′.
    pub out_a: SpatialMode,
    pub out_c: SpatialMode,
}

pub const SWAPPER: SwapperModes = SwapperModes {
    a: SpatialMode(1),
    b: SpatialMode(2),
    c: SpatialMode(3),
    d: SpatialMode(4),
    out_a: SpatialMode(5),
    out_c: SpatialMode(6),
};

const FIDELITY_ONE: f64 = 1.0 - 1e-10;
const SCHMIDT_TOLERANCE: f64 = 1e-10;

/// PBS on `(in_a, in_c)` followed by the bit flip on `out_c`.
pub(crate) fn analyzer_maps(
    in_a: SpatialMode,
    in_c: SpatialMode,
    out_a: SpatialMode,
    out_c: SpatialMode,
) -> Result<[ModeLinearMap; 2]> {
    Ok([
        pbs(PbsSpec::new(in_a, in_c, out_a, out_c))?,
        wave_plate(WavePlateSpec {
            mode: out_c,
            theta: FRAC_PI_2,
            phi: PI,
        })?,
    ])
}

/// Alice's outcome distribution on `(out_a, out_c)` after interfering
/// `in_a` and `in_c`.
pub fn swap_branches(
    state: &PureState,
    in_a: SpatialMode,
    in_c: SpatialMode,
    out_a: SpatialMode,
    out_c: SpatialMode,
) -> Result<OutcomeDistribution> {
    let mut s = state.clone();
    for m in analyzer_maps(in_a, in_c, out_a, out_c)? {
        s = s.apply_map(&m)?;
    }
    bsm_standard(&s, out_a, out_c)
}

/// Remaining pair after Alice's outcome in `branch`.
pub(crate) fn heralded(branch: &Branch, out_a: SpatialMode, out_c: SpatialMode) -> Result<(BellLabel, PureState)> {
    let OutcomeLabel::Bell(label) = branch.label else {
        return Err(Error::Invariant(format!("expected a Bell outcome, got {}", branch.label)));
    };
    if label == BellLabel::Other {
        return Err(Error::Invariant("swap measurement left the code space".into()));
    }
    let (_, rest) = branch
        .post_state
        .contract(&bell_state(label, out_a, out_c)?)?
        .ok_or_else(|| Error::Invariant(format!("swap branch {label} has no weight")))?;
    Ok((label, rest))
}

/// The polarization Bell state `state` equals up to phase, or `Other`.
pub fn identify_bell(state: &PureState, m1: SpatialMode, m2: SpatialMode) -> Result<BellLabel> {
    for l in BellLabel::POLARIZATION {
        if state.registry() == bell_state(l, m1, m2)?.registry()
            && state.fidelity(&bell_state(l, m1, m2)?)? >= FIDELITY_ONE
        {
            return Ok(l);
        }
    }
    Ok(BellLabel::Other)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwapRecord {
    /// Alice's outcome on (1′, 3′).
    pub bsm_label: BellLabel,
    /// Photons 2 and 4 afterwards.
    pub heralded_state: PureState,
    pub heralded_bell: BellLabel,
    /// Both Schmidt coefficients equal `1/√2`.
    pub entanglement_ok: bool,
}

fn maximally_entangled(s: &PureState, m: SpatialMode) -> Result<bool> {
    let k = s.schmidt_coefficients(&[m])?;
    Ok(k.len() == 2 && k.iter().all(|x| (x - FRAC_1_SQRT_2).abs() < SCHMIDT_TOLERANCE))
}

/// Analyzer of the standard swapper: PBS on (1, 3) and bit flip on 3′.
pub fn analyzer() -> Result<[ModeLinearMap; 2]> {
    let m = SWAPPER;
    analyzer_maps(m.a, m.c, m.out_a, m.out_c)
}

fn initial_state() -> Result<PureState> {
    let m = SWAPPER;
    prepare_bell(BellLabel::PsiMinus, m.a, m.b)?.tensor(&prepare_bell(BellLabel::PsiMinus, m.c, m.d)?)
}

fn record(branch: &Branch) -> Result<SwapRecord> {
    let m = SWAPPER;
    let (label, state) = heralded(branch, m.out_a, m.out_c)?;
    Ok(SwapRecord {
        bsm_label: label,
        heralded_bell: identify_bell(&state, m.b, m.d)?,
        entanglement_ok: maximally_entangled(&state, m.b)?,
        heralded_state: state,
    })
}

fn distribution() -> Result<OutcomeDistribution> {
    let m = SWAPPER;
    swap_branches(&initial_state()?, m.a, m.c, m.out_a, m.out_c)
}

/// All swap outcomes with exact probabilities.
pub fn run_swapper_exhaustive() -> Result<Vec<(SwapRecord, f64)>> {
    distribution()?
        .branches()
        .iter()
        .map(|b| Ok((record(b)?, b.probability)))
        .collect()
}

pub fn run_swapper_sampled(trials: u64, seed: u64) -> Result<Vec<SwapRecord>> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let d = distribution()?;
    let records = d.branches().iter().map(record).collect::<Result<Vec<_>>>()?;
    Ok((0..trials)
        .map(|i| {
            let b = sample(&d, &mut trial_rng(seed, i));
            let idx = d
                .branches()
                .iter()
                .position(|x| x.label == b.label)
                .expect("sampled branch belongs to the distribution");
            records[idx].clone()
        })
        .collect())
}
