//! Two-PBS teleporter with a QND photon count on Bob's mode.
//!
//! The input photon sits on mode 1 and two diagonal resource photons on
//! modes 2 and 3. `PBS₂₃` maps (2, 3) to (2′, 3′); `PBS₁₂′` maps (2′, 1) to
//! (1′, 2″). Bob counts photons on 3′: with one photon there, Alice's Bell
//! measurement on (1′, 2″) in `{Φ±, Ξ±}` plus a Pauli correction recovers the
//! input; with zero or two photons the input is left entangled on Alice's side.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rand::Rng;

use super::{Correction, CorrectionTable, InputQubit};
use crate::error::{Error, Result};
use crate::fock::{ModeRegistry, PureState, Rail, SpatialMode};
use crate::measurement::{
    bell_state, bsm_phi_xi, qnd_photon_count, sample, BellLabel, Branch, OutcomeDistribution,
    OutcomeLabel,
};
use crate::optics::{pbs, wave_plate, PbsSpec, WavePlateSpec};
use crate::rng::trial_rng;

/// Spatial modes used by the teleporter.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TeleporterModes {
    /// Photon 1, carrying the qubit.
    pub input: SpatialMode,
    /// Resource photons 2 and 3.
    pub resource_a: SpatialMode,
    pub resource_b: SpatialMode,
    /// 2′, between the two beam splitters.
    pub mid: SpatialMode,
    /// 3′, Bob's output.
    pub bob: SpatialMode,
    /// 1′ and 2″, measured by Alice.
    pub alice_a: SpatialMode,
    pub alice_b: SpatialMode,
}

pub const TELEPORTER: TeleporterModes = TeleporterModes {
    input: SpatialMode(1),
    resource_a: SpatialMode(2),
    resource_b: SpatialMode(3),
    mid: SpatialMode(4),
    bob: SpatialMode(5),
    alice_a: SpatialMode(6),
    alice_b: SpatialMode(7),
};

/// `(|H⟩ + |V⟩)/√2`, made as `|H⟩` through a wave plate at `π/4`.
pub fn prepare_resource_photon(mode: SpatialMode) -> Result<PureState> {
    let reg = ModeRegistry::new([mode])?;
    PureState::basis(&reg, &[Rail::h(mode)])?.apply_map(&wave_plate(WavePlateSpec {
        mode,
        theta: FRAC_PI_4,
        phi: 0.0,
    })?)
}

/// A polarization Bell pair; `Ξ±` are not photon pairs and are rejected.
pub fn prepare_bell(label: BellLabel, m1: SpatialMode, m2: SpatialMode) -> Result<PureState> {
    if !BellLabel::POLARIZATION.contains(&label) {
        return Err(Error::UnsupportedLabel(label.to_string()));
    }
    bell_state(label, m1, m2)
}

/// `[PBS₂₃, PBS₁₂′]`.
pub fn network_maps() -> Result<[crate::fock::ModeLinearMap; 2]> {
    let m = TELEPORTER;
    Ok([
        pbs(PbsSpec::new(m.resource_a, m.resource_b, m.mid, m.bob))?,
        pbs(PbsSpec::new(m.mid, m.input, m.alice_a, m.alice_b))?,
    ])
}

/// Three-photon state on (1′, 2″, 3′) for an arbitrary input on mode 1.
pub(crate) fn network_state_from(input: &PureState) -> Result<PureState> {
    let m = TELEPORTER;
    let mut s = input
        .tensor(&prepare_resource_photon(m.resource_a)?)?
        .tensor(&prepare_resource_photon(m.resource_b)?)?;
    for map in network_maps()? {
        s = s.apply_map(&map)?;
    }
    Ok(s)
}

/// Three-photon state after both beam splitters.
pub fn network_state(q: &InputQubit) -> Result<PureState> {
    network_state_from(&q.state_on(TELEPORTER.input)?)
}

/// Bob's photon on 3′ after Alice's outcome, before correction.
fn bob_state(branch: &Branch) -> Result<(BellLabel, PureState)> {
    let OutcomeLabel::Bell(label) = branch.label else {
        return Err(Error::Invariant(format!("expected a Bell outcome, got {}", branch.label)));
    };
    let m = TELEPORTER;
    let alice = bell_state(label, m.alice_a, m.alice_b)?;
    let (_, bob) = branch
        .post_state
        .contract(&alice)?
        .ok_or_else(|| Error::Invariant(format!("Bell branch {label} has no weight")))?;
    Ok((label, bob))
}

/// Every `n = 1` Bell branch: (label, overall probability, Bob's raw state).
pub fn bob_states(q: &InputQubit) -> Result<Vec<(BellLabel, f64, PureState)>> {
    let m = TELEPORTER;
    let qnd = qnd_photon_count(&network_state(q)?, m.bob)?;
    let Some(one) = qnd.get(OutcomeLabel::Count(1)) else {
        return Ok(Vec::new());
    };
    bsm_phi_xi(&one.post_state, m.alice_a, m.alice_b)?
        .branches()
        .iter()
        .filter(|b| b.label != OutcomeLabel::Bell(BellLabel::Other))
        .map(|b| {
            let (l, s) = bob_state(b)?;
            Ok((l, one.probability * b.probability, s))
        })
        .collect()
}

/// Alice's entangled state on (1′, 2″) once Bob's count is known.
fn entangled_output(post: &PureState) -> Result<PureState> {
    let (_, alice) = post
        .split_product(&[TELEPORTER.bob])?
        .ok_or_else(|| Error::Invariant("Bob's photon is entangled after a definite count".into()))?;
    Ok(alice)
}

/// One outcome of a teleportation attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct TeleportRecord {
    /// Photons Bob counted on 3′ (sent to Alice).
    pub qnd_count: usize,
    /// Alice's Bell outcome (sent to Bob); only on the `n = 1` path.
    pub bsm_label: Option<BellLabel>,
    pub correction: Option<Correction>,
    /// Bob's corrected photon for `n = 1`, Alice's pair on (1′, 2″) otherwise.
    pub output_state: PureState,
    pub fidelity_to_input: Option<f64>,
}

impl TeleportRecord {
    /// Branch key such as `n0` or `n1.Phi+`.
    pub fn label(&self) -> String {
        match self.bsm_label {
            Some(l) => format!("n{}.{l}", self.qnd_count),
            None => format!("n{}", self.qnd_count),
        }
    }
}

fn count_of(b: &Branch) -> Result<usize> {
    match b.label {
        OutcomeLabel::Count(n) => Ok(n),
        other => Err(Error::Invariant(format!("expected a photon count, got {other}"))),
    }
}

/// Measurement tree: Bob's count, then Alice's Bell outcome for one photon.
struct Tree {
    qnd: OutcomeDistribution,
    bsm: Option<OutcomeDistribution>,
}

fn tree(input: &PureState) -> Result<Tree> {
    let m = TELEPORTER;
    let qnd = qnd_photon_count(&network_state_from(input)?, m.bob)?;
    let bsm = match qnd.get(OutcomeLabel::Count(1)) {
        Some(b) => Some(bsm_phi_xi(&b.post_state, m.alice_a, m.alice_b)?),
        None => None,
    };
    Ok(Tree { qnd, bsm })
}

fn bsm_record(branch: &Branch, table: &CorrectionTable, target: Option<&PureState>) -> Result<TeleportRecord> {
    if branch.label == OutcomeLabel::Bell(BellLabel::Other) {
        return Ok(TeleportRecord {
            qnd_count: 1,
            bsm_label: Some(BellLabel::Other),
            correction: None,
            output_state: branch.post_state.clone(),
            fidelity_to_input: None,
        });
    }
    let (label, raw) = bob_state(branch)?;
    let correction = table
        .get(label)
        .ok_or_else(|| Error::NoCorrectionFound(label.to_string()))?;
    let out = correction.apply(&raw, TELEPORTER.bob)?;
    let fidelity = target.map(|t| out.fidelity(t)).transpose()?;
    Ok(TeleportRecord {
        qnd_count: 1,
        bsm_label: Some(label),
        correction: Some(correction),
        output_state: out,
        fidelity_to_input: fidelity,
    })
}

fn count_record(branch: &Branch) -> Result<TeleportRecord> {
    Ok(TeleportRecord {
        qnd_count: count_of(branch)?,
        bsm_label: None,
        correction: None,
        output_state: entangled_output(&branch.post_state)?,
        fidelity_to_input: None,
    })
}

/// Every branch of one teleportation with its exact probability.
pub fn run_teleporter_exhaustive(q: &InputQubit) -> Result<Vec<(TeleportRecord, f64)>> {
    let m = TELEPORTER;
    let table = CorrectionTable::teleporter();
    let target = q.state_on(m.bob)?;
    let t = tree(&q.state_on(m.input)?)?;
    let mut out = Vec::new();
    for qb in t.qnd.branches() {
        if count_of(qb)? == 1 {
            let bsm = t.bsm.as_ref().expect("one-photon branch has a Bell measurement");
            for bb in bsm.branches() {
                out.push((bsm_record(bb, &table, Some(&target))?, qb.probability * bb.probability));
            }
        } else {
            out.push((count_record(qb)?, qb.probability));
        }
    }
    Ok(out)
}

/// Monte Carlo over the same tree; trial `i` draws from its own stream.
pub fn run_teleporter_sampled(q: &InputQubit, trials: u64, seed: u64) -> Result<Vec<TeleportRecord>> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let exhaustive = run_teleporter_exhaustive(q)?;
    let t = tree(&q.state_on(TELEPORTER.input)?)?;
    let by_key: BTreeMap<(usize, Option<BellLabel>), &TeleportRecord> = exhaustive
        .iter()
        .map(|(r, _)| ((r.qnd_count, r.bsm_label), r))
        .collect();
    (0..trials)
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let key = walk(&t, &mut rng)?;
            Ok(by_key[&key].clone())
        })
        .collect()
}

fn walk<R: Rng + ?Sized>(t: &Tree, rng: &mut R) -> Result<(usize, Option<BellLabel>)> {
    let n = count_of(sample(&t.qnd, rng))?;
    if n != 1 {
        return Ok((n, None));
    }
    let bsm = t.bsm.as_ref().expect("one-photon branch has a Bell measurement");
    match sample(bsm, rng).label {
        OutcomeLabel::Bell(l) => Ok((1, Some(l))),
        other => Err(Error::Invariant(format!("expected a Bell outcome, got {other}"))),
    }
}

/// Outcome of relaying a photon through one teleporter node.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Relay {
    /// Teleported photon, on the input mode.
    pub state: PureState,
    /// Branch keys of every attempt, in order.
    pub attempts: Vec<String>,
}

/// Upper bound on teleportation attempts per node; each attempt succeeds
/// with probability 1/2.
pub(crate) const MAX_RELAY_ATTEMPTS: usize = 64;

/// Teleports the photon on the input mode, retrying with fresh resource
/// photons when Bob counts 0 or 2.
///
/// In those branches the input is still intact upstream of `PBS₁₂′`: undoing
/// that beam splitter leaves it in a product with the resource photons, so
/// it can be fed to the next attempt.
pub(crate) fn relay<R: Rng + ?Sized>(input: &PureState, table: &CorrectionTable, rng: &mut R) -> Result<Relay> {
    let m = TELEPORTER;
    let undo = network_maps()?[1].inverse();
    let mut current = input.clone();
    let mut attempts = Vec::new();
    for _ in 0..MAX_RELAY_ATTEMPTS {
        let t = tree(&current)?;
        let qb = sample(&t.qnd, rng);
        let n = count_of(qb)?;
        if n == 1 {
            let bsm = t.bsm.as_ref().expect("one-photon branch has a Bell measurement");
            let r = bsm_record(sample(bsm, rng), table, None)?;
            attempts.push(format!("n1.{}", r.bsm_label.expect("Bell label present")));
            if r.correction.is_none() {
                return Err(Error::Invariant("Bell measurement left the code space".into()));
            }
            return Ok(Relay {
                state: r.output_state.relabel_mode(m.bob, m.input)?,
                attempts,
            });
        }
        attempts.push(format!("n{n}"));
        let rewound = qb.post_state.apply_map(&undo)?;
        let (kept, _) = rewound
            .split_product(&[m.input])?
            .ok_or_else(|| Error::Invariant("input photon entangled after a failed attempt".into()))?;
        current = kept;
    }
    Err(Error::Invariant(format!(
        "teleporter failed {MAX_RELAY_ATTEMPTS} times in a row"
    )))
}
