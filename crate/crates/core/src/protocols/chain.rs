//! Repeater chains over `N` lossy segments.
//!
//! Scheme I relays the qubit photon itself: after every segment the receiving
//! node counts it non-destructively and, unless it is the last node,
//! teleports it onto a fresh photon for the next segment. Scheme II
//! distributes one `Ψ-` pair per segment, swaps them into an end-to-end pair
//! and finally teleports the qubit through that pair. Either way a count of
//! zero where one photon is expected aborts the trial. Node memories are
//! ideal and delay free; purification is not modeled.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::swapper::{heralded, swap_branches};
use super::teleporter::{relay, TELEPORTER};
use super::{prepare_bell, CorrectionTable, FidelityStats, InputQubit};
use crate::error::{Error, Result};
use crate::fock::{PureState, SpatialMode};
use crate::measurement::{
    bell_state, bsm_polarization, qnd_photon_count, sample, BellLabel, Branch, OutcomeDistribution,
    OutcomeLabel,
};
use crate::noise::{apply_dephasing, apply_loss, DephasingSpec, LossChannelSpec};
use crate::rng::trial_rng;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Relay of teleporters.
    I,
    /// Chain of entanglement swappers.
    II,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub segments: usize,
    pub loss: LossChannelSpec,
    pub scheme: Scheme,
    pub dephasing: DephasingSpec,
    pub trials: u64,
    pub seed: u64,
}

impl ChainConfig {
    /// Checks the configuration and returns the per-segment survival.
    pub fn validate(&self) -> Result<f64> {
        if self.segments == 0 {
            return Err(Error::InvalidConfig("segments must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.dephasing.sigma >= 0.0 && self.dephasing.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dephasing sigma {} must be finite and >= 0",
                self.dephasing.sigma
            )));
        }
        let s = self.loss.survival()?;
        if s <= 0.0 {
            return Err(Error::InvalidConfig(format!("segment survival must be in (0, 1], got {s}")));
        }
        Ok(s)
    }
}

/// Result of one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainTrial {
    pub arrived: bool,
    /// 1-based segment in which the photon was lost.
    pub lost_at: Option<usize>,
    pub fidelity: Option<f64>,
    /// Measurement outcomes in order, e.g. `qnd.n1`, `relay.n1.Phi+`.
    pub events: Vec<String>,
}

/// Aggregate over all trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainRecord {
    pub segments: usize,
    pub scheme: Scheme,
    pub segment_survival: f64,
    pub trials: u64,
    pub arrived: u64,
    pub arrival_frequency: f64,
    /// `survival^N`.
    pub expected_arrival: f64,
    /// Fidelity of arrived qubits.
    pub fidelity: FidelityStats,
    /// Losses per segment, index 0 is the first segment.
    pub lost_at_segment: Vec<u64>,
    pub tallies: BTreeMap<String, u64>,
}

/// Runs every trial; trial `i` uses its own stream of `seed`, and results are
/// folded in trial order so the record does not depend on the thread count.
pub fn run_chain(cfg: &ChainConfig, q: &InputQubit) -> Result<ChainRecord> {
    let survival = cfg.validate()?;
    let trials: Vec<ChainTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, q, &mut trial_rng(cfg.seed, i)))
        .collect::<Result<_>>()?;
    let mut lost_at_segment = vec![0u64; cfg.segments];
    let mut tallies = BTreeMap::new();
    let mut arrived = 0u64;
    for t in &trials {
        if t.arrived {
            arrived += 1;
        }
        if let Some(k) = t.lost_at {
            lost_at_segment[k - 1] += 1;
        }
        for e in &t.events {
            *tallies.entry(e.clone()).or_insert(0) += 1;
        }
    }
    Ok(ChainRecord {
        segments: cfg.segments,
        scheme: cfg.scheme,
        segment_survival: survival,
        trials: cfg.trials,
        arrived,
        arrival_frequency: arrived as f64 / cfg.trials as f64,
        expected_arrival: survival.powi(cfg.segments as i32),
        fidelity: FidelityStats::from_values(trials.iter().filter_map(|t| t.fidelity)),
        lost_at_segment,
        tallies,
    })
}

/// A single trial of `cfg` with the given generator.
pub(crate) fn run_trial<R: Rng + ?Sized>(cfg: &ChainConfig, q: &InputQubit, rng: &mut R) -> Result<ChainTrial> {
    match cfg.scheme {
        Scheme::I => relay_trial(cfg, q, rng),
        Scheme::II => swap_trial(cfg, q, rng),
    }
}

/// Loss, heralding count and dephasing for the photon on `mode`.
/// Returns `None` when the count is zero.
fn transmit<R: Rng + ?Sized>(
    s: &PureState,
    mode: SpatialMode,
    cfg: &ChainConfig,
    events: &mut Vec<String>,
    rng: &mut R,
) -> Result<Option<PureState>> {
    let lossy = apply_loss(s, mode, &cfg.loss, rng)?.state;
    let counted = qnd_photon_count(&lossy, mode)?;
    let b = sample(&counted, rng);
    events.push(format!("qnd.{}", b.label));
    match b.label {
        OutcomeLabel::Count(0) => return Ok(None),
        OutcomeLabel::Count(1) => {}
        other => return Err(Error::Invariant(format!("channel produced count {other}"))),
    }
    let out = if cfg.dephasing.sigma > 0.0 {
        apply_dephasing(&b.post_state, mode, &cfg.dephasing, rng)?
    } else {
        b.post_state.clone()
    };
    Ok(Some(out))
}

fn lost(segment: usize, events: Vec<String>) -> ChainTrial {
    ChainTrial {
        arrived: false,
        lost_at: Some(segment),
        fidelity: None,
        events,
    }
}

fn relay_trial<R: Rng + ?Sized>(cfg: &ChainConfig, q: &InputQubit, rng: &mut R) -> Result<ChainTrial> {
    let mode = TELEPORTER.input;
    let table = CorrectionTable::teleporter();
    let mut events = Vec::new();
    let mut photon = q.state_on(mode)?;
    for seg in 1..=cfg.segments {
        let Some(p) = transmit(&photon, mode, cfg, &mut events, rng)? else {
            return Ok(lost(seg, events));
        };
        photon = p;
        if seg < cfg.segments {
            let r = relay(&photon, &table, rng)?;
            events.extend(r.attempts.into_iter().map(|a| format!("relay.{a}")));
            photon = r.state;
        }
    }
    Ok(ChainTrial {
        arrived: true,
        lost_at: None,
        fidelity: Some(photon.fidelity(&q.state_on(mode)?)?),
        events,
    })
}

/// Scheme II mode roles: the end-to-end pair is kept on (`END`, `HELD`),
/// each new pair arrives on (`NEXT_L`, `NEXT_R`), swap outputs land on
/// `SWAP_A`/`SWAP_C`, and the qubit waits on `QUBIT`.
const END: SpatialMode = SpatialMode(0);
const HELD: SpatialMode = SpatialMode(1);
const NEXT_L: SpatialMode = SpatialMode(2);
const NEXT_R: SpatialMode = SpatialMode(3);
const SWAP_A: SpatialMode = SpatialMode(4);
const SWAP_C: SpatialMode = SpatialMode(5);
const QUBIT: SpatialMode = SpatialMode(6);

/// Complete polarization Bell measurement of the qubit against `a`.
pub(crate) fn pair_teleport_branches(joint: &PureState, q_mode: SpatialMode, a: SpatialMode) -> Result<OutcomeDistribution> {
    bsm_polarization(joint, q_mode, a)
}

/// Far photon after a pair-teleport outcome, before correction.
pub(crate) fn far_state(branch: &Branch, q_mode: SpatialMode, a: SpatialMode) -> Result<(BellLabel, PureState)> {
    let OutcomeLabel::Bell(label) = branch.label else {
        return Err(Error::Invariant(format!("expected a Bell outcome, got {}", branch.label)));
    };
    if label == BellLabel::Other {
        return Err(Error::Invariant("pair teleport left the code space".into()));
    }
    let (_, far) = branch
        .post_state
        .contract(&bell_state(label, q_mode, a)?)?
        .ok_or_else(|| Error::Invariant(format!("teleport branch {label} has no weight")))?;
    Ok((label, far))
}

fn swap_trial<R: Rng + ?Sized>(cfg: &ChainConfig, q: &InputQubit, rng: &mut R) -> Result<ChainTrial> {
    let swap_table = CorrectionTable::swap_to_singlet();
    let mut events = Vec::new();
    let first = prepare_bell(BellLabel::PsiMinus, END, HELD)?;
    let Some(mut pair) = transmit(&first, HELD, cfg, &mut events, rng)? else {
        return Ok(lost(1, events));
    };
    for seg in 2..=cfg.segments {
        let fresh = prepare_bell(BellLabel::PsiMinus, NEXT_L, NEXT_R)?;
        let Some(next) = transmit(&fresh, NEXT_R, cfg, &mut events, rng)? else {
            return Ok(lost(seg, events));
        };
        let joint = pair.tensor(&next)?;
        let dist = swap_branches(&joint, HELD, NEXT_L, SWAP_A, SWAP_C)?;
        let (label, rest) = heralded(sample(&dist, rng), SWAP_A, SWAP_C)?;
        events.push(format!("swap.{label}"));
        let c = swap_table
            .get(label)
            .ok_or_else(|| Error::NoCorrectionFound(label.to_string()))?;
        pair = c.apply(&rest, NEXT_R)?.relabel_mode(NEXT_R, HELD)?;
    }
    let pair_table = CorrectionTable::pair_teleport();
    let joint = q.state_on(QUBIT)?.tensor(&pair)?;
    let dist = pair_teleport_branches(&joint, QUBIT, END)?;
    let (label, far) = far_state(sample(&dist, rng), QUBIT, END)?;
    events.push(format!("teleport.{label}"));
    let c = pair_table
        .get(label)
        .ok_or_else(|| Error::NoCorrectionFound(label.to_string()))?;
    let out = c.apply(&far, HELD)?;
    Ok(ChainTrial {
        arrived: true,
        lost_at: None,
        fidelity: Some(out.fidelity(&q.state_on(HELD)?)?),
        events,
    })
}
