//! Teleporter, entanglement swapper and repeater chains.

mod chain;
mod correction;
mod qubit;
mod swapper;
mod teleporter;

pub use chain::{run_chain, ChainConfig, ChainRecord, ChainTrial, Scheme};
pub use correction::{
    derive_correction_table, derive_pair_teleport_table, derive_swap_table, Correction,
    CorrectionTable,
};
pub use qubit::InputQubit;
pub use swapper::{
    analyzer as swapper_analyzer, identify_bell, run_swapper_exhaustive, run_swapper_sampled, swap_branches, SwapRecord,
    SwapperModes, SWAPPER,
};
pub use teleporter::{
    bob_states as teleporter_bob_states, network_maps, network_state, prepare_bell, prepare_resource_photon, run_teleporter_exhaustive,
    run_teleporter_sampled, TeleportRecord, TeleporterModes, TELEPORTER,
};

use serde::Serialize;

/// Min / mean / max over a set of fidelities.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct FidelityStats {
    pub count: u64,
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
}

impl FidelityStats {
    /// Folds in the given order so the mean is reproducible bit for bit.
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut count = 0u64;
        let (mut min, mut max, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for v in values {
            count += 1;
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        if count == 0 {
            return FidelityStats {
                count,
                min: None,
                mean: None,
                max: None,
            };
        }
        FidelityStats {
            count,
            min: Some(min),
            mean: Some(sum / count as f64),
            max: Some(max),
        }
    }
}
