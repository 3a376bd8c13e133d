//! Trajectory noise channels: photon loss and Gaussian dephasing.
//!
//! Loss is a beamsplitter coupling to a fresh environment mode, followed by a
//! Fock measurement of the environment, which is then dropped. Every
//! realization stays a pure state.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeRegistry, Polarization, PureState, Rail, SpatialMode};
use crate::measurement::{measure_occupation, sample, OutcomeLabel};
use crate::optics::{loss_coupler, phase_shift};

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LossChannelSpec {
    Survival(f64),
    /// `survival = exp(-segment_length / attenuation_length)`.
    Lengths {
        segment_length: f64,
        attenuation_length: f64,
    },
}

impl LossChannelSpec {
    pub fn survival(&self) -> Result<f64> {
        match *self {
            LossChannelSpec::Survival(p) => {
                if (0.0..=1.0).contains(&p) {
                    Ok(p)
                } else {
                    Err(Error::SurvivalOutOfRange(p))
                }
            }
            LossChannelSpec::Lengths {
                segment_length,
                attenuation_length,
            } => {
                if !(segment_length >= 0.0 && attenuation_length > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "need segment_length >= 0 and attenuation_length > 0, got {segment_length} and {attenuation_length}"
                    )));
                }
                Ok((-segment_length / attenuation_length).exp())
            }
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingSpec {
    /// Standard deviation of the random relative H/V phase, radians.
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutcome {
    pub survived: bool,
    pub state: PureState,
}

/// Sends `mode` through a lossy channel.
///
/// `survived` is true when the environment picked up no photon, which happens
/// with probability `survival^n` for an `n`-photon input.
pub fn apply_loss<R: Rng + ?Sized>(
    s: &PureState,
    mode: SpatialMode,
    spec: &LossChannelSpec,
    rng: &mut R,
) -> Result<LossOutcome> {
    let survival = spec.survival()?;
    if !s.registry().contains(mode) {
        return Err(Error::UnknownMode(mode));
    }
    let env = s.registry().fresh_mode()?;
    let env_reg = ModeRegistry::with_limits([env], *s.registry().limits())?;
    let coupled = s
        .tensor(&PureState::vacuum(&env_reg))?
        .apply_map(&loss_coupler(mode, env, survival)?)?;
    let dist = measure_occupation(&coupled, env)?;
    let branch = sample(&dist, rng);
    let OutcomeLabel::Occupation { h, v } = branch.label else {
        unreachable!("occupation measurement yields occupation labels")
    };
    let mut rails = vec![Rail::h(env); h as usize];
    rails.extend(std::iter::repeat_n(Rail::v(env), v as usize));
    let env_state = PureState::basis(&env_reg, &rails)?;
    let (_, state) = branch
        .post_state
        .contract(&env_state)?
        .ok_or_else(|| Error::Invariant("environment branch has no weight".into()))?;
    Ok(LossOutcome {
        survived: h == 0 && v == 0,
        state,
    })
}

/// Applies a random phase `φ ~ Normal(0, σ²)` to the V rail of `mode`.
pub fn apply_dephasing<R: Rng + ?Sized>(
    s: &PureState,
    mode: SpatialMode,
    spec: &DephasingSpec,
    rng: &mut R,
) -> Result<PureState> {
    let bad = || Error::InvalidConfig(format!("dephasing sigma {} must be finite and >= 0", spec.sigma));
    if spec.sigma.is_nan() || spec.sigma < 0.0 {
        return Err(bad());
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|_| bad())?;
    let phi = normal.sample(rng);
    s.apply_map(&phase_shift(mode, Polarization::V, phi)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{bell_state, BellLabel};
    use crate::rng::trial_rng;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    const M: SpatialMode = SpatialMode(0);

    #[test]
    fn lengths_follow_exponential_law() {
        let spec = LossChannelSpec::Lengths {
            segment_length: 2.0,
            attenuation_length: 4.0,
        };
        assert_eq!(spec.survival().unwrap(), (-0.5f64).exp());
        assert!(LossChannelSpec::Survival(-0.1).survival().is_err());
        assert!(LossChannelSpec::Lengths { segment_length: 1.0, attenuation_length: 0.0 }
            .survival()
            .is_err());
    }

    #[test]
    fn lossless_channel_is_identity() {
        let psi = PureState::single_photon(M, c(0.6), Complex64::new(0.0, 0.8)).unwrap();
        for i in 0..20 {
            let out = apply_loss(&psi, M, &LossChannelSpec::Survival(1.0), &mut trial_rng(1, i)).unwrap();
            assert!(out.survived);
            assert_eq!(out.state, psi);
        }
    }

    #[test]
    fn single_photon_survival_frequency() {
        let psi = PureState::single_photon(M, c(1.0), c(0.0)).unwrap();
        let n = 100_000u64;
        let spec = LossChannelSpec::Survival(0.5);
        let mut rng = trial_rng(3, 0);
        let mut kept = 0u64;
        for _ in 0..n {
            let out = apply_loss(&psi, M, &spec, &mut rng).unwrap();
            if out.survived {
                kept += 1;
                assert_eq!(out.state, psi);
            } else {
                assert_eq!(
                    out.state.photon_count_distribution(M).unwrap().get(&0).copied(),
                    Some(1.0)
                );
            }
        }
        let sigma = (n as f64 * 0.25).sqrt();
        assert!((kept as f64 - 0.5 * n as f64).abs() < 5.0 * sigma);
    }

    #[test]
    fn heralded_survival_keeps_entanglement() {
        let pair = bell_state(BellLabel::PsiMinus, SpatialMode(1), SpatialMode(2)).unwrap();
        let spec = LossChannelSpec::Survival(0.8);
        let mut rng = trial_rng(5, 0);
        let mut seen = 0;
        for _ in 0..50 {
            let out = apply_loss(&pair, SpatialMode(2), &spec, &mut rng).unwrap();
            if out.survived {
                seen += 1;
                assert!((out.state.fidelity(&pair).unwrap() - 1.0).abs() < 1e-12);
                for s in out.state.schmidt_coefficients(&[SpatialMode(1)]).unwrap() {
                    assert!((s - FRAC_1_SQRT_2).abs() < 1e-12);
                }
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn two_photon_survival_is_squared() {
        let reg = ModeRegistry::new([M]).unwrap();
        let hv = PureState::basis(&reg, &[Rail::h(M), Rail::v(M)]).unwrap();
        let spec = LossChannelSpec::Survival(0.7);
        let n = 20_000u64;
        let mut rng = trial_rng(11, 0);
        let kept = (0..n)
            .filter(|_| apply_loss(&hv, M, &spec, &mut rng).unwrap().survived)
            .count() as f64;
        let p = 0.49;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((kept - p * n as f64).abs() < 5.0 * sigma);
    }

    #[test]
    fn zero_sigma_dephasing_is_identity() {
        let psi = PureState::single_photon(M, c(0.6), c(0.8)).unwrap();
        let out = apply_dephasing(&psi, M, &DephasingSpec { sigma: 0.0 }, &mut trial_rng(0, 0)).unwrap();
        assert_eq!(out, psi);
        assert!(apply_dephasing(&psi, M, &DephasingSpec { sigma: -1.0 }, &mut trial_rng(0, 0)).is_err());
    }

    #[test]
    fn strong_dephasing_averages_to_half() {
        let plus = PureState::single_photon(M, c(1.0), c(1.0)).unwrap();
        let spec = DephasingSpec { sigma: 10.0 };
        let n = 20_000;
        let mut rng = trial_rng(9, 0);
        let fids: Vec<f64> = (0..n)
            .map(|_| {
                let out = apply_dephasing(&plus, M, &spec, &mut rng).unwrap();
                for (occ, _) in out.terms() {
                    assert_eq!(occ.total(), 1);
                }
                out.fidelity(&plus).unwrap()
            })
            .collect();
        let mean = fids.iter().sum::<f64>() / n as f64;
        let var = fids.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!((mean - 0.5).abs() < 5.0 * (var / n as f64).sqrt());
    }
}
