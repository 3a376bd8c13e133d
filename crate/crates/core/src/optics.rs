//! Constructors for the linear optical elements used by the protocols.
//!
//! Phase conventions are fixed project-wide:
//! - PBS: transmits H, reflects V, every amplitude `+1` (no `i` on reflection).
//! - Beamsplitter with transmissivity `η`: `[[t, r], [r, -t]]` with
//!   `t = √η`, `r = √(1-η)`, so `a† -> t a† + r b†` and `b† -> r a† - t b†`.
//! - Wave plate: `R(θ)·P(φ)` on the (H, V) rails, with `P(φ) = diag(1, e^{iφ})`
//!   and `R(θ) = [[cos θ, -sin θ], [sin θ, cos θ]]`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{ModeLinearMap, Polarization, Rail, SpatialMode};

/// Port assignment of a polarizing beam splitter.
///
/// H photons go `in_a -> out_c` and `in_b -> out_d`; V photons go
/// `in_a -> out_d` and `in_b -> out_c`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct PbsSpec {
    pub in_a: SpatialMode,
    pub in_b: SpatialMode,
    pub out_c: SpatialMode,
    pub out_d: SpatialMode,
}

impl PbsSpec {
    pub fn new(
        in_a: impl Into<SpatialMode>,
        in_b: impl Into<SpatialMode>,
        out_c: impl Into<SpatialMode>,
        out_d: impl Into<SpatialMode>,
    ) -> Self {
        PbsSpec {
            in_a: in_a.into(),
            in_b: in_b.into(),
            out_c: out_c.into(),
            out_d: out_d.into(),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WavePlateSpec {
    pub mode: SpatialMode,
    pub theta: f64,
    pub phi: f64,
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn pbs(spec: PbsSpec) -> Result<ModeLinearMap> {
    let PbsSpec {
        in_a,
        in_b,
        out_c,
        out_d,
    } = spec;
    let all = [in_a, in_b, out_c, out_d];
    for (i, m) in all.iter().enumerate() {
        if all[..i].contains(m) {
            return Err(Error::DuplicateMode(*m));
        }
    }
    ModeLinearMap::relabeling(
        vec![Rail::h(in_a), Rail::h(in_b), Rail::v(in_a), Rail::v(in_b)],
        vec![Rail::h(out_c), Rail::h(out_d), Rail::v(out_d), Rail::v(out_c)],
        DMatrix::identity(4, 4),
    )
}

/// 2×2 Jones matrix `R(θ)·P(φ)`.
pub fn wave_plate_matrix(theta: f64, phi: f64) -> DMatrix<Complex64> {
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    DMatrix::from_row_slice(2, 2, &[real(c), -s * e, real(s), c * e])
}

pub fn wave_plate(spec: WavePlateSpec) -> Result<ModeLinearMap> {
    ModeLinearMap::new(
        vec![Rail::h(spec.mode), Rail::v(spec.mode)],
        wave_plate_matrix(spec.theta, spec.phi),
    )
}

/// Multiplies one rail's creation operator by `e^{iφ}`.
pub fn phase_shift(mode: impl Into<SpatialMode>, pol: Polarization, phi: f64) -> Result<ModeLinearMap> {
    ModeLinearMap::new(
        vec![Rail::new(mode, pol)],
        DMatrix::from_element(1, 1, Complex64::from_polar(1.0, phi)),
    )
}

/// Two-rail beamsplitter with transmission probability `transmissivity`.
pub fn beam_splitter(a: Rail, b: Rail, transmissivity: f64) -> Result<ModeLinearMap> {
    if !(0.0..=1.0).contains(&transmissivity) {
        return Err(Error::SurvivalOutOfRange(transmissivity));
    }
    let t = transmissivity.sqrt();
    let r = (1.0 - transmissivity).sqrt();
    ModeLinearMap::new(
        vec![a, b],
        DMatrix::from_row_slice(2, 2, &[real(t), real(r), real(r), real(-t)]),
    )
}

/// Couples each polarization rail of `signal` to the same rail of `env`
/// with transmission amplitude `√survival`.
pub fn loss_coupler(
    signal: impl Into<SpatialMode>,
    env: impl Into<SpatialMode>,
    survival: f64,
) -> Result<ModeLinearMap> {
    if !(0.0..=1.0).contains(&survival) {
        return Err(Error::SurvivalOutOfRange(survival));
    }
    let (s, e) = (signal.into(), env.into());
    if s == e {
        return Err(Error::DuplicateMode(s));
    }
    let t = survival.sqrt();
    let r = (1.0 - survival).sqrt();
    let z = real(0.0);
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        real(t), z,       real(r),  z,
        z,       real(t), z,        real(r),
        real(r), z,       real(-t), z,
        z,       real(r), z,        real(-t),
    ]);
    ModeLinearMap::new(vec![Rail::h(s), Rail::v(s), Rail::h(e), Rail::v(e)], m)
}
