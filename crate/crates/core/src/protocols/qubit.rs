use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fock::{PureState, SpatialMode};

/// Polarization qubit `alpha|H⟩ + beta|V⟩` to be transmitted.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct InputQubit {
    alpha: Complex64,
    beta: Complex64,
}

impl InputQubit {
    pub const NORM_TOLERANCE: f64 = 1e-12;

    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::InvalidQubit(n));
        }
        Ok(InputQubit { alpha, beta })
    }

    /// Uniform draw on the Bloch sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        InputQubit {
            alpha: Complex64::new(g[0] / n, g[1] / n),
            beta: Complex64::new(g[2] / n, g[3] / n),
        }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn state_on(&self, mode: SpatialMode) -> Result<PureState> {
        PureState::single_photon(mode, self.alpha, self.beta)
    }
}
