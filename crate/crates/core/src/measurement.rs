//! Projective measurements with exhaustive branching and seeded sampling.
//!
//! Every measurement is total: outcomes outside the listed basis land in an
//! explicit `Other` branch, so branch probabilities always sum to one.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{ModeRegistry, PureState, Rail, SpatialMode, Terms};

/// Branches with probability below this are dropped.
pub const BRANCH_CUTOFF: f64 = 1e-12;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BellLabel {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
    XiPlus,
    XiMinus,
    Other,
}

impl BellLabel {
    pub const POLARIZATION: [BellLabel; 4] = [
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
    ];
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BellLabel::PsiPlus => "Psi+",
            BellLabel::PsiMinus => "Psi-",
            BellLabel::PhiPlus => "Phi+",
            BellLabel::PhiMinus => "Phi-",
            BellLabel::XiPlus => "Xi+",
            BellLabel::XiMinus => "Xi-",
            BellLabel::Other => "Other",
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolarizationOutcome {
    Aligned,
    Orthogonal,
    Other,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutcomeLabel {
    Count(usize),
    Bell(BellLabel),
    Polarization(PolarizationOutcome),
    Occupation { h: u8, v: u8 },
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeLabel::Count(n) => write!(f, "n{n}"),
            OutcomeLabel::Bell(b) => write!(f, "{b}"),
            OutcomeLabel::Polarization(p) => write!(f, "{p:?}"),
            OutcomeLabel::Occupation { h, v } => write!(f, "H{h}V{v}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub label: OutcomeLabel,
    pub probability: f64,
    pub post_state: PureState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    branches: Vec<Branch>,
}

impl OutcomeDistribution {
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn get(&self, label: OutcomeLabel) -> Option<&Branch> {
        self.branches.iter().find(|b| b.label == label)
    }

    /// Probability of `label`, zero when the branch is absent.
    pub fn probability(&self, label: OutcomeLabel) -> f64 {
        self.get(label).map_or(0.0, |b| b.probability)
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

fn grouped(
    s: &PureState,
    key: impl Fn(&crate::fock::OccupationBasisState) -> OutcomeLabel,
) -> Result<OutcomeDistribution> {
    let mut groups: BTreeMap<OutcomeLabel, Terms> = BTreeMap::new();
    for (occ, a) in s.terms_map() {
        groups.entry(key(occ)).or_default().insert(occ.clone(), *a);
    }
    let total = s.norm_sqr();
    let mut branches = Vec::new();
    for (label, terms) in groups {
        let p = terms.values().map(|a| a.norm_sqr()).sum::<f64>() / total;
        if p < BRANCH_CUTOFF {
            continue;
        }
        branches.push(Branch {
            label,
            probability: p,
            post_state: PureState::normalized_from(s.registry().clone(), terms)?,
        });
    }
    Ok(OutcomeDistribution { branches })
}

/// Non-demolition count of the total photon number in `mode`.
pub fn qnd_photon_count(s: &PureState, mode: SpatialMode) -> Result<OutcomeDistribution> {
    let h = s.registry().rail_index(Rail::h(mode))?;
    grouped(s, |occ| {
        OutcomeLabel::Count(occ.counts()[h] as usize + occ.counts()[h + 1] as usize)
    })
}

/// Projective Fock measurement of both rails of `mode`.
pub fn measure_occupation(s: &PureState, mode: SpatialMode) -> Result<OutcomeDistribution> {
    let h = s.registry().rail_index(Rail::h(mode))?;
    grouped(s, |occ| OutcomeLabel::Occupation {
        h: occ.counts()[h],
        v: occ.counts()[h + 1],
    })
}

/// Projects the local state of `modes` onto an orthonormal set; the
/// remainder becomes the `other` branch.
fn project_local(
    s: &PureState,
    basis: Vec<(OutcomeLabel, PureState)>,
    other: OutcomeLabel,
) -> Result<OutcomeDistribution> {
    let mut residual: Terms = s.terms_map().clone();
    let mut branches = Vec::new();
    for (label, local) in basis {
        let Some((w, rest)) = s.contract(&local)? else {
            continue;
        };
        let post = local.tensor(&rest)?;
        if post.registry() != s.registry() {
            return Err(Error::RegistryMismatch);
        }
        let amp = Complex64::new(w.sqrt(), 0.0);
        for (occ, a) in post.terms_map() {
            *residual.entry(occ.clone()).or_insert(Complex64::new(0.0, 0.0)) -= amp * a;
        }
        if w >= BRANCH_CUTOFF {
            branches.push(Branch {
                label,
                probability: w,
                post_state: post,
            });
        }
    }
    residual.retain(|_, a| a.norm() >= s.registry().limits().prune);
    let p_other: f64 = residual.values().map(|a| a.norm_sqr()).sum();
    if p_other >= BRANCH_CUTOFF {
        branches.push(Branch {
            label: other,
            probability: p_other,
            post_state: PureState::normalized_from(s.registry().clone(), residual)?,
        });
    }
    Ok(OutcomeDistribution { branches })
}

/// One of the six two-mode Bell states on `(m1, m2)`:
/// `Ψ± = (H₁V₂ ± V₁H₂)/√2`, `Φ± = (H₁H₂ ± V₁V₂)/√2`,
/// `Ξ± = (|0⟩₁|HV⟩₂ ± |HV⟩₁|0⟩₂)/√2`.
pub fn bell_state(label: BellLabel, m1: SpatialMode, m2: SpatialMode) -> Result<PureState> {
    let reg = ModeRegistry::new([m1, m2])?;
    let (first, second, sign): (Vec<Rail>, Vec<Rail>, f64) = match label {
        BellLabel::PsiPlus => (vec![Rail::h(m1), Rail::v(m2)], vec![Rail::v(m1), Rail::h(m2)], 1.0),
        BellLabel::PsiMinus => (vec![Rail::h(m1), Rail::v(m2)], vec![Rail::v(m1), Rail::h(m2)], -1.0),
        BellLabel::PhiPlus => (vec![Rail::h(m1), Rail::h(m2)], vec![Rail::v(m1), Rail::v(m2)], 1.0),
        BellLabel::PhiMinus => (vec![Rail::h(m1), Rail::h(m2)], vec![Rail::v(m1), Rail::v(m2)], -1.0),
        BellLabel::XiPlus => (vec![Rail::h(m2), Rail::v(m2)], vec![Rail::h(m1), Rail::v(m1)], 1.0),
        BellLabel::XiMinus => (vec![Rail::h(m2), Rail::v(m2)], vec![Rail::h(m1), Rail::v(m1)], -1.0),
        BellLabel::Other => return Err(Error::UnsupportedLabel(label.to_string())),
    };
    PureState::new(
        &reg,
        [
            (reg.ket(&first)?, Complex64::new(FRAC_1_SQRT_2, 0.0)),
            (reg.ket(&second)?, Complex64::new(sign * FRAC_1_SQRT_2, 0.0)),
        ],
    )
}

fn bsm(s: &PureState, m1: SpatialMode, m2: SpatialMode, labels: &[BellLabel]) -> Result<OutcomeDistribution> {
    for m in [m1, m2] {
        if !s.registry().contains(m) {
            return Err(Error::UnknownMode(m));
        }
    }
    let basis = labels
        .iter()
        .map(|&l| Ok((OutcomeLabel::Bell(l), bell_state(l, m1, m2)?)))
        .collect::<Result<Vec<_>>>()?;
    project_local(s, basis, OutcomeLabel::Bell(BellLabel::Other))
}

/// Bell measurement in `{Φ+, Φ-, Ξ+, Ξ-}` on `(m1, m2)`.
pub fn bsm_phi_xi(s: &PureState, m1: SpatialMode, m2: SpatialMode) -> Result<OutcomeDistribution> {
    use BellLabel::*;
    bsm(s, m1, m2, &[PhiPlus, PhiMinus, XiPlus, XiMinus])
}

/// Bell measurement in `{Ψ+, Ψ-, Ξ+, Ξ-}` on `(m1, m2)`, the swapping basis.
pub fn bsm_standard(s: &PureState, m1: SpatialMode, m2: SpatialMode) -> Result<OutcomeDistribution> {
    use BellLabel::*;
    bsm(s, m1, m2, &[PsiPlus, PsiMinus, XiPlus, XiMinus])
}

/// Complete polarization Bell measurement in `{Ψ±, Φ±}`.
pub fn bsm_polarization(s: &PureState, m1: SpatialMode, m2: SpatialMode) -> Result<OutcomeDistribution> {
    bsm(s, m1, m2, &BellLabel::POLARIZATION)
}

/// Polarization analysis of `mode` along `cos θ H + sin θ V`.
pub fn measure_polarization(s: &PureState, mode: SpatialMode, angle: f64) -> Result<OutcomeDistribution> {
    if !s.registry().contains(mode) {
        return Err(Error::UnknownMode(mode));
    }
    let (sn, cs) = angle.sin_cos();
    let re = |x: f64| Complex64::new(x, 0.0);
    let basis = vec![
        (
            OutcomeLabel::Polarization(PolarizationOutcome::Aligned),
            PureState::single_photon(mode, re(cs), re(sn))?,
        ),
        (
            OutcomeLabel::Polarization(PolarizationOutcome::Orthogonal),
            PureState::single_photon(mode, re(-sn), re(cs))?,
        ),
    ];
    project_local(s, basis, OutcomeLabel::Polarization(PolarizationOutcome::Other))
}

/// Draws one branch with its probability.
pub fn sample<'a, R: Rng + ?Sized>(d: &'a OutcomeDistribution, rng: &mut R) -> &'a Branch {
    let u: f64 = rng.random::<f64>() * d.total_probability();
    let mut acc = 0.0;
    for b in &d.branches {
        acc += b.probability;
        if u < acc {
            return b;
        }
    }
    d.branches.last().expect("distribution has at least one branch")
}
