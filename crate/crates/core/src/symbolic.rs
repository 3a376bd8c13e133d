//! Literal polynomial algebra over creation-operator symbols.
//!
//! A state `Σ c · a†_{r1} a†_{r2} ... |0⟩` is kept as a polynomial whose
//! monomials are sorted multisets of rails. Optical elements act by plain
//! substitution of each symbol and factor-by-factor multiplication, and the
//! `√(n!)` factors only appear when converting to or from the Fock basis. This
//! is the expansion the `verify` command checks the engine against.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use num_complex::Complex64;

use crate::error::Result;
use crate::fock::{ModeLinearMap, ModeRegistry, OccupationBasisState, PureState, Rail, Terms};

type Monomial = Vec<Rail>;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CreationPolynomial {
    terms: BTreeMap<Monomial, Complex64>,
}

fn sqrt_factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product::<f64>().sqrt()
}

impl CreationPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        let mut p = Self::zero();
        p.terms.insert(Vec::new(), c);
        p
    }

    /// The single symbol `a†_rail`.
    pub fn creation(rail: Rail) -> Self {
        let mut p = Self::zero();
        p.terms.insert(vec![rail], Complex64::new(1.0, 0.0));
        p
    }

    /// `Σ c_i a†_{r_i}`.
    pub fn linear(parts: &[(Rail, Complex64)]) -> Self {
        parts
            .iter()
            .map(|&(r, c)| Self::creation(r).scale(c))
            .fold(Self::zero(), |acc, p| acc + p)
    }

    pub fn scale(mut self, c: Complex64) -> Self {
        for v in self.terms.values_mut() {
            *v *= c;
        }
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Rail], &Complex64)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), c))
    }

    /// Replaces every symbol by the polynomial `rule` returns for it
    /// (`None` leaves the symbol alone).
    pub fn substitute<F>(&self, rule: F) -> Self
    where
        F: Fn(Rail) -> Option<CreationPolynomial>,
    {
        let mut out = Self::zero();
        for (mono, c) in &self.terms {
            let mut acc = Self::constant(*c);
            for &r in mono {
                let factor = rule(r).unwrap_or_else(|| Self::creation(r));
                acc = &acc * &factor;
            }
            out = out + acc;
        }
        out
    }

    /// Substitution rules read off a mode map's matrix.
    pub fn apply_map(&self, map: &ModeLinearMap) -> Self {
        let rules: BTreeMap<Rail, CreationPolynomial> = map
            .inputs()
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let parts: Vec<(Rail, Complex64)> = map
                    .outputs()
                    .iter()
                    .enumerate()
                    .map(|(j, &o)| (o, map.matrix()[(j, i)]))
                    .filter(|(_, u)| u.norm() > 0.0)
                    .collect();
                (r, Self::linear(&parts))
            })
            .collect();
        self.substitute(|r| rules.get(&r).cloned())
    }

    /// Fock amplitudes on `registry`, `c · Π √(m_j!)` per monomial.
    pub fn fock_amplitudes(&self, registry: &ModeRegistry) -> Result<Terms> {
        let mut out = Terms::new();
        for (mono, c) in &self.terms {
            let occ = registry.ket(mono)?;
            let w: f64 = occ.counts().iter().map(|&n| sqrt_factorial(n)).product();
            *out.entry(occ).or_insert(Complex64::new(0.0, 0.0)) += c * w;
        }
        out.retain(|_, a| a.norm() >= registry.limits().prune);
        Ok(out)
    }

    /// Normalized Fock state of this polynomial.
    pub fn to_state(&self, registry: &ModeRegistry) -> Result<PureState> {
        PureState::normalized_from(registry.clone(), self.fock_amplitudes(registry)?)
    }

    pub fn from_state(state: &PureState) -> Self {
        let rails: Vec<Rail> = state.registry().rails().collect();
        let mut p = Self::zero();
        for (occ, a) in state.terms() {
            p.terms.insert(monomial_of(occ, &rails), a / occ_norm(occ));
        }
        p
    }

    /// Largest amplitude difference against `state` after conversion.
    pub fn max_deviation(&self, state: &PureState) -> Result<f64> {
        let mine = self.fock_amplitudes(state.registry())?;
        let theirs = state.terms_map();
        let mut dev: f64 = 0.0;
        for (k, a) in &mine {
            dev = dev.max((a - state.amplitude(k)).norm());
        }
        for (k, b) in theirs {
            if !mine.contains_key(k) {
                dev = dev.max(b.norm());
            }
        }
        Ok(dev)
    }
}

fn monomial_of(occ: &OccupationBasisState, rails: &[Rail]) -> Monomial {
    occ.counts()
        .iter()
        .zip(rails)
        .flat_map(|(&n, &r)| std::iter::repeat_n(r, n as usize))
        .collect()
}

fn occ_norm(occ: &OccupationBasisState) -> f64 {
    occ.counts().iter().map(|&n| sqrt_factorial(n)).product()
}

impl Add for CreationPolynomial {
    type Output = CreationPolynomial;

    fn add(mut self, rhs: CreationPolynomial) -> CreationPolynomial {
        for (m, c) in rhs.terms {
            *self.terms.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        self.terms.retain(|_, c| c.norm() > 0.0);
        self
    }
}

impl Mul for &CreationPolynomial {
    type Output = CreationPolynomial;

    fn mul(self, rhs: &CreationPolynomial) -> CreationPolynomial {
        let mut out = CreationPolynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                let mut m: Monomial = m1.iter().chain(m2).copied().collect();
                m.sort();
                *out.terms.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c1 * c2;
            }
        }
        out.terms.retain(|_, c| c.norm() > 0.0);
        out
    }
}
