//! Test-only oracles, independent of the engine's expansion code.
#![allow(dead_code)]

use std::collections::BTreeMap;

use lqc::fock::{ModeLinearMap, ModeRegistry, OccupationBasisState, PureState, Rail};
use lqc::protocols::InputQubit;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Permanent by expansion over the first row.
pub fn permanent(m: &DMatrix<Complex64>) -> Complex64 {
    fn rec(m: &DMatrix<Complex64>, row: usize, used: &mut Vec<bool>) -> Complex64 {
        if row == m.nrows() {
            return c(1.0);
        }
        let mut acc = c(0.0);
        for col in 0..m.ncols() {
            if !used[col] && m[(row, col)] != c(0.0) {
                used[col] = true;
                acc += m[(row, col)] * rec(m, row + 1, used);
                used[col] = false;
            }
        }
        acc
    }
    assert_eq!(m.nrows(), m.ncols());
    rec(m, 0, &mut vec![false; m.ncols()])
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

/// All occupation vectors of `photons` photons over `rails` rails.
pub fn compositions(photons: usize, rails: usize) -> Vec<Vec<u8>> {
    if rails == 0 {
        return if photons == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=photons {
        for mut rest in compositions(photons - first, rails - 1) {
            rest.insert(0, first as u8);
            out.push(rest);
        }
    }
    out
}

/// `⟨m|Û|n⟩ = perm(U[m, n]) / √(Π n! Π m!)`, with `U[j, i]` the amplitude
/// for a photon entering rail `i` to leave on rail `j`.
pub fn transition_amplitude(u: &DMatrix<Complex64>, n: &[u8], m: &[u8]) -> Complex64 {
    let expand = |occ: &[u8]| -> Vec<usize> {
        occ.iter()
            .enumerate()
            .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
            .collect()
    };
    let (cols, rows) = (expand(n), expand(m));
    if cols.len() != rows.len() {
        return c(0.0);
    }
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |r, k| u[(rows[r], cols[k])]);
    let norm: f64 = n.iter().chain(m).map(|&k| factorial(k)).product();
    permanent(&sub) / norm.sqrt()
}

/// Full rail-level matrix of an in-place map on `reg`, identity elsewhere.
pub fn embed(map: &ModeLinearMap, reg: &ModeRegistry) -> DMatrix<Complex64> {
    let rails: Vec<Rail> = reg.rails().collect();
    let pos = |r: &Rail| rails.iter().position(|x| x == r).expect("rail in registry");
    let mut u = DMatrix::identity(rails.len(), rails.len());
    for (i, ri) in map.inputs().iter().enumerate() {
        let ci = pos(ri);
        for row in 0..rails.len() {
            u[(row, ci)] = c(0.0);
        }
        for (j, rj) in map.outputs().iter().enumerate() {
            u[(pos(rj), ci)] = map.matrix()[(j, i)];
        }
    }
    u
}

/// Oracle image of `state` under an in-place map, as a sparse amplitude map.
pub fn oracle_apply(state: &PureState, map: &ModeLinearMap) -> BTreeMap<Vec<u8>, Complex64> {
    let reg = state.registry();
    let u = embed(map, reg);
    let mut out: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
    for (occ, a) in state.terms() {
        for m in compositions(occ.total(), reg.rail_count()) {
            let t = transition_amplitude(&u, occ.counts(), &m);
            if t.norm() > 0.0 {
                *out.entry(m).or_insert(c(0.0)) += a * t;
            }
        }
    }
    out
}

/// Largest gap between an engine state and an oracle amplitude map.
pub fn gap(state: &PureState, oracle: &BTreeMap<Vec<u8>, Complex64>) -> f64 {
    let mut g: f64 = 0.0;
    for (k, a) in oracle {
        g = g.max((state.amplitude(&OccupationBasisState::from_counts(k.clone())) - a).norm());
    }
    for (k, a) in state.terms() {
        if !oracle.contains_key(k.counts()) {
            g = g.max(a.norm());
        }
    }
    g
}

/// Haar-like random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary(n: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            d / d.norm()
        } else {
            c(0.0)
        }
    });
    q * phases
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_qubits(n: usize, seed: u64) -> Vec<InputQubit> {
    let mut rng = seeded(seed);
    (0..n).map(|_| InputQubit::random(&mut rng)).collect()
}

/// Random normalized superposition of basis states with up to `max_photons`.
pub fn random_state(reg: &ModeRegistry, max_photons: usize, terms: usize, rng: &mut impl Rng) -> PureState {
    let rails = reg.rail_count();
    let pool: Vec<Vec<u8>> = (0..=max_photons).flat_map(|n| compositions(n, rails)).collect();
    let picked = (0..terms).map(|_| {
        let occ = pool[rng.random_range(0..pool.len())].clone();
        let a = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        (OccupationBasisState::from_counts(occ), a)
    });
    PureState::new(reg, picked).expect("nonzero random state")
}
