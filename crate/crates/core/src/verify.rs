//! Self-checks shipped with the binary: the engine against the literal
//! creation-operator expansion and against the closed-form states of the
//! teleporter and swapper.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::fock::{ModeRegistry, PureState, Rail, SpatialMode};
use crate::measurement::{bell_state, BellLabel};
use crate::optics::beam_splitter;
use crate::protocols::{
    derive_correction_table, derive_pair_teleport_table, derive_swap_table, network_maps, network_state,
    run_swapper_exhaustive, run_teleporter_exhaustive, CorrectionTable, InputQubit, TELEPORTER,
};
use crate::rng::trial_rng;
use crate::symbolic::CreationPolynomial;

/// Amplitude tolerance for term-by-term comparisons.
pub const AMPLITUDE_TOLERANCE: f64 = 1e-12;
/// Probability and fidelity tolerance.
pub const PROBABILITY_TOLERANCE: f64 = 1e-10;
const CHECK_QUBITS: u64 = 100;
const CHECK_SEED: u64 = 0x5eed_c4ec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// Fixed set of random input qubits used by the checks.
pub fn check_qubits() -> Vec<InputQubit> {
    let mut rng = trial_rng(CHECK_SEED, 0);
    (0..CHECK_QUBITS).map(|_| InputQubit::random(&mut rng)).collect()
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Largest amplitude difference between two states on the same modes.
pub fn max_amplitude_gap(a: &PureState, b: &PureState) -> f64 {
    let keys: std::collections::BTreeSet<_> = a.terms().chain(b.terms()).map(|(k, _)| k.clone()).collect();
    keys.iter()
        .map(|k| (a.amplitude(k) - b.amplitude(k)).norm())
        .fold(0.0, f64::max)
}

/// Three-photon state after both teleporter beam splitters, written out by
/// hand. The term with α and no photon at Bob carries `|H⟩` on 1′; a `|V⟩`
/// there would not conserve the H count of the input.
pub fn teleporter_closed_form(q: &InputQubit) -> Result<PureState> {
    let m = TELEPORTER;
    let (a1, b2, b3) = (m.alice_a, m.alice_b, m.bob);
    let reg = ModeRegistry::new([a1, b2, b3])?;
    let (al, be) = (q.alpha() * 0.5, q.beta() * 0.5);
    let terms: [(Vec<Rail>, Complex64); 8] = [
        (vec![Rail::h(a1), Rail::h(b2), Rail::h(b3)], al),
        (vec![Rail::v(a1), Rail::v(b2), Rail::v(b3)], be),
        (vec![Rail::h(b2), Rail::v(b2), Rail::v(b3)], al),
        (vec![Rail::h(a1), Rail::v(a1), Rail::h(b3)], be),
        (vec![Rail::h(a1), Rail::h(b2), Rail::v(b2)], al),
        (vec![Rail::h(a1), Rail::v(a1), Rail::v(b2)], be),
        (vec![Rail::h(b2), Rail::h(b3), Rail::v(b3)], al),
        (vec![Rail::v(a1), Rail::h(b3), Rail::v(b3)], be),
    ];
    PureState::new(
        &reg,
        terms
            .iter()
            .map(|(r, a)| Ok((reg.ket(r)?, *a)))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Network state by literal substitution into the creation polynomial.
pub fn teleporter_by_expansion(q: &InputQubit) -> Result<CreationPolynomial> {
    let m = TELEPORTER;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let input = CreationPolynomial::linear(&[(Rail::h(m.input), q.alpha()), (Rail::v(m.input), q.beta())]);
    let r2 = CreationPolynomial::linear(&[(Rail::h(m.resource_a), c(s)), (Rail::v(m.resource_a), c(s))]);
    let r3 = CreationPolynomial::linear(&[(Rail::h(m.resource_b), c(s)), (Rail::v(m.resource_b), c(s))]);
    let mut p = &(&input * &r2) * &r3;
    for map in network_maps()? {
        p = p.apply_map(&map);
    }
    Ok(p)
}

/// State of the four swapper photons after the PBS and bit flip, written
/// out as a sum over Alice's outcomes.
pub fn swapper_closed_form() -> Result<PureState> {
    use BellLabel::*;
    let m = crate::protocols::SWAPPER;
    let parts = [
        (PsiPlus, PhiPlus, 0.5),
        (PsiMinus, PhiMinus, -0.5),
        (XiPlus, PsiPlus, -0.5),
        (XiMinus, PsiMinus, -0.5),
    ];
    let mut terms = Vec::new();
    let mut reg = None;
    for (alice, remote, coeff) in parts {
        let prod = bell_state(alice, m.out_a, m.out_c)?.tensor(&bell_state(remote, m.b, m.d)?)?;
        reg = Some(prod.registry().clone());
        terms.extend(prod.terms().map(|(k, a)| (k.clone(), a * coeff)));
    }
    PureState::new(&reg.expect("four parts"), terms)
}

fn swapper_engine_state() -> Result<(PureState, PureState)> {
    let m = crate::protocols::SWAPPER;
    let init = bell_state(BellLabel::PsiMinus, m.a, m.b)?.tensor(&bell_state(BellLabel::PsiMinus, m.c, m.d)?)?;
    let mut s = init.clone();
    for map in crate::protocols::swapper_analyzer()? {
        s = s.apply_map(&map)?;
    }
    Ok((init, s))
}

fn check_network_oracle(qs: &[InputQubit]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for q in qs {
        worst = worst.max(teleporter_by_expansion(q)?.max_deviation(&network_state(q)?)?);
    }
    Ok(Check::new(
        "teleporter-state-vs-expansion",
        worst <= AMPLITUDE_TOLERANCE,
        format!("max amplitude gap {worst:.3e} over {} qubits", qs.len()),
    ))
}

fn check_network_closed_form(qs: &[InputQubit]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for q in qs {
        worst = worst.max(max_amplitude_gap(&teleporter_closed_form(q)?, &network_state(q)?));
    }
    Ok(Check::new(
        "teleporter-state-closed-form",
        worst <= AMPLITUDE_TOLERANCE,
        format!("max amplitude gap {worst:.3e}; zero-photon branch has α|H⟩ on 1′"),
    ))
}

fn check_teleport_branches(qs: &[InputQubit]) -> Result<Check> {
    let (mut worst_p, mut worst_f): (f64, f64) = (0.0, 0.0);
    let mut other = 0.0;
    for q in qs {
        for (r, p) in run_teleporter_exhaustive(q)? {
            let expect = match (r.qnd_count, r.bsm_label) {
                (1, Some(BellLabel::Other)) => {
                    other += p;
                    0.0
                }
                (1, _) => 0.125,
                _ => 0.25,
            };
            worst_p = worst_p.max((p - expect).abs());
            if let Some(f) = r.fidelity_to_input {
                worst_f = worst_f.max(1.0 - f);
            }
        }
    }
    Ok(Check::new(
        "teleporter-branches",
        worst_p <= PROBABILITY_TOLERANCE && worst_f <= PROBABILITY_TOLERANCE && other == 0.0,
        format!("max probability gap {worst_p:.3e}, max infidelity {worst_f:.3e}, unexpected outcome weight {other:.3e}"),
    ))
}

/// Names the form of Bob's raw state among `αH±βV`, `αV±βH`.
fn bob_form(q: &InputQubit, s: &PureState) -> Result<Option<&'static str>> {
    let (a, b, bob) = (q.alpha(), q.beta(), TELEPORTER.bob);
    let forms = [
        ("aH+bV", a, b),
        ("aH-bV", a, -b),
        ("aV+bH", b, a),
        ("aV-bH", -b, a),
    ];
    for (name, h, v) in forms {
        if s.fidelity(&PureState::single_photon(bob, h, v)?)? >= 1.0 - PROBABILITY_TOLERANCE {
            return Ok(Some(name));
        }
    }
    Ok(None)
}

fn check_bob_forms(qs: &[InputQubit]) -> Result<Check> {
    let mut pairing: Option<Vec<(BellLabel, &'static str)>> = None;
    let mut ok = true;
    for q in qs {
        let mut seen = Vec::new();
        for (label, _, s) in crate::protocols::teleporter_bob_states(q)? {
            match bob_form(q, &s)? {
                Some(f) => seen.push((label, f)),
                None => ok = false,
            }
        }
        let mut forms: Vec<_> = seen.iter().map(|(_, f)| *f).collect();
        forms.sort();
        forms.dedup();
        ok &= forms.len() == 4;
        match &pairing {
            None => pairing = Some(seen),
            Some(p) => ok &= *p == seen,
        }
    }
    let detail = pairing
        .unwrap_or_default()
        .iter()
        .map(|(l, f)| format!("{l}->{f}"))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Check::new("bob-branch-forms", ok, detail))
}

fn check_swap() -> Result<Vec<Check>> {
    let (init, engine) = swapper_engine_state()?;
    let mut expansion = CreationPolynomial::from_state(&init);
    for map in crate::protocols::swapper_analyzer()? {
        expansion = expansion.apply_map(&map);
    }
    let dev = expansion.max_deviation(&engine)?;
    let closed = max_amplitude_gap(&swapper_closed_form()?, &engine);
    let recs = run_swapper_exhaustive()?;
    let probs_ok = recs.len() == 4 && recs.iter().all(|(_, p)| (p - 0.25).abs() <= PROBABILITY_TOLERANCE);
    let ent_ok = recs.iter().all(|(r, _)| r.entanglement_ok);
    let pairs = recs
        .iter()
        .map(|(r, _)| format!("{}->{}", r.bsm_label, r.heralded_bell))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(vec![
        Check::new(
            "swapper-state-vs-expansion",
            dev <= AMPLITUDE_TOLERANCE,
            format!("max amplitude gap {dev:.3e}"),
        ),
        Check::new(
            "swapper-state-closed-form",
            closed <= AMPLITUDE_TOLERANCE,
            format!("max amplitude gap {closed:.3e}"),
        ),
        Check::new("swapper-branches", probs_ok && ent_ok, pairs),
    ])
}

fn check_tables() -> Result<Vec<Check>> {
    type Case = (&'static str, fn() -> Result<CorrectionTable>, CorrectionTable);
    let cases: [Case; 3] = [
        ("teleporter-corrections", derive_correction_table, CorrectionTable::teleporter()),
        ("swap-corrections", derive_swap_table, CorrectionTable::swap_to_singlet()),
        ("pair-teleport-corrections", derive_pair_teleport_table, CorrectionTable::pair_teleport()),
    ];
    cases
        .into_iter()
        .map(|(name, derive, frozen)| {
            let derived = derive()?;
            let detail = derived
                .iter()
                .map(|(l, c)| format!("{l}:{c}"))
                .collect::<Vec<_>>()
                .join(" ");
            Ok(Check::new(name, derived == frozen, detail))
        })
        .collect()
}

fn check_hong_ou_mandel() -> Result<Check> {
    let reg = ModeRegistry::new([SpatialMode(0), SpatialMode(1)])?;
    let out = PureState::basis(&reg, &[Rail::h(0), Rail::h(1)])?.apply_map(&beam_splitter(Rail::h(0), Rail::h(1), 0.5)?)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let expect = PureState::new(
        &reg,
        [
            (reg.ket(&[Rail::h(0), Rail::h(0)])?, c(s)),
            (reg.ket(&[Rail::h(1), Rail::h(1)])?, c(-s)),
        ],
    )?;
    let gap = max_amplitude_gap(&out, &expect);
    Ok(Check::new(
        "hong-ou-mandel",
        gap <= AMPLITUDE_TOLERANCE,
        format!("|1,1> -> (|2,0> - |0,2>)/sqrt2, gap {gap:.3e}"),
    ))
}

/// Runs every check in a fixed order.
pub fn run_checks() -> Result<Vec<Check>> {
    let qs = check_qubits();
    let mut out = vec![
        check_network_oracle(&qs)?,
        check_network_closed_form(&qs)?,
        check_teleport_branches(&qs)?,
        check_bob_forms(&qs)?,
    ];
    out.extend(check_swap()?);
    out.extend(check_tables()?);
    out.push(check_hong_ou_mandel()?);
    Ok(out)
}
