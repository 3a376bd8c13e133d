mod common;

use common::{c, random_qubits};
use lqc::fock::{ModeRegistry, PureState, Rail};
use lqc::measurement::{bsm_standard, qnd_photon_count, BellLabel, OutcomeLabel};
use lqc::noise::{DephasingSpec, LossChannelSpec};
use lqc::protocols::*;
use lqc::Error;
use num_complex::Complex64;

const TOL: f64 = 1e-10;

fn chain(segments: usize, survival: f64, scheme: Scheme, trials: u64, seed: u64) -> ChainConfig {
    ChainConfig {
        segments,
        loss: LossChannelSpec::Survival(survival),
        scheme,
        dephasing: DephasingSpec { sigma: 0.0 },
        trials,
        seed,
    }
}

fn within_5_sigma(freq: f64, p: f64, n: u64) -> bool {
    (freq - p).abs() <= 5.0 * (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn two_resource_photons_form_uniform_product() {
    let s = prepare_resource_photon(TELEPORTER.resource_a)
        .unwrap()
        .tensor(&prepare_resource_photon(TELEPORTER.resource_b).unwrap())
        .unwrap();
    assert_eq!(s.len(), 4);
    for (_, a) in s.terms() {
        assert!((a - c(0.5)).norm() < 1e-15);
    }
}

#[test]
fn prepared_singlet_is_an_eigenstate_of_the_swap_measurement() {
    let m = SWAPPER;
    let s = prepare_bell(BellLabel::PsiMinus, m.a, m.b).unwrap();
    let d = bsm_standard(&s, m.a, m.b).unwrap();
    assert!((d.probability(OutcomeLabel::Bell(BellLabel::PsiMinus)) - 1.0).abs() < 1e-14);
    let phi_p = prepare_bell(BellLabel::PhiPlus, m.a, m.b).unwrap();
    let phi_m = prepare_bell(BellLabel::PhiMinus, m.a, m.b).unwrap();
    assert!(phi_p.fidelity(&phi_m).unwrap() < 1e-15);
}

#[test]
fn teleporter_probabilities_are_input_independent() {
    for q in random_qubits(100, 11) {
        let recs = run_teleporter_exhaustive(&q).unwrap();
        let total: f64 = recs.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < TOL);
        let by_count = |n| recs.iter().filter(|(r, _)| r.qnd_count == n).map(|(_, p)| p).sum::<f64>();
        assert!((by_count(0) - 0.25).abs() < TOL);
        assert!((by_count(1) - 0.5).abs() < TOL);
        assert!((by_count(2) - 0.25).abs() < TOL);
        for (r, p) in &recs {
            if r.qnd_count == 1 {
                assert!((p - 0.125).abs() < TOL);
                assert!(r.bsm_label.is_some() && r.correction.is_some());
                assert!((r.fidelity_to_input.unwrap() - 1.0).abs() < TOL);
            } else {
                assert!(r.bsm_label.is_none() && r.fidelity_to_input.is_none());
            }
        }
    }
}

#[test]
fn two_photon_branch_for_horizontal_input() {
    let q = InputQubit::new(c(1.0), c(0.0)).unwrap();
    let m = TELEPORTER;
    let qnd = qnd_photon_count(&network_state(&q).unwrap(), m.bob).unwrap();
    let post = &qnd.get(OutcomeLabel::Count(2)).unwrap().post_state;
    let reg = ModeRegistry::new([m.alice_a, m.alice_b, m.bob]).unwrap();
    let expect = PureState::basis(&reg, &[Rail::h(m.alice_b), Rail::h(m.bob), Rail::v(m.bob)]).unwrap();
    assert!((post.fidelity(&expect).unwrap() - 1.0).abs() < 1e-14);

    let rec = run_teleporter_exhaustive(&q)
        .unwrap()
        .into_iter()
        .find(|(r, _)| r.qnd_count == 2)
        .unwrap()
        .0;
    let alice = ModeRegistry::new([m.alice_a, m.alice_b]).unwrap();
    let expect = PureState::basis(&alice, &[Rail::h(m.alice_b)]).unwrap();
    assert!((rec.output_state.fidelity(&expect).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn empty_branch_leaves_alice_entangled() {
    let m = TELEPORTER;
    let reg = ModeRegistry::new([m.alice_a, m.alice_b]).unwrap();
    for q in random_qubits(20, 12) {
        let expect = PureState::new(
            &reg,
            [
                (reg.ket(&[Rail::h(m.alice_a), Rail::h(m.alice_b), Rail::v(m.alice_b)]).unwrap(), q.alpha()),
                (reg.ket(&[Rail::h(m.alice_a), Rail::v(m.alice_a), Rail::v(m.alice_b)]).unwrap(), q.beta()),
            ],
        )
        .unwrap();
        let rec = run_teleporter_exhaustive(&q)
            .unwrap()
            .into_iter()
            .find(|(r, _)| r.qnd_count == 0)
            .unwrap()
            .0;
        assert!((rec.output_state.fidelity(&expect).unwrap() - 1.0).abs() < TOL);
    }
}

#[test]
fn diagonal_input_is_recovered_in_every_branch() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = InputQubit::new(c(s), c(s)).unwrap();
    let target = PureState::single_photon(TELEPORTER.bob, c(1.0), c(1.0)).unwrap();
    let mut n = 0;
    for (r, _) in run_teleporter_exhaustive(&q).unwrap() {
        if r.qnd_count == 1 {
            assert!((r.output_state.fidelity(&target).unwrap() - 1.0).abs() < TOL);
            n += 1;
        }
    }
    assert_eq!(n, 4);
}

#[test]
fn derived_tables_are_frozen() {
    assert_eq!(derive_correction_table().unwrap(), CorrectionTable::teleporter());
    assert_eq!(derive_swap_table().unwrap(), CorrectionTable::swap_to_singlet());
    assert_eq!(derive_pair_teleport_table().unwrap(), CorrectionTable::pair_teleport());
    assert_eq!(CorrectionTable::teleporter().get(BellLabel::PhiPlus), Some(Correction::I));
    assert_eq!(CorrectionTable::teleporter().get(BellLabel::XiPlus), Some(Correction::X));
}

#[test]
fn sampled_teleporter_is_reproducible_and_faithful() {
    let q = InputQubit::new(c(0.6), Complex64::new(0.0, 0.8)).unwrap();
    assert_eq!(run_teleporter_sampled(&q, 1, 3).unwrap(), run_teleporter_sampled(&q, 1, 3).unwrap());
    assert!(matches!(run_teleporter_sampled(&q, 0, 3), Err(Error::InvalidConfig(_))));
    let n = 100_000;
    let recs = run_teleporter_sampled(&q, n, 21).unwrap();
    let ones = recs.iter().filter(|r| r.qnd_count == 1).count() as f64 / n as f64;
    assert!(within_5_sigma(ones, 0.5, n));
    for r in recs.iter().filter(|r| r.qnd_count == 1) {
        assert!(1.0 - r.fidelity_to_input.unwrap() < 1e-9);
    }
}

#[test]
fn swapper_heralds_the_expected_pairs() {
    use BellLabel::*;
    let recs = run_swapper_exhaustive().unwrap();
    assert_eq!(recs.len(), 4);
    let find = |l| recs.iter().find(|(r, _)| r.bsm_label == l).unwrap();
    assert_eq!(find(PsiPlus).0.heralded_bell, PhiPlus);
    assert_eq!(find(XiMinus).0.heralded_bell, PsiMinus);
    let total: f64 = recs.iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() < TOL);
    for (r, p) in &recs {
        assert!((p - 0.25).abs() < TOL);
        assert!(r.entanglement_ok);
        let m = SWAPPER;
        assert_eq!(identify_bell(&r.heralded_state, m.b, m.d).unwrap(), r.heralded_bell);
    }
}

#[test]
fn lossless_chain_is_perfect() {
    let q = random_qubits(1, 13)[0];
    for scheme in [Scheme::I, Scheme::II] {
        let r = run_chain(&chain(3, 1.0, scheme, 500, 1), &q).unwrap();
        assert_eq!(r.arrived, 500);
        assert!(1.0 - r.fidelity.min.unwrap() < TOL);
    }
}

#[test]
fn relay_chain_arrival_matches_product_of_survivals() {
    let q = random_qubits(1, 14)[0];
    let n = 20_000;
    let r = run_chain(&chain(3, 0.9, Scheme::I, n, 2), &q).unwrap();
    assert!(within_5_sigma(r.arrival_frequency, 0.729, n), "{}", r.arrival_frequency);
    assert!(1.0 - r.fidelity.min.unwrap() < TOL);
    assert_eq!(r.lost_at_segment.iter().sum::<u64>() + r.arrived, n);
}

#[test]
fn swap_chain_arrival_matches_product_of_survivals() {
    let q = random_qubits(1, 15)[0];
    let n = 20_000;
    let r = run_chain(&chain(4, 0.9, Scheme::II, n, 3), &q).unwrap();
    assert!(within_5_sigma(r.arrival_frequency, 0.6561, n), "{}", r.arrival_frequency);
    assert!(1.0 - r.fidelity.min.unwrap() < TOL);
}

#[test]
fn dephasing_lowers_mean_fidelity_as_predicted() {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = InputQubit::new(c(s), c(s)).unwrap();
    let sigma: f64 = 0.5;
    let mut cfg = chain(1, 1.0, Scheme::I, 20_000, 4);
    cfg.dephasing.sigma = sigma;
    let r = run_chain(&cfg, &q).unwrap();
    let expect = (1.0 + (-sigma * sigma / 2.0).exp()) / 2.0;
    // Fidelity (1 + cos φ)/2 lies in [0, 1]; its spread is below 0.25.
    let bound = 5.0 * 0.25 / (20_000f64).sqrt();
    assert!((r.fidelity.mean.unwrap() - expect).abs() < bound, "{} vs {expect}", r.fidelity.mean.unwrap());
}

#[test]
fn chain_is_independent_of_thread_count() {
    let q = random_qubits(1, 16)[0];
    let cfg = chain(3, 0.8, Scheme::I, 300, 5);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_chain(&cfg, &q)).unwrap();
    let b = four.install(|| run_chain(&cfg, &q)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lengths_give_exponential_arrival() {
    let q = random_qubits(1, 17)[0];
    let total = 2.0;
    for n in [1usize, 2, 4] {
        let cfg = ChainConfig {
            segments: n,
            loss: LossChannelSpec::Lengths {
                segment_length: total / n as f64,
                attenuation_length: 1.0,
            },
            scheme: Scheme::I,
            dephasing: DephasingSpec { sigma: 0.0 },
            trials: 10,
            seed: 0,
        };
        let r = run_chain(&cfg, &q).unwrap();
        assert!((r.expected_arrival - (-total).exp()).abs() < 1e-12);
    }
}
