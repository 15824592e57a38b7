use std::f64::consts::{PI, TAU};

use ion_gate_sim::couplings::{pulse_hamiltonian, TransitionId};
use ion_gate_sim::hilbert::{thermal_weights, DensityMatrix, HilbertSpace, Level, Operator, PureState};
use ion_gate_sim::liouville::{evolve_pulse, evolve_sequence, reference_evolve, DecoherenceModel, Method, SolverConfig};
use ion_gate_sim::sequence::{pulse_duration, PulseSpec, Sequence};
use ion_gate_sim::TrapLaserParams;
use proptest::prelude::*;

type Complex64 = nalgebra::Complex<f64>;

fn params(rabi_quad_khz: f64, rabi_raman_khz: f64, eta: f64) -> TrapLaserParams {
    TrapLaserParams {
        omega_z: TAU * 0.72e6,
        eta_quad: eta,
        eta_raman: 0.0,
        rabi_quad: TAU * rabi_quad_khz * 1e3,
        rabi_raman: TAU * rabi_raman_khz * 1e3,
    }
}

fn pulse_strategy() -> impl Strategy<Value = PulseSpec> {
    (0..4usize, 0.1..2.0 * PI, 0.0..TAU).prop_map(|(kind, angle, phase)| match kind {
        0 => PulseSpec::carrier(TransitionId::QuadrupoleGUp, angle, phase),
        1 => PulseSpec::carrier(TransitionId::RamanUpDown, angle, phase),
        2 => PulseSpec::blue(angle, phase),
        _ => PulseSpec::red(angle, phase),
    })
}

fn state_strategy(space: HilbertSpace) -> impl Strategy<Value = DensityMatrix> {
    let d = space.dim();
    (
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d),
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), d),
        0.0..1.0f64,
    )
        .prop_filter_map("nonzero vectors", move |(a, b, w)| {
            let mk = |v: &[(f64, f64)]| {
                let terms: Vec<(Level, usize, Complex64)> = v
                    .iter()
                    .enumerate()
                    .map(|(i, &(re, im))| {
                        let (level, n) = space.label(i);
                        (level, n, Complex64::new(re, im))
                    })
                    .collect();
                PureState::from_terms(space, &terms).ok()
            };
            let (pa, pb) = (mk(&a)?, mk(&b)?);
            DensityMatrix::pure(&pa).mix(w, &DensityMatrix::pure(&pb)).ok()
        })
}

fn decoherence_strategy() -> impl Strategy<Value = DecoherenceModel> {
    // third rate drawn so that sqrt(gamma) stays a metric
    (0.0..2000.0f64, 0.0..2000.0f64, 0.0..1.0f64, 0.0..50.0f64, 0.0..200.0f64).prop_map(|(a, b, u, d, h)| {
        let (lo, hi) = ((a.sqrt() - b.sqrt()).abs(), a.sqrt() + b.sqrt());
        let c = (lo + u * (hi - lo)).powi(2);
        DecoherenceModel {
            gamma_g_up: TAU * a,
            gamma_up_down: TAU * b,
            gamma_g_down: TAU * c,
            d_state_decay_rate: d,
            heating_rate: h,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn integrator_matches_reference_superoperator(
        pulse in pulse_strategy(),
        rho in state_strategy(HilbertSpace::new(2).unwrap()),
        dec in decoherence_strategy(),
        rq in 10.0..100.0f64,
        rr in 10.0..200.0f64,
        eta in 0.05..0.2f64,
    ) {
        let space = HilbertSpace::new(2).unwrap();
        let p = params(rq, rr, eta);
        let h = pulse_hamiltonian(space, &pulse, &p).unwrap();
        let t = pulse_duration(&pulse, &p).unwrap();
        let fast = evolve_pulse(&rho, &h, &dec, t, &SolverConfig::default()).unwrap();
        let reference = reference_evolve(&rho, &h, &dec, t).unwrap();
        prop_assert!(fast.max_abs_diff(&reference) <= 1e-6, "diff {}", fast.max_abs_diff(&reference));
    }

    #[test]
    fn sequences_keep_density_invariants(
        pulses in prop::collection::vec(pulse_strategy(), 1..5),
        rho in state_strategy(HilbertSpace::new(2).unwrap()),
        dec in decoherence_strategy(),
    ) {
        let p = params(50.0, 50.0, 0.11);
        let seq = Sequence::new(pulses).unwrap();
        prop_assert!(dec.dephasing_is_completely_positive());
        let out = evolve_sequence(&rho, &seq, &dec, &p, &SolverConfig::default()).unwrap();
        prop_assert!(out.check_invariants().is_ok(), "{:?}", out.check_invariants());
    }

    #[test]
    fn unitary_limit_preserves_purity(
        pulses in prop::collection::vec(pulse_strategy(), 1..5),
        level in 0..3usize,
        n in 0..3usize,
    ) {
        let space = HilbertSpace::new(2).unwrap();
        let p = params(50.0, 50.0, 0.11);
        let rho = DensityMatrix::basis(space, Level::from_index(level).unwrap(), n).unwrap();
        let seq = Sequence::new(pulses).unwrap();
        let out = evolve_sequence(&rho, &seq, &DecoherenceModel::none(), &p, &SolverConfig::default()).unwrap();
        prop_assert!((out.purity() - 1.0).abs() <= 1e-8, "purity {}", out.purity());
        prop_assert!(out.check_invariants().is_ok(), "{:?}", out.check_invariants());
    }

    #[test]
    fn fidelity_is_linear_in_the_state(
        a in state_strategy(HilbertSpace::new(2).unwrap()),
        b in state_strategy(HilbertSpace::new(2).unwrap()),
        w in 0.0..1.0f64,
    ) {
        let psi = PureState::bell_target(HilbertSpace::new(2).unwrap());
        let mixed = a.mix(w, &b).unwrap().fidelity(&psi).unwrap();
        let linear = w * a.fidelity(&psi).unwrap() + (1.0 - w) * b.fidelity(&psi).unwrap();
        prop_assert!((mixed - linear).abs() <= 1e-12);
    }

    #[test]
    fn thermal_weights_are_monotone(nbar in 0.0..5.0f64, dn in 0.001..1.0f64, n_max in 1..12usize) {
        let w = thermal_weights(nbar, n_max).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(w.windows(2).all(|p| p[1] <= p[0]));
        let mean = |w: &[f64]| w.iter().enumerate().map(|(n, p)| n as f64 * p).sum::<f64>();
        let hotter = thermal_weights(nbar + dn, n_max).unwrap();
        prop_assert!(mean(&hotter) > mean(&w));
        prop_assert!(hotter[0] < w[0]);
    }

    #[test]
    fn coherence_decays_exponentially(gamma_hz in 0.0..2000.0f64, t in 1e-6..2e-3f64) {
        let space = HilbertSpace::new(1).unwrap();
        let psi = PureState::from_terms(
            space,
            &[(Level::Up, 0, Complex64::new(1.0, 0.0)), (Level::Down, 0, Complex64::new(1.0, 0.0))],
        ).unwrap();
        let dec = DecoherenceModel { gamma_up_down: TAU * gamma_hz, ..DecoherenceModel::none() };
        let out = evolve_pulse(&DensityMatrix::pure(&psi), &Operator::zeros(space), &dec, t, &SolverConfig::default()).unwrap();
        let expected = 0.5 * (-TAU * gamma_hz * t / 2.0).exp();
        prop_assert!((out.element((Level::Up, 0), (Level::Down, 0)).norm() - expected).abs() <= 1e-8);
    }
}

#[test]
fn step_halving_converges() {
    let space = HilbertSpace::default();
    let p = params(50.0, 50.0, 0.114);
    let dec = DecoherenceModel::default();
    let rho = DensityMatrix::basis(space, Level::G, 0).unwrap();
    let pulse = PulseSpec::blue(PI, 0.0);
    let h = pulse_hamiltonian(space, &pulse, &p).unwrap();
    let t = pulse_duration(&pulse, &p).unwrap();
    let run = |steps: usize| {
        let cfg = SolverConfig { dt_max: t, min_steps: steps, max_step_phase: 0.0, method: Method::FixedStepRk4 };
        evolve_pulse(&rho, &h, &dec, t, &cfg).unwrap()
    };
    let reference = reference_evolve(&rho, &h, &dec, t).unwrap();
    let (coarse, fine) = (run(200), run(400));
    assert!(coarse.max_abs_diff(&fine) <= 1e-6);
    let ratio = coarse.max_abs_diff(&reference) / fine.max_abs_diff(&reference);
    // fourth order: halving the step cuts the error about 16x
    assert!(ratio > 10.0, "ratio {ratio}");
}

#[test]
fn f32_and_f64_agree_on_a_sideband_pulse() {
    let space = HilbertSpace::default();
    let p64 = params(50.0, 50.0, 0.114);
    let p32 = ion_gate_sim::TrapLaserParamsF32 {
        omega_z: p64.omega_z as f32,
        eta_quad: 0.114,
        eta_raman: 0.0,
        rabi_quad: p64.rabi_quad as f32,
        rabi_raman: p64.rabi_raman as f32,
    };
    let seq64 = Sequence::new(vec![PulseSpec::blue(PI, 0.0)]).unwrap();
    let seq32 = ion_gate_sim::SequenceF32::new(vec![ion_gate_sim::PulseSpecF32::blue(std::f32::consts::PI, 0.0)]).unwrap();
    let r64 = evolve_sequence(
        &DensityMatrix::basis(space, Level::G, 0).unwrap(),
        &seq64,
        &DecoherenceModel::default(),
        &p64,
        &SolverConfig::default(),
    )
    .unwrap();
    let dec32 = ion_gate_sim::DecoherenceModelF32 {
        gamma_g_up: (TAU * 400.0) as f32,
        gamma_up_down: (TAU * 300.0) as f32,
        gamma_g_down: (TAU * 500.0) as f32,
        d_state_decay_rate: (1.0 / 1.1) as f32,
        heating_rate: 0.0,
    };
    let r32 = evolve_sequence(
        &ion_gate_sim::DensityMatrixF32::basis(space, Level::G, 0).unwrap(),
        &seq32,
        &dec32,
        &p32,
        &SolverConfig::default(),
    )
    .unwrap();
    let a = r64.population(Level::Up, 1);
    let b = r32.population(Level::Up, 1) as f64;
    assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    assert!(a > 0.95);
}

#[test]
fn default_rates_are_completely_positive() {
    assert!(DecoherenceModel::default().dephasing_is_completely_positive());
    let broken = DecoherenceModel { gamma_up_down: 0.0, ..DecoherenceModel::default() };
    assert!(!broken.dephasing_is_completely_positive());
}
