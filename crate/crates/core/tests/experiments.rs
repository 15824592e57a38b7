use std::f64::consts::{PI, TAU};

use ion_gate_sim::couplings::TransitionId;
use ion_gate_sim::experiments::{
    bell_fidelity, bell_report, bell_trace, calibrate_defaults, calibration_point, cnot_truth_table, cz_fringe,
    error_budget, fit_fringe, linspace, periodic_grid, phase_distance, rabi_scan, BudgetChannel, CalibrationGrid,
};
use ion_gate_sim::hilbert::{DensityMatrix, Level, Operator};
use ion_gate_sim::liouville::{evolve_pulse, evolve_sequence};
use ion_gate_sim::oracles::{integrator_check_duration, run_all_oracles, thermal_sideband_oracle};
use ion_gate_sim::sequence::{PulseSpec, Sequence, Sideband};
use ion_gate_sim::ExperimentConfig;

#[test]
fn thermal_bsb_scan_matches_oracle() {
    let mut cfg = ExperimentConfig::default().ideal();
    cfg.motional.nbar = 0.3;
    cfg.motional.n_max = 12;
    let eta = cfg.eta_quad().unwrap();
    let omega = TAU * cfg.lasers.rabi_quad_hz;
    let ts = linspace(0.0, 3.0 * TAU / (eta * omega), 50);
    let scan = rabi_scan(TransitionId::QuadrupoleGUp, Sideband::Blue, &ts, &cfg).unwrap();
    // the top Fock level has no blue partner inside the truncation
    let oracle = thermal_sideband_oracle(eta, omega, 0.3, cfg.motional.n_max - 1, &ts);
    let w_top = {
        let w: Vec<f64> = (0..=12).map(|n| (0.3f64 / 1.3).powi(n) / 1.3).collect();
        w[12] / w.iter().sum::<f64>()
    };
    for (p, o) in scan.points.iter().zip(&oracle) {
        let expected = o * (1.0 - w_top);
        assert!((p.p_up - expected).abs() < 1e-6, "t={} {} vs {}", p.x, p.p_up, expected);
        assert!((p.p_g + p.p_up + p.p_down - 1.0).abs() < 1e-9);
    }
}

#[test]
fn carrier_envelope_follows_quadrupole_coherence_time() {
    let mut cfg = ExperimentConfig::default().ideal();
    cfg.decoherence.gamma_g_up_hz = 400.0;
    let gamma = TAU * 400.0;

    // free coherence after a π/2 pulse and 0.8 ms of waiting
    let space = cfg.space().unwrap();
    let (dec, solver) = (cfg.decoherence_model(), cfg.solver_config());
    let half = Sequence::new(vec![PulseSpec::carrier(TransitionId::QuadrupoleGUp, PI / 2.0, 0.0)]).unwrap();
    let rho0 = DensityMatrix::basis(space, Level::G, 0).unwrap();
    let rho = evolve_sequence(&rho0, &half, &dec, &cfg.params().unwrap(), &solver).unwrap();
    let before = rho.element((Level::G, 0), (Level::Up, 0)).norm();
    let rho = evolve_pulse(&rho, &Operator::zeros(space), &dec, 0.8e-3, &solver).unwrap();
    let coherence = rho.element((Level::G, 0), (Level::Up, 0)).norm() / before;
    assert!((coherence - 0.366).abs() < 1e-3, "{coherence}");
    assert!((coherence - (-0.5 * gamma * 8e-4f64).exp()).abs() < 1e-8);

    // under strong driving the Rabi peaks decay at γ/4
    let omega = TAU * cfg.lasers.rabi_quad_hz * (1.0 - cfg.eta_quad().unwrap().powi(2) / 2.0);
    let peaks: Vec<f64> = (0..40).map(|k| (2 * k + 1) as f64 * PI / omega).filter(|t| *t < 1.2e-3).collect();
    let scan = rabi_scan(TransitionId::QuadrupoleGUp, Sideband::Carrier, &peaks, &cfg).unwrap();
    for p in &scan.points {
        let envelope = 2.0 * p.p_up - 1.0;
        let expected = (-gamma * p.x / 4.0).exp();
        assert!((envelope - expected).abs() < 0.02 * expected, "t={} {envelope} vs {expected}", p.x);
    }
}

#[test]
fn fringes_reverse_with_motional_state() {
    let grid = periodic_grid(0.0, 2.0 * TAU, 16);
    for (cfg, tol) in [(ExperimentConfig::default().ideal(), 1e-3), (ExperimentConfig::default(), 0.05)] {
        let f0 = fit_fringe(&cz_fringe(0, &grid, &cfg).unwrap()).unwrap();
        let f1 = fit_fringe(&cz_fringe(1, &grid, &cfg).unwrap()).unwrap();
        assert!((phase_distance(f0.phase0, f1.phase0) - PI).abs() < tol);
    }
}

#[test]
fn ideal_fringe_has_full_contrast() {
    let cfg = ExperimentConfig::default().ideal();
    let fit = fit_fringe(&cz_fringe(0, &periodic_grid(0.0, 2.0 * TAU, 8), &cfg).unwrap()).unwrap();
    assert!((fit.contrast() - 1.0).abs() < 1e-6);
    assert!(fit.rms_residual < 1e-9);
}

#[test]
fn bell_ideal_limit_and_separability_bound() {
    let ideal = ExperimentConfig::default().ideal();
    assert!(bell_fidelity(&ideal).unwrap() >= 0.999);
    let report = bell_report(&ExperimentConfig::default()).unwrap();
    assert!(report.fidelity > 0.5);
    assert!(report.duration < 1e-3);
    assert!(report.final_state.check_invariants().is_ok());
}

#[test]
fn bell_trace_ends_at_the_final_state() {
    let cfg = ExperimentConfig::default();
    let trace = bell_trace(&cfg, 3).unwrap();
    let report = bell_report(&cfg).unwrap();
    let last = trace.points.last().unwrap();
    let pops = report.final_state.populations();
    assert!((last.p_up - pops.up).abs() < 1e-8);
    assert!((last.x - report.duration).abs() < 1e-12);
    assert!(trace.points.windows(2).all(|w| w[1].x > w[0].x));
}

#[test]
fn bell_fidelity_does_not_increase_with_dephasing() {
    let base = ExperimentConfig::default();
    type Setter = fn(&mut ExperimentConfig, f64);
    let setters: [Setter; 3] = [
        |c, v| c.decoherence.gamma_g_up_hz = v,
        |c, v| c.decoherence.gamma_up_down_hz = v,
        |c, v| c.decoherence.gamma_g_down_hz = v,
    ];
    for set in setters {
        let fids: Vec<f64> = [0.0, 400.0, 800.0]
            .iter()
            .map(|&v| {
                let mut c = base.clone();
                set(&mut c, v);
                bell_fidelity(&c).unwrap()
            })
            .collect();
        assert!(fids.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{fids:?}");
    }
}

#[test]
fn budget_is_nonnegative_and_reproducible() {
    let cfg = ExperimentConfig::default();
    let a = error_budget(&cfg).unwrap();
    assert!(a.contributions.iter().all(|(_, v)| *v >= 0.0));
    assert_eq!(a, error_budget(&cfg).unwrap());
    let f = bell_fidelity(&cfg).unwrap();
    let single = bell_fidelity(&BudgetChannel::RamanDephasing.disable(&cfg)).unwrap() - f;
    assert_eq!(single, a.get(BudgetChannel::RamanDephasing));
}

#[test]
fn truth_table_ideal_limit() {
    let rows = cnot_truth_table(&ExperimentConfig::default().ideal()).unwrap();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r.expected_population >= 0.999, "{} -> {}: {}", r.input_label(), r.expected_label(), r.expected_population);
        assert!((r.control_population - 1.0).abs() < 1e-6);
        let flips = r.input.0 == 1;
        assert_eq!(r.expected.1 != r.input.1, flips);
    }
}

#[test]
fn defaults_are_a_local_optimum_of_the_calibration() {
    let cfg = ExperimentConfig::default();
    let at = calibration_point(&cfg).unwrap().unwrap();
    assert!((at.fidelity - 0.74).abs() <= 0.03);
    assert!(at.duration < 1e-3);
    for (dq, dr, dg) in [(1e3, 0.0, 0.0), (-1e3, 0.0, 0.0), (0.0, 5e3, 0.0), (0.0, -5e3, 0.0), (0.0, 0.0, 5e-6), (0.0, 0.0, -5e-6)] {
        let mut c = cfg.clone();
        c.lasers.rabi_quad_hz += dq;
        c.lasers.rabi_raman_hz += dr;
        c.sequence.cnot_ramsey_gap_s += dg;
        let p = calibration_point(&c).unwrap().unwrap();
        assert!(p.objective >= at.objective - 1e-9, "{dq} {dr} {dg}: {} < {}", p.objective, at.objective);
    }
}

#[test]
fn calibration_is_idempotent_on_a_small_grid() {
    let grid = CalibrationGrid {
        rabi_quad_hz: vec![45e3, 50e3],
        rabi_raman_hz: vec![20e3, 50e3],
        ramsey_gap_s: vec![200e-6, 250e-6],
        refine_rounds: 1,
    };
    let a = calibrate_defaults(&ExperimentConfig::default(), &grid).unwrap();
    let b = calibrate_defaults(&ExperimentConfig::default(), &grid).unwrap();
    assert_eq!(a, b);
    let again = calibrate_defaults(&a.config, &grid).unwrap();
    assert_eq!(again.config, a.config);
    assert!(a.best.duration < 1e-3);
    assert_eq!(a.config.calibration.achieved_fidelity, Some(a.best.fidelity));
}

#[test]
fn calibration_fails_when_nothing_fits_in_a_millisecond() {
    let mut cfg = ExperimentConfig::default();
    cfg.lasers.eta_quad = Some(0.01);
    let grid = CalibrationGrid {
        rabi_quad_hz: vec![10e3],
        rabi_raman_hz: vec![10e3],
        ramsey_gap_s: vec![0.0],
        refine_rounds: 0,
    };
    assert!(matches!(
        calibrate_defaults(&cfg, &grid),
        Err(ion_gate_sim::Error::CalibrationFailed(_))
    ));
}

#[test]
fn oracles_pass_by_default_and_catch_coarse_steps() {
    let cfg = ExperimentConfig::default();
    let reports = run_all_oracles(&cfg).unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r.pass), "{reports:?}");
    assert_eq!(reports, run_all_oracles(&cfg).unwrap());

    let mut coarse = cfg.clone();
    coarse.solver.dt_max_s = integrator_check_duration(&cfg).unwrap() / 2.0;
    coarse.solver.min_steps = 1;
    coarse.solver.max_step_phase = 0.0;
    let reports = run_all_oracles(&coarse).unwrap();
    let check = reports.iter().find(|r| r.name == "integrator_vs_superoperator").unwrap();
    assert!(!check.pass, "{check:?}");
}

#[test]
fn scan_points_are_normalized() {
    let cfg = ExperimentConfig::default();
    let scan = rabi_scan(TransitionId::RamanUpDown, Sideband::Carrier, &linspace(0.0, 60e-6, 7), &cfg).unwrap();
    for p in &scan.points {
        assert!((p.p_g + p.p_up + p.p_down - 1.0).abs() < 1e-9);
    }
    assert_eq!(scan.config_digest, cfg.digest());
}
