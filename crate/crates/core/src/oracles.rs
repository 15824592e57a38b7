//! Closed-form references for the simulator. The formulas here do not call
//! into the integrator; they only consume its output for comparison.

use std::f64::consts::{PI, TAU};

use crate::config::ExperimentConfig;
use crate::couplings::{carrier_element_exact, carrier_element_truncated, pulse_hamiltonian, TransitionId};
use crate::error::Result;
use crate::experiments::{linspace, rabi_scan};
use crate::hilbert::{DensityMatrix, Level, Operator, PureState};
use crate::liouville::{evolve_pulse, reference_evolve, DecoherenceModel};
use crate::scalar::cr;
use crate::sequence::{pulse_duration, PulseSpec, Sideband};

/// Tolerance for closed-form and integrator comparisons.
pub const ORACLE_TOLERANCE: f64 = 1e-6;
/// Tolerance for the coherence-decay comparison.
pub const COHERENCE_TOLERANCE: f64 = 1e-8;
/// Tolerance for the two Laguerre evaluations.
pub const LAGUERRE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, max_abs_error: f64, tolerance: f64) -> Self {
        Self { name: name.into(), max_abs_error, tolerance, pass: max_abs_error <= tolerance }
    }
}

/// `sin²(Ωt/2)`.
pub fn two_level_rabi_oracle(omega: f64, t_grid: &[f64]) -> Vec<f64> {
    t_grid.iter().map(|t| (omega * t / 2.0).sin().powi(2)).collect()
}

/// `Σ_n P(n) sin²(η sqrt(n+1) Ω t / 2)` with thermal `P(n)` renormalized on `0..=n_max`.
pub fn thermal_sideband_oracle(eta: f64, omega: f64, nbar: f64, n_max: usize, t_grid: &[f64]) -> Vec<f64> {
    let weights: Vec<f64> = (0..=n_max).map(|n| (nbar / (1.0 + nbar)).powi(n as i32) / (1.0 + nbar)).collect();
    let z: f64 = weights.iter().sum();
    t_grid
        .iter()
        .map(|t| {
            weights
                .iter()
                .enumerate()
                .map(|(n, w)| w / z * (eta * ((n + 1) as f64).sqrt() * omega * t / 2.0).sin().powi(2))
                .sum()
        })
        .collect()
}

/// `L_n(x)` from the three-term recurrence.
pub fn laguerre_oracle(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 - x);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 - x) * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Pulse used by the integrator cross-check: a sideband π pulse on `|g>`
/// with the configured decoherence.
pub fn integrator_check_pulse() -> PulseSpec<f64> {
    PulseSpec::blue(PI, 0.0)
}

/// Duration of [`integrator_check_pulse`] under `cfg`.
pub fn integrator_check_duration(cfg: &ExperimentConfig) -> Result<f64> {
    pulse_duration(&integrator_check_pulse(), &cfg.params()?)
}

fn two_level_report(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let ideal = cfg.ideal();
    let eta = ideal.eta_quad()?;
    let omega = TAU * ideal.lasers.rabi_quad_hz * carrier_element_truncated(eta, 0);
    let ts = linspace(0.0, 2.0 * TAU / omega, 50);
    let scan = rabi_scan(TransitionId::QuadrupoleGUp, Sideband::Carrier, &ts, &ideal)?;
    let sim: Vec<f64> = scan.points.iter().map(|p| p.p_up).collect();
    Ok(OracleReport::new("two_level_rabi", max_abs_diff(&sim, &two_level_rabi_oracle(omega, &ts)), ORACLE_TOLERANCE))
}

fn thermal_sideband_report(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let mut ideal = cfg.ideal();
    ideal.motional.nbar = cfg.motional.nbar;
    let eta = ideal.eta_quad()?;
    let omega = TAU * ideal.lasers.rabi_quad_hz;
    let ts = linspace(0.0, 2.0 * TAU / (eta * omega), 50);
    let scan = rabi_scan(TransitionId::QuadrupoleGUp, Sideband::Blue, &ts, &ideal)?;
    let sim: Vec<f64> = scan.points.iter().map(|p| p.p_up).collect();
    let oracle = thermal_sideband_oracle(eta, omega, ideal.motional.nbar, ideal.motional.n_max, &ts);
    Ok(OracleReport::new("thermal_sideband", max_abs_diff(&sim, &oracle), ORACLE_TOLERANCE))
}

fn laguerre_reports(cfg: &ExperimentConfig) -> Result<Vec<OracleReport>> {
    let eta = cfg.eta_quad()?;
    let x = eta * eta;
    let n_max = cfg.motional.n_max;
    let mut recurrence_err: f64 = 0.0;
    let mut expansion_err: f64 = 0.0;
    for n in 0..=n_max {
        let exact = carrier_element_exact(eta, n);
        recurrence_err = recurrence_err.max((exact - (-x / 2.0).exp() * laguerre_oracle(n, x)).abs());
        // |exact - truncated| <= η⁴ (n+1)², normalized per n
        let bound = x * x * ((n + 1) as f64).powi(2);
        expansion_err = expansion_err.max((exact - carrier_element_truncated(eta, n)).abs() / bound);
    }
    Ok(vec![
        OracleReport::new("laguerre_carrier_element", recurrence_err, LAGUERRE_TOLERANCE),
        OracleReport::new("carrier_expansion_bound", expansion_err, 1.0),
    ])
}

fn integrator_report(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let space = cfg.space()?;
    let params = cfg.params()?;
    let mut dec = cfg.decoherence_model();
    if dec.heating_rate == 0.0 {
        dec.heating_rate = 5.0;
    }
    let pulse = integrator_check_pulse();
    let h = pulse_hamiltonian(space, &pulse, &params)?;
    let t = pulse_duration(&pulse, &params)?;
    let rho0 = DensityMatrix::pure(&PureState::from_terms(
        space,
        &[(Level::G, 0, cr(0.8)), (Level::G, 1, cr(0.6)), (Level::Down, 1, cr(0.5))],
    )?);
    let fast = evolve_pulse(&rho0, &h, &dec, t, &cfg.solver_config())?;
    let reference = reference_evolve(&rho0, &h, &dec, t)?;
    Ok(OracleReport::new("integrator_vs_superoperator", fast.max_abs_diff(&reference), ORACLE_TOLERANCE))
}

fn coherence_report(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let space = cfg.space()?;
    let d = cfg.decoherence_model();
    let dec = DecoherenceModel { heating_rate: 0.0, ..d };
    let plus = PureState::from_terms(space, &[(Level::G, 0, cr(1.0)), (Level::Up, 0, cr(1.0))])?;
    let rho0 = DensityMatrix::pure(&plus);
    let t = 0.8e-3;
    let rho = evolve_pulse(&rho0, &Operator::zeros(space), &dec, t, &cfg.solver_config())?;
    let expected = 0.5 * (-(dec.gamma_g_up + dec.d_state_decay_rate) * t / 2.0).exp();
    let got = rho.element((Level::G, 0), (Level::Up, 0)).norm();
    Ok(OracleReport::new("coherence_decay", (got - expected).abs(), COHERENCE_TOLERANCE))
}

/// Every oracle comparison, in a fixed order. Failures are reported, not raised.
pub fn run_all_oracles(cfg: &ExperimentConfig) -> Result<Vec<OracleReport>> {
    let mut out = vec![two_level_report(cfg)?, thermal_sideband_report(cfg)?];
    out.extend(laguerre_reports(cfg)?);
    out.push(integrator_report(cfg)?);
    out.push(coherence_report(cfg)?);
    Ok(out)
}
