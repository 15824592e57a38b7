//! Scan runners and analysis: Rabi scans, CNOT-core fringes, Bell-state
//! fidelity, the per-channel error budget, the truth table, shot sampling
//! and calibration of the free laser parameters.
//!
//! Everything here works on [`ExperimentConfig`] and is concrete `f64`.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::couplings::{pulse_hamiltonian, TransitionId};
use crate::error::{Error, Result};
use crate::hilbert::{thermal_density, DensityMatrix, Level, PureState};
use crate::liouville::evolve_sequence;
use crate::sequence::{
    basis_label, bell_sequence, prep_sequence, BellSequence, CnotCore, PulseSpec, Sequence, Sideband,
};

/// Environment variable capping scan parallelism.
pub const THREADS_ENV: &str = "ION_GATE_SIM_THREADS";

/// Target Bell fidelity used by calibration.
pub const TARGET_FIDELITY: f64 = 0.74;
/// Target range of the Raman-dephasing share used by calibration.
pub const TARGET_RAMAN_SHARE: (f64, f64) = (0.12, 0.14);
/// Target range of the quadrupole-dephasing share used by calibration.
pub const TARGET_QUADRUPOLE_SHARE: (f64, f64) = (0.05, 0.07);
/// Distance kept from the edges of the share ranges during calibration.
pub const SHARE_MARGIN: f64 = 0.0025;
/// Weight of the share-range penalties relative to the fidelity term.
pub const SHARE_WEIGHT: f64 = 100.0;
/// Upper bound on the total Bell sequence duration, s.
pub const MAX_SEQUENCE_DURATION: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub x: f64,
    pub p_g: f64,
    pub p_up: f64,
    pub p_down: f64,
}

impl ScanPoint {
    fn from_rho(x: f64, rho: &DensityMatrix<f64>) -> Self {
        let p = rho.populations();
        Self { x, p_g: p.g, p_up: p.up, p_down: p.down }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanResult {
    pub variable_name: String,
    pub points: Vec<ScanPoint>,
    pub config_digest: String,
}

impl ScanResult {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn p_up(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.p_up).collect()
    }
}

/// `mean + amplitude * cos(x + phase0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeFit {
    pub amplitude: f64,
    pub phase0: f64,
    pub mean: f64,
    pub rms_residual: f64,
}

impl FringeFit {
    /// Peak-to-peak contrast.
    pub fn contrast(&self) -> f64 {
        2.0 * self.amplitude
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.mean + self.amplitude * (x + self.phase0).cos()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BudgetChannel {
    RamanDephasing,
    QuadrupoleDephasing,
    MotionalDistribution,
    SpontaneousDecay,
}

impl BudgetChannel {
    pub const ALL: [BudgetChannel; 4] = [
        BudgetChannel::RamanDephasing,
        BudgetChannel::QuadrupoleDephasing,
        BudgetChannel::MotionalDistribution,
        BudgetChannel::SpontaneousDecay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BudgetChannel::RamanDephasing => "raman_dephasing",
            BudgetChannel::QuadrupoleDephasing => "quadrupole_dephasing",
            BudgetChannel::MotionalDistribution => "motional_distribution",
            BudgetChannel::SpontaneousDecay => "spontaneous_decay",
        }
    }

    /// Copy of `cfg` with this channel switched off.
    pub fn disable(self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut c = cfg.clone();
        match self {
            BudgetChannel::RamanDephasing => c.decoherence.gamma_up_down_hz = 0.0,
            BudgetChannel::QuadrupoleDephasing => {
                c.decoherence.gamma_g_up_hz = 0.0;
                c.decoherence.gamma_g_down_hz = 0.0;
            }
            BudgetChannel::MotionalDistribution => c.motional.nbar = 0.0,
            BudgetChannel::SpontaneousDecay => c.decoherence.d_state_decay_per_s = 0.0,
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBudget {
    pub baseline_fidelity: f64,
    /// Fidelity gained when each channel alone is removed, in [`BudgetChannel::ALL`] order.
    pub contributions: Vec<(BudgetChannel, f64)>,
}

impl ErrorBudget {
    pub fn get(&self, channel: BudgetChannel) -> f64 {
        self.contributions.iter().find(|(c, _)| *c == channel).map(|(_, v)| *v).unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TruthTableRow {
    pub input: (usize, Level),
    pub expected: (usize, Level),
    /// Population of the expected output basis state.
    pub expected_population: f64,
    /// Population left in the input motional number.
    pub control_population: f64,
}

impl TruthTableRow {
    pub fn input_label(&self) -> String {
        basis_label(self.input.1, self.input.0)
    }

    pub fn expected_label(&self) -> String {
        basis_label(self.expected.1, self.expected.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BellReport {
    pub fidelity: f64,
    pub ideal_fidelity: f64,
    pub duration: f64,
    pub core: CnotCore<f64>,
    pub final_state: DensityMatrix<f64>,
}

/// Map `f` over `items` in parallel, keeping input order.
pub fn par_map<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        None => items.par_iter().map(&f).collect(),
    }
}

fn check_grid(xs: &[f64], name: &str, nonnegative: bool) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::invalid(format!("{name} grid is empty")));
    }
    if xs.iter().any(|x| !x.is_finite() || (nonnegative && *x < 0.0)) {
        return Err(Error::invalid(format!("{name} grid has invalid values")));
    }
    if xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

/// Evenly spaced grid of `points` values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points).map(|k| start + (stop - start) * k as f64 / (points - 1) as f64).collect(),
    }
}

/// Evenly spaced grid over `[start, stop)`.
pub fn periodic_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| start + (stop - start) * k as f64 / points as f64).collect()
}

/// Single-pulse scan of duration. Quadrupole scans start in `|g>` with
/// thermal motion, Raman scans in `|up>` with thermal motion.
pub fn rabi_scan(
    transition: TransitionId,
    sideband: Sideband,
    t_grid: &[f64],
    cfg: &ExperimentConfig,
) -> Result<ScanResult> {
    check_grid(t_grid, "time", true)?;
    let space = cfg.space()?;
    let params = cfg.params()?;
    let dec = cfg.decoherence_model();
    let solver = cfg.solver_config();
    let start = match transition {
        TransitionId::QuadrupoleGUp => Level::G,
        TransitionId::RamanUpDown => Level::Up,
    };
    let rho0 = thermal_density(space, cfg.motional.nbar, start)?;
    let base = PulseSpec { transition, sideband, angle: std::f64::consts::PI, phase: 0.0, duration_override: None };
    base.validate()?;
    pulse_hamiltonian(space, &base, &params)?;

    let points = par_map(t_grid, |&t| {
        let seq = Sequence::new(vec![base.with_duration(t)])?;
        let rho = evolve_sequence(&rho0, &seq, &dec, &params, &solver)?;
        Ok(ScanPoint::from_rho(t, &rho))
    });
    Ok(ScanResult {
        variable_name: "t_s".into(),
        points: points.into_iter().collect::<Result<_>>()?,
        config_digest: cfg.digest(),
    })
}

/// Motional preparation followed by the CNOT core with a scanned second phase.
pub fn cz_fringe(prep_n: u32, phase_grid: &[f64], cfg: &ExperimentConfig) -> Result<ScanResult> {
    check_grid(phase_grid, "phase", false)?;
    let prep = prep_sequence::<f64>(prep_n)?;
    let space = cfg.space()?;
    let params = cfg.params()?;
    let dec = cfg.decoherence_model();
    let solver = cfg.solver_config();
    let rho0 = thermal_density(space, cfg.motional.nbar, Level::G)?;
    let rho_prep = evolve_sequence(&rho0, &prep, &dec, &params, &solver)?;
    let gap = cfg.sequence.cnot_ramsey_gap_s;

    let points = par_map(phase_grid, |&phi| {
        let core = CnotCore { frame_phase: 0.0, second_phase: phi, ramsey_gap: gap }.sequence()?;
        let rho = evolve_sequence(&rho_prep, &core, &dec, &params, &solver)?;
        Ok(ScanPoint::from_rho(phi, &rho))
    });
    Ok(ScanResult {
        variable_name: "phase_rad".into(),
        points: points.into_iter().collect::<Result<_>>()?,
        config_digest: cfg.digest(),
    })
}

/// Linear least-squares fit of `p_up ≈ mean + a cos x + b sin x`.
pub fn fit_fringe(scan: &ScanResult) -> Result<FringeFit> {
    fit_cosine(&scan.xs(), &scan.p_up())
}

pub fn fit_cosine(xs: &[f64], ys: &[f64]) -> Result<FringeFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid("x and y lengths differ"));
    }
    if xs.len() < 3 {
        return Err(Error::FitSingular(format!("need at least 3 points, got {}", xs.len())));
    }
    let design = nalgebra::DMatrix::from_fn(xs.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => xs[i].cos(),
        _ => xs[i].sin(),
    });
    let y = nalgebra::DVector::from_column_slice(ys);
    let normal = design.transpose() * &design;
    let rhs = design.transpose() * &y;
    let scale = normal.diagonal().max();
    let svd = normal.clone().svd(false, false);
    if svd.singular_values.min() <= 1e-10 * scale {
        return Err(Error::FitSingular("sample phases do not span a period".into()));
    }
    let coef = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::FitSingular("normal equations are singular".into()))?;
    let (mean, a, b) = (coef[0], coef[1], coef[2]);
    let resid = &design * &coef - y;
    Ok(FringeFit {
        amplitude: a.hypot(b),
        phase0: (-b).atan2(a),
        mean,
        rms_residual: (resid.norm_squared() / xs.len() as f64).sqrt(),
    })
}

/// `|x|` reduced to `[0, π]` modulo 2π.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Bell sequence for `cfg`, including the calibrated Raman phases.
pub fn bell_sequence_for(cfg: &ExperimentConfig) -> Result<BellSequence<f64>> {
    bell_sequence(&cfg.params()?, cfg.sequence.cnot_ramsey_gap_s)
}

pub fn bell_report(cfg: &ExperimentConfig) -> Result<BellReport> {
    let params = cfg.params()?;
    let bell = bell_sequence(&params, cfg.sequence.cnot_ramsey_gap_s)?;
    let space = cfg.space()?;
    let rho0 = thermal_density(space, cfg.motional.nbar, Level::G)?;
    let rho = evolve_sequence(&rho0, &bell.sequence, &cfg.decoherence_model(), &params, &cfg.solver_config())?;
    Ok(BellReport {
        fidelity: rho.fidelity(&PureState::bell_target(space))?,
        ideal_fidelity: bell.ideal_fidelity,
        duration: bell.sequence.total_duration(&params)?,
        core: bell.core,
        final_state: rho,
    })
}

/// Fidelity of the Bell sequence output with `(|0,up> + |1,down>)/sqrt(2)`.
pub fn bell_fidelity(cfg: &ExperimentConfig) -> Result<f64> {
    Ok(bell_report(cfg)?.fidelity)
}

/// Populations along the Bell sequence, sampled `samples_per_segment` times
/// inside each pulse and each gap; `x` is elapsed time.
pub fn bell_trace(cfg: &ExperimentConfig, samples_per_segment: usize) -> Result<ScanResult> {
    if samples_per_segment == 0 {
        return Err(Error::invalid("samples_per_segment must be >= 1"));
    }
    let params = cfg.params()?;
    let bell = bell_sequence(&params, cfg.sequence.cnot_ramsey_gap_s)?;
    let space = cfg.space()?;
    let dec = cfg.decoherence_model();
    let solver = cfg.solver_config();
    let mut rho = thermal_density(space, cfg.motional.nbar, Level::G)?;
    let mut segments = Vec::new();
    for (k, pulse) in bell.sequence.pulses().iter().enumerate() {
        segments.push((pulse_hamiltonian(space, pulse, &params)?, crate::sequence::pulse_duration(pulse, &params)?));
        if let Some(&gap) = bell.sequence.gaps().get(k) {
            if gap > 0.0 {
                segments.push((crate::hilbert::Operator::zeros(space), gap));
            }
        }
    }
    let mut t = 0.0;
    let mut points = vec![ScanPoint::from_rho(t, &rho)];
    for (h, duration) in segments {
        let dt = duration / samples_per_segment as f64;
        for _ in 0..samples_per_segment {
            rho = crate::liouville::evolve_pulse(&rho, &h, &dec, dt, &solver)?;
            t += dt;
            points.push(ScanPoint::from_rho(t, &rho));
        }
    }
    Ok(ScanResult { variable_name: "t_s".into(), points, config_digest: cfg.digest() })
}

/// One-at-a-time fidelity gain from switching each channel off.
pub fn error_budget(cfg: &ExperimentConfig) -> Result<ErrorBudget> {
    let mut configs = vec![cfg.clone()];
    configs.extend(BudgetChannel::ALL.iter().map(|c| c.disable(cfg)));
    let fids = par_map(&configs, bell_fidelity).into_iter().collect::<Result<Vec<_>>>()?;
    let base = fids[0];
    Ok(ErrorBudget {
        baseline_fidelity: base,
        contributions: BudgetChannel::ALL.iter().zip(&fids[1..]).map(|(&c, &f)| (c, f - base)).collect(),
    })
}

/// Apply the calibrated CNOT core to the four computational basis states.
/// Control `|1>` flips the internal qubit, control `|0>` leaves it alone.
pub fn cnot_truth_table(cfg: &ExperimentConfig) -> Result<Vec<TruthTableRow>> {
    let params = cfg.params()?;
    let bell = bell_sequence(&params, cfg.sequence.cnot_ramsey_gap_s)?;
    let core = bell.core.sequence()?;
    let space = cfg.space()?;
    let dec = cfg.decoherence_model();
    let solver = cfg.solver_config();
    let inputs = [(0, Level::Up), (0, Level::Down), (1, Level::Up), (1, Level::Down)];
    let rows = par_map(&inputs, |&(n, s)| {
        let rho0 = DensityMatrix::basis(space, s, n)?;
        let rho = evolve_sequence(&rho0, &core, &dec, &params, &solver)?;
        let out = match (n, s) {
            (1, Level::Up) => Level::Down,
            (1, Level::Down) => Level::Up,
            _ => s,
        };
        Ok(TruthTableRow {
            input: (n, s),
            expected: (n, out),
            expected_population: rho.population(out, n),
            control_population: rho.fock_populations()[n],
        })
    });
    rows.into_iter().collect()
}

/// Replace each point's populations with the outcome frequencies of
/// `shots_per_point` simulated detections. Point `k` draws from its own
/// stream of a ChaCha generator seeded with `seed`.
pub fn sample_shots(scan: &ScanResult, shots_per_point: u64, seed: u64) -> Result<ScanResult> {
    if shots_per_point == 0 {
        return Err(Error::invalid("shots_per_point must be >= 1"));
    }
    let indexed: Vec<(usize, ScanPoint)> = scan.points.iter().copied().enumerate().collect();
    let points = par_map(&indexed, |&(k, p)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        let n = shots_per_point;
        let total = p.p_g + p.p_up + p.p_down;
        let (pg, pu) = if total > 0.0 { (clamp(p.p_g / total), clamp(p.p_up / total)) } else { (0.0, 0.0) };
        let draw = |rng: &mut ChaCha8Rng, trials: u64, q: f64| -> Result<u64> {
            Ok(Binomial::new(trials, clamp(q)).map_err(|e| Error::invalid(e.to_string()))?.sample(rng))
        };
        let kg = draw(&mut rng, n, pg)?;
        let rest = 1.0 - pg;
        let ku = if rest > 0.0 { draw(&mut rng, n - kg, pu / rest)? } else { 0 };
        let kd = n - kg - ku;
        let f = n as f64;
        Ok(ScanPoint { x: p.x, p_g: kg as f64 / f, p_up: ku as f64 / f, p_down: kd as f64 / f })
    });
    Ok(ScanResult {
        variable_name: scan.variable_name.clone(),
        points: points.into_iter().collect::<Result<_>>()?,
        config_digest: scan.config_digest.clone(),
    })
}

/// Search space for [`calibrate_defaults`]. Frequencies in Hz, gap in s.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationGrid {
    pub rabi_quad_hz: Vec<f64>,
    pub rabi_raman_hz: Vec<f64>,
    pub ramsey_gap_s: Vec<f64>,
    /// Number of step halvings in the local refinement.
    pub refine_rounds: usize,
}

impl CalibrationGrid {
    pub const RABI_QUAD_BOUNDS: (f64, f64) = (10e3, 100e3);
    pub const RABI_RAMAN_BOUNDS: (f64, f64) = (10e3, 200e3);
    pub const GAP_BOUNDS: (f64, f64) = (0.0, 500e-6);

    fn steps(&self) -> [f64; 3] {
        let step = |v: &[f64], (lo, hi): (f64, f64)| {
            if v.len() > 1 { (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64 } else { (hi - lo) / 8.0 }
        };
        [
            step(&self.rabi_quad_hz, Self::RABI_QUAD_BOUNDS),
            step(&self.rabi_raman_hz, Self::RABI_RAMAN_BOUNDS),
            step(&self.ramsey_gap_s, Self::GAP_BOUNDS),
        ]
    }

    fn validate(&self) -> Result<()> {
        let within = |v: &[f64], (lo, hi): (f64, f64), name: &str| {
            check_grid(v, name, true)?;
            if v.iter().any(|x| *x < lo || *x > hi) {
                return Err(Error::invalid(format!("{name} grid leaves [{lo}, {hi}]")));
            }
            Ok(())
        };
        within(&self.rabi_quad_hz, Self::RABI_QUAD_BOUNDS, "rabi_quad_hz")?;
        within(&self.rabi_raman_hz, Self::RABI_RAMAN_BOUNDS, "rabi_raman_hz")?;
        within(&self.ramsey_gap_s, Self::GAP_BOUNDS, "ramsey_gap_s")
    }
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        Self {
            rabi_quad_hz: linspace(20e3, 100e3, 9),
            rabi_raman_hz: vec![10e3, 50e3, 100e3, 200e3],
            ramsey_gap_s: linspace(0.0, 400e-6, 9),
            refine_rounds: 4,
        }
    }
}

/// Calibration outcome at one parameter point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationPoint {
    pub rabi_quad_hz: f64,
    pub rabi_raman_hz: f64,
    pub ramsey_gap_s: f64,
    pub fidelity: f64,
    pub raman_share: f64,
    pub quadrupole_share: f64,
    pub duration: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    pub config: ExperimentConfig,
    pub best: CalibrationPoint,
    pub evaluations: usize,
}

/// Laser settings are snapped to 1 Hz and the gap to 1 ns.
fn with_point(cfg: &ExperimentConfig, x: [f64; 3]) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.lasers.rabi_quad_hz = x[0].round();
    c.lasers.rabi_raman_hz = x[1].round();
    c.sequence.cnot_ramsey_gap_s = (x[2] * 1e9).round() / 1e9;
    c
}

/// Objective of the calibration at `cfg`'s laser settings. `None` when the
/// Bell sequence exceeds [`MAX_SEQUENCE_DURATION`].
pub fn calibration_point(cfg: &ExperimentConfig) -> Result<Option<CalibrationPoint>> {
    let duration = bell_sequence_for(cfg)?.sequence.total_duration(&cfg.params()?)?;
    if duration >= MAX_SEQUENCE_DURATION {
        return Ok(None);
    }
    let f = bell_fidelity(cfg)?;
    let raman = bell_fidelity(&BudgetChannel::RamanDephasing.disable(cfg))? - f;
    let quad = bell_fidelity(&BudgetChannel::QuadrupoleDephasing.disable(cfg))? - f;
    let outside = |x: f64, (lo, hi): (f64, f64)| (lo + SHARE_MARGIN - x).max(x - hi + SHARE_MARGIN).max(0.0);
    let objective = (f - TARGET_FIDELITY).powi(2)
        + SHARE_WEIGHT * (outside(raman, TARGET_RAMAN_SHARE).powi(2) + outside(quad, TARGET_QUADRUPOLE_SHARE).powi(2));
    Ok(Some(CalibrationPoint {
        rabi_quad_hz: cfg.lasers.rabi_quad_hz,
        rabi_raman_hz: cfg.lasers.rabi_raman_hz,
        ramsey_gap_s: cfg.sequence.cnot_ramsey_gap_s,
        fidelity: f,
        raman_share: raman,
        quadrupole_share: quad,
        duration,
        objective,
    }))
}

fn better(a: &CalibrationPoint, b: &CalibrationPoint) -> bool {
    a.objective < b.objective - 1e-15
}

/// Choose the quadrupole and Raman Rabi frequencies and the CNOT Ramsey gap
/// so that the Bell fidelity approaches its target and the two dephasing
/// shares fall in their target ranges, keeping the sequence under 1 ms. Coarse grid, then a pattern
/// search with halving steps. Deterministic.
pub fn calibrate_defaults(cfg: &ExperimentConfig, grid: &CalibrationGrid) -> Result<CalibrationReport> {
    grid.validate()?;
    let mut candidates = Vec::new();
    for &q in &grid.rabi_quad_hz {
        for &r in &grid.rabi_raman_hz {
            for &g in &grid.ramsey_gap_s {
                candidates.push([q, r, g]);
            }
        }
    }
    let eval = |x: &[f64; 3]| calibration_point(&with_point(cfg, *x));
    let mut evaluations = candidates.len();
    let coarse = par_map(&candidates, eval).into_iter().collect::<Result<Vec<_>>>()?;
    let mut best = coarse
        .into_iter()
        .flatten()
        .reduce(|a, b| if better(&b, &a) { b } else { a })
        .ok_or_else(|| Error::CalibrationFailed("no grid point keeps the sequence under 1 ms".into()))?;

    let bounds = [CalibrationGrid::RABI_QUAD_BOUNDS, CalibrationGrid::RABI_RAMAN_BOUNDS, CalibrationGrid::GAP_BOUNDS];
    let mut steps = grid.steps().map(|s| s / 2.0);
    for _ in 0..grid.refine_rounds {
        loop {
            let x = [best.rabi_quad_hz, best.rabi_raman_hz, best.ramsey_gap_s];
            let mut trial = Vec::new();
            for k in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut y = x;
                    y[k] = (y[k] + sign * steps[k]).clamp(bounds[k].0, bounds[k].1);
                    if y != x {
                        trial.push(y);
                    }
                }
            }
            evaluations += trial.len();
            let results = par_map(&trial, eval).into_iter().collect::<Result<Vec<_>>>()?;
            let mut improved = false;
            for p in results.into_iter().flatten() {
                if better(&p, &best) {
                    best = p;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        steps = steps.map(|s| s / 2.0);
    }

    let mut config = with_point(cfg, [best.rabi_quad_hz, best.rabi_raman_hz, best.ramsey_gap_s]);
    config.calibration.target_fidelity = TARGET_FIDELITY;
    config.calibration.achieved_fidelity = Some(best.fidelity);
    Ok(CalibrationReport { config, best, evaluations })
}
