//! Experiment configuration and its `section.key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! decoherence.gamma_g_up_hz = 400
//! motional.nbar = 0.02
//! ```
//!
//! Absent keys take their defaults, so an empty file is the reference
//! configuration. Frequencies are in cycles per second; they are converted
//! to angular units when the physics types are built.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::couplings::{default_eta_quad, TrapLaserParams, AXIAL_FREQUENCY_HZ};
use crate::error::{Error, Result};
use crate::hilbert::HilbertSpace;
use crate::liouville::{DecoherenceModel, Method, SolverConfig};

/// Calibrated quadrupole carrier Rabi frequency, Hz.
pub const CALIBRATED_RABI_QUAD_HZ: f64 = 48_125.0;
/// Calibrated Raman carrier Rabi frequency, Hz.
pub const CALIBRATED_RABI_RAMAN_HZ: f64 = 50_000.0;
/// Calibrated Ramsey delay inside the CNOT core, s.
pub const CALIBRATED_RAMSEY_GAP_S: f64 = 250e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct TrapConfig {
    pub omega_z_hz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaserConfig {
    /// `None` derives the factor from the trap frequency.
    pub eta_quad: Option<f64>,
    pub eta_raman: f64,
    pub rabi_quad_hz: f64,
    pub rabi_raman_hz: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceConfig {
    pub cnot_ramsey_gap_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceConfig {
    pub gamma_g_up_hz: f64,
    pub gamma_up_down_hz: f64,
    pub gamma_g_down_hz: f64,
    pub d_state_decay_per_s: f64,
    /// Measured axial heating is about 5 quanta/s and is neglected by default.
    pub heating_quanta_per_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MotionalConfig {
    pub nbar: f64,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSection {
    pub dt_max_s: f64,
    pub min_steps: usize,
    /// Cap on `‖H‖ dt` per RK4 step; 0 disables it.
    pub max_step_phase: f64,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationConfig {
    pub target_fidelity: f64,
    /// Written by `calibrate`.
    pub achieved_fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetadataConfig {
    /// Splitting of the two metastable levels; documentation only.
    pub qubit_splitting_thz: f64,
}

/// Full experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub trap: TrapConfig,
    pub lasers: LaserConfig,
    pub sequence: SequenceConfig,
    pub decoherence: DecoherenceConfig,
    pub motional: MotionalConfig,
    pub solver: SolverSection,
    pub calibration: CalibrationConfig,
    pub metadata: MetadataConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trap: TrapConfig { omega_z_hz: AXIAL_FREQUENCY_HZ },
            lasers: LaserConfig {
                eta_quad: None,
                eta_raman: 0.0,
                rabi_quad_hz: CALIBRATED_RABI_QUAD_HZ,
                rabi_raman_hz: CALIBRATED_RABI_RAMAN_HZ,
            },
            sequence: SequenceConfig { cnot_ramsey_gap_s: CALIBRATED_RAMSEY_GAP_S },
            decoherence: DecoherenceConfig {
                gamma_g_up_hz: 400.0,
                gamma_up_down_hz: 300.0,
                gamma_g_down_hz: 500.0,
                d_state_decay_per_s: 1.0 / 1.1,
                heating_quanta_per_s: 0.0,
            },
            motional: MotionalConfig { nbar: 0.02, n_max: HilbertSpace::DEFAULT_N_MAX },
            solver: SolverSection {
                dt_max_s: SolverConfig::<f64>::DEFAULT_DT_MAX,
                min_steps: SolverConfig::<f64>::DEFAULT_MIN_STEPS,
                max_step_phase: SolverConfig::<f64>::DEFAULT_MAX_STEP_PHASE,
                method: Method::FixedStepRk4,
            },
            calibration: CalibrationConfig { target_fidelity: 0.74, achieved_fidelity: None },
            metadata: MetadataConfig { qubit_splitting_thz: 1.82 },
        }
    }
}

enum Slot<'a> {
    F64(&'a mut f64),
    OptF64(&'a mut Option<f64>),
    Usize(&'a mut usize),
    Method(&'a mut Method),
}

impl ExperimentConfig {
    /// Decoherence-free, zero-temperature variant of `self`.
    pub fn ideal(&self) -> Self {
        let mut c = self.clone();
        c.decoherence.gamma_g_up_hz = 0.0;
        c.decoherence.gamma_up_down_hz = 0.0;
        c.decoherence.gamma_g_down_hz = 0.0;
        c.decoherence.d_state_decay_per_s = 0.0;
        c.decoherence.heating_quanta_per_s = 0.0;
        c.motional.nbar = 0.0;
        c
    }

    fn slots(&mut self) -> Vec<(&'static str, Slot<'_>)> {
        vec![
            ("trap.omega_z_hz", Slot::F64(&mut self.trap.omega_z_hz)),
            ("lasers.eta_quad", Slot::OptF64(&mut self.lasers.eta_quad)),
            ("lasers.eta_raman", Slot::F64(&mut self.lasers.eta_raman)),
            ("lasers.rabi_quad_hz", Slot::F64(&mut self.lasers.rabi_quad_hz)),
            ("lasers.rabi_raman_hz", Slot::F64(&mut self.lasers.rabi_raman_hz)),
            ("sequence.cnot_ramsey_gap_s", Slot::F64(&mut self.sequence.cnot_ramsey_gap_s)),
            ("decoherence.gamma_g_up_hz", Slot::F64(&mut self.decoherence.gamma_g_up_hz)),
            ("decoherence.gamma_up_down_hz", Slot::F64(&mut self.decoherence.gamma_up_down_hz)),
            ("decoherence.gamma_g_down_hz", Slot::F64(&mut self.decoherence.gamma_g_down_hz)),
            ("decoherence.d_state_decay_per_s", Slot::F64(&mut self.decoherence.d_state_decay_per_s)),
            ("decoherence.heating_quanta_per_s", Slot::F64(&mut self.decoherence.heating_quanta_per_s)),
            ("motional.nbar", Slot::F64(&mut self.motional.nbar)),
            ("motional.n_max", Slot::Usize(&mut self.motional.n_max)),
            ("solver.dt_max_s", Slot::F64(&mut self.solver.dt_max_s)),
            ("solver.min_steps", Slot::Usize(&mut self.solver.min_steps)),
            ("solver.max_step_phase", Slot::F64(&mut self.solver.max_step_phase)),
            ("solver.method", Slot::Method(&mut self.solver.method)),
            ("calibration.target_fidelity", Slot::F64(&mut self.calibration.target_fidelity)),
            ("calibration.achieved_fidelity", Slot::OptF64(&mut self.calibration.achieved_fidelity)),
            ("metadata.qubit_splitting_thz", Slot::F64(&mut self.metadata.qubit_splitting_thz)),
        ]
    }

    /// Parse the text format, filling defaults for absent keys.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, got `{content}`") })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Parse { line, message: format!("duplicate key `{key}`") });
            }
            let mut slots = cfg.slots();
            let slot = slots
                .iter_mut()
                .find(|(k, _)| *k == key)
                .map(|(_, s)| s)
                .ok_or_else(|| Error::Parse { line, message: format!("unknown key `{key}`") })?;
            let bad = |what: &str| Error::Parse { line, message: format!("`{key}` expects {what}, got `{value}`") };
            match slot {
                Slot::F64(v) => **v = value.parse().map_err(|_| bad("a number"))?,
                Slot::OptF64(v) => {
                    **v = if value == "auto" || value == "none" {
                        None
                    } else {
                        Some(value.parse().map_err(|_| bad("a number or `auto`"))?)
                    }
                }
                Slot::Usize(v) => **v = value.parse().map_err(|_| bad("a nonnegative integer"))?,
                Slot::Method(v) => **v = Method::parse(value).ok_or_else(|| bad("`rk4` or `superoperator`"))?,
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Canonical text form; every key is written so the file is self-contained.
    pub fn to_text(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        let mut section = "";
        for (key, slot) in copy.slots() {
            let sec = key.split('.').next().unwrap();
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                section = sec;
            }
            let value = match slot {
                Slot::F64(v) => format!("{:?}", *v),
                Slot::OptF64(v) => match *v {
                    Some(x) => format!("{x:?}"),
                    None => "auto".to_string(),
                },
                Slot::Usize(v) => v.to_string(),
                Slot::Method(m) => m.name().to_string(),
            };
            if let Some(note) = key_note(key) {
                let _ = writeln!(out, "# {note}");
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_text().as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("trap.omega_z_hz", self.trap.omega_z_hz),
            ("lasers.eta_raman", self.lasers.eta_raman),
            ("lasers.rabi_quad_hz", self.lasers.rabi_quad_hz),
            ("lasers.rabi_raman_hz", self.lasers.rabi_raman_hz),
            ("sequence.cnot_ramsey_gap_s", self.sequence.cnot_ramsey_gap_s),
            ("decoherence.gamma_g_up_hz", self.decoherence.gamma_g_up_hz),
            ("decoherence.gamma_up_down_hz", self.decoherence.gamma_up_down_hz),
            ("decoherence.gamma_g_down_hz", self.decoherence.gamma_g_down_hz),
            ("decoherence.d_state_decay_per_s", self.decoherence.d_state_decay_per_s),
            ("decoherence.heating_quanta_per_s", self.decoherence.heating_quanta_per_s),
            ("motional.nbar", self.motional.nbar),
            ("calibration.target_fidelity", self.calibration.target_fidelity),
            ("metadata.qubit_splitting_thz", self.metadata.qubit_splitting_thz),
            ("solver.max_step_phase", self.solver.max_step_phase),
        ];
        for (key, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation { key: key.into(), message: format!("must be finite and >= 0, got {v}") });
            }
        }
        if !(self.trap.omega_z_hz > 0.0) {
            return Err(Error::Validation { key: "trap.omega_z_hz".into(), message: "must be > 0".into() });
        }
        if let Some(eta) = self.lasers.eta_quad {
            if !(0.0..1.0).contains(&eta) {
                return Err(Error::Validation { key: "lasers.eta_quad".into(), message: format!("must lie in [0, 1), got {eta}") });
            }
        }
        if self.motional.n_max < 1 {
            return Err(Error::Validation { key: "motional.n_max".into(), message: "must be >= 1".into() });
        }
        if !(self.solver.dt_max_s > 0.0) || !self.solver.dt_max_s.is_finite() {
            return Err(Error::Validation { key: "solver.dt_max_s".into(), message: "must be > 0".into() });
        }
        if self.solver.min_steps < 1 {
            return Err(Error::Validation { key: "solver.min_steps".into(), message: "must be >= 1".into() });
        }
        if let Some(f) = self.calibration.achieved_fidelity {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Validation {
                    key: "calibration.achieved_fidelity".into(),
                    message: format!("must lie in [0, 1], got {f}"),
                });
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<HilbertSpace> {
        HilbertSpace::new(self.motional.n_max)
    }

    pub fn eta_quad(&self) -> Result<f64> {
        match self.lasers.eta_quad {
            Some(eta) => Ok(eta),
            None => default_eta_quad(TAU * self.trap.omega_z_hz),
        }
    }

    pub fn params(&self) -> Result<TrapLaserParams<f64>> {
        let p = TrapLaserParams {
            omega_z: TAU * self.trap.omega_z_hz,
            eta_quad: self.eta_quad()?,
            eta_raman: self.lasers.eta_raman,
            rabi_quad: TAU * self.lasers.rabi_quad_hz,
            rabi_raman: TAU * self.lasers.rabi_raman_hz,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn decoherence_model(&self) -> DecoherenceModel<f64> {
        let d = &self.decoherence;
        DecoherenceModel {
            gamma_g_up: TAU * d.gamma_g_up_hz,
            gamma_up_down: TAU * d.gamma_up_down_hz,
            gamma_g_down: TAU * d.gamma_g_down_hz,
            d_state_decay_rate: d.d_state_decay_per_s,
            heating_rate: d.heating_quanta_per_s,
        }
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        SolverConfig {
            dt_max: self.solver.dt_max_s,
            min_steps: self.solver.min_steps,
            max_step_phase: self.solver.max_step_phase,
            method: self.solver.method,
        }
    }
}

fn key_note(key: &str) -> Option<&'static str> {
    match key {
        "trap.omega_z_hz" => Some("axial mode only; radial modes (1.91 MHz, 1.68 MHz, nbar ~1) are not modeled"),
        "lasers.eta_quad" => Some("auto: derived from 729 nm, mass 40 u and the axial frequency"),
        "decoherence.heating_quanta_per_s" => Some("measured heating ~0.005 quanta/ms, neglected by default"),
        "metadata.qubit_splitting_thz" => Some("documentation only"),
        "solver.max_step_phase" => Some("cap on |H| dt per RK4 step; 0 disables it"),
        _ => None,
    }
}
