//! Lamb-Dicke matrix elements and pulse Hamiltonians.
//!
//! Hamiltonians are written in the interaction picture under the
//! rotating-wave approximation with ħ = 1, so entries carry units of rad/s.
//! A resonant pulse of area θ and phase φ on a closed pair `(a, b)` acts as
//! `exp(-i θ/2 (cos φ σx + sin φ σy))` with the raising term
//! `e^{iφ} |b><a|`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, Level, Operator};
use crate::scalar::{cis, Real};
use crate::sequence::{PulseSpec, Sideband};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Quadrupole S1/2 - D5/2 wavelength, m.
pub const QUADRUPOLE_WAVELENGTH: f64 = 729e-9;
/// Mass of the calcium-40 ion used for the default Lamb-Dicke factor.
pub const CALCIUM_40_MASS: f64 = 40.0 * ATOMIC_MASS_UNIT;
/// Axial secular frequency in Hz. The radial modes (1.91 and 1.68 MHz) are not simulated.
pub const AXIAL_FREQUENCY_HZ: f64 = 0.72e6;

/// The two driven transitions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransitionId {
    /// Quadrupole transition `|g> <-> |up>`.
    QuadrupoleGUp,
    /// Stimulated Raman transition `|up> <-> |down>`.
    RamanUpDown,
}

impl TransitionId {
    /// `(lower, upper)`; the raising operator is `|upper><lower|`.
    pub fn pair(self) -> (Level, Level) {
        match self {
            TransitionId::QuadrupoleGUp => (Level::G, Level::Up),
            TransitionId::RamanUpDown => (Level::Up, Level::Down),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransitionId::QuadrupoleGUp => "quadrupole",
            TransitionId::RamanUpDown => "raman",
        }
    }
}

/// Trap and laser parameters. Frequencies are angular (rad/s).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapLaserParams<T: Real = f64> {
    pub omega_z: T,
    pub eta_quad: T,
    pub eta_raman: T,
    pub rabi_quad: T,
    pub rabi_raman: T,
}

impl<T: Real> TrapLaserParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega_z", self.omega_z),
            ("eta_quad", self.eta_quad),
            ("eta_raman", self.eta_raman),
            ("rabi_quad", self.rabi_quad),
            ("rabi_raman", self.rabi_raman),
        ];
        for (name, v) in fields {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        if self.eta_quad >= T::one() {
            return Err(Error::invalid("eta_quad must be < 1"));
        }
        Ok(())
    }

    pub fn eta(&self, transition: TransitionId) -> T {
        match transition {
            TransitionId::QuadrupoleGUp => self.eta_quad,
            TransitionId::RamanUpDown => self.eta_raman,
        }
    }

    pub fn rabi(&self, transition: TransitionId) -> T {
        match transition {
            TransitionId::QuadrupoleGUp => self.rabi_quad,
            TransitionId::RamanUpDown => self.rabi_raman,
        }
    }
}

/// `η = (2π/λ) · projection · sqrt(ħ / (2 m ω_z))`
pub fn lamb_dicke_from_trap(wavelength: f64, ion_mass: f64, omega_z: f64, projection: f64) -> Result<f64> {
    if !(wavelength > 0.0) || !(ion_mass > 0.0) || !(omega_z > 0.0) {
        return Err(Error::invalid("wavelength, ion mass and omega_z must be positive"));
    }
    if !(projection >= 0.0) {
        return Err(Error::invalid("projection must be >= 0"));
    }
    let k = TAU / wavelength;
    Ok(k * projection * (HBAR / (2.0 * ion_mass * omega_z)).sqrt())
}

/// Default quadrupole Lamb-Dicke factor for a beam along the trap axis.
pub fn default_eta_quad(omega_z: f64) -> Result<f64> {
    lamb_dicke_from_trap(QUADRUPOLE_WAVELENGTH, CALCIUM_40_MASS, omega_z, 1.0)
}

/// `e^{-η²/2} L_n(η²)` with the Laguerre polynomial summed term by term.
pub fn carrier_element_exact<T: Real>(eta: T, n: usize) -> T {
    let x = eta * eta;
    // L_n(x) = sum_k C(n, k) (-x)^k / k!
    let mut term = T::one();
    let mut sum = T::one();
    for k in 0..n {
        let kk = T::from_usize(k).unwrap();
        let nn = T::from_usize(n).unwrap();
        term = term * (-x) * (nn - kk) / ((kk + T::one()) * (kk + T::one()));
        sum += term;
    }
    (-x / T::lit(2.0)).exp() * sum
}

/// Second-order expansion `1 - η² (n + 1/2)`.
pub fn carrier_element_truncated<T: Real>(eta: T, n: usize) -> T {
    T::one() - eta * eta * (T::from_usize(n).unwrap() + T::lit(0.5))
}

/// First-order sideband element: blue `η sqrt(n+1)`, red `η sqrt(n)`.
pub fn sideband_element<T: Real>(eta: T, n: usize, order: i32) -> Result<T> {
    match order {
        1 => Ok(eta * T::from_usize(n + 1).unwrap().sqrt()),
        -1 => Ok(eta * T::from_usize(n).unwrap().sqrt()),
        _ => Err(Error::invalid(format!("sideband order must be ±1, got {order}"))),
    }
}

/// Interaction-picture Hamiltonian of a single resonant pulse.
pub fn pulse_hamiltonian<T: Real>(
    space: HilbertSpace,
    pulse: &PulseSpec<T>,
    params: &TrapLaserParams<T>,
) -> Result<Operator<T>> {
    pulse.validate()?;
    let transition = pulse.transition;
    let (lower, upper) = transition.pair();
    let half_rabi = params.rabi(transition) / T::lit(2.0);
    let eta = params.eta(transition);
    let phase = cis(pulse.phase);
    let mut h = Operator::zeros(space);

    match pulse.sideband {
        Sideband::Carrier => {
            for n in 0..=space.n_max() {
                let c = half_rabi * carrier_element_truncated(eta, n);
                h.add_coupling(space.index(upper, n), space.index(lower, n), phase.scale(c));
            }
        }
        Sideband::Blue | Sideband::Red => {
            if transition != TransitionId::QuadrupoleGUp {
                return Err(Error::Unsupported("sidebands are only driven on the quadrupole transition".into()));
            }
            let order = pulse.sideband.order();
            for n in 0..=space.n_max() {
                let target = n as i64 + order as i64;
                if target < 0 || target as usize > space.n_max() {
                    continue;
                }
                let c = half_rabi * sideband_element(eta, n, order)?;
                h.add_coupling(space.index(upper, target as usize), space.index(lower, n), phase.scale(c));
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::HERMITIAN_TOL;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn params(eta: f64) -> TrapLaserParams<f64> {
        TrapLaserParams {
            omega_z: TAU * 0.72e6,
            eta_quad: eta,
            eta_raman: 0.0,
            rabi_quad: TAU * 50e3,
            rabi_raman: TAU * 40e3,
        }
    }

    #[test]
    fn lamb_dicke_default_trap() {
        let eta = lamb_dicke_from_trap(729e-9, CALCIUM_40_MASS, TAU * 0.72e6, 1.0).unwrap();
        // k sqrt(hbar / 2 m w) evaluated by hand: 8.6188e6 * 1.3247e-8
        assert_abs_diff_eq!(eta, 0.11417, epsilon = 5e-5);
        assert_eq!(lamb_dicke_from_trap(729e-9, CALCIUM_40_MASS, TAU * 0.72e6, 0.0).unwrap(), 0.0);
        let half = lamb_dicke_from_trap(729e-9, CALCIUM_40_MASS, TAU * 0.36e6, 1.0).unwrap();
        assert_abs_diff_eq!(half / eta, 2f64.sqrt(), epsilon = 1e-12);
        assert!(lamb_dicke_from_trap(0.0, CALCIUM_40_MASS, 1.0, 1.0).is_err());
        assert!(lamb_dicke_from_trap(729e-9, -1.0, 1.0, 1.0).is_err());
        assert!(lamb_dicke_from_trap(729e-9, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn carrier_elements() {
        for n in 0..6 {
            assert_eq!(carrier_element_exact(0.0f64, n), 1.0);
            assert_eq!(carrier_element_truncated(0.0f64, n), 1.0);
        }
        let x: f64 = 0.114 * 0.114;
        assert_abs_diff_eq!(carrier_element_exact(0.114, 0), (-x / 2.0).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(carrier_element_exact(0.114, 0), 0.993523, epsilon = 1e-6);
        assert_abs_diff_eq!(carrier_element_exact(0.114, 1), (-x / 2.0).exp() * (1.0 - x), epsilon = 1e-15);
        assert_abs_diff_eq!(carrier_element_exact(0.114, 1), 0.980611, epsilon = 1e-6);
        // L_2(x) = 1 - 2x + x²/2
        assert_abs_diff_eq!(
            carrier_element_exact(0.3, 2),
            (-0.045f64).exp() * (1.0 - 0.18 + 0.0081 / 2.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(carrier_element_truncated(0.114, 0), 0.993502, epsilon = 1e-6);
    }

    #[test]
    fn truncated_carrier_error_bound() {
        for i in 0..=40 {
            let eta = 0.2 * i as f64 / 40.0;
            for n in 0..=4usize {
                let diff = (carrier_element_truncated(eta, n) - carrier_element_exact(eta, n)).abs();
                let bound = eta.powi(4) * ((n + 1) as f64).powi(2);
                assert!(diff <= bound + 1e-16, "eta={eta} n={n} diff={diff} bound={bound}");
            }
        }
        for n in 0..=4usize {
            let ratio = carrier_element_truncated(1e-3f64, n) / carrier_element_exact(1e-3, n);
            assert!((ratio - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sideband_elements() {
        assert_eq!(sideband_element(0.114, 0, -1).unwrap(), 0.0);
        assert_abs_diff_eq!(sideband_element(0.114, 0, 1).unwrap(), 0.114, epsilon = 1e-15);
        assert_abs_diff_eq!(sideband_element(0.1, 3, 1).unwrap(), 0.2, epsilon = 1e-15);
        assert!(matches!(sideband_element(0.1, 3, 2), Err(Error::InvalidArgument(_))));
        assert!(sideband_element(0.1, 3, 0).is_err());
    }

    #[test]
    fn blue_sideband_couples_only_the_partner_pair() {
        let space = HilbertSpace::new(1).unwrap();
        let p = params(0.114);
        let h = pulse_hamiltonian(space, &PulseSpec::blue(2.0 * PI, 0.0), &p).unwrap();
        let nz = h.nonzeros();
        let g0 = space.index(Level::G, 0);
        let up1 = space.index(Level::Up, 1);
        assert_eq!(nz.len(), 2);
        for (i, j, _) in &nz {
            assert!((*i, *j) == (up1, g0) || (*i, *j) == (g0, up1));
        }
        assert_abs_diff_eq!(h.get(up1, g0).re, p.rabi_quad / 2.0 * 0.114, epsilon = 1e-9);
        let up0 = space.index(Level::Up, 0);
        for k in 0..space.dim() {
            assert_eq!(h.get(up0, k).norm(), 0.0);
        }
    }

    #[test]
    fn red_sideband_lowers_motion() {
        let space = HilbertSpace::new(2).unwrap();
        let p = params(0.1);
        let h = pulse_hamiltonian(space, &PulseSpec::red(PI, 0.3), &p).unwrap();
        for (i, j, _) in h.nonzeros() {
            let (li, ni) = space.label(i);
            let (lj, nj) = space.label(j);
            assert_ne!(li, lj);
            assert_eq!((ni as i64 - nj as i64).abs(), 1);
            let (lg, ng, nu) = if li == Level::G { (li, ni, nj) } else { (lj, nj, ni) };
            assert_eq!(lg, Level::G);
            assert_eq!(nu + 1, ng);
        }
    }

    #[test]
    fn carrier_with_zero_eta_is_uniform() {
        let space = HilbertSpace::default();
        let p = params(0.0);
        let h = pulse_hamiltonian(space, &PulseSpec::carrier(TransitionId::QuadrupoleGUp, PI, 0.0), &p).unwrap();
        for n in 0..=4 {
            let v = h.get(space.index(Level::Up, n), space.index(Level::G, n));
            assert_abs_diff_eq!(v.re, p.rabi_quad / 2.0, epsilon = 1e-9);
            assert_eq!(v.im, 0.0);
        }
        assert_eq!(h.nonzeros().len(), 10);
    }

    #[test]
    fn raman_pulse_never_touches_ground() {
        let space = HilbertSpace::default();
        let mut p = params(0.114);
        p.eta_raman = 0.05;
        let h = pulse_hamiltonian(space, &PulseSpec::carrier(TransitionId::RamanUpDown, PI / 2.0, 1.1), &p).unwrap();
        for (i, j, _) in h.nonzeros() {
            assert_ne!(space.level_of(i), Level::G);
            assert_ne!(space.level_of(j), Level::G);
            assert_eq!(space.label(i).1, space.label(j).1);
        }
        let quad = pulse_hamiltonian(space, &PulseSpec::blue(PI, 0.4), &p).unwrap();
        for (i, j, _) in quad.nonzeros() {
            assert_ne!(space.level_of(i), Level::Down);
            assert_ne!(space.level_of(j), Level::Down);
        }
    }

    #[test]
    fn sideband_on_raman_is_unsupported() {
        let space = HilbertSpace::default();
        let pulse = PulseSpec {
            transition: TransitionId::RamanUpDown,
            sideband: Sideband::Blue,
            angle: PI,
            phase: 0.0,
            duration_override: None,
        };
        let err = pulse_hamiltonian(space, &pulse, &params(0.1)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_) | Error::Unsupported(_)));
    }

    #[test]
    fn hamiltonians_are_hermitian() {
        let space = HilbertSpace::default();
        let p = params(0.114);
        for pulse in [
            PulseSpec::blue(PI, 0.7),
            PulseSpec::red(PI, -2.0),
            PulseSpec::carrier(TransitionId::QuadrupoleGUp, PI, 1.3),
            PulseSpec::carrier(TransitionId::RamanUpDown, PI, 4.0),
        ] {
            let h = pulse_hamiltonian(space, &pulse, &p).unwrap();
            assert!(h.hermitian_defect() <= 1e-15 * p.rabi_quad.max(1.0));
            assert!(h.hermitian_defect() <= HERMITIAN_TOL);
        }
    }
}
