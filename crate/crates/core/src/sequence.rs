//! Pulse descriptions and the experiment sequence builders.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};

use crate::couplings::{carrier_element_truncated, pulse_hamiltonian, TransitionId, TrapLaserParams};
use crate::error::{Error, Result};
use crate::hilbert::{HilbertSpace, Level, PureState};
use crate::scalar::{cis, Real, C};

/// Number of grid points per phase axis in the CNOT phase search.
pub const PHASE_SEARCH_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sideband {
    Red,
    Carrier,
    Blue,
}

impl Sideband {
    pub fn order(self) -> i32 {
        match self {
            Sideband::Red => -1,
            Sideband::Carrier => 0,
            Sideband::Blue => 1,
        }
    }

    pub fn from_order(order: i32) -> Result<Self> {
        match order {
            -1 => Ok(Sideband::Red),
            0 => Ok(Sideband::Carrier),
            1 => Ok(Sideband::Blue),
            _ => Err(Error::invalid(format!("sideband order must be -1, 0 or +1, got {order}"))),
        }
    }
}

/// One rectangular, resonant laser pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSpec<T: Real = f64> {
    pub transition: TransitionId,
    pub sideband: Sideband,
    /// Rotation area on the reference pair, rad.
    pub angle: T,
    /// Drive phase, rad.
    pub phase: T,
    /// Explicit duration in seconds; overrides the area.
    pub duration_override: Option<T>,
}

impl<T: Real> PulseSpec<T> {
    pub fn carrier(transition: TransitionId, angle: T, phase: T) -> Self {
        Self { transition, sideband: Sideband::Carrier, angle, phase, duration_override: None }
    }

    pub fn blue(angle: T, phase: T) -> Self {
        Self {
            transition: TransitionId::QuadrupoleGUp,
            sideband: Sideband::Blue,
            angle,
            phase,
            duration_override: None,
        }
    }

    pub fn red(angle: T, phase: T) -> Self {
        Self { sideband: Sideband::Red, ..Self::blue(angle, phase) }
    }

    pub fn with_duration(mut self, duration: T) -> Self {
        self.duration_override = Some(duration);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angle >= T::zero()) || !self.angle.is_finite() {
            return Err(Error::invalid("pulse angle must be finite and >= 0"));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("pulse phase must be finite"));
        }
        if self.sideband != Sideband::Carrier && self.transition != TransitionId::QuadrupoleGUp {
            return Err(Error::invalid("sidebands are only allowed on the quadrupole transition"));
        }
        if let Some(d) = self.duration_override {
            if !(d >= T::zero()) || !d.is_finite() {
                return Err(Error::invalid("pulse duration must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Ordered pulses with free-evolution gaps between consecutive pulses.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Sequence<T: Real = f64> {
    pulses: Vec<PulseSpec<T>>,
    gaps: Vec<T>,
}

impl<T: Real> Sequence<T> {
    pub fn new(pulses: Vec<PulseSpec<T>>) -> Result<Self> {
        let gaps = vec![T::zero(); pulses.len().saturating_sub(1)];
        Self::with_gaps(pulses, gaps)
    }

    pub fn with_gaps(pulses: Vec<PulseSpec<T>>, gaps: Vec<T>) -> Result<Self> {
        if gaps.len() != pulses.len().saturating_sub(1) {
            return Err(Error::invalid(format!(
                "{} pulses need {} gaps, got {}",
                pulses.len(),
                pulses.len().saturating_sub(1),
                gaps.len()
            )));
        }
        if gaps.iter().any(|g| !(*g >= T::zero()) || !g.is_finite()) {
            return Err(Error::invalid("gaps must be finite and >= 0"));
        }
        for p in &pulses {
            p.validate()?;
        }
        Ok(Self { pulses, gaps })
    }

    pub fn pulses(&self) -> &[PulseSpec<T>] {
        &self.pulses
    }

    pub fn gaps(&self) -> &[T] {
        &self.gaps
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    /// Append `other` after a free-evolution gap of `gap` seconds.
    pub fn then(mut self, gap: T, other: Sequence<T>) -> Result<Self> {
        if !(gap >= T::zero()) {
            return Err(Error::invalid("gaps must be >= 0"));
        }
        if self.pulses.is_empty() {
            return Ok(other);
        }
        if other.pulses.is_empty() {
            return Ok(self);
        }
        self.gaps.push(gap);
        self.pulses.extend(other.pulses);
        self.gaps.extend(other.gaps);
        Ok(self)
    }

    /// Pulse durations plus gaps.
    pub fn total_duration(&self, params: &TrapLaserParams<T>) -> Result<T> {
        let mut total = self.gaps.iter().copied().fold(T::zero(), |a, b| a + b);
        for p in &self.pulses {
            total += pulse_duration(p, params)?;
        }
        Ok(total)
    }
}

/// Convert a pulse area into a duration using the reference-pair coupling:
/// carrier pulses reference `n = 0`, sideband pulses the `|g,0> <-> |up,1>` pair.
pub fn pulse_duration<T: Real>(pulse: &PulseSpec<T>, params: &TrapLaserParams<T>) -> Result<T> {
    pulse.validate()?;
    if let Some(d) = pulse.duration_override {
        return Ok(d);
    }
    let rabi = params.rabi(pulse.transition);
    let eta = params.eta(pulse.transition);
    let reference = match pulse.sideband {
        Sideband::Carrier => rabi * carrier_element_truncated(eta, 0),
        Sideband::Blue | Sideband::Red => rabi * eta,
    };
    if !(reference > T::zero()) {
        return Err(Error::invalid(format!(
            "zero reference coupling for {} pulse",
            pulse.transition.name()
        )));
    }
    Ok(pulse.angle / reference)
}

/// Motional-state preparation: carrier π (target 0) or blue-sideband π (target 1).
pub fn prep_sequence<T: Real>(target_n: u32) -> Result<Sequence<T>> {
    let pi = T::lit(PI);
    let pulse = match target_n {
        0 => PulseSpec::carrier(TransitionId::QuadrupoleGUp, pi, T::zero()),
        1 => PulseSpec::blue(pi, T::zero()),
        _ => return Err(Error::invalid(format!("prep target must be 0 or 1, got {target_n}"))),
    };
    Sequence::new(vec![pulse])
}

/// Phases and Ramsey delay of the Raman-BSB-Raman core.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CnotCore<T: Real = f64> {
    /// Phase of the first Raman π/2 pulse; a frame choice for `|down>`.
    pub frame_phase: T,
    /// Phase of the second Raman π/2 pulse.
    pub second_phase: T,
    /// Total free evolution between the two Raman pulses, split evenly
    /// around the sideband 2π pulse.
    pub ramsey_gap: T,
}

impl<T: Real> CnotCore<T> {
    pub fn sequence(&self) -> Result<Sequence<T>> {
        let half_pi = T::lit(FRAC_PI_2);
        let half_gap = self.ramsey_gap / T::lit(2.0);
        Sequence::with_gaps(
            vec![
                PulseSpec::carrier(TransitionId::RamanUpDown, half_pi, self.frame_phase),
                PulseSpec::blue(T::lit(TAU), T::zero()),
                PulseSpec::carrier(TransitionId::RamanUpDown, half_pi, self.second_phase),
            ],
            vec![half_gap, half_gap],
        )
    }
}

/// `[Raman π/2 (phase 0); BSB 2π; Raman π/2 (second_phase)]`
pub fn cnot_core_sequence<T: Real>(second_phase: T) -> Sequence<T> {
    CnotCore { frame_phase: T::zero(), second_phase, ramsey_gap: T::zero() }
        .sequence()
        .expect("static pulse list is valid")
}

/// `[carrier π/2; BSB π]` taking `|g,0>` to `(|0> + |1>)|up>`.
pub fn bell_prep_sequence<T: Real>() -> Sequence<T> {
    Sequence::new(vec![
        PulseSpec::carrier(TransitionId::QuadrupoleGUp, T::lit(FRAC_PI_2), T::zero()),
        PulseSpec::blue(T::lit(PI), T::zero()),
    ])
    .expect("static pulse list is valid")
}

/// Bell-state sequence with its phase calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct BellSequence<T: Real = f64> {
    pub sequence: Sequence<T>,
    pub core: CnotCore<T>,
    /// Fidelity reached by the calibration in the decoherence-free, ground-state limit.
    pub ideal_fidelity: T,
}

/// Build the Bell-state sequence, choosing the Raman phases by a grid search
/// that maximizes the ideal-limit fidelity with `(|0,up> + |1,down>)/sqrt(2)`.
pub fn bell_sequence<T: Real>(params: &TrapLaserParams<T>, ramsey_gap: T) -> Result<BellSequence<T>> {
    let space = HilbertSpace::default();
    let (frame_phase, second_phase, ideal_fidelity) = search_cnot_phases(space, params)?;
    let core = CnotCore { frame_phase, second_phase, ramsey_gap };
    let sequence = bell_prep_sequence().then(T::zero(), core.sequence()?)?;
    Ok(BellSequence { sequence, core, ideal_fidelity })
}

fn search_cnot_phases<T: Real>(space: HilbertSpace, params: &TrapLaserParams<T>) -> Result<(T, T, T)> {
    let prep = bell_prep_sequence::<T>();
    let mut psi = PureState::basis(space, Level::G, 0)?.amplitudes().clone();
    for p in prep.pulses() {
        psi = pulse_propagator(space, p, params)? * psi;
    }
    let raman0 = pulse_propagator(
        space,
        &PulseSpec::carrier(TransitionId::RamanUpDown, T::lit(FRAC_PI_2), T::zero()),
        params,
    )?;
    let bsb = pulse_propagator(space, &PulseSpec::blue(T::lit(TAU), T::zero()), params)?;
    let target = PureState::bell_target(space);

    let phases: Vec<T> = (0..PHASE_SEARCH_POINTS)
        .map(|k| T::lit(TAU * k as f64 / PHASE_SEARCH_POINTS as f64))
        .collect();
    let raman: Vec<DMatrix<C<T>>> = phases.iter().map(|&p| rephase_down(space, &raman0, p)).collect();
    let mid: Vec<DVector<C<T>>> = raman.iter().map(|r| &bsb * (r * &psi)).collect();

    let mut best = (T::zero(), T::zero(), -T::one());
    for (i, after_bsb) in mid.iter().enumerate() {
        for (j, second) in raman.iter().enumerate() {
            let out = second * after_bsb;
            let overlap = target.amplitudes().dotc(&out);
            let f = overlap.norm_sqr();
            if f > best.2 + T::lit(1e-12) {
                best = (phases[i], phases[j], f);
            }
        }
    }
    Ok(best)
}

/// `P U P†` with `P` putting phase `e^{i phase}` on every `|down, n>`; this
/// turns a Raman propagator at phase 0 into the one at `phase`.
fn rephase_down<T: Real>(space: HilbertSpace, u: &DMatrix<C<T>>, phase: T) -> DMatrix<C<T>> {
    let d = space.dim();
    let mut out = u.clone();
    let w = cis(phase);
    for i in 0..d {
        for j in 0..d {
            let mut v = out[(i, j)];
            if space.level_of(i) == Level::Down {
                v *= w;
            }
            if space.level_of(j) == Level::Down {
                v *= w.conj();
            }
            out[(i, j)] = v;
        }
    }
    out
}

/// Unitary `exp(-i H t)` of a pulse, from the eigendecomposition of `H`.
pub fn pulse_propagator<T: Real>(
    space: HilbertSpace,
    pulse: &PulseSpec<T>,
    params: &TrapLaserParams<T>,
) -> Result<DMatrix<C<T>>> {
    let h = pulse_hamiltonian(space, pulse, params)?;
    let t = pulse_duration(pulse, params)?;
    Ok(unitary_from_hamiltonian(h.matrix(), t))
}

pub(crate) fn unitary_from_hamiltonian<T: Real>(h: &DMatrix<C<T>>, t: T) -> DMatrix<C<T>> {
    let eig = h.clone().symmetric_eigen();
    let d = h.nrows();
    let v = &eig.eigenvectors;
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        d,
        eig.eigenvalues.iter().map(|&lambda| cis(-lambda * t)),
    ));
    v * phases * v.adjoint()
}

/// Joint basis label used by the truth table.
pub fn basis_label(level: Level, n: usize) -> String {
    format!("|{n},{}>", level.name())
}


#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> TrapLaserParams<f64> {
        TrapLaserParams {
            omega_z: TAU * 0.72e6,
            eta_quad: 0.114,
            eta_raman: 0.0,
            rabi_quad: TAU * 50e3,
            rabi_raman: TAU * 50e3,
        }
    }

    #[test]
    fn durations() {
        let mut p = params();
        p.eta_quad = 0.0;
        let carrier = PulseSpec::carrier(TransitionId::QuadrupoleGUp, PI, 0.0);
        assert_abs_diff_eq!(pulse_duration(&carrier, &p).unwrap(), 10e-6, epsilon = 1e-15);
        let p = params();
        let bsb = PulseSpec::blue(TAU, 0.0);
        let t = pulse_duration(&bsb, &p).unwrap();
        assert_abs_diff_eq!(t, TAU / (0.114 * TAU * 50e3), epsilon = 1e-15);
        assert_abs_diff_eq!(t, 175.4e-6, epsilon = 0.05e-6);
        let zero = PulseSpec::carrier(TransitionId::RamanUpDown, 0.0, 0.0);
        assert_eq!(pulse_duration(&zero, &p).unwrap(), 0.0);
        assert_eq!(pulse_duration(&bsb.with_duration(3e-6), &p).unwrap(), 3e-6);
        let mut dead = p;
        dead.rabi_raman = 0.0;
        let raman = PulseSpec::carrier(TransitionId::RamanUpDown, PI, 0.0);
        assert!(matches!(pulse_duration(&raman, &dead), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pulse_spec_invariants() {
        assert!(PulseSpec::<f64>::blue(-1.0, 0.0).validate().is_err());
        let bad = PulseSpec { sideband: Sideband::Red, ..PulseSpec::carrier(TransitionId::RamanUpDown, 1.0, 0.0) };
        assert!(bad.validate().is_err());
        assert!(Sideband::from_order(2).is_err());
        assert_eq!(Sideband::from_order(-1).unwrap(), Sideband::Red);
    }

    #[test]
    fn sequence_gaps_are_checked() {
        let p = PulseSpec::<f64>::blue(PI, 0.0);
        assert!(Sequence::with_gaps(vec![p, p], vec![]).is_err());
        assert!(Sequence::with_gaps(vec![p, p], vec![-1.0]).is_err());
        let s = Sequence::with_gaps(vec![p, p], vec![1e-6]).unwrap();
        assert_eq!(s.gaps(), &[1e-6]);
        let joined = s.clone().then(2e-6, s).unwrap();
        assert_eq!(joined.gaps(), &[1e-6, 2e-6, 1e-6]);
        assert!(Sequence::<f64>::new(vec![]).unwrap().is_empty());
    }

    #[test]
    fn prep_sequences() {
        let s0 = prep_sequence::<f64>(0).unwrap();
        assert_eq!(s0.pulses()[0].sideband, Sideband::Carrier);
        let s1 = prep_sequence::<f64>(1).unwrap();
        assert_eq!(s1.pulses()[0].sideband, Sideband::Blue);
        assert!(matches!(prep_sequence::<f64>(2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bsb_two_pi_gives_conditional_sign() {
        let space = HilbertSpace::default();
        let u = pulse_propagator(space, &PulseSpec::blue(TAU, 0.0), &params()).unwrap();
        let up1 = space.index(Level::Up, 1);
        let up0 = space.index(Level::Up, 0);
        assert_abs_diff_eq!(u[(up1, up1)].re, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(u[(up1, up1)].im, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(u[(up0, up0)].re, 1.0, epsilon = 1e-12);
        for k in 0..space.dim() {
            if k != up0 {
                assert_abs_diff_eq!(u[(k, up0)].norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cnot_core_duration_independent_of_phase() {
        let p = params();
        let a = cnot_core_sequence(0.0).total_duration(&p).unwrap();
        let b = cnot_core_sequence(2.3).total_duration(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bell_phase_search_reaches_unit_fidelity() {
        let b = bell_sequence(&params(), 0.0).unwrap();
        assert!(b.ideal_fidelity > 0.999, "{}", b.ideal_fidelity);
        assert_eq!(b.sequence.len(), 5);
        assert!(b.sequence.total_duration(&params()).unwrap() < 1e-3);
    }

    #[test]
    fn rephase_matches_direct_construction() {
        let space = HilbertSpace::new(2).unwrap();
        let p = params();
        let u0 = pulse_propagator(space, &PulseSpec::carrier(TransitionId::RamanUpDown, 1.0, 0.0), &p).unwrap();
        let u1 = pulse_propagator(space, &PulseSpec::carrier(TransitionId::RamanUpDown, 1.0, 0.9), &p).unwrap();
        let r = rephase_down(space, &u0, 0.9);
        assert!((r - u1).iter().all(|v| v.norm() < 1e-12));
    }
}
