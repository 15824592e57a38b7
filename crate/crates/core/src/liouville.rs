//! Density-matrix time evolution.
//!
//! The generator is
//!
//! ```text
//! dρ/dt = -i[H, ρ] - (γ_ab / 2) ρ_ij   (i in level a, j in level b, a ≠ b)
//!         + Σ_k ( L_k ρ L_k† - ½ {L_k† L_k, ρ} )
//! ```
//!
//! with ħ = 1. The jump operators `L_k` carry optional decay of `|up>` and
//! `|down>` into `|g>` (motion preserved) and optional motional heating.
//!
//! Two independent routes are provided: [`evolve_pulse`] steps a sparse
//! form of the generator with fixed-step RK4, and [`reference_evolve`]
//! assembles the dense superoperator and exponentiates it.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};

use crate::couplings::{pulse_hamiltonian, TrapLaserParams};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, HilbertSpace, Level, Operator};
use crate::scalar::{cabs, cr, czero, Real, C};
use crate::sequence::{pulse_duration, Sequence};

/// Dephasing, decay and heating rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoherenceModel<T: Real = f64> {
    /// Dephasing of `|g>-|up>` coherences, rad/s.
    pub gamma_g_up: T,
    /// Dephasing of `|up>-|down>` coherences, rad/s.
    pub gamma_up_down: T,
    /// Dephasing of `|g>-|down>` coherences, rad/s.
    pub gamma_g_down: T,
    /// Population decay of `|up>` and `|down>` into `|g>`, 1/s.
    pub d_state_decay_rate: T,
    /// Motional heating, quanta/s.
    pub heating_rate: T,
}

impl<T: Real> DecoherenceModel<T> {
    pub fn none() -> Self {
        Self {
            gamma_g_up: T::zero(),
            gamma_up_down: T::zero(),
            gamma_g_down: T::zero(),
            d_state_decay_rate: T::zero(),
            heating_rate: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_g_up", self.gamma_g_up),
            ("gamma_up_down", self.gamma_up_down),
            ("gamma_g_down", self.gamma_g_down),
            ("d_state_decay_rate", self.d_state_decay_rate),
            ("heating_rate", self.heating_rate),
        ];
        for (name, v) in fields {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// True when the three dephasing rates can come from fluctuating level
    /// energies, i.e. `sqrt(gamma)` obeys the triangle inequality. Otherwise
    /// pure dephasing is not completely positive and long evolutions can
    /// produce small negative eigenvalues. Single-channel toggles such as
    /// `gamma_up_down = 0` with unequal quadrupole rates fall outside.
    pub fn dephasing_is_completely_positive(&self) -> bool {
        let (a, b, c) = (self.gamma_g_up.sqrt(), self.gamma_up_down.sqrt(), self.gamma_g_down.sqrt());
        let slack = T::lit(1e-12) * (a + b + c);
        a <= b + c + slack && b <= a + c + slack && c <= a + b + slack
    }

    /// Dephasing rate of coherences between two internal levels.
    pub fn dephasing(&self, a: Level, b: Level) -> T {
        use Level::*;
        match (a, b) {
            (G, Up) | (Up, G) => self.gamma_g_up,
            (Up, Down) | (Down, Up) => self.gamma_up_down,
            (G, Down) | (Down, G) => self.gamma_g_down,
            _ => T::zero(),
        }
    }

    /// Sparse jump operators `(row, col, value)`.
    pub fn jump_operators(&self, space: HilbertSpace) -> Vec<Vec<(usize, usize, C<T>)>> {
        let mut jumps = Vec::new();
        if self.d_state_decay_rate > T::zero() {
            let amp = cr(self.d_state_decay_rate.sqrt());
            for source in [Level::Up, Level::Down] {
                jumps.push(
                    (0..space.fock_dim())
                        .map(|n| (space.index(Level::G, n), space.index(source, n), amp))
                        .collect(),
                );
            }
        }
        if self.heating_rate > T::zero() {
            let rate = self.heating_rate;
            let mut raise = Vec::new();
            let mut lower = Vec::new();
            for level in Level::ALL {
                for n in 0..space.n_max() {
                    let amp = cr((rate * T::from_usize(n + 1).unwrap()).sqrt());
                    raise.push((space.index(level, n + 1), space.index(level, n), amp));
                    lower.push((space.index(level, n), space.index(level, n + 1), amp));
                }
            }
            jumps.push(raise);
            jumps.push(lower);
        }
        jumps
    }
}

impl Default for DecoherenceModel<f64> {
    fn default() -> Self {
        Self {
            gamma_g_up: TAU * 400.0,
            gamma_up_down: TAU * 300.0,
            gamma_g_down: TAU * 500.0,
            d_state_decay_rate: 1.0 / 1.1,
            heating_rate: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Method {
    #[default]
    FixedStepRk4,
    ReferenceSuperoperatorExponential,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FixedStepRk4 => "rk4",
            Method::ReferenceSuperoperatorExponential => "superoperator",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rk4" => Some(Method::FixedStepRk4),
            "superoperator" => Some(Method::ReferenceSuperoperatorExponential),
            _ => None,
        }
    }
}

/// Integration settings. The RK4 step for a segment of length `t` is
/// `min(t / min_steps, dt_max)`, further capped so that `‖H‖ dt` stays below
/// `max_step_phase` (`‖H‖` the largest absolute row sum), then rounded down
/// to divide `t` evenly. `max_step_phase = 0` disables the cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig<T: Real = f64> {
    pub dt_max: T,
    pub min_steps: usize,
    pub max_step_phase: T,
    pub method: Method,
}

impl<T: Real> SolverConfig<T> {
    pub const DEFAULT_DT_MAX: f64 = 100e-9;
    pub const DEFAULT_MIN_STEPS: usize = 200;
    pub const DEFAULT_MAX_STEP_PHASE: f64 = 0.005;

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > T::zero()) || !self.dt_max.is_finite() {
            return Err(Error::invalid("dt_max must be finite and > 0"));
        }
        if self.min_steps == 0 {
            return Err(Error::invalid("min_steps must be >= 1"));
        }
        if !(self.max_step_phase >= T::zero()) || !self.max_step_phase.is_finite() {
            return Err(Error::invalid("max_step_phase must be finite and >= 0"));
        }
        Ok(())
    }

    /// Step count ignoring the phase cap.
    pub fn steps_for(&self, duration: T) -> usize {
        self.steps_for_rate(duration, T::zero())
    }

    /// Step count for a generator whose Hamiltonian has norm `h_norm` (rad/s).
    pub fn steps_for_rate(&self, duration: T, h_norm: T) -> usize {
        if duration <= T::zero() {
            return 0;
        }
        let by_count = duration / T::from_usize(self.min_steps).unwrap();
        let mut dt = if by_count < self.dt_max { by_count } else { self.dt_max };
        if self.max_step_phase > T::zero() && h_norm > T::zero() {
            let by_phase = self.max_step_phase / h_norm;
            if by_phase < dt {
                dt = by_phase;
            }
        }
        // shave rounding so an exact multiple does not gain a step
        let n = (duration / dt * (T::one() - T::lit(1e-12))).ceil();
        n.to_usize().unwrap_or(usize::MAX).max(1)
    }
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            dt_max: T::lit(Self::DEFAULT_DT_MAX),
            min_steps: Self::DEFAULT_MIN_STEPS,
            max_step_phase: T::lit(Self::DEFAULT_MAX_STEP_PHASE),
            method: Method::default(),
        }
    }
}

fn check_inputs<T: Real>(rho: &DensityMatrix<T>, h: &Operator<T>, dec: &DecoherenceModel<T>, duration: T) -> Result<()> {
    if rho.space() != h.space() {
        return Err(Error::invalid("Hamiltonian and density matrix live in different spaces"));
    }
    if !(duration >= T::zero()) || !duration.is_finite() {
        return Err(Error::invalid("duration must be finite and >= 0"));
    }
    let scale = h.matrix().iter().map(|v| cabs(*v)).fold(T::one(), |a, b| a.max(b));
    if h.hermitian_defect() > T::lit(1e-12) * scale {
        return Err(Error::invalid("Hamiltonian is not Hermitian"));
    }
    dec.validate()
}

/// Sparse generator in the layout used by the RK4 stepper.
struct Generator<T: Real> {
    dim: usize,
    hamiltonian: Vec<(usize, usize, C<T>)>,
    /// Per-entry damping rate (dephasing plus the diagonal of ½ Σ L†L).
    damping: Vec<T>,
    /// Off-diagonal entries of ½ Σ L†L, if any.
    anti: Vec<(usize, usize, C<T>)>,
    jumps: Vec<Vec<(usize, usize, C<T>)>>,
}

impl<T: Real> Generator<T> {
    fn new(h: &Operator<T>, dec: &DecoherenceModel<T>) -> Self {
        let space = *h.space();
        let dim = space.dim();
        let jumps = dec.jump_operators(space);
        let mut k = vec![czero::<T>(); dim * dim];
        for l in &jumps {
            // (L†L)_{bd} = sum_a conj(L_ab) L_ad
            for &(a1, b, v1) in l {
                for &(a2, d, v2) in l {
                    if a1 == a2 {
                        k[b * dim + d] += v1.conj() * v2;
                    }
                }
            }
        }
        let half = T::lit(0.5);
        let mut damping = vec![T::zero(); dim * dim];
        let mut anti = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                let deph = dec.dephasing(space.level_of(i), space.level_of(j));
                damping[i * dim + j] = deph * half + (k[i * dim + i].re + k[j * dim + j].re) * half;
                if i != j && k[i * dim + j] != czero() {
                    anti.push((i, j, k[i * dim + j].scale(half)));
                }
            }
        }
        Self { dim, hamiltonian: h.nonzeros(), damping, anti, jumps }
    }

    /// Largest absolute row sum of `H`, an upper bound on its spectral radius.
    fn h_norm(&self) -> T {
        let mut rows = vec![T::zero(); self.dim];
        for &(i, _, v) in &self.hamiltonian {
            rows[i] += cabs(v);
        }
        rows.into_iter().fold(T::zero(), |a, b| a.max(b))
    }

    /// `out = L(rho)` for row-major `rho`.
    fn apply(&self, rho: &[C<T>], out: &mut [C<T>]) {
        let d = self.dim;
        for (o, (r, g)) in out.iter_mut().zip(rho.iter().zip(self.damping.iter())) {
            *o = -r.scale(*g);
        }
        let minus_i = C::new(T::zero(), -T::one());
        for &(i, k, h) in &self.hamiltonian {
            let hi = minus_i * h;
            // -i (H rho)_{ij} = -i h_{ik} rho_{kj}
            let (row_out, row_in) = (i * d, k * d);
            for j in 0..d {
                out[row_out + j] += hi * rho[row_in + j];
            }
            // +i (rho H)_{jk} = +i rho_{ji} h_{ik}
            for j in 0..d {
                out[j * d + k] -= hi * rho[j * d + i];
            }
        }
        for &(i, k, a) in &self.anti {
            for j in 0..d {
                out[i * d + j] -= a * rho[k * d + j];
                out[j * d + k] -= rho[j * d + i] * a;
            }
        }
        for l in &self.jumps {
            for &(a, b, la) in l {
                for &(c, e, lc) in l {
                    out[a * d + c] += la * rho[b * d + e] * lc.conj();
                }
            }
        }
    }
}

fn axpy<T: Real>(out: &mut [C<T>], base: &[C<T>], k: &[C<T>], h: T) {
    for ((o, b), k) in out.iter_mut().zip(base).zip(k) {
        *o = *b + k.scale(h);
    }
}

fn rk4<T: Real>(gen: &Generator<T>, rho: &mut [C<T>], duration: T, steps: usize) {
    let n = rho.len();
    let h = duration / T::from_usize(steps).unwrap();
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![czero(); n], vec![czero(); n], vec![czero(); n], vec![czero(); n], vec![czero(); n]);
    for _ in 0..steps {
        gen.apply(rho, &mut k1);
        axpy(&mut tmp, rho, &k1, half);
        gen.apply(&tmp, &mut k2);
        axpy(&mut tmp, rho, &k2, half);
        gen.apply(&tmp, &mut k3);
        axpy(&mut tmp, rho, &k3, h);
        gen.apply(&tmp, &mut k4);
        let two = T::lit(2.0);
        for i in 0..n {
            rho[i] += (k1[i] + k2[i].scale(two) + k3[i].scale(two) + k4[i]).scale(sixth);
        }
    }
}

fn to_row_major<T: Real>(m: &DMatrix<C<T>>) -> Vec<C<T>> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn from_row_major<T: Real>(d: usize, v: &[C<T>]) -> DMatrix<C<T>> {
    DMatrix::from_row_slice(d, d, v)
}

/// Evolve `rho` for `duration` seconds under a constant Hamiltonian and the
/// decoherence model.
pub fn evolve_pulse<T: Real>(
    rho: &DensityMatrix<T>,
    h: &Operator<T>,
    dec: &DecoherenceModel<T>,
    duration: T,
    cfg: &SolverConfig<T>,
) -> Result<DensityMatrix<T>> {
    check_inputs(rho, h, dec, duration)?;
    cfg.validate()?;
    if duration == T::zero() {
        return Ok(rho.clone());
    }
    match cfg.method {
        Method::FixedStepRk4 => {
            let gen = Generator::new(h, dec);
            let mut state = to_row_major(rho.matrix());
            rk4(&gen, &mut state, duration, cfg.steps_for_rate(duration, gen.h_norm()));
            Ok(DensityMatrix::from_matrix_unchecked(*rho.space(), from_row_major(gen.dim, &state)))
        }
        Method::ReferenceSuperoperatorExponential => reference_evolve(rho, h, dec, duration),
    }
}

/// Run every pulse of `seq` in order, with free evolution for each gap.
pub fn evolve_sequence<T: Real>(
    rho0: &DensityMatrix<T>,
    seq: &Sequence<T>,
    dec: &DecoherenceModel<T>,
    params: &TrapLaserParams<T>,
    cfg: &SolverConfig<T>,
) -> Result<DensityMatrix<T>> {
    let space = *rho0.space();
    let free = Operator::zeros(space);
    let mut rho = rho0.clone();
    for (k, pulse) in seq.pulses().iter().enumerate() {
        let h = pulse_hamiltonian(space, pulse, params)?;
        let t = pulse_duration(pulse, params)?;
        rho = evolve_pulse(&rho, &h, dec, t, cfg)?;
        if let Some(&gap) = seq.gaps().get(k) {
            if gap > T::zero() {
                rho = evolve_pulse(&rho, &free, dec, gap, cfg)?;
            }
        }
    }
    Ok(rho)
}

/// Dense `dim² × dim²` generator acting on row-major `vec(rho)`, using
/// `vec(A rho B) = (A ⊗ Bᵀ) vec(rho)`.
pub fn superoperator<T: Real>(h: &Operator<T>, dec: &DecoherenceModel<T>) -> DMatrix<C<T>> {
    let space = *h.space();
    let d = space.dim();
    let eye = DMatrix::<C<T>>::identity(d, d);
    let hm = h.matrix();
    let minus_i = C::new(T::zero(), -T::one());
    let mut s = (hm.kronecker(&eye) - eye.kronecker(&hm.transpose())) * minus_i;

    for i in 0..d {
        for j in 0..d {
            let rate = dec.dephasing(space.level_of(i), space.level_of(j));
            s[(i * d + j, i * d + j)] -= cr(rate / T::lit(2.0));
        }
    }
    let half = cr(T::lit(0.5));
    for sparse in dec.jump_operators(space) {
        let mut l = DMatrix::from_element(d, d, czero::<T>());
        for (a, b, v) in sparse {
            l[(a, b)] += v;
        }
        let ldl = l.adjoint() * &l;
        s += l.kronecker(&l.map(|v| v.conj()));
        s -= (ldl.kronecker(&eye) + eye.kronecker(&ldl.transpose())) * half;
    }
    s
}

/// `exp(a)` by scaling and squaring with a Taylor series.
pub fn expm<T: Real>(a: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    let n = a.nrows();
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|v| cabs(*v)).fold(T::zero(), |x, y| x + y))
        .fold(T::zero(), |x, y| x.max(y));
    let mut squarings = 0u32;
    let mut scale = T::one();
    while norm * scale > T::lit(0.5) {
        scale /= T::lit(2.0);
        squarings += 1;
    }
    let scaled = a * cr(scale);
    let mut result = DMatrix::<C<T>>::identity(n, n);
    let mut term = DMatrix::<C<T>>::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled * cr(T::one() / T::from_usize(k).unwrap());
        result += &term;
        let tn = term.iter().map(|v| cabs(*v)).fold(T::zero(), |x, y| x.max(y));
        if tn < T::default_epsilon() * T::lit(1e-3) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Independent reference: exponentiate the full superoperator.
pub fn reference_evolve<T: Real>(
    rho: &DensityMatrix<T>,
    h: &Operator<T>,
    dec: &DecoherenceModel<T>,
    duration: T,
) -> Result<DensityMatrix<T>> {
    check_inputs(rho, h, dec, duration)?;
    if duration == T::zero() {
        return Ok(rho.clone());
    }
    let d = rho.space().dim();
    let prop = expm(&(superoperator(h, dec) * cr(duration)));
    let v = DVector::from_vec(to_row_major(rho.matrix()));
    let out = prop * v;
    Ok(DensityMatrix::from_matrix_unchecked(*rho.space(), from_row_major(d, out.as_slice())))
}
