//! Joint internal ⊗ motional state space.
//!
//! The ion carries three internal levels, the ground level `g` and the two
//! metastable qubit levels `up` and `down`, tensored with one motional mode
//! truncated at Fock number `n_max`. Flat indices are level-major and
//! Fock-minor: `index(level, n) = level * (n_max + 1) + n`. Serialized
//! matrices rely on this ordering.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{cabs, cr, czero, Real, C};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-9;
pub const NORM_TOL: f64 = 1e-12;

/// Scale a double-precision tolerance so it stays meaningful for `f32`.
pub(crate) fn tol<T: Real>(t: f64) -> T {
    let floor = T::default_epsilon() * T::lit(256.0);
    let t = T::lit(t);
    if t > floor {
        t
    } else {
        floor
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    G,
    Up,
    Down,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::G, Level::Up, Level::Down];

    pub fn index(self) -> usize {
        match self {
            Level::G => 0,
            Level::Up => 1,
            Level::Down => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::G => "g",
            Level::Up => "up",
            Level::Down => "down",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    n_max: usize,
}

impl HilbertSpace {
    pub const DEFAULT_N_MAX: usize = 4;
    pub const LEVELS: usize = 3;

    /// Build the joint space; at least two Fock levels are required.
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::invalid(format!("n_max must be >= 1, got {n_max}")));
        }
        Ok(Self { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn fock_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        Self::LEVELS * self.fock_dim()
    }

    /// Flat index of `|level, n>`. Panics when `n > n_max`.
    pub fn index(&self, level: Level, n: usize) -> usize {
        assert!(n <= self.n_max, "Fock number {n} exceeds n_max {}", self.n_max);
        level.index() * self.fock_dim() + n
    }

    pub fn try_index(&self, level: Level, n: usize) -> Option<usize> {
        (n <= self.n_max).then(|| level.index() * self.fock_dim() + n)
    }

    pub fn label(&self, index: usize) -> (Level, usize) {
        assert!(index < self.dim(), "index {index} out of range");
        let level = Level::from_index(index / self.fock_dim()).unwrap();
        (level, index % self.fock_dim())
    }

    pub fn level_of(&self, index: usize) -> Level {
        self.label(index).0
    }
}

impl Default for HilbertSpace {
    fn default() -> Self {
        Self { n_max: Self::DEFAULT_N_MAX }
    }
}

fn check_space(a: &HilbertSpace, b: &HilbertSpace) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!(
            "Hilbert space mismatch: n_max {} vs {}",
            a.n_max(),
            b.n_max()
        )));
    }
    Ok(())
}

/// Dense operator on a [`HilbertSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator<T: Real = f64> {
    space: HilbertSpace,
    matrix: DMatrix<C<T>>,
}

impl<T: Real> Operator<T> {
    pub fn zeros(space: HilbertSpace) -> Self {
        let d = space.dim();
        Self { space, matrix: DMatrix::from_element(d, d, czero()) }
    }

    pub fn from_matrix(space: HilbertSpace, matrix: DMatrix<C<T>>) -> Result<Self> {
        let d = space.dim();
        if matrix.shape() != (d, d) {
            return Err(Error::invalid(format!(
                "operator shape {:?} does not match dim {d}",
                matrix.shape()
            )));
        }
        Ok(Self { space, matrix })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> C<T> {
        self.matrix[(row, col)]
    }

    /// Add `value |row><col| + h.c.`
    pub(crate) fn add_coupling(&mut self, row: usize, col: usize, value: C<T>) {
        self.matrix[(row, col)] += value;
        self.matrix[(col, row)] += value.conj();
    }

    pub fn hermitian_defect(&self) -> T {
        hermitian_defect(&self.matrix)
    }

    pub fn is_hermitian(&self, tolerance: T) -> bool {
        self.hermitian_defect() <= tolerance
    }

    /// Nonzero entries as `(row, col, value)` in row-major order.
    pub fn nonzeros(&self) -> Vec<(usize, usize, C<T>)> {
        let d = self.space.dim();
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                let v = self.matrix[(i, j)];
                if v != czero() {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|v| *v == czero())
    }
}

pub(crate) fn hermitian_defect<T: Real>(m: &DMatrix<C<T>>) -> T {
    let d = m.nrows();
    let mut worst = T::zero();
    for i in 0..d {
        for j in i..d {
            let diff = cabs(m[(i, j)] - m[(j, i)].conj());
            if diff > worst {
                worst = diff;
            }
        }
    }
    worst
}

/// Normalized state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState<T: Real = f64> {
    space: HilbertSpace,
    amplitudes: DVector<C<T>>,
}

impl<T: Real> PureState<T> {
    /// Wrap amplitudes that are already normalized.
    pub fn new(space: HilbertSpace, amplitudes: DVector<C<T>>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::invalid(format!(
                "state has {} amplitudes, space dim is {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - T::one()).abs() > tol::<T>(NORM_TOL) {
            return Err(Error::invalid(format!("state norm {} is not 1", norm.to_f64_lossy())));
        }
        Ok(Self { space, amplitudes })
    }

    /// Build `sum_k c_k |level_k, n_k>` and normalize it.
    pub fn from_terms(space: HilbertSpace, terms: &[(Level, usize, C<T>)]) -> Result<Self> {
        let mut amplitudes = DVector::from_element(space.dim(), czero());
        for &(level, n, c) in terms {
            let i = space
                .try_index(level, n)
                .ok_or_else(|| Error::invalid(format!("Fock number {n} exceeds n_max")))?;
            amplitudes[i] += c;
        }
        let norm = amplitudes.norm();
        if norm == T::zero() {
            return Err(Error::invalid("zero state vector"));
        }
        amplitudes.unscale_mut(norm);
        Ok(Self { space, amplitudes })
    }

    pub fn basis(space: HilbertSpace, level: Level, n: usize) -> Result<Self> {
        Self::from_terms(space, &[(level, n, cr(T::one()))])
    }

    /// `(|0>|up> + |1>|down>) / sqrt(2)`, motion first.
    pub fn bell_target(space: HilbertSpace) -> Self {
        Self::from_terms(space, &[(Level::Up, 0, cr(T::one())), (Level::Down, 1, cr(T::one()))])
            .expect("n_max >= 1 always holds")
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C<T>> {
        &self.amplitudes
    }

    pub fn amplitude(&self, level: Level, n: usize) -> C<T> {
        self.amplitudes[self.space.index(level, n)]
    }

    pub fn projector(&self) -> DMatrix<C<T>> {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Internal-level populations summed over the motional mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Populations<T: Real = f64> {
    pub g: T,
    pub up: T,
    pub down: T,
}

impl<T: Real> Populations<T> {
    pub fn get(&self, level: Level) -> T {
        match level {
            Level::G => self.g,
            Level::Up => self.up,
            Level::Down => self.down,
        }
    }

    pub fn total(&self) -> T {
        self.g + self.up + self.down
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix over a [`HilbertSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real = f64> {
    space: HilbertSpace,
    entries: DMatrix<C<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validate and wrap a matrix.
    pub fn from_matrix(space: HilbertSpace, entries: DMatrix<C<T>>) -> Result<Self> {
        let d = space.dim();
        if entries.shape() != (d, d) {
            return Err(Error::invalid(format!(
                "density matrix shape {:?} does not match dim {d}",
                entries.shape()
            )));
        }
        let rho = Self { space, entries };
        rho.check_invariants()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(space: HilbertSpace, entries: DMatrix<C<T>>) -> Self {
        debug_assert_eq!(entries.shape(), (space.dim(), space.dim()));
        Self { space, entries }
    }

    pub fn pure(state: &PureState<T>) -> Self {
        Self { space: state.space, entries: state.projector() }
    }

    pub fn basis(space: HilbertSpace, level: Level, n: usize) -> Result<Self> {
        Ok(Self::pure(&PureState::basis(space, level, n)?))
    }

    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let d = space.dim();
        let w = cr(T::one() / T::from_usize(d).unwrap());
        Self { space, entries: DMatrix::from_diagonal_element(d, d, w) }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C<T>> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C<T>> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C<T> {
        self.entries[(row, col)]
    }

    pub fn element(&self, a: (Level, usize), b: (Level, usize)) -> C<T> {
        self.entries[(self.space.index(a.0, a.1), self.space.index(b.0, b.1))]
    }

    pub fn trace(&self) -> C<T> {
        self.entries.trace()
    }

    pub fn hermitian_defect(&self) -> T {
        hermitian_defect(&self.entries)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> T {
        let herm = (&self.entries + self.entries.adjoint()).unscale(T::lit(2.0));
        herm.symmetric_eigenvalues().iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b))
    }

    /// `Tr rho^2`
    pub fn purity(&self) -> T {
        let mut acc = T::zero();
        for v in self.entries.iter() {
            acc += v.norm_sqr();
        }
        acc
    }

    pub fn check_invariants(&self) -> Result<()> {
        let herm = self.hermitian_defect();
        if herm > tol::<T>(HERMITIAN_TOL) {
            return Err(Error::invalid(format!("not Hermitian (defect {})", herm.to_f64_lossy())));
        }
        let tr = self.trace();
        if cabs(tr - cr(T::one())) > tol::<T>(TRACE_TOL) {
            return Err(Error::invalid(format!("trace {} != 1", tr.re.to_f64_lossy())));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -tol::<T>(POSITIVITY_TOL) {
            return Err(Error::invalid(format!("negative eigenvalue {}", min_ev.to_f64_lossy())));
        }
        Ok(())
    }

    pub fn populations(&self) -> Populations<T> {
        let mut p = [T::zero(); 3];
        for (k, level) in Level::ALL.iter().enumerate() {
            for n in 0..self.space.fock_dim() {
                let i = self.space.index(*level, n);
                p[k] += self.entries[(i, i)].re;
            }
        }
        Populations { g: p[0], up: p[1], down: p[2] }
    }

    /// Population of a single joint basis state.
    pub fn population(&self, level: Level, n: usize) -> T {
        let i = self.space.index(level, n);
        self.entries[(i, i)].re
    }

    /// Motional populations summed over internal levels.
    pub fn fock_populations(&self) -> Vec<T> {
        (0..self.space.fock_dim())
            .map(|n| Level::ALL.iter().map(|&l| self.population(l, n)).fold(T::zero(), |a, b| a + b))
            .collect()
    }

    /// `<psi| rho |psi>`
    pub fn fidelity(&self, psi: &PureState<T>) -> Result<T> {
        check_space(&self.space, &psi.space)?;
        let v = psi.amplitudes();
        let value = (v.adjoint() * &self.entries * v)[(0, 0)];
        Ok(value.re)
    }

    /// `a * self + (1 - a) * other`
    pub fn mix(&self, a: T, other: &Self) -> Result<Self> {
        check_space(&self.space, &other.space)?;
        if a < T::zero() || a > T::one() {
            return Err(Error::invalid("mixing weight must lie in [0, 1]"));
        }
        Ok(Self {
            space: self.space,
            entries: self.entries.scale(a) + other.entries.scale(T::one() - a),
        })
    }

    /// Largest entrywise deviation from another density matrix.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| cabs(*a - *b))
            .fold(T::zero(), |a, b| a.max(b))
    }
}

/// Thermal Fock weights `nbar^n / (1 + nbar)^(n+1)` for `n <= n_max`,
/// renormalized over the truncated range.
pub fn thermal_weights<T: Real>(nbar: T, n_max: usize) -> Result<Vec<T>> {
    if !(nbar >= T::zero()) {
        return Err(Error::invalid(format!("nbar must be >= 0, got {}", nbar.to_f64_lossy())));
    }
    let ratio = nbar / (T::one() + nbar);
    let mut weights = Vec::with_capacity(n_max + 1);
    let mut w = T::one() / (T::one() + nbar);
    for _ in 0..=n_max {
        weights.push(w);
        w *= ratio;
    }
    let z = weights.iter().copied().fold(T::zero(), |a, b| a + b);
    for w in &mut weights {
        *w /= z;
    }
    Ok(weights)
}

/// Diagonal state: internal level `level`, motion thermal with mean `nbar`.
pub fn thermal_density<T: Real>(space: HilbertSpace, nbar: T, level: Level) -> Result<DensityMatrix<T>> {
    let weights = thermal_weights(nbar, space.n_max())?;
    let d = space.dim();
    let mut m = DMatrix::from_element(d, d, czero());
    for (n, w) in weights.into_iter().enumerate() {
        let i = space.index(level, n);
        m[(i, i)] = cr(w);
    }
    Ok(DensityMatrix::from_matrix_unchecked(space, m))
}
