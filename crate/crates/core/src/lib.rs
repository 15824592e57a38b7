//! Density-matrix simulation of a single trapped ion driven on a quadrupole
//! transition and a stimulated Raman transition between two metastable
//! levels, with one axial motional mode used as the control qubit.
//!
//! The numeric core ([`hilbert`], [`couplings`], [`sequence`], [`liouville`])
//! is generic over the real scalar ([`Real`], implemented for `f32` and
//! `f64`). The aliases at the crate root fix it to `f64`, with `F32`-suffixed
//! variants for single precision. [`experiments`], [`oracles`] and [`cli`]
//! work in `f64`.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod couplings;
pub mod error;
pub mod experiments;
pub mod hilbert;
pub mod liouville;
pub mod oracles;
pub mod scalar;
pub mod sequence;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use hilbert::{HilbertSpace, Level};
pub use scalar::Real;

pub type Operator = hilbert::Operator<f64>;
pub type PureState = hilbert::PureState<f64>;
pub type DensityMatrix = hilbert::DensityMatrix<f64>;
pub type TrapLaserParams = couplings::TrapLaserParams<f64>;
pub type PulseSpec = sequence::PulseSpec<f64>;
pub type Sequence = sequence::Sequence<f64>;
pub type DecoherenceModel = liouville::DecoherenceModel<f64>;
pub type SolverConfig = liouville::SolverConfig<f64>;

pub type OperatorF32 = hilbert::Operator<f32>;
pub type PureStateF32 = hilbert::PureState<f32>;
pub type DensityMatrixF32 = hilbert::DensityMatrix<f32>;
pub type TrapLaserParamsF32 = couplings::TrapLaserParams<f32>;
pub type PulseSpecF32 = sequence::PulseSpec<f32>;
pub type SequenceF32 = sequence::Sequence<f32>;
pub type DecoherenceModelF32 = liouville::DecoherenceModel<f32>;
pub type SolverConfigF32 = liouville::SolverConfig<f32>;
