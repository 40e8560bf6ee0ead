//! Solvability analysis for the quasi-regulator equations that arise in
//! output regulation of SISO linear plants driven by non-smooth, possibly
//! non-periodic exogenous signals.
//!
//! The crate is organised bottom-up:
//!
//! * [`numerics`]: dense matrix helpers, matrix exponential, quadrature,
//!   fixed-step ODE integration and Sylvester solving.
//! * [`plant`]: the plant model, relative degree, transmission zeros and the
//!   unit-relative-degree normal form.
//! * [`exogen`]: explicit generators `omega(t) = Lambda(t, t0) omega0`.
//! * [`smoothness`]: the integral ladder `V_j`, smoothness degrees and the
//!   necessity gates that follow from them.
//! * [`solvability`]: the non-smooth non-resonance test.
//! * [`solver`]: construction and certification of solutions, plus the full
//!   pipeline.

pub mod error;
pub mod exogen;
pub mod numerics;
pub mod plant;
pub mod smoothness;
pub mod solvability;
pub mod solver;

pub use error::{Error, Result};
pub use exogen::{GeneratorReport, ExplicitGenerator, Generator};
pub use numerics::{Matrix, Side, TimeGrid, Trajectory};
pub use plant::{NormalForm, Plant};
pub use smoothness::{Degree, SmoothnessProfile};
pub use solvability::{NonResonanceReport, NonResonanceVerdict};
pub use solver::{
    Overall, PipelineOptions, RegulatorSolution, SimTrace, SolvabilityReport, UnsolvableReason,
};
