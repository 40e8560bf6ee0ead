//! Explicit generators `ω(t) = Λ(t, t0) ω0`.
//!
//! A generator is a capability record: it evaluates `Λ` and its inverse
//! one-sided, declares where it may lose smoothness, and optionally exposes
//! extra structure (an LTI matrix, a time-varying `S̃(t)`, exact
//! derivatives, a period) that downstream analyses exploit when present.

mod check;
mod carrier;
mod lti;
mod ltv;
mod custom;

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

pub use check::{check_generator, probe_grid, GeneratorReport};
pub use carrier::{AffineCarrierGenerator, Carrier};
pub use lti::LtiGenerator;
pub use ltv::LtvGenerator;
pub use custom::{FnGenerator, PiecewisePolynomialGenerator, PolySegment};

use crate::error::Result;
use crate::numerics::{inverse, Matrix, Side, TimeGrid};

pub trait ExplicitGenerator: Send + Sync + fmt::Debug {
    /// Exogenous dimension ν.
    fn dim(&self) -> usize;

    fn t0(&self) -> f64;

    /// `Λ(t, t0)`, one-sided at breakpoints.
    fn eval(&self, t: f64, side: Side) -> Matrix;

    /// `Λ(t, t0)^{-1}`. The default inverts [`eval`](Self::eval) and yields
    /// NaN entries when the matrix is singular.
    fn inv(&self, t: f64, side: Side) -> Matrix {
        let m = self.eval(t, side);
        inverse(&m).unwrap_or_else(|| Matrix::from_element(m.nrows(), m.ncols(), f64::NAN))
    }

    /// Declared breakpoints in `[a, b]`, sorted.
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64>;

    /// Exact one-sided derivative `d^k/dt^k Λ(t, t0)` when available.
    fn derivative(&self, _t: f64, _order: usize, _side: Side) -> Option<Matrix> {
        None
    }

    /// `S̃(t)` with `Λ' = S̃ Λ`, when the generator is a (piecewise) smooth
    /// linear time-varying system.
    fn sgen(&self, _t: f64, _side: Side) -> Option<Matrix> {
        None
    }

    /// The matrix `S` when `Λ(t, t0) = e^{S (t - t0)}`.
    fn lti_matrix(&self) -> Option<&Matrix> {
        None
    }

    /// A period `T` with `Λ(t + T) = Λ(t) Λ(t0)^{-1} Λ(t0 + T)` for all t.
    fn period(&self) -> Option<f64> {
        None
    }

    fn label(&self) -> String;
}

/// Shared handle to a generator.
#[derive(Clone)]
pub struct Generator(Arc<dyn ExplicitGenerator>);

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Deref for Generator {
    type Target = dyn ExplicitGenerator;
    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

impl Generator {
    pub fn new<G: ExplicitGenerator + 'static>(g: G) -> Self {
        Self(Arc::new(g))
    }

    /// `Λ(τ) Λ(t)^{-1}`.
    pub fn ratio(&self, tau: f64, tau_side: Side, t: f64, t_side: Side) -> Matrix {
        self.eval(tau, tau_side) * self.inv(t, t_side)
    }

    /// Breakpoints strictly inside the grid range, suitable for building a
    /// [`TimeGrid`].
    pub fn grid(&self, t_end: f64, step: f64) -> Result<TimeGrid> {
        let t0 = self.t0();
        TimeGrid::new(t0, t_end, step, &self.breakpoints(t0, t_end))
    }

    /// The grid `g` extended with this generator's breakpoints.
    pub fn align(&self, g: &TimeGrid) -> TimeGrid {
        g.with_breakpoints(&self.breakpoints(g.t0(), g.t_end()))
    }
}

/// `Λ(t) = e^{S (t - t0)}`.
pub fn lti_generator(s: Matrix, t0: f64) -> Result<Generator> {
    Ok(Generator::new(LtiGenerator::new(s, t0)?))
}

/// `Λ(t) = [[1, φ(t) - φ(t0)], [0, 1]]` for a scalar carrier `φ`.
pub fn affine_carrier_generator(carrier: Carrier, t0: f64) -> Result<Generator> {
    Ok(Generator::new(AffineCarrierGenerator::new(carrier, t0)?))
}

/// State-transition matrix of `ω' = S̃(t) ω`, cached on `grid`.
pub fn ltv_generator(
    sgen: impl Fn(f64, Side) -> Matrix + Send + Sync + 'static,
    breakpoints: BreakpointPattern,
    grid: &TimeGrid,
) -> Result<Generator> {
    Ok(Generator::new(LtvGenerator::new(sgen, breakpoints, grid, false)?))
}

/// Breakpoints given as offsets from `t0`, optionally repeated with a
/// period.
#[derive(Clone, Debug, PartialEq)]
pub struct BreakpointPattern {
    pub offsets: Vec<f64>,
    pub period: Option<f64>,
}

impl BreakpointPattern {
    pub fn none() -> Self {
        Self {
            offsets: Vec::new(),
            period: None,
        }
    }

    pub fn in_range(&self, t0: f64, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.period {
            None => out.extend(
                self.offsets
                    .iter()
                    .map(|o| t0 + o)
                    .filter(|t| *t >= a && *t <= b),
            ),
            Some(p) => {
                let k0 = ((a - t0) / p).floor() as i64 - 1;
                let k1 = ((b - t0) / p).ceil() as i64 + 1;
                for k in k0.max(0)..=k1 {
                    for o in &self.offsets {
                        let t = t0 + k as f64 * p + o;
                        if t >= a && t <= b {
                            out.push(t);
                        }
                    }
                }
            }
        }
        out.sort_by(|x, y| x.partial_cmp(y).unwrap());
        out.dedup();
        out
    }
}

/// Tolerance for deciding that a time sits on a breakpoint.
pub(crate) fn on_grid_tol(t: f64) -> f64 {
    1e-11 * t.abs().max(1.0)
}
