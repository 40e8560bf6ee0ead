use std::fmt;

use super::{on_grid_tol, BreakpointPattern, ExplicitGenerator};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Side};

type EvalFn = Box<dyn Fn(f64, Side) -> Matrix + Send + Sync>;

/// Generator given by an arbitrary evaluation closure. `Λ(t0)` need not be
/// the identity.
pub struct FnGenerator {
    dim: usize,
    t0: f64,
    eval: EvalFn,
    pattern: BreakpointPattern,
    label: String,
}

impl fmt::Debug for FnGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnGenerator")
            .field("label", &self.label)
            .field("nu", &self.dim)
            .field("t0", &self.t0)
            .finish()
    }
}

impl FnGenerator {
    pub fn new(
        label: impl Into<String>,
        t0: f64,
        pattern: BreakpointPattern,
        eval: impl Fn(f64, Side) -> Matrix + Send + Sync + 'static,
    ) -> Result<Self> {
        let m0 = eval(t0, Side::Right);
        let dim = crate::numerics::ensure_square(&m0)?;
        crate::numerics::ensure_finite(&m0, "Λ(t0)")?;
        Ok(Self {
            dim,
            t0,
            eval: Box::new(eval),
            pattern,
            label: label.into(),
        })
    }
}

impl ExplicitGenerator for FnGenerator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn t0(&self) -> f64 {
        self.t0
    }

    fn eval(&self, t: f64, side: Side) -> Matrix {
        (self.eval)(t, side)
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        self.pattern.in_range(self.t0, a, b)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}

/// One piece of a piecewise polynomial `Λ`: entry `(i, j)` equals
/// `Σ_k coeffs[i][j][k] · τ^k` with local time `τ = t - t0 - start`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySegment {
    pub start: f64,
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

impl PolySegment {
    fn derivative(&self, tau: f64, order: usize) -> Matrix {
        let nu = self.coeffs.len();
        Matrix::from_fn(nu, nu, |i, j| {
            let c = &self.coeffs[i][j];
            // Horner on the differentiated polynomial.
            let mut acc = 0.0;
            for k in (order..c.len()).rev() {
                let falling: f64 = (k - order + 1..=k).map(|m| m as f64).product();
                acc = acc * tau + c[k] * falling;
            }
            acc
        })
    }
}

/// `Λ` built from polynomial pieces. The last piece extends to infinity,
/// unless a period is given, in which case the pieces on `[0, period)`
/// repeat. Jumps between pieces are allowed anywhere, including directions
/// that `Q` annihilates.
#[derive(Clone, Debug)]
pub struct PiecewisePolynomialGenerator {
    t0: f64,
    segments: Vec<PolySegment>,
    period: Option<f64>,
}

impl PiecewisePolynomialGenerator {
    pub fn new(t0: f64, segments: Vec<PolySegment>, period: Option<f64>) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("piecewise generator: {m}")));
        if segments.is_empty() {
            return bad("at least one segment required".into());
        }
        if segments[0].start != 0.0 {
            return bad("first segment must start at offset 0".into());
        }
        let nu = segments[0].coeffs.len();
        if nu == 0 {
            return bad("dimension must be positive".into());
        }
        for (k, s) in segments.iter().enumerate() {
            if !s.start.is_finite() || (k > 0 && s.start <= segments[k - 1].start) {
                return bad(format!("segment {k}: starts must be finite and increasing"));
            }
            if s.coeffs.len() != nu || s.coeffs.iter().any(|row| row.len() != nu) {
                return bad(format!("segment {k}: expected a {nu}x{nu} array of polynomials"));
            }
            if s.coeffs.iter().flatten().flatten().any(|c| !c.is_finite()) {
                return bad(format!("segment {k}: non-finite coefficient"));
            }
        }
        if let Some(p) = period {
            if !(p.is_finite() && p > segments.last().unwrap().start) {
                return bad("period must exceed the last segment start".into());
            }
        }
        if !t0.is_finite() {
            return Err(Error::InvalidTime("t0 must be finite".into()));
        }
        Ok(Self {
            t0,
            segments,
            period,
        })
    }

    /// Segment index and local time for offset `s = t - t0`.
    fn locate(&self, t: f64, side: Side) -> (usize, f64) {
        let mut s = t - self.t0;
        if let Some(p) = self.period {
            let k = (s / p).round();
            if (s - k * p).abs() <= on_grid_tol(s) && k >= 1.0 && side == Side::Left {
                s = p;
            } else {
                s -= (s / p).floor() * p;
                if (s - p).abs() <= on_grid_tol(p) {
                    s = 0.0;
                }
            }
        }
        let tol = on_grid_tol(s);
        let idx = self
            .segments
            .iter()
            .rposition(|seg| match side {
                Side::Right => seg.start <= s + tol,
                Side::Left => seg.start < s - tol || seg.start == 0.0,
            })
            .unwrap_or(0);
        (idx, s - self.segments[idx].start)
    }
}

impl ExplicitGenerator for PiecewisePolynomialGenerator {
    fn dim(&self) -> usize {
        self.segments[0].coeffs.len()
    }

    fn t0(&self) -> f64 {
        self.t0
    }

    fn eval(&self, t: f64, side: Side) -> Matrix {
        let (k, tau) = self.locate(t, side);
        self.segments[k].derivative(tau, 0)
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut offsets: Vec<f64> = self.segments.iter().skip(1).map(|s| s.start).collect();
        if self.period.is_some() {
            offsets.push(0.0);
        }
        let pattern = BreakpointPattern {
            offsets,
            period: self.period,
        };
        let mut out = pattern.in_range(self.t0, a, b);
        out.retain(|t| *t > self.t0);
        out
    }

    fn derivative(&self, t: f64, order: usize, side: Side) -> Option<Matrix> {
        let (k, tau) = self.locate(t, side);
        Some(self.segments[k].derivative(tau, order))
    }

    fn period(&self) -> Option<f64> {
        self.period
    }

    fn label(&self) -> String {
        format!("custom-piecewise(nu={}, pieces={})", self.dim(), self.segments.len())
    }
}
