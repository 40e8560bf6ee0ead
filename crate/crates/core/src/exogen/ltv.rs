use std::fmt;

use super::{on_grid_tol, BreakpointPattern, ExplicitGenerator};
use crate::error::{Error, Result};
use crate::numerics::{condition_number, ensure_finite, ensure_square, Matrix, Side, TimeGrid};

type SgenFn = Box<dyn Fn(f64, Side) -> Matrix + Send + Sync>;

/// Transition matrix of `ω' = S̃(t) ω` with `Λ(t0) = I`, integrated by RK4
/// on a grid aligned to the breakpoints of `S̃` and cached at the nodes.
/// Off-node values take one RK4 step from the nearest node on the left;
/// queries outside the grid range are integrated on demand. The inverse is a
/// dense solve, guarded at construction by a condition-number check.
pub struct LtvGenerator {
    sgen: SgenFn,
    pattern: BreakpointPattern,
    piecewise_constant: bool,
    t0: f64,
    step: f64,
    times: Vec<f64>,
    vals: Vec<Matrix>,
}

impl fmt::Debug for LtvGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LtvGenerator")
            .field("nu", &self.dim())
            .field("t0", &self.t0)
            .field("nodes", &self.times.len())
            .field("pattern", &self.pattern)
            .finish()
    }
}

/// Single RK4 step from `t` to `t1`, with `S̃` taken from inside `[t, t1]`.
fn rk4(sgen: &SgenFn, t: f64, t1: f64, x: &Matrix) -> Matrix {
    let h = t1 - t;
    let (sa, sb) = if h >= 0.0 {
        (Side::Right, Side::Left)
    } else {
        (Side::Left, Side::Right)
    };
    let tm = t + 0.5 * h;
    let sm = sgen(tm, sa);
    let k1 = sgen(t, sa) * x;
    let k2 = &sm * (x + &k1 * (0.5 * h));
    let k3 = &sm * (x + &k2 * (0.5 * h));
    let k4 = sgen(t1, sb) * (x + &k3 * h);
    x + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0)
}

impl LtvGenerator {
    /// `grid` fixes the cached range and step; breakpoints of `pattern` are
    /// added to it. Set `piecewise_constant` when `S̃` is constant between
    /// breakpoints, which makes higher derivatives `S̃^k Λ` exact.
    pub fn new(
        sgen: impl Fn(f64, Side) -> Matrix + Send + Sync + 'static,
        pattern: BreakpointPattern,
        grid: &TimeGrid,
        piecewise_constant: bool,
    ) -> Result<Self> {
        let sgen: SgenFn = Box::new(sgen);
        let t0 = grid.t0();
        let s0 = sgen(t0, Side::Right);
        let nu = ensure_square(&s0)?;
        ensure_finite(&s0, "S(t0)")?;
        let grid = grid.with_breakpoints(&pattern.in_range(t0, t0, grid.t_end()));
        let nodes = grid.nodes();
        let mut vals = Vec::with_capacity(nodes.len());
        let mut x = Matrix::identity(nu, nu);
        vals.push(x.clone());
        for w in nodes.windows(2) {
            let xn = rk4(&sgen, w[0], w[1], &x);
            if !xn.iter().all(|v| v.is_finite()) {
                return Err(Error::BlowUp { time: w[1] });
            }
            let cond = condition_number(&xn);
            if !(cond <= 1e12) {
                return Err(Error::NearSingular { time: w[1], cond });
            }
            x = xn;
            vals.push(x.clone());
        }
        Ok(Self {
            sgen,
            pattern,
            piecewise_constant,
            t0,
            step: grid.step(),
            times: nodes,
            vals,
        })
    }

    /// Steps from node `k` to `t`, splitting at breakpoints and keeping
    /// sub-steps no longer than the grid step.
    fn from_node(&self, k: usize, t: f64) -> Matrix {
        let start = self.times[k];
        let mut x = self.vals[k].clone();
        if (t - start).abs() <= on_grid_tol(t) {
            return x;
        }
        let (lo, hi) = if t > start { (start, t) } else { (t, start) };
        let mut stops: Vec<f64> = self
            .pattern
            .in_range(self.t0, lo, hi)
            .into_iter()
            .filter(|b| *b > lo && *b < hi)
            .collect();
        if t < start {
            stops.reverse();
        }
        stops.push(t);
        let mut cur = start;
        for stop in stops {
            let n = ((stop - cur).abs() / self.step).ceil().max(1.0) as usize;
            for i in 0..n {
                let a = cur + (stop - cur) * i as f64 / n as f64;
                let b = cur + (stop - cur) * (i + 1) as f64 / n as f64;
                x = rk4(&self.sgen, a, b, &x);
            }
            cur = stop;
        }
        x
    }
}

impl ExplicitGenerator for LtvGenerator {
    fn dim(&self) -> usize {
        self.vals[0].nrows()
    }

    fn t0(&self) -> f64 {
        self.t0
    }

    fn eval(&self, t: f64, _side: Side) -> Matrix {
        let k = match self.times.partition_point(|s| *s <= t + on_grid_tol(t)) {
            0 => 0,
            k => k - 1,
        };
        self.from_node(k, t)
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        self.pattern.in_range(self.t0, a, b)
    }

    fn derivative(&self, t: f64, order: usize, side: Side) -> Option<Matrix> {
        if order > 1 && !self.piecewise_constant {
            return None;
        }
        let s = (self.sgen)(t, side);
        let mut m = self.eval(t, side);
        for _ in 0..order {
            m = &s * m;
        }
        Some(m)
    }

    fn sgen(&self, t: f64, side: Side) -> Option<Matrix> {
        Some((self.sgen)(t, side))
    }

    fn label(&self) -> String {
        format!("ltv(nu={})", self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exogen::{AffineCarrierGenerator, Carrier, LtiGenerator};

    #[test]
    fn constant_sgen_matches_exponential() {
        let s = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.1]);
        let grid = TimeGrid::new(0.0, 10.0, 1e-2, &[]).unwrap();
        let s2 = s.clone();
        let ltv = LtvGenerator::new(move |_, _| s2.clone(), BreakpointPattern::none(), &grid, true)
            .unwrap();
        let lti = LtiGenerator::new(s, 0.0).unwrap();
        for t in [0.0, 0.013, 1.0, 3.3, 7.777, 10.0, 11.5] {
            let d = ltv.eval(t, Side::Right) - lti.eval(t, Side::Right);
            assert!(d.amax() < 1e-6, "t={t}: {}", d.amax());
            let d = ltv.inv(t, Side::Right) - lti.inv(t, Side::Right);
            assert!(d.amax() < 1e-6, "t={t}: {}", d.amax());
        }
    }

    #[test]
    fn square_wave_sgen_gives_triangular_carrier() {
        // S̃ = [[0, ±1], [0, 0]] integrates to a triangular ramp.
        let sq = |t: f64, side: Side| {
            let c = Carrier::Square {
                period: 2.0,
                duty: 0.5,
                low: -1.0,
                high: 1.0,
            };
            Matrix::from_row_slice(2, 2, &[0.0, c.value(t, side), 0.0, 0.0])
        };
        let pattern = BreakpointPattern {
            offsets: vec![1.0, 2.0],
            period: Some(2.0),
        };
        let grid = TimeGrid::new(0.0, 8.0, 0.05, &[]).unwrap();
        let ltv = LtvGenerator::new(sq, pattern, &grid, true).unwrap();
        let tri = AffineCarrierGenerator::new(
            Carrier::Triangular {
                period: 2.0,
                amplitude: 1.0,
            },
            0.0,
        )
        .unwrap();
        for i in 0..=160 {
            let t = i as f64 * 0.05 + 0.0123;
            let d = ltv.eval(t, Side::Right) - tri.eval(t, Side::Right);
            assert!(d.amax() < 1e-9, "t={t}");
        }
        assert_eq!(ltv.breakpoints(0.0, 4.0), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn singular_transition_is_rejected() {
        let grid = TimeGrid::new(0.0, 40.0, 0.1, &[]).unwrap();
        let r = LtvGenerator::new(
            |_, _| Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]),
            BreakpointPattern::none(),
            &grid,
            true,
        );
        assert!(matches!(r, Err(Error::NearSingular { .. })));
    }
}
