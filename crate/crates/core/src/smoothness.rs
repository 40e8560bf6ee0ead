//! Smoothness of the ladder `V_j = Σ_{i=1..j} 𝓘^{[i]}[C A^{i-1} P Λ] + QΛ`
//! at generator breakpoints, the derivative row `Q_Λ`, and the necessity
//! checks that follow from them.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exogen::Generator;
use crate::numerics::{
    norm2, one_sided_derivative, repeated_integral, Matrix, Side, TimeGrid, Trajectory,
};
use crate::plant::Plant;

/// Relative jump size above which one-sided derivatives are considered
/// different.
pub const TOL_SMOOTHNESS: f64 = 1e-6;
/// A difference quotient that grows by more than this factor when the
/// sampling step halves indicates a jump.
pub const LIPSCHITZ_GROWTH: f64 = 1.5;

/// Degree of smoothness across breakpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Degree {
    /// The function itself jumps.
    Discontinuous,
    /// Continuous up to and including the k-th derivative; the (k+1)-th
    /// jumps.
    Finite(usize),
    /// No jump found in derivatives `0..=k`.
    AtLeast(usize),
}

impl Degree {
    /// `-1` for a discontinuous function, `k` for `Finite(k)`, `None` when
    /// only a lower bound is known.
    pub fn exact(self) -> Option<i64> {
        match self {
            Degree::Discontinuous => Some(-1),
            Degree::Finite(k) => Some(k as i64),
            Degree::AtLeast(_) => None,
        }
    }

    /// Whether the degree is known to be `>= k`.
    pub fn is_at_least(self, k: i64) -> bool {
        match self {
            Degree::Discontinuous => k <= -1,
            Degree::Finite(d) => d as i64 >= k,
            Degree::AtLeast(d) => d as i64 >= k,
        }
    }

    pub fn is_continuous(self) -> bool {
        self != Degree::Discontinuous
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degree::Discontinuous => write!(f, "discontinuous"),
            Degree::Finite(k) => write!(f, "{k}"),
            Degree::AtLeast(k) => write!(f, ">={k}"),
        }
    }
}

impl Serialize for Degree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Degree::Finite(k) => s.serialize_u64(*k as u64),
            other => s.collect_str(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessProfile {
    /// Probe depth, equal to the plant order `n`.
    pub jmax: usize,
    /// `c_0 ..= c_n`.
    pub degrees: Vec<Degree>,
    /// `c_n`.
    pub jstar: Degree,
    /// `mismatches[j][m]`: largest relative jump of `V_j^{(m)}` over the
    /// checked breakpoints.
    pub mismatches: Vec<Vec<f64>>,
    pub breakpoints_checked: usize,
    /// Whether every one-sided derivative of `Λ` came from the generator
    /// rather than finite differences.
    pub exact_derivatives: bool,
    pub lipschitz_q_lambda: bool,
    /// Largest difference quotient of `QΛ` at steps `s`, `s/2`, `s/4`.
    pub lipschitz_quotients: Vec<f64>,
    /// `QΛ` is continuous, Lipschitz, and piecewise differentiable with a
    /// bounded derivative row `Q_Λ`.
    pub q_lambda_regular: bool,
    /// Estimated `sup ‖Q_Λ‖`.
    pub q_lambda_bound: f64,
    /// Set when `r = j* + 1` and the next derivative of `V_{j*+1}` grows
    /// near a breakpoint, i.e. boundedness of the cancellation is doubtful.
    pub cancellation_warning: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Necessity {
    Pass,
    Fail,
}

/// `V_j(t)`, with each repeated integral computed through the Cauchy kernel.
pub fn v_function(plant: &Plant, gen: &Generator, j: usize, t: f64, grid: &TimeGrid) -> Result<Matrix> {
    if j > plant.n() {
        return Err(Error::InvalidArgument(format!(
            "ladder index {j} exceeds plant order {}",
            plant.n()
        )));
    }
    let t0 = gen.t0();
    if t < t0 {
        return Err(Error::InvalidTime(format!("V_j needs t >= t0, got {t} < {t0}")));
    }
    let mut v = plant.q() * gen.eval(t, Side::Right);
    if t == t0 || j == 0 {
        return Ok(v);
    }
    let grid = gen.align(grid);
    for i in 1..=j {
        let row = plant.coupling_row(i - 1);
        if row.amax() == 0.0 {
            continue;
        }
        let h = |s: f64, side: Side| &row * gen.eval(s, side);
        v += repeated_integral(&h, i, t0, t, &grid)?;
    }
    Ok(v)
}

/// Neighbourhood radius available for one-sided sampling around each
/// breakpoint: half the gap to the nearest neighbour, at most 1.
fn reaches(bps: &[f64]) -> Vec<f64> {
    (0..bps.len())
        .map(|i| {
            let mut r: f64 = 1.0;
            if i > 0 {
                r = r.min(0.5 * (bps[i] - bps[i - 1]));
            }
            if i + 1 < bps.len() {
                r = r.min(0.5 * (bps[i + 1] - bps[i]));
            }
            r
        })
        .collect()
}

/// Degree of smoothness of `f` across `breakpoints`, probing derivatives up
/// to order `kmax` with one-sided finite differences.
pub fn smoothness_degree<F>(f: &F, breakpoints: &[f64], kmax: usize) -> Degree
where
    F: Fn(f64, Side) -> Matrix + ?Sized,
{
    let reach = reaches(breakpoints);
    let mut first_jump: Option<usize> = None;
    for (b, r) in breakpoints.iter().zip(reach) {
        for m in 0..=kmax.min(first_jump.unwrap_or(usize::MAX)) {
            let (l, el) = one_sided_derivative(f, *b, m, Side::Left, r);
            let (rt, er) = one_sided_derivative(f, *b, m, Side::Right, r);
            let scale = 1.0f64.max(l.amax()).max(rt.amax());
            if (&l - &rt).amax() > TOL_SMOOTHNESS * scale + 10.0 * (el + er) {
                first_jump = Some(first_jump.map_or(m, |k| k.min(m)));
                break;
            }
        }
    }
    match first_jump {
        None => Degree::AtLeast(kmax),
        Some(0) => Degree::Discontinuous,
        Some(m) => Degree::Finite(m - 1),
    }
}

/// One-sided derivatives `Λ^{(k)}(b∓)`, `k = 0..=kmax`, with error bounds.
struct SidedDerivatives {
    left: Vec<Matrix>,
    right: Vec<Matrix>,
    err: Vec<f64>,
    exact: bool,
}

fn sided_derivatives(gen: &Generator, b: f64, kmax: usize, reach: f64) -> SidedDerivatives {
    let f = |t: f64, side: Side| gen.eval(t, side);
    let mut out = SidedDerivatives {
        left: Vec::new(),
        right: Vec::new(),
        err: Vec::new(),
        exact: true,
    };
    for k in 0..=kmax {
        match (gen.derivative(b, k, Side::Left), gen.derivative(b, k, Side::Right)) {
            (Some(l), Some(r)) => {
                out.left.push(l);
                out.right.push(r);
                out.err.push(0.0);
            }
            _ => {
                let (l, el) = one_sided_derivative(&f, b, k, Side::Left, reach);
                let (r, er) = one_sided_derivative(&f, b, k, Side::Right, reach);
                out.left.push(l);
                out.right.push(r);
                out.err.push(el + er);
                out.exact = false;
            }
        }
    }
    out
}

/// `Q_Λ(t) = (d/dt QΛ(t)) Λ(t)^{-1}`. At a breakpoint a side must be given.
pub fn q_lambda(gen: &Generator, q: &Matrix, t: f64, side: Option<Side>) -> Result<Matrix> {
    let on_bp = gen
        .breakpoints(t - 1e-9 * t.abs().max(1.0), t + 1e-9 * t.abs().max(1.0))
        .iter()
        .any(|b| (b - t).abs() <= 1e-11 * t.abs().max(1.0));
    let side = match (side, on_bp) {
        (Some(s), _) => s,
        (None, false) => Side::Right,
        (None, true) => return Err(Error::BreakpointSide(t)),
    };
    if let Some(d) = gen.derivative(t, 1, side) {
        return Ok(q * d * gen.inv(t, side));
    }
    if let Some(s) = gen.sgen(t, side) {
        return Ok(q * s);
    }
    let bps = gen.breakpoints(t - 1.0, t + 1.0);
    let reach = bps
        .iter()
        .map(|b| (b - t).abs())
        .filter(|d| *d > 0.0)
        .fold(1.0f64, f64::min)
        .max(1e-6);
    let f = |s: f64, sd: Side| q * gen.eval(s, sd);
    let (d, _) = one_sided_derivative(&f, t, 1, side, reach);
    Ok(d * gen.inv(t, side))
}

/// Largest `‖QΛ(t_{k+1}) - QΛ(t_k)‖ / Δt` on uniform grids with step `s`,
/// `s/2` and `s/4`.
fn difference_quotients(gen: &Generator, q: &Matrix, t0: f64, t_end: f64, s: f64) -> Vec<f64> {
    (0..3)
        .map(|level| {
            let h = s / f64::from(1u32 << level);
            let n = ((t_end - t0) / h).round().max(1.0) as usize;
            let h = (t_end - t0) / n as f64;
            let mut prev = q * gen.eval(t0, Side::Right);
            let mut best: f64 = 0.0;
            for k in 1..=n {
                let cur = q * gen.eval(t0 + h * k as f64, Side::Right);
                best = best.max(norm2(&(&cur - &prev)) / h);
                prev = cur;
            }
            best
        })
        .collect()
}

pub fn compute_profile(plant: &Plant, gen: &Generator, grid: &TimeGrid) -> Result<SmoothnessProfile> {
    let n = plant.n();
    let q = plant.q();
    let (t0, t_end) = (grid.t0(), grid.t_end());
    let bps: Vec<f64> = gen
        .breakpoints(t0, t_end)
        .into_iter()
        .filter(|b| *b > t0 && *b < t_end)
        .collect();
    let rows: Vec<Matrix> = (0..n).map(|k| plant.coupling_row(k)).collect();
    let row_norms: Vec<f64> = rows.iter().map(norm2).collect();
    let q_norm = norm2(q);

    let mut mismatches = vec![vec![0.0; n + 1]; n + 1];
    let mut first_jump: Vec<Option<usize>> = vec![None; n + 1];
    let mut exact = true;
    for (b, reach) in bps.iter().zip(reaches(&bps)) {
        let d = sided_derivatives(gen, *b, n, reach);
        exact &= d.exact;
        let jumps: Vec<Matrix> = d.left.iter().zip(&d.right).map(|(l, r)| l - r).collect();
        let mags: Vec<f64> = d
            .left
            .iter()
            .zip(&d.right)
            .map(|(l, r)| norm2(l).max(norm2(r)))
            .collect();
        for j in 0..=n {
            for m in 0..=n {
                let mut jump = q * &jumps[m];
                let mut scale = 1.0 + q_norm * mags[m];
                let mut err = q_norm * d.err[m];
                for i in 1..=j.min(m) {
                    jump += &rows[i - 1] * &jumps[m - i];
                    scale += row_norms[i - 1] * mags[m - i];
                    err += row_norms[i - 1] * d.err[m - i];
                }
                let size = norm2(&jump);
                mismatches[j][m] = f64::max(mismatches[j][m], size / scale);
                if size > TOL_SMOOTHNESS * scale + 10.0 * err {
                    first_jump[j] = Some(first_jump[j].map_or(m, |k| k.min(m)));
                }
            }
        }
    }
    let degrees: Vec<Degree> = first_jump
        .iter()
        .map(|f| match f {
            None => Degree::AtLeast(n),
            Some(0) => Degree::Discontinuous,
            Some(m) => Degree::Finite(m - 1),
        })
        .collect();
    let jstar = degrees[n];

    let s = grid.step().max((t_end - t0) / 4000.0);
    let lipschitz_quotients = difference_quotients(gen, q, t0, t_end, s);
    let grows = lipschitz_quotients
        .windows(2)
        .any(|w| !(w[1] <= LIPSCHITZ_GROWTH * w[0].max(1e-300)) && w[1] > 1e-12);
    let finite = lipschitz_quotients.iter().all(|v| v.is_finite());
    let lipschitz_q_lambda = finite && !grows && degrees[0].is_continuous();

    let probe = gen.align(&TimeGrid::new(t0, t_end, s, &[])?);
    let ql = Trajectory::sample(&probe, |t, side| q_lambda(gen, q, t, Some(side)))?;
    let q_lambda_bound = ql.sup_by(norm2);
    let q_lambda_regular =
        degrees[0].is_continuous() && q_lambda_bound.is_finite() && lipschitz_q_lambda;

    let cancellation_warning = match (jstar, plant.relative_degree()) {
        (Degree::Finite(k), Ok(r)) if plant.d() == 0.0 && r == k + 1 => {
            cancellation_grows(gen, q, &rows, k + 1, &bps)
        }
        _ => false,
    };

    Ok(SmoothnessProfile {
        jmax: n,
        degrees,
        jstar,
        mismatches,
        breakpoints_checked: bps.len(),
        exact_derivatives: exact,
        lipschitz_q_lambda,
        lipschitz_quotients,
        q_lambda_regular,
        q_lambda_bound,
        cancellation_warning,
    })
}

/// Probes `W = QΛ^{(p)} + Σ_{i=1..p} C A^{i-1} P Λ^{(p-i)}`, the derivative of
/// `V_p^{(p-1)}`, approaching each breakpoint; reports growth by a factor 10
/// per decade of distance. Needs exact generator derivatives.
fn cancellation_grows(gen: &Generator, q: &Matrix, rows: &[Matrix], p: usize, bps: &[f64]) -> bool {
    let w = |t: f64, side: Side| -> Option<f64> {
        let mut acc = q * gen.derivative(t, p, side)?;
        for i in 1..=p.min(rows.len()) {
            acc += &rows[i - 1] * gen.derivative(t, p - i, side)?;
        }
        Some(norm2(&acc))
    };
    for (b, reach) in bps.iter().zip(reaches(bps)) {
        for dir in [-1.0, 1.0] {
            let side = if dir < 0.0 { Side::Left } else { Side::Right };
            let vals: Option<Vec<f64>> = [1e-2, 1e-3, 1e-4]
                .iter()
                .map(|d| w(b + dir * d * reach, side))
                .collect();
            let Some(vals) = vals else { return false };
            if vals.iter().any(|v| !v.is_finite())
                || (vals[1] > 10.0 * vals[0] && vals[2] > 10.0 * vals[1])
            {
                return true;
            }
        }
    }
    false
}

/// `r <= j* + 1` whenever `j* < n` is known exactly.
pub fn check_relative_degree_necessity(plant: &Plant, profile: &SmoothnessProfile) -> Result<Necessity> {
    if plant.d() != 0.0 {
        return Err(Error::NonzeroFeedthrough);
    }
    let r = plant.relative_degree()? as i64;
    Ok(match profile.jstar.exact() {
        Some(j) if j < plant.n() as i64 && r > j + 1 => Necessity::Fail,
        _ => Necessity::Pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exogen::{affine_carrier_generator, lti_generator, Carrier};
    use proptest::prelude::*;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    fn plant(c: &[f64], p: &[f64], q: &[f64]) -> Plant {
        Plant::new(
            m(2, 2, &[0.0, 1.0, -2.0, -3.0]),
            m(2, 1, &[0.0, 1.0]),
            m(1, 2, c),
            0.0,
            m(2, 2, p),
            m(1, 2, q),
        )
        .unwrap()
    }

    fn triangular() -> Generator {
        affine_carrier_generator(Carrier::Triangular { period: 2.0, amplitude: 1.0 }, 0.0).unwrap()
    }

    fn square() -> Generator {
        affine_carrier_generator(
            Carrier::Square { period: 2.0, duty: 0.5, low: -1.0, high: 1.0 },
            0.0,
        )
        .unwrap()
    }

    fn rotation() -> Generator {
        lti_generator(m(2, 2, &[0.0, 1.0, -1.0, 0.0]), 0.0).unwrap()
    }

    fn grid(t_end: f64) -> TimeGrid {
        TimeGrid::new(0.0, t_end, 0.01, &[]).unwrap()
    }

    #[test]
    fn degree_of_carrier_rows() {
        let q = m(1, 2, &[1.0, 0.0]);
        let sq = square();
        let f = |t: f64, s: Side| &q * sq.eval(t, s);
        assert_eq!(smoothness_degree(&f, &sq.breakpoints(0.0, 6.0), 2), Degree::Discontinuous);
        let tri = triangular();
        let f = |t: f64, s: Side| &q * tri.eval(t, s);
        assert_eq!(smoothness_degree(&f, &tri.breakpoints(0.0, 6.0), 2), Degree::Finite(0));
        let rot = rotation();
        let f = |t: f64, s: Side| &q * rot.eval(t, s);
        assert_eq!(smoothness_degree(&f, &rot.breakpoints(0.0, 6.0), 2), Degree::AtLeast(2));
    }

    #[test]
    fn integral_raises_degree() {
        let q = m(1, 2, &[1.0, 0.0]);
        let tri = triangular();
        let g = tri.align(&grid(6.0));
        let f = |t: f64, s: Side| &q * tri.eval(t, s);
        let int = |t: f64, _: Side| repeated_integral(&f, 1, 0.0, t, &g).unwrap();
        let bps = tri.breakpoints(0.5, 5.5);
        let d0 = smoothness_degree(&f, &bps, 3);
        let d1 = smoothness_degree(&int, &bps, 3);
        assert_eq!(d0, Degree::Finite(0));
        assert!(d1.is_at_least(1), "{d1}");
    }

    #[test]
    fn profile_smooth_generator() {
        let p = plant(&[1.0, 1.0], &[1.0, 0.0, 0.5, -1.0], &[1.0, 0.0]);
        let prof = compute_profile(&p, &rotation(), &grid(10.0)).unwrap();
        assert_eq!(prof.jstar, Degree::AtLeast(2));
        assert!(prof.lipschitz_q_lambda && prof.q_lambda_regular);
        assert!((prof.q_lambda_bound - 1.0).abs() < 1e-9);
    }

    #[test]
    fn profile_triangular_carrier() {
        let p = plant(&[1.0, 1.0], &[0.3, -1.0, 2.0, 0.7], &[1.0, 0.0]);
        let prof = compute_profile(&p, &triangular(), &grid(10.0)).unwrap();
        assert_eq!(prof.degrees, vec![Degree::Finite(0); 3]);
        assert_eq!(prof.jstar, Degree::Finite(0));
        assert!(prof.lipschitz_q_lambda && prof.q_lambda_regular);
        assert!(prof.exact_derivatives);
        assert_eq!(prof.breakpoints_checked, 9);
        assert!(!prof.cancellation_warning);
    }

    #[test]
    fn profile_square_carrier() {
        let p = plant(&[1.0, 1.0], &[0.0; 4], &[1.0, 0.0]);
        let prof = compute_profile(&p, &square(), &grid(10.0)).unwrap();
        assert_eq!(prof.degrees[0], Degree::Discontinuous);
        assert!(!prof.lipschitz_q_lambda);
        assert!(!prof.q_lambda_regular);
        let q = &prof.lipschitz_quotients;
        assert!(q[1] > 1.9 * q[0] && q[2] > 1.9 * q[1]);
    }

    #[test]
    fn profile_without_exact_derivatives_matches() {
        // The same carrier behind a closure loses its exact derivatives.
        use crate::exogen::{BreakpointPattern, FnGenerator};
        let tri = triangular();
        let inner = tri.clone();
        let opaque = Generator::new(
            FnGenerator::new(
                "opaque",
                0.0,
                BreakpointPattern { offsets: vec![1.0, 2.0], period: Some(2.0) },
                move |t, s| inner.eval(t, s),
            )
            .unwrap(),
        );
        let p = plant(&[1.0, 1.0], &[0.3, -1.0, 2.0, 0.7], &[1.0, 0.0]);
        let exact = compute_profile(&p, &tri, &grid(6.0)).unwrap();
        let fd = compute_profile(&p, &opaque, &grid(6.0)).unwrap();
        assert!(!fd.exact_derivatives);
        assert_eq!(exact.degrees, fd.degrees);
        assert_eq!(exact.q_lambda_regular, fd.q_lambda_regular);
    }

    #[test]
    fn jump_identity_agrees_with_direct_differencing() {
        let p = plant(&[1.0, 1.0], &[0.3, -1.0, 2.0, 0.7], &[0.0, 1.0]);
        let tri = triangular();
        let g = grid(6.0);
        let prof = compute_profile(&p, &tri, &g).unwrap();
        let bps = tri.breakpoints(0.5, 5.5);
        for j in 0..=1 {
            let f = |t: f64, _: Side| v_function(&p, &tri, j, t, &g).unwrap();
            let direct = smoothness_degree(&f, &bps, 1);
            let identity = match prof.degrees[j] {
                Degree::Finite(k) if k >= 1 => Degree::AtLeast(1),
                Degree::AtLeast(_) => Degree::AtLeast(1),
                d => d,
            };
            assert_eq!(direct, identity, "j = {j}");
        }
    }

    #[test]
    fn q_lambda_cases() {
        let s = m(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let lti = lti_generator(s.clone(), 0.0).unwrap();
        let q = m(1, 2, &[1.0, -1.0]);
        for t in [0.0, 0.7, 3.1] {
            let ql = q_lambda(&lti, &q, t, None).unwrap();
            assert!((ql - &q * &s).amax() < 1e-12);
        }
        let tri = triangular();
        let q = m(1, 2, &[1.0, 0.0]);
        let ql = q_lambda(&tri, &q, 0.4, None).unwrap();
        assert!((ql - m(1, 2, &[0.0, 1.0])).amax() < 1e-14);
        let ql = q_lambda(&tri, &q, 1.0, Some(Side::Right)).unwrap();
        assert!((ql - m(1, 2, &[0.0, -1.0])).amax() < 1e-14);
        assert_eq!(q_lambda(&tri, &q, 1.0, None), Err(Error::BreakpointSide(1.0)));
        let zero = q_lambda(&tri, &Matrix::zeros(1, 2), 0.4, None).unwrap();
        assert_eq!(zero, Matrix::zeros(1, 2));
    }

    #[test]
    fn q_lambda_integral_identity() {
        let tri = triangular();
        let q = m(1, 2, &[1.0, 2.0]);
        let g = tri.align(&grid(7.3));
        let f = |t: f64, s: Side| q_lambda(&tri, &q, t, Some(s)).unwrap() * tri.eval(t, s);
        for t in [0.5, 1.0, 2.7, 7.3] {
            let lhs = &q * tri.eval(t, Side::Left);
            let rhs = &q * tri.eval(0.0, Side::Right) + repeated_integral(&f, 1, 0.0, t, &g).unwrap();
            assert!((lhs - rhs).amax() < 1e-6);
        }
    }

    #[test]
    fn necessity_checks() {
        let tri = triangular();
        let g = grid(10.0);
        let pa = plant(&[1.0, 0.0], &[0.0; 4], &[1.0, 0.0]);
        let prof = compute_profile(&pa, &tri, &g).unwrap();
        assert_eq!(check_relative_degree_necessity(&pa, &prof), Ok(Necessity::Fail));
        let pb = plant(&[1.0, 1.0], &[0.0; 4], &[1.0, 0.0]);
        let prof = compute_profile(&pb, &tri, &g).unwrap();
        assert_eq!(check_relative_degree_necessity(&pb, &prof), Ok(Necessity::Pass));
        let prof = compute_profile(&pa, &rotation(), &g).unwrap();
        assert_eq!(check_relative_degree_necessity(&pa, &prof), Ok(Necessity::Pass));
        let pd = pb.with_feedthrough(1.0).unwrap();
        assert_eq!(
            check_relative_degree_necessity(&pd, &prof),
            Err(Error::NonzeroFeedthrough)
        );
    }

    /// Nested cumulative trapezoid on fine grids containing the
    /// breakpoints, Richardson-extrapolated over two step sizes.
    fn nested_oracle(h: &dyn Fn(f64, Side) -> Matrix, k: usize, t: f64, bps: &[f64]) -> Matrix {
        let coarse = nested_trapezoid(h, k, t, bps, 2e-3);
        let fine = nested_trapezoid(h, k, t, bps, 1e-3);
        (fine * 4.0 - coarse) / 3.0
    }

    fn nested_trapezoid(
        h: &dyn Fn(f64, Side) -> Matrix,
        k: usize,
        t: f64,
        bps: &[f64],
        step: f64,
    ) -> Matrix {
        let g = TimeGrid::new(0.0, t, step, bps).unwrap();
        let tr = Trajectory::sample(&g, |s, side| Ok(h(s, side))).unwrap();
        let mut vals: Vec<(f64, Matrix)> = tr.iter().map(|(s, _, v)| (s, v.clone())).collect();
        for _ in 0..k {
            let mut acc = vals[0].1.clone() * 0.0;
            let mut next = vec![(vals[0].0, acc.clone())];
            for w in vals.windows(2) {
                acc += (&w[0].1 + &w[1].1) * (0.5 * (w[1].0 - w[0].0));
                next.push((w[1].0, acc.clone()));
            }
            vals = next;
        }
        vals.last().unwrap().1.clone()
    }

    #[test]
    fn v_function_cases() {
        let tri = triangular();
        let g = grid(8.0);
        let pb = plant(&[1.0, 1.0], &[0.3, -1.0, 2.0, 0.7], &[1.0, 0.5]);
        let ql = pb.q() * tri.eval(3.3, Side::Right);
        assert_eq!(v_function(&pb, &tri, 0, 3.3, &g).unwrap(), ql);
        // P in ker C and invariant under A: every integrand vanishes.
        let inert = Plant::new(
            m(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            m(2, 1, &[1.0, 1.0]),
            m(1, 2, &[1.0, 0.0]),
            0.0,
            m(2, 2, &[0.0, 0.0, 1.0, 1.0]),
            m(1, 2, &[1.0, 0.5]),
        )
        .unwrap();
        for j in 0..=2 {
            let v = v_function(&inert, &tri, j, 3.3, &g).unwrap();
            assert_eq!(v, inert.q() * tri.eval(3.3, Side::Right));
        }
        let bps = tri.breakpoints(0.0, 8.0);
        let row = pb.coupling_row(0);
        let h = |s: f64, side: Side| &row * tri.eval(s, side);
        for t in [0.25, 1.0, 4.9, 8.0] {
            let v1 = v_function(&pb, &tri, 1, t, &g).unwrap();
            let oracle = pb.q() * tri.eval(t, Side::Right) + nested_oracle(&h, 1, t, &bps);
            assert!((v1 - oracle).amax() < 1e-7 * (1.0 + t));
        }
        assert!(matches!(v_function(&pb, &tri, 3, 1.0, &g), Err(Error::InvalidArgument(_))));
        assert!(matches!(v_function(&pb, &tri, 1, -1.0, &g), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn ladder_recursion() {
        let tri = triangular();
        let g = grid(6.0);
        let pb = plant(&[1.0, 1.0], &[0.3, -1.0, 2.0, 0.7], &[1.0, 0.5]);
        let bps = tri.breakpoints(0.0, 6.0);
        for i in 0..100 {
            let t = 0.06 * (i + 1) as f64 - 0.0123;
            let v1 = v_function(&pb, &tri, 1, t, &g).unwrap();
            let v2 = v_function(&pb, &tri, 2, t, &g).unwrap();
            let row = pb.coupling_row(1);
            let h = |s: f64, side: Side| &row * tri.eval(s, side);
            let oracle = nested_oracle(&h, 2, t, &bps);
            let err = (v2 - v1 - oracle).amax();
            assert!(err < 1e-7, "t = {t}: {err}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn degree_sequence_structure(
            a in proptest::collection::vec(-2.0f64..2.0, 9),
            p in proptest::collection::vec(-1.0f64..1.0, 6),
            q in proptest::collection::vec(-1.0f64..1.0, 2),
            c in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let plant = Plant::new(
                m(3, 3, &a),
                m(3, 1, &[0.0, 0.0, 1.0]),
                m(1, 3, &c),
                0.0,
                m(3, 2, &p),
                m(1, 2, &q),
            ).unwrap();
            let prof = compute_profile(&plant, &triangular(), &grid(5.0)).unwrap();
            if let Some(js) = prof.jstar.exact() {
                if js >= 0 && js < 3 {
                    for (j, d) in prof.degrees.iter().enumerate() {
                        if (j as i64) <= js {
                            prop_assert!(d.is_at_least(j as i64), "{:?}", prof.degrees);
                        } else {
                            prop_assert_eq!(d.exact(), Some(js), "{:?}", prof.degrees);
                        }
                    }
                }
            }
            if prof.q_lambda_regular {
                prop_assert!(prof.lipschitz_q_lambda);
            }
        }
    }
}
