//! Constructive solutions `(Π_x, Δ)` of the regulator equations, written
//! through `Ψ_x = Π_x Λ`:
//!
//! ```text
//! Ψ_x' = A Ψ_x + (B Δ + P) Λ,    0 = C Ψ_x + (D Δ + Q) Λ.
//! ```
//!
//! With `D ≠ 0` the algebraic row eliminates `Δ` and `Ψ̂ = Π̂ Λ` obeys
//! `Ψ̂' = A_π Ψ̂ + P_π Λ`. With `D = 0` and unit relative degree the normal
//! form pins the output coordinate to `-QΛ` and leaves
//! `Ψ̄_z' = A11 Ψ̄_z + G1 Λ` for the zero-dynamics coordinates.

mod pipeline;
mod simulate;

use serde::ser::SerializeStruct;
use serde::Serialize;

pub use pipeline::{
    solvability_pipeline, InitialCondition, Overall, PipelineOptions, PlantSummary, SolvabilityReport,
    UnsolvableReason,
};
pub use simulate::{simulate_error_zeroing, SimTrace};

use crate::error::{Error, Result};
use crate::exogen::Generator;
use crate::numerics::{
    ensure_finite, norm2, solve_sylvester, to_rows, Matrix, Side, TimeGrid, TrajSegment, Trajectory,
};
use crate::plant::{eigenvalues, NormalForm, Plant};
use crate::smoothness::q_lambda;
use crate::solvability::{classify_growth, matrix_sign};

/// Certification thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    /// Bound on `‖CΨ_x + (DΔ + Q)Λ‖` at every node.
    pub res: f64,
    /// Bound on the windowed log-growth slope of `max(‖Π_x‖, ‖Δ‖)`.
    pub slope: f64,
    /// Bound on the integrated residual of the differential row, per unit
    /// time and relative to `1 + sup ‖Ψ_x'‖`.
    pub dynamics: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            res: 1e-6,
            slope: 1e-3,
            dynamics: 1e-5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    /// `D ≠ 0`.
    Feedthrough,
    /// `D = 0`, relative degree one.
    UnitaryRelativeDegree,
}

/// How the internal initial value was chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    Sylvester,
    Given,
    /// Stable part propagated forward from zero, unstable part backward from
    /// beyond the horizon.
    Bounded,
}

#[derive(Clone, Debug)]
enum Reduction {
    Feedthrough { c: Matrix, d: f64, q: Matrix },
    Unit(NormalForm),
}

/// The reduced ODE `ψ' = a ψ + forcing Λ` together with the maps back to
/// `(Π_x, Δ, Ψ_x)`.
#[derive(Clone, Debug)]
struct Model {
    plant: Plant,
    gen: Generator,
    a: Matrix,
    forcing: Matrix,
    reduction: Reduction,
}

/// All solution quantities at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionPoint {
    /// `Π̂` (feedthrough) or `Π̄_z` (unit relative degree).
    pub pi_internal: Matrix,
    pub pi_x: Matrix,
    pub delta: Matrix,
    pub psi_x: Matrix,
}

impl Model {
    fn new(plant: &Plant, gen: &Generator) -> Result<Self> {
        if gen.dim() != plant.nu() {
            return Err(Error::Dimension(format!(
                "generator dimension {} does not match plant exogenous dimension {}",
                gen.dim(),
                plant.nu()
            )));
        }
        let d = plant.d();
        if d != 0.0 {
            let a = plant.a() - plant.b() * plant.c() / d;
            let forcing = plant.p() - plant.b() * plant.q() / d;
            return Ok(Self {
                plant: plant.clone(),
                gen: gen.clone(),
                a,
                forcing,
                reduction: Reduction::Feedthrough {
                    c: plant.c().clone(),
                    d,
                    q: plant.q().clone(),
                },
            });
        }
        let nf = plant.normal_form()?;
        Ok(Self {
            plant: plant.clone(),
            gen: gen.clone(),
            a: nf.a11.clone(),
            forcing: nf.g1.clone(),
            reduction: Reduction::Unit(nf),
        })
    }

    fn kind(&self) -> SolutionKind {
        match self.reduction {
            Reduction::Feedthrough { .. } => SolutionKind::Feedthrough,
            Reduction::Unit(_) => SolutionKind::UnitaryRelativeDegree,
        }
    }

    fn rhs(&self, t: f64, side: Side, psi: &Matrix) -> Matrix {
        &self.a * psi + &self.forcing * self.gen.eval(t, side)
    }

    fn point(&self, t: f64, side: Side, psi: &Matrix) -> Result<SolutionPoint> {
        let lam = self.gen.eval(t, side);
        let inv = self.gen.inv(t, side);
        if !inv.iter().all(|v| v.is_finite()) {
            return Err(Error::NearSingular {
                time: t,
                cond: f64::INFINITY,
            });
        }
        let pi_internal = psi * &inv;
        let (pi_x, delta, psi_x) = match &self.reduction {
            Reduction::Feedthrough { c, d, q } => {
                let delta = -(c * &pi_internal + q) / *d;
                (pi_internal.clone(), delta, psi.clone())
            }
            Reduction::Unit(nf) => {
                let q = self.plant.q();
                let ql = q_lambda(&self.gen, q, t, Some(side))?;
                let delta = -(ql + &nf.g2 + &nf.a21 * &pi_internal) / nf.b;
                let pi_x = &nf.t_inv * stack(&pi_internal, &(-q));
                let psi_x = &nf.t_inv * stack(psi, &(-(q * &lam)));
                (pi_x, delta, psi_x)
            }
        };
        Ok(SolutionPoint {
            pi_internal,
            pi_x,
            delta,
            psi_x,
        })
    }
}

fn stack(top: &Matrix, bottom: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(top.nrows() + bottom.nrows(), bottom.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    out
}

/// A sampled solution with one-sided values at breakpoints.
#[derive(Clone, Debug)]
pub struct RegulatorSolution {
    pub kind: SolutionKind,
    pub initial: InitialKind,
    pub grid: TimeGrid,
    /// `Π̂` or `Π̄_z`.
    pub pi_internal: Trajectory,
    pub pi_x: Trajectory,
    pub delta: Trajectory,
    pub psi_x: Trajectory,
    /// One entry per node in [`Trajectory::iter`] order.
    pub residual_trace: Vec<f64>,
    pub max_residual: f64,
    pub dynamics_residual: f64,
    pub sup_pi: f64,
    pub sup_delta: f64,
    pub growth_slope: f64,
    pub certified: bool,
    model: Model,
    psi: Trajectory,
}

impl RegulatorSolution {
    fn build(model: Model, grid: TimeGrid, initial: InitialKind, psi: Trajectory) -> Result<Self> {
        let mut pi_internal = Vec::with_capacity(psi.segments.len());
        let mut pi_x = Vec::with_capacity(psi.segments.len());
        let mut delta = Vec::with_capacity(psi.segments.len());
        let mut psi_x = Vec::with_capacity(psi.segments.len());
        let nseg = psi.segments.len();
        for (k, seg) in psi.segments.iter().enumerate() {
            let last = seg.times.len() - 1;
            let mut cols: [Vec<Matrix>; 4] = Default::default();
            for (i, (&t, v)) in seg.times.iter().zip(&seg.values).enumerate() {
                // Same convention as `Trajectory::iter`: only interior
                // breakpoints get a left-sided sample.
                let side = if i == last && last > 0 && k + 1 < nseg {
                    Side::Left
                } else {
                    Side::Right
                };
                let p = model.point(t, side, v)?;
                ensure_finite(&p.delta, "Δ").map_err(|_| Error::BlowUp { time: t })?;
                cols[0].push(p.pi_internal);
                cols[1].push(p.pi_x);
                cols[2].push(p.delta);
                cols[3].push(p.psi_x);
            }
            let [a, b, c, d] = cols;
            let times = seg.times.clone();
            pi_internal.push(TrajSegment { times: times.clone(), values: a });
            pi_x.push(TrajSegment { times: times.clone(), values: b });
            delta.push(TrajSegment { times: times.clone(), values: c });
            psi_x.push(TrajSegment { times, values: d });
        }
        let mut sol = Self {
            kind: model.kind(),
            initial,
            grid,
            pi_internal: Trajectory { segments: pi_internal },
            pi_x: Trajectory { segments: pi_x },
            delta: Trajectory { segments: delta },
            psi_x: Trajectory { segments: psi_x },
            residual_trace: Vec::new(),
            max_residual: 0.0,
            dynamics_residual: 0.0,
            sup_pi: 0.0,
            sup_delta: 0.0,
            growth_slope: 0.0,
            certified: false,
            model,
            psi,
        };
        sol.residual_trace = dae_residual(&sol.model.plant, &sol.model.gen, &sol);
        sol.max_residual = sol.residual_trace.iter().cloned().fold(0.0, nan_max);
        sol.dynamics_residual = dynamics_residual(&sol.model.plant, &sol.model.gen, &sol)?;
        sol.sup_pi = sol.pi_x.sup_by(norm2);
        sol.sup_delta = sol.delta.sup_by(norm2);
        let (times, pis) = sol.pi_x.norm_series(norm2);
        let (_, deltas) = sol.delta.norm_series(norm2);
        let floor = 1e-8 * sol.sup_pi.max(sol.sup_delta).max(1.0);
        let norms: Vec<f64> = pis.iter().zip(&deltas).map(|(a, b)| a.max(*b).max(floor)).collect();
        sol.growth_slope = classify_growth(&times, &norms).slope;
        sol.certify(&Tolerances::default());
        Ok(sol)
    }

    /// Re-evaluates [`RegulatorSolution::certified`] against `tol`.
    pub fn certify(&mut self, tol: &Tolerances) -> bool {
        self.certified = self.max_residual <= tol.res
            && self.dynamics_residual <= tol.dynamics
            && self.sup_pi.is_finite()
            && self.sup_delta.is_finite()
            && self.growth_slope < tol.slope;
        self.certified
    }

    /// Internal initial value `Π̂(t0)` or `Π̄_z(t0)`.
    pub fn initial_value(&self) -> &Matrix {
        self.pi_internal.first().expect("non-empty grid")
    }

    pub fn plant(&self) -> &Plant {
        &self.model.plant
    }

    pub fn generator(&self) -> &Generator {
        &self.model.gen
    }

    /// Evaluates the solution between nodes by cubic Hermite interpolation
    /// of the reduced state, whose derivative is known exactly.
    pub fn eval(&self, t: f64, side: Side) -> Result<SolutionPoint> {
        let psi = self.psi_at(t, side)?;
        self.model.point(t, side, &psi)
    }

    fn psi_at(&self, t: f64, side: Side) -> Result<Matrix> {
        let segs = &self.psi.segments;
        let tol = 1e-11 * t.abs().max(1.0);
        if t < self.grid.t0() - tol || t > self.grid.t_end() + tol {
            return Err(Error::InvalidTime(format!(
                "t = {t} is outside the solution grid [{}, {}]",
                self.grid.t0(),
                self.grid.t_end()
            )));
        }
        let k = match side {
            Side::Left => segs.partition_point(|s| *s.times.last().unwrap() < t - tol),
            Side::Right => segs.partition_point(|s| *s.times.last().unwrap() <= t + tol),
        }
        .min(segs.len() - 1);
        let seg = &segs[k];
        if seg.times.len() == 1 {
            return Ok(seg.values[0].clone());
        }
        let j = seg.times.partition_point(|x| *x <= t).clamp(1, seg.times.len() - 1) - 1;
        let (ta, tb) = (seg.times[j], seg.times[j + 1]);
        let (ya, yb) = (&seg.values[j], &seg.values[j + 1]);
        if (t - ta).abs() <= tol {
            return Ok(ya.clone());
        }
        if (t - tb).abs() <= tol {
            return Ok(yb.clone());
        }
        let h = tb - ta;
        let fa = self.model.rhs(ta, Side::Right, ya);
        let fb = self.model.rhs(tb, Side::Left, yb);
        let s = (t - ta) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        Ok(ya * h00 + fa * (h10 * h) + yb * h01 + fb * (h11 * h))
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if b.is_nan() {
        f64::INFINITY
    } else {
        a.max(b)
    }
}

/// Reports carry a summary; the samples go to CSV.
impl Serialize for RegulatorSolution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("RegulatorSolution", 11)?;
        st.serialize_field("kind", &self.kind)?;
        st.serialize_field("initial", &self.initial)?;
        st.serialize_field("initial_value", &to_rows(self.initial_value()))?;
        st.serialize_field("nodes", &self.pi_x.len())?;
        st.serialize_field("max_residual", &self.max_residual)?;
        st.serialize_field("dynamics_residual", &self.dynamics_residual)?;
        st.serialize_field("sup_pi", &self.sup_pi)?;
        st.serialize_field("sup_delta", &self.sup_delta)?;
        st.serialize_field("growth_slope", &self.growth_slope)?;
        st.serialize_field("certified", &self.certified)?;
        st.end()
    }
}

/// `‖CΨ_x(t) + (DΔ(t) + Q)Λ(t)‖` at every stored node, one-sided at
/// breakpoints.
pub fn dae_residual(plant: &Plant, gen: &Generator, sol: &RegulatorSolution) -> Vec<f64> {
    sol.psi_x
        .iter()
        .zip(sol.delta.iter())
        .map(|((t, ns, psi), (_, _, delta))| {
            let lam = gen.eval(t, ns.side());
            let r = plant.c() * psi + (delta * plant.d() + plant.q()) * lam;
            norm2(&r)
        })
        .collect()
}

/// Checks the differential row `Ψ_x' = AΨ_x + (BΔ + P)Λ` by comparing the
/// increment of `Ψ_x` over every grid interval against Simpson's rule for
/// the right-hand side. Returns the worst mismatch per unit time relative to
/// `1 + sup ‖rhs‖`.
pub fn dynamics_residual(plant: &Plant, gen: &Generator, sol: &RegulatorSolution) -> Result<f64> {
    let f = |t: f64, side: Side, psi_x: &Matrix, delta: &Matrix| {
        plant.a() * psi_x + (plant.b() * delta + plant.p()) * gen.eval(t, side)
    };
    let mut worst: f64 = 0.0;
    let mut sup_f: f64 = 0.0;
    for (k, seg) in sol.psi_x.segments.iter().enumerate() {
        let dseg = &sol.delta.segments[k];
        for j in 0..seg.times.len().saturating_sub(1) {
            let (ta, tb) = (seg.times[j], seg.times[j + 1]);
            let h = tb - ta;
            let tm = ta + 0.5 * h;
            let mid = sol.eval(tm, Side::Right)?;
            let fa = f(ta, Side::Right, &seg.values[j], &dseg.values[j]);
            let fm = f(tm, Side::Right, &mid.psi_x, &mid.delta);
            let fb = if k + 1 == sol.psi_x.segments.len() && j + 2 == seg.times.len() {
                let end = sol.eval(tb, Side::Left)?;
                f(tb, Side::Left, &end.psi_x, &end.delta)
            } else {
                f(tb, Side::Left, &seg.values[j + 1], &dseg.values[j + 1])
            };
            sup_f = sup_f.max(norm2(&fa)).max(norm2(&fb));
            let integral = (fa + fm * 4.0 + fb) * (h / 6.0);
            let mismatch = norm2(&(&seg.values[j + 1] - &seg.values[j] - integral)) / h;
            worst = nan_max(worst, mismatch);
        }
    }
    Ok(worst / (1.0 + sup_f))
}

/// `D ≠ 0`: propagates `Ψ̂` from `Ψ̂(t0) = Π0 Λ(t0)`.
pub fn solve_feedthrough(plant: &Plant, gen: &Generator, grid: &TimeGrid, pi0: &Matrix) -> Result<RegulatorSolution> {
    if plant.d() == 0.0 {
        return Err(Error::ZeroFeedthrough);
    }
    solve_from(Model::new(plant, gen)?, grid, pi0, InitialKind::Given)
}

/// `D = 0`, relative degree one: propagates `Ψ̄_z` from
/// `Ψ̄_z(t0) = Π̄_z0 Λ(t0)`.
pub fn solve_unitary_rd(
    plant: &Plant,
    gen: &Generator,
    grid: &TimeGrid,
    pi_z0: &Matrix,
) -> Result<RegulatorSolution> {
    if plant.d() != 0.0 {
        return Err(Error::NonzeroFeedthrough);
    }
    solve_from(Model::new(plant, gen)?, grid, pi_z0, InitialKind::Given)
}

/// Either construction, seeded with `initial`.
pub fn solve_with(plant: &Plant, gen: &Generator, grid: &TimeGrid, initial: &InitialCondition) -> Result<RegulatorSolution> {
    let model = Model::new(plant, gen)?;
    let shape = (model.a.nrows(), plant.nu());
    match initial {
        InitialCondition::Given(m) => solve_from(model, grid, m, InitialKind::Given),
        InitialCondition::Zero => solve_from(model, grid, &Matrix::zeros(shape.0, shape.1), InitialKind::Zero),
        InitialCondition::Sylvester => {
            let x = sylvester_initial(plant, gen)?;
            solve_from(model, grid, &x, InitialKind::Sylvester)
        }
        InitialCondition::Bounded => solve_bounded_model(model, grid),
        InitialCondition::Auto => {
            let spectrum = eigenvalues(&model.a);
            let max_re = spectrum.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            if spectrum.is_empty() || max_re < -1e-9 {
                solve_from(model, grid, &Matrix::zeros(shape.0, shape.1), InitialKind::Zero)
            } else if let Ok(x) = sylvester_initial(plant, gen) {
                solve_from(model, grid, &x, InitialKind::Sylvester)
            } else {
                solve_bounded_model(model, grid)
            }
        }
    }
}

/// Bounded solution for a reduced matrix with no eigenvalues on the
/// imaginary axis, built from a forward sweep of the stable part and a
/// backward sweep of the unstable part.
pub fn solve_bounded(plant: &Plant, gen: &Generator, grid: &TimeGrid) -> Result<RegulatorSolution> {
    solve_bounded_model(Model::new(plant, gen)?, grid)
}

/// Warm start for an LTI generator: solves `A_r X − X S + F = 0` where
/// `(A_r, F)` is `(A_π, P_π)` or `(A11, G1)`. With `Λ(t0) = I` the
/// corresponding internal trajectory is constant.
pub fn sylvester_initial(plant: &Plant, gen: &Generator) -> Result<Matrix> {
    let s = gen
        .lti_matrix()
        .ok_or_else(|| Error::InvalidArgument("Sylvester warm start needs an LTI generator".into()))?;
    let model = Model::new(plant, gen)?;
    solve_sylvester(&model.a, s, &model.forcing)
}

fn solve_from(model: Model, grid: &TimeGrid, init: &Matrix, kind: InitialKind) -> Result<RegulatorSolution> {
    let grid = model.gen.align(grid);
    let expect = (model.a.nrows(), model.gen.dim());
    if init.shape() != expect {
        return Err(Error::Dimension(format!(
            "initial value must be {}x{}, got {}x{}",
            expect.0,
            expect.1,
            init.nrows(),
            init.ncols()
        )));
    }
    ensure_finite(init, "initial value")?;
    let psi0 = init * model.gen.eval(grid.t0(), Side::Right);
    let psi = sweep(|t, side, x| model.rhs(t, side, x), &psi0, &grid, false, None)?;
    RegulatorSolution::build(model, grid, kind, psi)
}

fn solve_bounded_model(model: Model, grid: &TimeGrid) -> Result<RegulatorSolution> {
    let grid = model.gen.align(grid);
    let m = model.a.nrows();
    let nu = model.gen.dim();
    if m == 0 {
        return solve_from(model, &grid, &Matrix::zeros(0, nu), InitialKind::Bounded);
    }
    let sign = matrix_sign(&model.a).ok_or_else(|| {
        Error::InvalidArgument("reduced dynamics have eigenvalues on the imaginary axis; no bounded split".into())
    })?;
    let id = Matrix::identity(m, m);
    let ps = (&id - &sign) * 0.5;
    let pu = (&id + &sign) * 0.5;
    let (t0, t_end) = (grid.t0(), grid.t_end());
    let stable = sweep(
        |t, side, x| &model.a * x + &ps * &model.forcing * model.gen.eval(t, side),
        &Matrix::zeros(m, nu),
        &grid,
        false,
        Some(&ps),
    )?;
    let slowest = eigenvalues(&model.a)
        .iter()
        .filter(|z| z.re > 0.0)
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    let psi = if slowest.is_finite() {
        let pad = (30.0 / slowest).clamp(1.0, 10.0 * (t_end - t0));
        let mut bps = grid.breakpoints().to_vec();
        bps.extend(model.gen.breakpoints(t_end, t_end + pad));
        bps.push(t_end);
        let ext = model.gen.align(&TimeGrid::new(t0, t_end + pad, grid.step(), &bps)?);
        let unstable = sweep(
            |t, side, x| &model.a * x + &pu * &model.forcing * model.gen.eval(t, side),
            &Matrix::zeros(m, nu),
            &ext,
            true,
            Some(&pu),
        )?;
        // The extended grid shares every node of `grid` up to `t_end`.
        let mut segments = Vec::with_capacity(stable.segments.len());
        for (s, u) in stable.segments.iter().zip(&unstable.segments) {
            if s.times.len() != u.times.len() {
                return Err(Error::InvalidArgument("extended grid does not nest the solution grid".into()));
            }
            let values = s.values.iter().zip(&u.values).map(|(a, b)| a + b).collect();
            segments.push(TrajSegment {
                times: s.times.clone(),
                values,
            });
        }
        Trajectory { segments }
    } else {
        stable
    };
    RegulatorSolution::build(model, grid, InitialKind::Bounded, psi)
}

/// Classical RK4 over `grid`, forwards from `x_start` at `t0` or backwards
/// from `x_start` at `t_end`, optionally projecting after every step so
/// that rounding cannot seed the complementary, exponentially growing
/// directions.
fn sweep<F>(rhs: F, x_start: &Matrix, grid: &TimeGrid, backward: bool, project: Option<&Matrix>) -> Result<Trajectory>
where
    F: Fn(f64, Side, &Matrix) -> Matrix,
{
    let segs = grid.segments();
    let mut out: Vec<TrajSegment> = segs
        .iter()
        .map(|nodes| TrajSegment {
            times: nodes.clone(),
            values: Vec::with_capacity(nodes.len()),
        })
        .collect();
    let mut x = x_start.clone();
    let order: Vec<usize> = if backward {
        (0..segs.len()).rev().collect()
    } else {
        (0..segs.len()).collect()
    };
    for k in order {
        let nodes = &segs[k];
        let mut values = vec![x.clone(); nodes.len()];
        let steps: Vec<(usize, usize)> = if backward {
            (1..nodes.len()).rev().map(|i| (i, i - 1)).collect()
        } else {
            (1..nodes.len()).map(|i| (i - 1, i)).collect()
        };
        for (from, to) in steps {
            let (t, t1) = (nodes[from], nodes[to]);
            let (s_from, s_to) = if backward {
                (Side::Left, Side::Right)
            } else {
                (Side::Right, Side::Left)
            };
            let h = t1 - t;
            let tm = t + 0.5 * h;
            let k1 = rhs(t, s_from, &x);
            let k2 = rhs(tm, Side::Right, &(&x + &k1 * (0.5 * h)));
            let k3 = rhs(tm, Side::Right, &(&x + &k2 * (0.5 * h)));
            let k4 = rhs(t1, s_to, &(&x + &k3 * h));
            x += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
            if let Some(p) = project {
                x = p * &x;
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::BlowUp { time: t1 });
            }
            values[to] = x.clone();
        }
        out[k].values = values;
    }
    Ok(Trajectory { segments: out })
}
