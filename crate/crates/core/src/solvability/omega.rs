use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exogen::Generator;
use crate::numerics::{expm, inverse, kron, Matrix, Side, TimeGrid, TrajSegment, Trajectory};

/// Propagates `Ω(t) = Φ(t, t0) Ω0 + ∫_{t0}^t Φ(t, τ) dτ` with
/// `Φ(t, τ) = (Λ(τ) Λ(t)^{-1})ᵀ ⊗ e^{A_z (t - τ)}`, one grid step at a time
/// via `Φ(t2, τ) = Φ(t2, t1) Φ(t1, τ)`. Each local integral uses Simpson's
/// rule; at breakpoints `Ω` picks up the jump `(Λ(b-) Λ(b+)^{-1})ᵀ ⊗ I`.
pub(crate) struct OmegaPropagator<'a> {
    az: &'a Matrix,
    gen: &'a Generator,
    /// Multiplies `e^{A_z s}` on the right inside every integrand, e.g. a
    /// spectral projector.
    projector: Option<Matrix>,
    cache: RefCell<HashMap<u64, (Matrix, Matrix)>>,
}

impl<'a> OmegaPropagator<'a> {
    pub fn new(az: &'a Matrix, gen: &'a Generator) -> Self {
        Self {
            az,
            gen,
            projector: None,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn with_projector(mut self, p: Matrix) -> Self {
        self.projector = Some(p);
        self
    }

    pub fn dim(&self) -> usize {
        self.az.nrows() * self.gen.dim()
    }

    /// `(e^{A_z h}, e^{A_z h / 2})`, projected when a projector is set.
    fn exps(&self, h: f64) -> (Matrix, Matrix) {
        let key = h.to_bits();
        if let Some(e) = self.cache.borrow().get(&key) {
            return e.clone();
        }
        let mut e = expm(self.az, h).expect("A_z validated");
        let mut eh = expm(self.az, 0.5 * h).expect("A_z validated");
        if let Some(p) = &self.projector {
            e = e * p;
            eh = eh * p;
        }
        self.cache.borrow_mut().insert(key, (e.clone(), eh.clone()));
        (e, eh)
    }

    fn eye_m(&self) -> Matrix {
        match &self.projector {
            Some(p) => p.clone(),
            None => Matrix::identity(self.az.nrows(), self.az.nrows()),
        }
    }

    /// Transition `Φ(t2, t1)` (unprojected) and the local integral
    /// `∫_{t1}^{t2} Φ(t2, τ) dτ` for a step inside one segment.
    fn forward_step(&self, t1: f64, t2: f64) -> (Matrix, Matrix) {
        let h = t2 - t1;
        let tm = t1 + 0.5 * h;
        let l2i = self.gen.inv(t2, Side::Left);
        let x1 = self.gen.eval(t1, Side::Right) * &l2i;
        let xm = self.gen.eval(tm, Side::Right) * &l2i;
        let x2 = self.gen.eval(t2, Side::Left) * &l2i;
        let full = expm(self.az, h).expect("A_z validated");
        let (e, eh) = self.exps(h);
        let phi = kron(&x1.transpose(), &full);
        let local = (kron(&x1.transpose(), &e)
            + kron(&xm.transpose(), &eh) * 4.0
            + kron(&x2.transpose(), &self.eye_m()))
            * (h / 6.0);
        (phi, local)
    }

    /// Transition `Φ(t1, t2)` and `∫_{t1}^{t2} Φ(t1, τ) dτ` for `t1 < t2`
    /// inside one segment, used for backward sweeps.
    fn backward_step(&self, t1: f64, t2: f64) -> (Matrix, Matrix) {
        let h = t2 - t1;
        let tm = t1 + 0.5 * h;
        let l1i = self.gen.inv(t1, Side::Right);
        let x1 = self.gen.eval(t1, Side::Right) * &l1i;
        let xm = self.gen.eval(tm, Side::Right) * &l1i;
        let x2 = self.gen.eval(t2, Side::Left) * &l1i;
        let full = expm(self.az, -h).expect("A_z validated");
        let (e, eh) = self.exps(-h);
        let phi = kron(&x2.transpose(), &full);
        let local = (kron(&x1.transpose(), &self.eye_m())
            + kron(&xm.transpose(), &eh) * 4.0
            + kron(&x2.transpose(), &e))
            * (h / 6.0);
        (phi, local)
    }

    /// Maps `Ω(b-)` to `Ω(b+)`: `(Λ(b-) Λ(b+)^{-1})ᵀ ⊗ I`. With `back`, the
    /// inverse map `(Λ(b+) Λ(b-)^{-1})ᵀ ⊗ I`.
    fn jump(&self, b: f64, back: bool) -> Matrix {
        let x = if back {
            self.gen.eval(b, Side::Right) * self.gen.inv(b, Side::Left)
        } else {
            self.gen.eval(b, Side::Left) * self.gen.inv(b, Side::Right)
        };
        kron(&x.transpose(), &Matrix::identity(self.az.nrows(), self.az.nrows()))
    }

    /// Forward sweep from `omega0` at `grid.t0()` (right limit). `reset`
    /// replaces the right limit at the listed breakpoints by a fixed value;
    /// `project` is applied to every new value.
    pub fn forward(
        &self,
        omega0: &Matrix,
        grid: &TimeGrid,
        reset: Option<(&[f64], &Matrix)>,
        project: Option<&Matrix>,
    ) -> Result<Trajectory> {
        let d = self.dim();
        if omega0.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "Ω0 must be {d}x{d}, got {}x{}",
                omega0.nrows(),
                omega0.ncols()
            )));
        }
        let mut omega = omega0.clone();
        let mut segments = Vec::with_capacity(grid.segments().len());
        for (k, nodes) in grid.segments().iter().enumerate() {
            if k > 0 {
                let b = nodes[0];
                let hit = reset.and_then(|(times, v)| {
                    times
                        .iter()
                        .any(|r| (r - b).abs() <= 1e-9 * b.abs().max(1.0))
                        .then_some(v)
                });
                omega = match hit {
                    Some(v) => v.clone(),
                    None => self.jump(b, false) * &omega,
                };
            }
            let mut values = Vec::with_capacity(nodes.len());
            values.push(omega.clone());
            for w in nodes.windows(2) {
                let (phi, local) = self.forward_step(w[0], w[1]);
                omega = phi * &omega + local;
                if let Some(p) = project {
                    omega = p * omega;
                }
                if !omega.iter().all(|v| v.is_finite()) {
                    return Err(Error::BlowUp { time: w[1] });
                }
                values.push(omega.clone());
            }
            segments.push(TrajSegment {
                times: nodes.clone(),
                values,
            });
        }
        Ok(Trajectory { segments })
    }

    /// Backward sweep of `Ω_u(t) = -∫_t^{T} Φ(t, τ) dτ` (with the projector
    /// applied inside) from `Ω_u(T) = 0` at `grid.t_end()`.
    pub fn backward(&self, grid: &TimeGrid) -> Result<Trajectory> {
        let d = self.dim();
        let mut omega = Matrix::zeros(d, d);
        let mut segments: Vec<TrajSegment> = Vec::with_capacity(grid.segments().len());
        let nseg = grid.segments().len();
        for (k, nodes) in grid.segments().iter().enumerate().rev() {
            if k + 1 < nseg {
                omega = self.jump(*nodes.last().unwrap(), true) * &omega;
            }
            let mut values = vec![omega.clone()];
            for w in nodes.windows(2).rev() {
                let (phi, local) = self.backward_step(w[0], w[1]);
                omega = phi * &omega - local;
                if !omega.iter().all(|v| v.is_finite()) {
                    return Err(Error::BlowUp { time: w[0] });
                }
                values.push(omega.clone());
            }
            values.reverse();
            segments.push(TrajSegment {
                times: nodes.clone(),
                values,
            });
        }
        segments.reverse();
        Ok(Trajectory { segments })
    }
}

/// Matrix sign function by scaled Newton iteration; `None` when `m` has
/// eigenvalues on or too near the imaginary axis.
pub(crate) fn matrix_sign(m: &Matrix) -> Option<Matrix> {
    let n = m.nrows();
    let mut x = m.clone();
    for _ in 0..100 {
        let xi = inverse(&x)?;
        let det = x.determinant().abs();
        let mu = if det > 0.0 && det.is_finite() {
            det.powf(-1.0 / n as f64)
        } else {
            1.0
        };
        let next = (&x * mu + xi / mu) * 0.5;
        let diff = (&next - &x).norm() / next.norm().max(1.0);
        x = next;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        if diff < 1e-14 {
            break;
        }
    }
    let id = Matrix::identity(n, n);
    ((&x * &x - &id).amax() < 1e-8).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exogen::lti_generator;

    fn scalar_gen() -> Generator {
        lti_generator(Matrix::zeros(1, 1), 0.0).unwrap()
    }

    #[test]
    fn scalar_decay_closed_form() {
        let az = Matrix::from_element(1, 1, -1.0);
        let g = scalar_gen();
        let grid = TimeGrid::new(0.0, 10.0, 0.01, &[]).unwrap();
        let tr = OmegaPropagator::new(&az, &g)
            .forward(&Matrix::zeros(1, 1), &grid, None, None)
            .unwrap();
        for (t, _, v) in tr.iter() {
            assert!((v[(0, 0)] - (1.0 - (-t).exp())).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_zero_grows_linearly() {
        let az = Matrix::zeros(1, 1);
        let g = scalar_gen();
        let grid = TimeGrid::new(0.0, 10.0, 0.1, &[]).unwrap();
        let tr = OmegaPropagator::new(&az, &g)
            .forward(&Matrix::zeros(1, 1), &grid, None, None)
            .unwrap();
        for (t, _, v) in tr.iter() {
            assert!((v[(0, 0)] - t).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_sweep_closed_form() {
        // Ω_u(t) = -∫_t^T e^{(t - τ)} dτ = -(1 - e^{t - T}).
        let az = Matrix::from_element(1, 1, 1.0);
        let g = scalar_gen();
        let grid = TimeGrid::new(0.0, 20.0, 0.01, &[]).unwrap();
        let tr = OmegaPropagator::new(&az, &g).backward(&grid).unwrap();
        for (t, _, v) in tr.iter() {
            assert!((v[(0, 0)] + 1.0 - (t - 20.0).exp()).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_function() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 3.0, 0.0, -2.0]);
        let s = matrix_sign(&m).unwrap();
        let expect = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        assert!((s - expect).amax() < 1e-12);
        let rot = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matrix_sign(&rot).is_none());
    }
}
