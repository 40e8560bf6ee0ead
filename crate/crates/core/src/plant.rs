//! SISO plant `x' = Ax + Bu + Pω`, `e = Cx + Du + Qω` and its structural
//! data.

use nalgebra::Complex;
use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, inverse, norm2, Matrix};

/// Relative threshold used when deciding `C A^(r-1) B ≠ 0`.
pub const EPS_RELATIVE_DEGREE: f64 = 1e-9;
/// Zeros with real part above `-EPS_MINIMUM_PHASE` are not stable.
pub const EPS_MINIMUM_PHASE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Plant {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: f64,
    p: Matrix,
    q: Matrix,
}

impl Plant {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: f64, p: Matrix, q: Matrix) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "A must be square with n >= 1, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.shape() != (n, 1) {
            return Err(Error::Dimension(format!("B must be {n}x1, got {:?}", b.shape())));
        }
        if c.shape() != (1, n) {
            return Err(Error::Dimension(format!("C must be 1x{n}, got {:?}", c.shape())));
        }
        let nu = p.ncols();
        if nu == 0 || p.nrows() != n {
            return Err(Error::Dimension(format!(
                "P must be {n}xν with ν >= 1, got {:?}",
                p.shape()
            )));
        }
        if q.shape() != (1, nu) {
            return Err(Error::Dimension(format!("Q must be 1x{nu}, got {:?}", q.shape())));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&p, "P"), (&q, "Q")] {
            ensure_finite(m, name)?;
        }
        if !d.is_finite() {
            return Err(Error::NonFinite("D".into()));
        }
        Ok(Self { a, b, c, d, p, q })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn p(&self) -> &Matrix {
        &self.p
    }
    pub fn q(&self) -> &Matrix {
        &self.q
    }
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn nu(&self) -> usize {
        self.p.ncols()
    }

    /// Same plant with exogenous coupling replaced.
    pub fn with_coupling(&self, p: Matrix, q: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone(), self.d, p, q)
    }

    pub fn with_feedthrough(&self, d: f64) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            d,
            self.p.clone(),
            self.q.clone(),
        )
    }

    /// State similarity `x ↦ W x`.
    pub fn transformed(&self, w: &Matrix) -> Result<Self> {
        let wi = inverse(w)
            .ok_or_else(|| Error::InvalidArgument("similarity transform is singular".into()))?;
        Self::new(
            w * &self.a * &wi,
            w * &self.b,
            &self.c * &wi,
            self.d,
            w * &self.p,
            self.q.clone(),
        )
    }

    /// Markov parameter `C A^k B`.
    fn markov(&self, k: usize) -> f64 {
        let mut v = self.b.clone();
        for _ in 0..k {
            v = &self.a * v;
        }
        (&self.c * v)[(0, 0)]
    }

    /// Row `C A^k P` feeding the `(k+1)`-fold integral of the smoothness
    /// ladder.
    pub fn coupling_row(&self, k: usize) -> Matrix {
        let mut v = self.p.clone();
        for _ in 0..k {
            v = &self.a * v;
        }
        &self.c * v
    }

    /// Relative degree: `0` when `D ≠ 0`, otherwise the smallest `r` with
    /// `C A^(r-1) B ≠ 0` (relative to `‖C‖‖B‖ max(1, ‖A‖^(r-1))`).
    pub fn relative_degree(&self) -> Result<usize> {
        if self.d != 0.0 {
            return Ok(0);
        }
        let na = norm2(&self.a);
        let base = self.c.norm() * self.b.norm();
        for r in 1..=self.n() {
            let scale = base * na.powi(r as i32 - 1).max(1.0);
            if self.markov(r - 1).abs() > EPS_RELATIVE_DEGREE * scale {
                return Ok(r);
            }
        }
        Err(Error::NoRelativeDegree)
    }

    /// Real coefficients of the zero polynomial `det [[sI-A, -B], [C, D]]`,
    /// lowest order first, with exact degree `n - r`.
    pub fn zero_polynomial(&self) -> Result<Vec<f64>> {
        let r = match self.relative_degree() {
            Ok(r) => r,
            Err(Error::NoRelativeDegree) => return Err(Error::DegeneratePencil),
            Err(e) => return Err(e),
        };
        let n = self.n();
        let deg = n - r;
        let rho = norm2(&self.a).max(1.0);
        let m = n + 1;
        let samples: Vec<Complex<f64>> = (0..m)
            .map(|k| {
                let ang = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                let s = Complex::from_polar(rho, ang);
                self.rosenbrock_det(s)
            })
            .collect();
        let mut coeffs = Vec::with_capacity(deg + 1);
        for j in 0..=deg {
            let mut acc = Complex::new(0.0, 0.0);
            for (k, v) in samples.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (j * k) as f64 / m as f64;
                acc += v * Complex::from_polar(1.0, ang);
            }
            coeffs.push(acc.re / m as f64 / rho.powi(j as i32));
        }
        let lead = if r == 0 { self.d } else { self.markov(r - 1) };
        coeffs[deg] = lead;
        Ok(coeffs)
    }

    fn rosenbrock_det(&self, s: Complex<f64>) -> Complex<f64> {
        let n = self.n();
        let mut m = nalgebra::DMatrix::<Complex<f64>>::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex::new(-self.a[(i, j)], 0.0);
            }
            m[(i, i)] += s;
            m[(i, n)] = Complex::new(-self.b[(i, 0)], 0.0);
            m[(n, i)] = Complex::new(self.c[(0, i)], 0.0);
        }
        m[(n, n)] = Complex::new(self.d, 0.0);
        m.lu().determinant()
    }

    /// Finite transmission zeros sorted by real part, then imaginary part.
    pub fn transmission_zeros(&self) -> Result<Vec<Complex<f64>>> {
        let coeffs = self.zero_polynomial()?;
        let mut zeros = polynomial_roots(&coeffs);
        sort_complex(&mut zeros);
        Ok(zeros)
    }

    pub fn is_minimum_phase(&self) -> Result<bool> {
        Ok(self
            .transmission_zeros()?
            .iter()
            .all(|z| z.re < -EPS_MINIMUM_PHASE))
    }

    /// Normal form for `D = 0`, `r = 1`.
    pub fn normal_form(&self) -> Result<NormalForm> {
        NormalForm::new(self)
    }

    /// Zero-dynamics matrix `A_z` with `σ(A_z)` equal to the transmission
    /// zeros: `A - B C / D` when `D ≠ 0`, the `A11` block when `r = 1`, and the
    /// companion matrix of the zero polynomial otherwise.
    pub fn zero_dynamics(&self) -> Result<Matrix> {
        match self.relative_degree()? {
            0 => Ok(&self.a - &self.b * &self.c / self.d),
            1 => Ok(self.normal_form()?.a11),
            _ => Ok(companion(&self.zero_polynomial()?)),
        }
    }
}

/// Companion matrix of a polynomial given lowest order first.
pub fn companion(coeffs: &[f64]) -> Matrix {
    let deg = coeffs.len().saturating_sub(1);
    let mut m = Matrix::zeros(deg, deg);
    if deg == 0 {
        return m;
    }
    let lead = coeffs[deg];
    for i in 1..deg {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..deg {
        m[(i, deg - 1)] = -coeffs[i] / lead;
    }
    m
}

pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let c = companion(coeffs);
    if c.nrows() == 0 {
        return Vec::new();
    }
    c.complex_eigenvalues().iter().cloned().collect()
}

pub fn eigenvalues(m: &Matrix) -> Vec<Complex<f64>> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<_> = m.complex_eigenvalues().iter().cloned().collect();
    sort_complex(&mut v);
    v
}

pub fn sort_complex(v: &mut [Complex<f64>]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
}

/// Largest distance from any element of `a` to its nearest element of `b`
/// (and vice versa); `inf` when the sizes differ.
pub fn spectral_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let one_way = |x: &[Complex<f64>], y: &[Complex<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

/// Coordinates `[z; y] = T x` with `y = C x` and `T1 B = 0` for a plant with
/// `D = 0`, `r = 1`. The rows of `T1` are orthonormal.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub t: Matrix,
    pub t_inv: Matrix,
    pub a11: Matrix,
    pub a12: Matrix,
    pub a21: Matrix,
    pub a22: f64,
    pub p1: Matrix,
    pub p2: Matrix,
    pub b: f64,
    pub g1: Matrix,
    pub g2: Matrix,
}

impl NormalForm {
    fn new(plant: &Plant) -> Result<Self> {
        if plant.d != 0.0 {
            return Err(Error::NonzeroFeedthrough);
        }
        let r = plant.relative_degree()?;
        if r != 1 {
            return Err(Error::RelativeDegreeNotOne(r));
        }
        let n = plant.n();
        let c = &plant.c;
        let b = (c * &plant.b)[(0, 0)];
        // Rows of T1 annihilate B so that the z-dynamics carry no input.
        let t1 = orthogonal_complement_rows(&plant.b.transpose());
        let mut t = Matrix::zeros(n, n);
        t.view_mut((0, 0), (n - 1, n)).copy_from(&t1);
        t.view_mut((n - 1, 0), (1, n)).copy_from(c);
        let proj = Matrix::identity(n, n) - &plant.b * c / b;
        let mut t_inv = Matrix::zeros(n, n);
        t_inv
            .view_mut((0, 0), (n, n - 1))
            .copy_from(&(proj * t1.transpose()));
        t_inv
            .view_mut((0, n - 1), (n, 1))
            .copy_from(&(&plant.b / b));

        let ta = &t * &plant.a * &t_inv;
        let tp = &t * &plant.p;
        let a11 = ta.view((0, 0), (n - 1, n - 1)).into_owned();
        let a12 = ta.view((0, n - 1), (n - 1, 1)).into_owned();
        let a21 = ta.view((n - 1, 0), (1, n - 1)).into_owned();
        let a22 = ta[(n - 1, n - 1)];
        let p1 = tp.rows(0, n - 1).into_owned();
        let p2 = tp.rows(n - 1, 1).into_owned();
        let g1 = &p1 - &a12 * &plant.q;
        let g2 = &p2 - &plant.q * a22;
        Ok(Self {
            t,
            t_inv,
            a11,
            a12,
            a21,
            a22,
            p1,
            p2,
            b,
            g1,
            g2,
        })
    }
}

/// Orthonormal rows spanning the orthogonal complement of the row vector `c`, built from
/// a Householder reflector and sign-normalised so each row's first nonzero
/// entry is positive.
fn orthogonal_complement_rows(c: &Matrix) -> Matrix {
    let n = c.ncols();
    let u = c.transpose() / c.norm();
    let s = if u[(0, 0)] >= 0.0 { -1.0 } else { 1.0 };
    let mut w = u.clone();
    w[(0, 0)] -= s;
    let ww = w.norm_squared();
    let h = if ww == 0.0 {
        Matrix::identity(n, n)
    } else {
        Matrix::identity(n, n) - &w * w.transpose() * (2.0 / ww)
    };
    let mut rows = h.columns(1, n - 1).transpose();
    for mut row in rows.row_iter_mut() {
        if let Some(first) = row.iter().find(|v| v.abs() > 1e-14).cloned() {
            if first < 0.0 {
                row.neg_mut();
            }
        }
    }
    rows
}
