use super::ExplicitGenerator;
use crate::error::Result;
use crate::numerics::{ensure_finite, ensure_square, expm, Matrix, Side};

/// `Λ(t, t0) = e^{S (t - t0)}`.
#[derive(Clone, Debug)]
pub struct LtiGenerator {
    s: Matrix,
    t0: f64,
}

impl LtiGenerator {
    pub fn new(s: Matrix, t0: f64) -> Result<Self> {
        ensure_square(&s)?;
        ensure_finite(&s, "S")?;
        if !t0.is_finite() {
            return Err(crate::Error::InvalidTime("t0 must be finite".into()));
        }
        Ok(Self { s, t0 })
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }
}

impl ExplicitGenerator for LtiGenerator {
    fn dim(&self) -> usize {
        self.s.nrows()
    }

    fn t0(&self) -> f64 {
        self.t0
    }

    fn eval(&self, t: f64, _side: Side) -> Matrix {
        expm(&self.s, t - self.t0).expect("S validated at construction")
    }

    fn inv(&self, t: f64, _side: Side) -> Matrix {
        expm(&self.s, self.t0 - t).expect("S validated at construction")
    }

    fn breakpoints(&self, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }

    fn derivative(&self, t: f64, order: usize, side: Side) -> Option<Matrix> {
        let mut m = self.eval(t, side);
        for _ in 0..order {
            m = &self.s * m;
        }
        Some(m)
    }

    fn sgen(&self, _t: f64, _side: Side) -> Option<Matrix> {
        Some(self.s.clone())
    }

    fn lti_matrix(&self) -> Option<&Matrix> {
        Some(&self.s)
    }

    fn label(&self) -> String {
        format!("lti(nu={})", self.s.nrows())
    }
}
