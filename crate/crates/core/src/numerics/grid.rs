use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which one-sided limit to take at a breakpoint. Away from breakpoints
/// both sides give the same value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Time grid on `[t0, t_end]` whose nodes contain every breakpoint exactly
/// once. Each inter-breakpoint segment is split uniformly into sub-steps no
/// longer than `step`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    step: f64,
    breakpoints: Vec<f64>,
    segments: Vec<Vec<f64>>,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, step: f64, breakpoints: &[f64]) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite() && t0 < t_end) {
            return Err(Error::InvalidTime(format!(
                "grid requires t0 < t_end, got [{t0}, {t_end}]"
            )));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidTime(format!("grid step must be > 0, got {step}")));
        }
        let merge_tol = 1e-12 * (t_end - t0).max(1.0);
        let mut bps: Vec<f64> = breakpoints
            .iter()
            .cloned()
            .filter(|b| b.is_finite() && *b > t0 + merge_tol && *b < t_end - merge_tol)
            .collect();
        bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bps.dedup_by(|b, a| (*b - *a).abs() <= merge_tol);

        let mut bounds = Vec::with_capacity(bps.len() + 2);
        bounds.push(t0);
        bounds.extend_from_slice(&bps);
        bounds.push(t_end);

        let segments = bounds
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let n = (((b - a) / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                let mut nodes: Vec<f64> =
                    (0..n).map(|i| a + (b - a) * (i as f64) / (n as f64)).collect();
                nodes.push(b);
                nodes
            })
            .collect();

        Ok(Self {
            t0,
            t_end,
            step,
            breakpoints: bps,
            segments,
        })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Interior breakpoints, strictly inside `(t0, t_end)`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Node lists of the inter-breakpoint segments. Adjacent segments share
    /// their boundary node.
    pub fn segments(&self) -> &[Vec<f64>] {
        &self.segments
    }

    /// All distinct nodes, strictly increasing.
    pub fn nodes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (k, seg) in self.segments.iter().enumerate() {
            let skip = usize::from(k > 0);
            out.extend_from_slice(&seg[skip..]);
        }
        out
    }

    /// Number of distinct nodes.
    pub fn len(&self) -> usize {
        1 + self.segments.iter().map(|s| s.len() - 1).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_breakpoint(&self, t: f64) -> bool {
        let tol = 1e-12 * (self.t_end - self.t0).max(1.0);
        self.breakpoints.iter().any(|b| (b - t).abs() <= tol)
    }

    /// Same breakpoints, finer step.
    pub fn refined(&self, factor: usize) -> Self {
        Self::new(
            self.t0,
            self.t_end,
            self.step / factor.max(1) as f64,
            &self.breakpoints,
        )
        .expect("refining a valid grid")
    }

    /// A grid over a sub-interval, keeping the breakpoints that fall inside.
    pub fn restricted(&self, t0: f64, t_end: f64) -> Result<Self> {
        Self::new(t0, t_end, self.step, &self.breakpoints)
    }

    /// Adds breakpoints, keeping step and range.
    pub fn with_breakpoints(&self, extra: &[f64]) -> Self {
        let mut all = self.breakpoints.clone();
        all.extend_from_slice(extra);
        Self::new(self.t0, self.t_end, self.step, &all).expect("extending a valid grid")
    }
}
