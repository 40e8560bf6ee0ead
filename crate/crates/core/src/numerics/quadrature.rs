use super::{Matrix, Side, TimeGrid};
use crate::error::{Error, Result};

/// Composite Simpson rule on `[a, b]`, assuming `f` is smooth inside the
/// interval. Endpoints are evaluated one-sided from within the interval.
/// Every Simpson panel (two sub-intervals) is at most `max_panel` wide.
pub fn simpson<F>(f: &F, a: f64, b: f64, max_panel: f64) -> Matrix
where
    F: Fn(f64, Side) -> Matrix + ?Sized,
{
    let first = f(a, Side::Right);
    if b <= a {
        return first * 0.0;
    }
    let panels = ((b - a) / max_panel * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let n = 2 * panels;
    let h = (b - a) / n as f64;
    let mut acc = first;
    acc += f(b, Side::Left);
    for i in 1..n {
        let t = a + h * i as f64;
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(t, Side::Right) * w;
    }
    acc * (h / 3.0)
}

/// Simpson integration over `[a, b]` split at the given breakpoints.
pub fn integrate_piecewise<F>(f: &F, a: f64, b: f64, breakpoints: &[f64], max_panel: f64) -> Matrix
where
    F: Fn(f64, Side) -> Matrix + ?Sized,
{
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().cloned().filter(|&t| t > a && t < b));
    cuts.push(b);
    let mut total: Option<Matrix> = None;
    for w in cuts.windows(2) {
        let part = simpson(f, w[0], w[1], max_panel);
        total = Some(match total {
            Some(acc) => acc + part,
            None => part,
        });
    }
    total.unwrap_or_else(|| f(a, Side::Right) * 0.0)
}

/// The `k`-times repeated integral of `h` from `t0` to `t`, computed through
/// the single-integral Cauchy kernel `(t - s)^(k-1) / (k-1)!`.
///
/// Discontinuities of `h` must be among the grid breakpoints.
pub fn repeated_integral<F>(h: &F, k: usize, t0: f64, t: f64, grid: &TimeGrid) -> Result<Matrix>
where
    F: Fn(f64, Side) -> Matrix + ?Sized,
{
    if k == 0 {
        return Err(Error::InvalidArgument(
            "repeated integral order must be >= 1".into(),
        ));
    }
    if t < t0 {
        return Err(Error::InvalidTime(format!(
            "repeated integral needs t >= t0, got t = {t} < {t0}"
        )));
    }
    let fact: f64 = (1..k).map(|i| i as f64).product();
    let kernel = |s: f64, side: Side| h(s, side) * ((t - s).powi(k as i32 - 1) / fact);
    Ok(integrate_piecewise(
        &kernel,
        t0,
        t,
        grid.breakpoints(),
        grid.step(),
    ))
}
