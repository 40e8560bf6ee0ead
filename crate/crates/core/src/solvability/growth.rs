use serde::Serialize;

/// Windowed growth statistics of a norm series.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Growth {
    pub sup: f64,
    /// Least-squares slope of `ln(window sup)` against window centre, over
    /// the latter half of the windows.
    pub slope: f64,
    /// Window sups never decrease over the fitted windows.
    pub monotone: bool,
    pub window_sups: Vec<f64>,
}

pub const WINDOWS: usize = 10;

/// Splits `[times[0], times[last]]` into [`WINDOWS`] equal windows and fits
/// the log-growth of the window sups. Fitting only the latter half keeps
/// start-up transients from masking or faking growth.
pub fn classify_growth(times: &[f64], norms: &[f64]) -> Growth {
    let sup = norms.iter().cloned().fold(0.0, |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    if times.len() < 2 {
        return Growth {
            sup,
            slope: 0.0,
            monotone: true,
            window_sups: vec![sup],
        };
    }
    let (a, b) = (times[0], *times.last().unwrap());
    let width = (b - a) / WINDOWS as f64;
    let mut window_sups = vec![0.0f64; WINDOWS];
    for (t, v) in times.iter().zip(norms) {
        let k = (((t - a) / width) as usize).min(WINDOWS - 1);
        let v = if v.is_nan() { f64::INFINITY } else { *v };
        window_sups[k] = window_sups[k].max(v);
    }
    let fitted = &window_sups[WINDOWS / 2..];
    let xs: Vec<f64> = (WINDOWS / 2..WINDOWS)
        .map(|k| a + width * (k as f64 + 0.5))
        .collect();
    let ys: Vec<f64> = fitted.iter().map(|s| s.max(1e-300).ln()).collect();
    let slope = if ys.iter().any(|y| !y.is_finite()) {
        f64::INFINITY
    } else {
        let xm = xs.iter().sum::<f64>() / xs.len() as f64;
        let ym = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        num / den
    };
    let monotone = fitted
        .windows(2)
        .all(|w| w[1] >= w[0] * (1.0 - 1e-12));
    Growth {
        sup,
        slope,
        monotone,
        window_sups,
    }
}
