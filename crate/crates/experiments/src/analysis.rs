//! Post-processing of loss traces: slope fits, seed averages, rates.

use crate::config::Averaging;

/// Relative loss level ending the window of asymptotic slope fits.
pub const SLOPE_CUT: f64 = 1e-12;

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let k = n as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Per-iteration decrease of `ln f(t)`, fitted over the second half of the
/// iterations up to the first one with `f(t) ≤ rel_cut · f(0)` (or up to the
/// end when that level is never reached). Positive for converging runs.
pub fn fit_log_slope(losses: &[f64], rel_cut: f64) -> Option<f64> {
    let f0 = *losses.first()?;
    if !(f0 > 0.0) {
        return None;
    }
    let end = losses
        .iter()
        .position(|&l| l <= rel_cut * f0)
        .unwrap_or(losses.len() - 1);
    let start = end / 2;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (t, &l) in losses.iter().enumerate().take(end + 1).skip(start) {
        if l > 0.0 && l.is_finite() {
            xs.push(t as f64);
            ys.push(l.ln());
        }
    }
    least_squares_slope(&xs, &ys).map(|s| -s)
}

/// Pointwise average of several traces, truncated at the shortest one.
/// Traces are combined in the order given.
pub fn mean_trace(traces: &[&[f64]], averaging: Averaging) -> Vec<f64> {
    let Some(len) = traces.iter().map(|t| t.len()).min() else {
        return Vec::new();
    };
    let k = traces.len() as f64;
    (0..len)
        .map(|i| match averaging {
            Averaging::Arithmetic => traces.iter().map(|t| t[i]).sum::<f64>() / k,
            Averaging::Geometric => (traces.iter().map(|t| t[i].ln()).sum::<f64>() / k).exp(),
        })
        .collect()
}

/// Largest `(v[t+w] / v[t])^{1/w}` over `t ≥ from`.
pub fn max_windowed_rate(values: &[f64], from: usize, window: usize) -> Option<f64> {
    if window == 0 || values.len() < from + window + 1 {
        return None;
    }
    (from..values.len() - window)
        .filter(|&t| values[t] > 0.0)
        .map(|t| (values[t + window] / values[t]).powf(1.0 / window as f64))
        .reduce(f64::max)
}

/// Largest `|a − b| / |b|` over the common prefix.
pub fn max_relative_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| if *y == 0.0 { if *x == 0.0 { 0.0 } else { f64::INFINITY } } else { ((x - y) / y).abs() })
        .fold(0.0, f64::max)
}
