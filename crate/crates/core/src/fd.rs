//! Filtered-derivative traces.
//!
//! `D(k, A)` is the difference between a parameter estimator computed on the
//! sliding box `[k+1, k+A]` and on `[k-A+1, k]`, for `k = A ..= n-A`. A
//! parameter jump whose left segment ends at `tau` produces a "hat" of
//! half-width `A` peaking exactly at `k = tau`.
//!
//! Every trace is built in one pass with rolling window sums: O(n) time and
//! memory. Rolling updates use compensated additions and the sums are
//! re-anchored (recomputed from scratch) every 2^16 steps so the drift stays
//! bounded on very long series.

use crate::error::{Error, Result};
use crate::series::TimeSeries;

const REANCHOR_PERIOD: usize = 1 << 16;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = Self::default();
        for v in values {
            acc.add(v);
        }
        acc
    }

    #[inline]
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// A filtered-derivative sequence together with its null-hypothesis scale.
#[derive(Debug, Clone, PartialEq)]
pub struct FDTrace {
    window: usize,
    /// First index `k` covered by the trace (always `A`).
    start: usize,
    /// `D(k)` for `k = A ..= n-A`.
    values: Vec<f64>,
    /// Standard deviation of `D(k)` under the no-change hypothesis.
    null_scale: f64,
}

impl FDTrace {
    fn new(window: usize, values: Vec<f64>, null_scale: f64) -> Self {
        Self {
            window,
            start: window,
            values,
            null_scale,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn null_scale(&self) -> f64 {
        self.null_scale
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The 1-based series position of trace entry `idx`.
    pub fn k_at(&self, idx: usize) -> usize {
        self.start + idx
    }

    /// Largest `|D|` with its position; first index wins ties.
    pub fn max_abs(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in self.values.iter().enumerate() {
            let a = v.abs();
            if best.is_none_or(|(_, m)| a > m) {
                best = Some((i, a));
            }
        }
        best.map(|(i, m)| (self.k_at(i), m))
    }

    #[cfg(test)]
    pub(crate) fn values_mut_for_tests(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Two-column CSV `k,D` for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * self.values.len() + 4);
        out.push_str("k,D\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.k_at(i), v));
        }
        out
    }
}

fn check_window(n: usize, window: usize) -> Result<()> {
    if window < 1 {
        return Err(Error::DegenerateWindow { window });
    }
    if 2 * window > n {
        return Err(Error::WindowTooLarge {
            twice_window: 2 * window,
            n,
        });
    }
    Ok(())
}

fn centered(values: &[f64]) -> Vec<f64> {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| v - m).collect()
}

// Shared driver: emits D(k) = g(right window) - g(left window) where g is a
// per-window statistic maintained by rolling sums of `terms`.
//
// `terms` maps the 0-based position to the quantity summed inside a window;
// `finish(sum)` converts a window sum into the window statistic.
fn window_difference<T, F>(n: usize, window: usize, terms: T, finish: F) -> Vec<f64>
where
    T: Fn(usize) -> f64,
    F: Fn(f64) -> f64,
{
    let a = window;
    let mut left = Compensated::of((0..a).map(&terms));
    let mut right = Compensated::of((a..2 * a).map(&terms));
    let mut out = Vec::with_capacity(n - 2 * a + 1);
    out.push(finish(right.value()) - finish(left.value()));
    // s is the 0-based split position: left [s-a, s), right [s, s+a)
    for s in a..(n - a) {
        left.add(terms(s));
        left.add(-terms(s - a));
        right.add(terms(s + a));
        right.add(-terms(s));
        let step = s + 1 - a;
        if step.is_multiple_of(REANCHOR_PERIOD) {
            left = Compensated::of((s + 1 - a..s + 1).map(&terms));
            right = Compensated::of((s + 1..s + 1 + a).map(&terms));
        }
        out.push(finish(right.value()) - finish(left.value()));
    }
    out
}

/// Filtered derivative of the window mean.
///
/// `D1(k) = mean(X on [k+1, k+A]) - mean(X on [k-A+1, k])`; null scale
/// `sigma * sqrt(2/A)`.
pub fn fd_mean(series: &TimeSeries, window: usize, sigma: f64) -> Result<FDTrace> {
    let n = series.len();
    check_window(n, window)?;
    let v = centered(series.values());
    let a = window as f64;
    let values = window_difference(n, window, |i| v[i], |s| s / a);
    Ok(FDTrace::new(window, values, sigma * (2.0 / a).sqrt()))
}

/// How the window variance treats the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanMode {
    /// Average of `(X - mu)^2` with a known mu.
    Known(f64),
    /// Each window subtracts its own empirical mean (divide-by-A variance).
    WindowEstimated,
}

/// Filtered derivative of the window variance.
///
/// Null scale `nu * sqrt(2/A)` where `nu^2 = Var[(X - mu)^2]`.
pub fn fd_variance(series: &TimeSeries, window: usize, mean: MeanMode, nu: f64) -> Result<FDTrace> {
    let n = series.len();
    check_window(n, window)?;
    let a = window as f64;
    let values = match mean {
        MeanMode::Known(mu) => {
            let sq: Vec<f64> = series.values().iter().map(|&x| (x - mu) * (x - mu)).collect();
            window_difference(n, window, |i| sq[i], |s| s / a)
        }
        MeanMode::WindowEstimated => {
            // centering is exact for the window variance and removes the
            // large-offset cancellation in sum(x^2)/A - mean^2
            let v = centered(series.values());
            let vars = window_variances(&v, window);
            (window..=(n - window)).map(|s| vars[s] - vars[s - window]).collect()
        }
    };
    Ok(FDTrace::new(window, values, nu * (2.0 / a).sqrt()))
}

// Divide-by-A variance of every window [w, w+A), indexed by w.
fn window_variances(v: &[f64], window: usize) -> Vec<f64> {
    let n = v.len();
    let a = window as f64;
    let mut s1 = Compensated::of(v[..window].iter().copied());
    let mut s2 = Compensated::of(v[..window].iter().map(|&x| x * x));
    let mut out = Vec::with_capacity(n - window + 1);
    let var = |s1: f64, s2: f64| {
        let m = s1 / a;
        (s2 / a - m * m).max(0.0)
    };
    out.push(var(s1.value(), s2.value()));
    for w in 1..=(n - window) {
        let (old, new) = (v[w - 1], v[w + window - 1]);
        s1.add(new);
        s1.add(-old);
        s2.add(new * new);
        s2.add(-old * old);
        if w % REANCHOR_PERIOD == 0 {
            s1 = Compensated::of(v[w..w + window].iter().copied());
            s2 = Compensated::of(v[w..w + window].iter().map(|&x| x * x));
        }
        out.push(var(s1.value(), s2.value()));
    }
    out
}

/// Filtered derivative of the least-squares slope over equidistant abscissae.
///
/// For `X_j = origin + j*delta` the window design moments have closed forms
/// (`xbar_w = origin + delta*(w + (A+1)/2)`, `sxx = A * delta^2 (A^2-1)/12`),
/// so each window slope needs only the rolling sums of `Y` and of the
/// locally indexed `l * Y`. Null scale `2*sqrt(6)*sigma / (delta*sqrt(A(A^2-1)))`.
pub fn fd_slope(series: &TimeSeries, window: usize, sigma: f64) -> Result<FDTrace> {
    let n = series.len();
    if window < 2 {
        return Err(Error::DegenerateWindow { window });
    }
    check_window(n, window)?;
    let design = series.design().ok_or(Error::MissingCovariate { target: "slope" })?;
    let delta = design.delta;
    let y = centered(series.values());
    let a = window as f64;

    // slope(w) for the window starting at 0-based w, covering [w, w+A):
    // sum_l (l - (A+1)/2) * y[w+l-1] * 12 / (delta * A (A^2-1)), l = 1..=A
    let norm = 12.0 / (delta * a * (a * a - 1.0));
    let half = 0.5 * (a + 1.0);
    let mut u = Compensated::of(y[..window].iter().copied());
    let mut t = Compensated::of((1..=window).map(|l| l as f64 * y[l - 1]));
    let mut slopes = Vec::with_capacity(n - window + 1);
    slopes.push((t.value() - half * u.value()) * norm);
    for w in 1..=(n - window) {
        // local indices shift down by one: T' = T - U_old + A*y_new
        let old = y[w - 1];
        let new = y[w + window - 1];
        t.add(-u.value());
        t.add(a * new);
        u.add(new);
        u.add(-old);
        if w % REANCHOR_PERIOD == 0 {
            u = Compensated::of(y[w..w + window].iter().copied());
            t = Compensated::of((1..=window).map(|l| l as f64 * y[w + l - 1]));
        }
        slopes.push((t.value() - half * u.value()) * norm);
    }

    let values = (window..=(n - window))
        .map(|s| slopes[s] - slopes[s - window])
        .collect();
    let null_scale = 2.0 * 6.0f64.sqrt() * sigma / (delta * (a * (a * a - 1.0)).sqrt());
    Ok(FDTrace::new(window, values, null_scale))
}

/// How the intercept estimator obtains the slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlopeMode {
    Known(f64),
    /// One full-sample least-squares slope plugged into every window.
    GlobalEstimated,
}

/// Filtered derivative of the window intercept `b = mean(Y) - a * mean(X)`,
/// which equals the mean trace of the residuals `Y_j - a X_j`. Null scale
/// `sigma * sqrt(2/A)`.
pub fn fd_intercept(
    series: &TimeSeries,
    window: usize,
    slope: SlopeMode,
    sigma: f64,
) -> Result<FDTrace> {
    let n = series.len();
    check_window(n, window)?;
    let design = series
        .design()
        .ok_or(Error::MissingCovariate { target: "intercept" })?;
    let a = match slope {
        SlopeMode::Known(a) => a,
        SlopeMode::GlobalEstimated => global_ols_slope(series)?,
    };
    let residuals: Vec<f64> = series
        .values()
        .iter()
        .enumerate()
        .map(|(i, &yj)| yj - a * design.x(i + 1))
        .collect();
    let resid_series = TimeSeries::univariate(residuals)?;
    let trace = fd_mean(&resid_series, window, sigma)?;
    Ok(trace)
}

/// Full-sample least-squares slope of `Y` on the equidistant abscissae.
pub fn global_ols_slope(series: &TimeSeries) -> Result<f64> {
    let design = series.design().ok_or(Error::MissingCovariate { target: "slope" })?;
    let n = series.len();
    if n < 2 {
        return Err(Error::SegmentTooShort { len: n, min: 2 });
    }
    let y = centered(series.values());
    let nf = n as f64;
    let half = 0.5 * (nf + 1.0);
    let mut sxy = Compensated::default();
    for (i, &v) in y.iter().enumerate() {
        sxy.add(((i + 1) as f64 - half) * v);
    }
    let sxx = nf * (nf * nf - 1.0) / 12.0;
    Ok(sxy.value() / (design.delta * sxx))
}

/// Lag-`lag` autocovariance of the standardized slope trace under the null
/// hypothesis.
///
/// Piecewise closed form of the normalized weight-product sums
/// `sum_u gamma(u) gamma(u + lag)`; the polynomial for the outer band was
/// re-derived from those sums and is verified against them in the tests.
pub fn d3_covariance(lag: usize, window: usize) -> Result<f64> {
    if window < 2 {
        return Err(Error::DegenerateWindow { window });
    }
    let a = window as f64;
    let p = lag as f64;
    let norm = 6.0 / (a * (a * a - 1.0));
    let f = if lag < window {
        (2.0 * a * a * a - 3.0 * a * a * p - 6.0 * a * p * p - 2.0 * a + 6.0 * p * p * p + 3.0 * p)
            / 12.0
    } else if lag < 2 * window {
        -(2.0 * a - p) * (a * a + 2.0 * a * p - 2.0 * p * p - 1.0) / 12.0
    } else {
        return Ok(0.0);
    };
    Ok(norm * f)
}
