//! Step-1 threshold calibration and analytic detection probabilities.
//!
//! Under the no-change hypothesis the maximum of the standardized trace
//! follows a Gumbel-type law `P(max <= u) -> exp(-2 e^{-x})`, which maps the
//! Step-1 level `p1*` to a critical value `C1`. Two normalizations are
//! available, selected by [`Calibration`]:
//!
//! * `FiniteSample` (default) solves the expected-exceedance equation
//!   `2 T lambda u phi(u) = -ln(1 - p1*)` for the standardized threshold
//!   `u`, where `T = n/A - 1` is the trace span in window units and
//!   `lambda` is the local slope of the trace autocorrelation (3/2 for the
//!   window-mean style traces, `3(A+3)/(2(A+1))` for the slope trace). This
//!   holds the empirical level at the nominal one for practical `n`.
//! * `TheoremLiteral` uses the asymptotic normalizers
//!   `C1 = (scale/sqrt(A)) * c(n/A - 1, x)` (mean, variance, intercept) and
//!   `C1 = se_slope * c(A, x)` (slope). These closed forms are part of
//!   the calibration contract; their achieved finite-sample level is
//!   reported by the validation suite.

use crate::config::{Calibration, DetectorSpec, Nuisance, SigmaEstimator, Target};
use crate::error::{Error, Result};
use crate::fd;
use crate::series::TimeSeries;
use crate::statfn::std_normal_cdf;

/// A resolved Step-1 threshold.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ThresholdSpec {
    /// The Step-1 level `p1*`.
    pub level: f64,
    /// Gumbel quantile `x` with `exp(-2 e^{-x}) = 1 - p1*`.
    pub gumbel_x: f64,
    /// Multiplier applied to the trace scale: `c_n(x)`/`d_n(x)` in literal
    /// mode, the exceedance-equation root in finite-sample mode.
    pub normalizer: f64,
    /// The critical value in the units of the trace.
    pub critical_value: f64,
}

/// Quantile of the limit law: the `x` solving `exp(-2 e^{-x}) = 1 - p1`.
pub fn gumbel_quantile(p1: f64) -> Result<f64> {
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::Domain(format!("p1 must lie in (0,1), got {p1}")));
    }
    Ok(-(-(-p1).ln_1p() / 2.0).ln())
}

/// The normalizing function
/// `c(y, x) = (x + 2 ln y + ln(ln y)/2 - ln(pi)/2) / sqrt(2 ln y)`.
///
/// Requires `y > e` so that `ln ln y > 0`; smaller `y` means the window is
/// too large relative to the series for the asymptotic regime.
pub fn c_fn(y: f64, x: f64) -> Result<f64> {
    if !(y > std::f64::consts::E) {
        return Err(Error::Domain(format!(
            "normalizer needs y > e (window too large relative to n), got y = {y}"
        )));
    }
    let ly = y.ln();
    Ok((x + 2.0 * ly + 0.5 * ly.ln() - 0.5 * std::f64::consts::PI.ln()) / (2.0 * ly).sqrt())
}

fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Root of 2 T lambda u phi(u) = -ln(1 - p1) on u >= 1, where the left side
// is strictly decreasing.
fn exceedance_root(t_span: f64, lambda: f64, p1: f64) -> Result<f64> {
    let target = -(-p1).ln_1p();
    let g = |u: f64| 2.0 * t_span * lambda * u * normal_pdf(u);
    if g(1.0) <= target {
        return Err(Error::Domain(format!(
            "no calibrated threshold: p1 = {p1} is unreachable for a trace span of {t_span} windows"
        )));
    }
    let (mut lo, mut hi) = (1.0f64, 60.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// Standard deviation of the trace under H0, in trace units.
fn null_sd(target: Target, window: usize, scale: f64, delta: f64) -> f64 {
    let a = window as f64;
    match target {
        Target::Mean | Target::Variance | Target::Intercept => scale * (2.0 / a).sqrt(),
        Target::Slope => 2.0 * 6.0f64.sqrt() * scale / (delta * (a * (a * a - 1.0)).sqrt()),
    }
}

// Local slope of the standardized trace autocorrelation at lag 0, in window
// units: 1 - rho(h/A) ~ lambda * h/A.
fn local_correlation_slope(target: Target, window: usize) -> f64 {
    let a = window as f64;
    match target {
        Target::Slope => 3.0 * (a + 3.0) / (2.0 * (a + 1.0)),
        _ => 1.5,
    }
}

/// Map the Step-1 level to a critical value for `max |D|`.
///
/// `scale` is sigma (mean/intercept/slope) or nu (variance); `delta` is the
/// sampling step and only enters for the slope target.
pub fn critical_value(spec: &DetectorSpec, n: usize, scale: f64, delta: f64) -> Result<ThresholdSpec> {
    if spec.window == 0 || 2 * spec.window > n {
        return Err(Error::WindowTooLarge {
            twice_window: 2 * spec.window,
            n,
        });
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Domain(format!("trace scale must be positive, got {scale}")));
    }
    let x = gumbel_quantile(spec.level1)?;
    let a = spec.window as f64;
    let t_span = n as f64 / a - 1.0;
    let sd = null_sd(spec.target, spec.window, scale, delta);
    let (normalizer, critical) = match spec.calibration {
        Calibration::TheoremLiteral => match spec.target {
            Target::Slope => {
                let d_n = c_fn(a, x)?;
                (d_n, sd * d_n)
            }
            _ => {
                let c_n = c_fn(t_span, x)?;
                (c_n, scale / a.sqrt() * c_n)
            }
        },
        Calibration::FiniteSample => {
            if !(t_span > 1.0) {
                return Err(Error::Domain(format!(
                    "trace span n/A - 1 = {t_span} is too small to calibrate"
                )));
            }
            let lambda = local_correlation_slope(spec.target, spec.window);
            let u = exceedance_root(t_span, lambda, spec.level1)?;
            (u, sd * u)
        }
    };
    Ok(ThresholdSpec {
        level: spec.level1,
        gumbel_x: x,
        normalizer,
        critical_value: critical,
    })
}

/// Probability that `|D(tau)|` exceeds `c1` at a known change point of jump
/// size `delta_jump`:
///
/// `1 - Phi((c1 - d)/se) + Phi((-c1 - d)/se)` with `se` the null standard
/// deviation of the trace at one point.
pub fn detection_probability(
    target: Target,
    delta_jump: f64,
    c1: f64,
    window: usize,
    scale: f64,
    delta: f64,
) -> f64 {
    let se = null_sd(target, window, scale, delta);
    1.0 - std_normal_cdf((c1 - delta_jump) / se) + std_normal_cdf((-c1 - delta_jump) / se)
}

/// First-difference noise estimator
/// `sigma^2 = (1/(2(n-1))) sum (x_{i+1} - x_i)^2`; consistent under a finite
/// number of level shifts, unlike the raw global variance.
pub fn estimate_sigma_diff(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::SegmentTooShort { len: values.len(), min: 2 });
    }
    let s: f64 = values.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    Ok((s / (2.0 * (values.len() - 1) as f64)).sqrt())
}

/// Plain global sample standard deviation.
pub fn estimate_sigma_global(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::SegmentTooShort { len: values.len(), min: 2 });
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let s2 = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    Ok(s2.sqrt())
}

/// Scale of the variance trace: the sample standard deviation of the squared
/// centered observations, `nu^2 = Var[(X - mu)^2]`.
pub fn estimate_nu(values: &[f64], mu: Option<f64>) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::SegmentTooShort { len: values.len(), min: 2 });
    }
    let m = mu.unwrap_or_else(|| values.iter().sum::<f64>() / values.len() as f64);
    let squared: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    estimate_sigma_global(&squared)
}

/// Resolve the trace scale demanded by the target: the known value when
/// supplied, otherwise the spec's estimator applied to the data.
pub fn resolve_scale(spec: &DetectorSpec, series: &TimeSeries) -> Result<f64> {
    match (spec.target, spec.scale) {
        (_, Nuisance::Known(v)) => Ok(v),
        (Target::Mean, Nuisance::Estimated) => match spec.sigma_estimator {
            SigmaEstimator::FirstDifference => estimate_sigma_diff(series.values()),
            SigmaEstimator::GlobalVariance => estimate_sigma_global(series.values()),
        },
        (Target::Variance, Nuisance::Estimated) => {
            let mu = match spec.variance_mean {
                Nuisance::Known(m) => Some(m),
                Nuisance::Estimated => None,
            };
            estimate_nu(series.values(), mu)
        }
        (Target::Slope | Target::Intercept, Nuisance::Estimated) => {
            // noise scale of the regression: first differences of Y have
            // variance 2 sigma^2 plus a negligible O(delta^2) trend term,
            // and stay robust to finitely many parameter jumps
            match spec.sigma_estimator {
                SigmaEstimator::FirstDifference => estimate_sigma_diff(series.values()),
                SigmaEstimator::GlobalVariance => {
                    let a = fd::global_ols_slope(series)?;
                    let design = series.design().ok_or(Error::MissingCovariate {
                        target: spec.target.as_str(),
                    })?;
                    let residuals: Vec<f64> = series
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(i, &y)| y - a * design.x(i + 1))
                        .collect();
                    estimate_sigma_global(&residuals)
                }
            }
        }
    }
}
