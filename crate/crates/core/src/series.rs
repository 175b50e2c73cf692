//! Observed data and ground-truth generator specifications.
//!
//! Index conventions used everywhere in this crate:
//! * external positions are 1-based, `1..=n`;
//! * a change point `tau` is the *last* index of the segment to its left, so
//!   segment `k` covers `tau_k + 1 ..= tau_{k+1}` with `tau_0 = 0` and
//!   `tau_{K+1} = n`.

use crate::error::{Error, Result};

/// Equidistant abscissae `X_i = origin + i * delta` for regression targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionDesign {
    pub delta: f64,
    pub origin: f64,
}

impl RegressionDesign {
    pub fn new(delta: f64) -> Self {
        Self { delta, origin: 0.0 }
    }

    /// Abscissa of the 1-based position `i`.
    pub fn x(&self, i: usize) -> f64 {
        self.origin + self.delta * i as f64
    }
}

/// The observed sequence, optionally paired with a regression design.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    design: Option<RegressionDesign>,
}

impl TimeSeries {
    /// A plain univariate series (mean / variance targets).
    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        Ok(Self { values, design: None })
    }

    /// A regression series `Y_i` observed at `X_i = i * delta`.
    pub fn regression(values: Vec<f64>, delta: f64) -> Result<Self> {
        Self::regression_with_origin(values, delta, 0.0)
    }

    /// A regression series observed at `X_i = origin + i * delta`.
    pub fn regression_with_origin(values: Vec<f64>, delta: f64, origin: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySeries);
        }
        if !(delta > 0.0) || !delta.is_finite() || !origin.is_finite() {
            return Err(Error::Domain(format!(
                "sampling step must be finite and positive, got delta = {delta}"
            )));
        }
        Ok(Self {
            values,
            design: Some(RegressionDesign { delta, origin }),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn design(&self) -> Option<RegressionDesign> {
        self.design
    }

    pub fn is_regression(&self) -> bool {
        self.design.is_some()
    }

    /// Scan for NaN/infinity; reports the first offending 1-based position.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite { index: i + 1 }),
            None => Ok(()),
        }
    }
}

/// Per-segment ground-truth parameters of a piecewise-constant model.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentParams {
    /// Segment means `mu_k`.
    Mean(Vec<f64>),
    /// Segment variances `sigma_k^2`.
    Variance(Vec<f64>),
    /// Segment regression lines `(a_k, b_k)`.
    Regression { slopes: Vec<f64>, intercepts: Vec<f64> },
}

impl SegmentParams {
    pub fn segment_count(&self) -> usize {
        match self {
            SegmentParams::Mean(v) | SegmentParams::Variance(v) => v.len(),
            SegmentParams::Regression { slopes, .. } => slopes.len(),
        }
    }

    /// The scalar parameter path the segmentation is judged on: means,
    /// variances, or slopes.
    pub fn scalar(&self, segment: usize) -> f64 {
        match self {
            SegmentParams::Mean(v) | SegmentParams::Variance(v) => v[segment],
            SegmentParams::Regression { slopes, .. } => slopes[segment],
        }
    }
}

/// Ground truth for the synthetic generators and the error metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSpec {
    pub n: usize,
    /// Strictly increasing, each in `1..=n-1`.
    pub change_points: Vec<usize>,
    pub params: SegmentParams,
    /// Noise scale sigma.
    pub noise_sd: f64,
    /// Sampling step of the abscissae in regression models.
    pub delta: f64,
}

impl PiecewiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptySeries);
        }
        if !self.change_points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpec(
                "change points must be strictly increasing".into(),
            ));
        }
        if self
            .change_points
            .iter()
            .any(|&t| t == 0 || t >= self.n)
        {
            return Err(Error::InvalidSpec(format!(
                "change points must lie in 1..={}",
                self.n - 1
            )));
        }
        if self.params.segment_count() != self.change_points.len() + 1 {
            return Err(Error::InvalidSpec(format!(
                "{} change points require {} segment parameters, got {}",
                self.change_points.len(),
                self.change_points.len() + 1,
                self.params.segment_count()
            )));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::InvalidSpec("noise scale must be finite and >= 0".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidSpec("sampling step must be positive".into()));
        }
        Ok(())
    }

    /// Segment boundaries padded with the virtual end points 0 and n.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut b = Vec::with_capacity(self.change_points.len() + 2);
        b.push(0);
        b.extend_from_slice(&self.change_points);
        b.push(self.n);
        b
    }

    /// `|theta_k - theta_{k+1}|` at each change point, on the scalar path.
    pub fn jump_sizes(&self) -> Vec<f64> {
        (0..self.change_points.len())
            .map(|k| (self.params.scalar(k + 1) - self.params.scalar(k)).abs())
            .collect()
    }

    /// Length of the shortest segment. The detector assumes this exceeds 2A;
    /// that is an operating assumption, not a hard error.
    pub fn min_segment_len(&self) -> usize {
        self.boundaries()
            .windows(2)
            .map(|w| w[1] - w[0])
            .min()
            .unwrap_or(0)
    }

    /// The scalar parameter value in force at the 1-based position `i`.
    pub fn scalar_at(&self, i: usize) -> f64 {
        debug_assert!(i >= 1 && i <= self.n);
        let seg = self.change_points.partition_point(|&t| t < i);
        self.params.scalar(seg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_series() {
        assert_eq!(TimeSeries::univariate(vec![]), Err(Error::EmptySeries));
    }

    #[test]
    fn finite_check_reports_position() {
        let s = TimeSeries::univariate(vec![1.0, f64::NAN, 3.0]).unwrap();
        assert_eq!(s.check_finite(), Err(Error::NonFinite { index: 2 }));
        let s = TimeSeries::univariate(vec![1.0, 2.0]).unwrap();
        assert!(s.check_finite().is_ok());
    }

    #[test]
    fn regression_requires_positive_step() {
        assert!(TimeSeries::regression(vec![1.0], 0.0).is_err());
        assert!(TimeSeries::regression(vec![1.0], -1.0).is_err());
        let s = TimeSeries::regression(vec![1.0, 2.0], 0.5).unwrap();
        assert_eq!(s.design().unwrap().x(2), 1.0);
    }

    #[test]
    fn piecewise_spec_validation() {
        let spec = PiecewiseSpec {
            n: 10,
            change_points: vec![4, 7],
            params: SegmentParams::Mean(vec![0.0, 1.0, 0.5]),
            noise_sd: 1.0,
            delta: 1.0,
        };
        assert!(spec.validate().is_ok());
        assert_eq!(spec.jump_sizes(), vec![1.0, 0.5]);
        assert_eq!(spec.min_segment_len(), 3);
        assert_eq!(spec.scalar_at(4), 0.0);
        assert_eq!(spec.scalar_at(5), 1.0);
        assert_eq!(spec.scalar_at(8), 0.5);

        let bad = PiecewiseSpec {
            change_points: vec![7, 4],
            ..spec.clone()
        };
        assert!(bad.validate().is_err());

        let bad = PiecewiseSpec {
            params: SegmentParams::Mean(vec![0.0, 1.0]),
            ..spec
        };
        assert!(bad.validate().is_err());
    }
}
