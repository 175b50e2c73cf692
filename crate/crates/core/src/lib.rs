//! Offline detection of multiple change points in the mean, variance, or
//! regression line of a time series, in linear time and memory.
//!
//! The detector works in two steps. Step 1 computes a filtered-derivative
//! trace (the difference of a parameter estimator over two adjacent sliding
//! windows), calibrates a critical value from the Gumbel-type law of the
//! trace maximum under the no-change hypothesis, and extracts thresholded
//! peaks as potential change points. Step 2 re-tests every candidate with a
//! two-sample test on the segments it separates and keeps only the
//! candidates whose p-value clears a strict cutoff, pruning the false
//! alarms the loose first pass lets through.
//!
//! A quadratic-cost penalized least-squares baseline ([`plsc`]), synthetic
//! generators with evaluation metrics, and a reproducible Monte Carlo
//! harness ([`simgen`]) round out the crate.
//!
//! ```
//! use fdpv_core::{fdpv, DetectorSpec, Target, TimeSeries};
//!
//! let values: Vec<f64> = (0..600).map(|i| if i < 300 { 0.0 } else { 2.0 }).collect();
//! let series = TimeSeries::univariate(values).unwrap();
//! let spec = DetectorSpec::new(Target::Mean, 50).with_known_scale(1.0);
//! let result = fdpv(&series, &spec).unwrap();
//! assert_eq!(result.segmentation.change_points, vec![300]);
//! ```

// Validation guards are written as `!(x > 0.0)` on purpose: the negation
// rejects NaN, which `x <= 0.0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod detect;
pub mod error;
pub mod fd;
pub mod memtrack;
pub mod plsc;
pub mod segmentation;
pub mod series;
pub mod simgen;
pub mod statfn;
pub mod thresholds;

pub use config::{validate, Calibration, DetectorSpec, Nuisance, SigmaEstimator, Target};
pub use detect::{fdpv, FdpvResult, SegmentRange, StepOneResult, StepTwoRecord};
pub use error::{Error, Result};
pub use fd::{fd_intercept, fd_mean, fd_slope, fd_variance, FDTrace, MeanMode, SlopeMode};
pub use plsc::{plsc_segment, Penalty, PlscResult};
pub use segmentation::{SegmentEstimate, Segmentation};
pub use series::{PiecewiseSpec, RegressionDesign, SegmentParams, TimeSeries};
pub use simgen::{
    change_point_se, gen_piecewise_mean, gen_piecewise_regression, mise, monte_carlo,
    monte_carlo_detailed, MCReport, Method, RepOutcome, Scenario, ScenarioModel,
};
pub use statfn::{
    fisher_f_sf, regularized_incomplete_beta, std_normal_cdf, std_normal_sf, student_t_sf,
    welch_df, Df, TestResult,
};
pub use thresholds::{
    c_fn, critical_value, detection_probability, gumbel_quantile, resolve_scale, ThresholdSpec,
};
