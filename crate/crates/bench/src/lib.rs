//! Benchmark-only package; see `benches/pipeline.rs`.
//!
//! Shared helpers for generating benchmark inputs live here so the bench
//! targets stay small.

use fdpv_core::{gen_piecewise_mean, gen_piecewise_regression, PiecewiseSpec, SegmentParams, TimeSeries};

/// Standard normal noise of length `n`, deterministic in `seed`.
pub fn noise_series(n: usize, seed: u64) -> TimeSeries {
    let spec = PiecewiseSpec {
        n,
        change_points: vec![],
        params: SegmentParams::Mean(vec![0.0]),
        noise_sd: 1.0,
        delta: 1.0,
    };
    gen_piecewise_mean(&spec, seed).expect("generator")
}

/// A noisy line observed on the unit grid, deterministic in `seed`.
pub fn line_series(n: usize, seed: u64) -> TimeSeries {
    let spec = PiecewiseSpec {
        n,
        change_points: vec![],
        params: SegmentParams::Regression {
            slopes: vec![0.5],
            intercepts: vec![1.0],
        },
        noise_sd: 1.0,
        delta: 1.0,
    };
    gen_piecewise_regression(&spec, seed).expect("generator")
}
