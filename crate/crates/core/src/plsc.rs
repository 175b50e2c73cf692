//! Penalized least-squares segmentation baseline.
//!
//! Exact dynamic programming over the within-segment squared-error contrast
//! for the mean: O(n^2 * K_max) time, O(n * K_max) memory (cumulative sums
//! give O(1) segment costs). Serves as the quadratic-cost reference the
//! linear-time detector is compared against.

use crate::error::{Error, Result};
use crate::segmentation::{SegmentEstimate, Segmentation};
use crate::series::TimeSeries;
use crate::thresholds::estimate_sigma_diff;

/// Rule mapping the residual curve `J(K)` to a selected `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `beta = 2 * sigma^2 * ln n` with a first-difference noise estimate.
    Bic,
    /// Estimate the asymptotic slope of `J(K)` from its upper half and take
    /// twice its magnitude as the per-change penalty.
    SlopeHeuristic,
    /// A caller-supplied per-change penalty.
    Fixed(f64),
}

/// Optimal configuration for one value of `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct KBest {
    pub k: usize,
    pub change_points: Vec<usize>,
    /// Residual sum of squares `J(K)`.
    pub rss: f64,
}

/// Output of the dynamic program.
#[derive(Debug, Clone, PartialEq)]
pub struct PlscResult {
    /// Optimal configuration and residual for every `K` in `0..=K_max`.
    pub best_by_k: Vec<KBest>,
    pub selected_k: usize,
    /// The per-change penalty that made the selection.
    pub beta: f64,
    pub segmentation: Segmentation,
}

impl PlscResult {
    /// The residual curve as `(K, J(K))` rows.
    pub fn j_curve(&self) -> Vec<(usize, f64)> {
        self.best_by_k.iter().map(|b| (b.k, b.rss)).collect()
    }
}

// Prefix sums of the centered data; centering keeps the squared magnitudes
// small without changing any segment cost.
struct CostTable {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl CostTable {
    fn new(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut s1 = Vec::with_capacity(n + 1);
        let mut s2 = Vec::with_capacity(n + 1);
        s1.push(0.0);
        s2.push(0.0);
        let (mut a1, mut a2) = (0.0f64, 0.0f64);
        for &v in values {
            let c = v - mean;
            a1 += c;
            a2 += c * c;
            s1.push(a1);
            s2.push(a2);
        }
        Self { s1, s2 }
    }

    // RSS of the best constant fit on the 0-based half-open range [i, j).
    #[inline]
    fn cost(&self, i: usize, j: usize) -> f64 {
        let len = (j - i) as f64;
        let s = self.s1[j] - self.s1[i];
        ((self.s2[j] - self.s2[i]) - s * s / len).max(0.0)
    }
}

/// Exact segmentation of the mean under a per-change penalty.
///
/// `best_by_k[k]` holds the configuration minimizing the residual sum of
/// squares with exactly `k` change points and segments of at least
/// `min_seg` points; `selected_k` minimizes `J(K) + beta * K`.
pub fn plsc_segment(
    series: &TimeSeries,
    k_max: usize,
    min_seg: usize,
    penalty: Penalty,
) -> Result<PlscResult> {
    let n = series.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    series.check_finite()?;
    if min_seg < 1 {
        return Err(Error::InfeasibleConfig("min_seg must be at least 1".into()));
    }
    if (k_max + 1) * min_seg > n {
        return Err(Error::InfeasibleConfig(format!(
            "{} segments of at least {min_seg} points do not fit in n = {n}",
            k_max + 1
        )));
    }
    let table = CostTable::new(series.values());

    // best[k][j]: minimal RSS of the first j points split into k+1 segments;
    // arg[k-1][j]: the position of the k-th change point realizing it.
    let width = n + 1;
    let mut best = vec![f64::INFINITY; (k_max + 1) * width];
    let mut arg = vec![0u32; k_max * width];
    #[allow(clippy::needless_range_loop)]
    for j in min_seg..=n {
        best[j] = table.cost(0, j);
    }
    for k in 1..=k_max {
        let (lo_j, hi_j) = ((k + 1) * min_seg, n);
        let prev = (k - 1) * width;
        for j in lo_j..=hi_j {
            let mut b = f64::INFINITY;
            let mut at = 0u32;
            for t in (k * min_seg)..=(j - min_seg) {
                let c = best[prev + t] + table.cost(t, j);
                if c < b {
                    b = c;
                    at = t as u32;
                }
            }
            best[k * width + j] = b;
            arg[(k - 1) * width + j] = at;
        }
    }

    let mut best_by_k = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let rss = best[k * width + n];
        let mut cps = Vec::with_capacity(k);
        let mut j = n;
        for kk in (1..=k).rev() {
            let t = arg[(kk - 1) * width + j] as usize;
            cps.push(t);
            j = t;
        }
        cps.reverse();
        best_by_k.push(KBest { k, change_points: cps, rss });
    }

    let beta = match penalty {
        Penalty::Fixed(b) => {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(Error::Domain(format!("penalty must be finite and >= 0, got {b}")));
            }
            b
        }
        Penalty::Bic => {
            let sigma = estimate_sigma_diff(series.values()).unwrap_or(0.0);
            2.0 * sigma * sigma * (n as f64).ln()
        }
        Penalty::SlopeHeuristic => {
            // least-squares slope of J(K) over the upper half of the curve
            let lo = k_max / 2;
            let pts: Vec<(f64, f64)> = (lo..=k_max)
                .map(|k| (k as f64, best_by_k[k].rss))
                .collect();
            if pts.len() < 2 {
                0.0
            } else {
                let m = pts.len() as f64;
                let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
                let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
                2.0 * (sxy / sxx).min(0.0).abs()
            }
        }
    };

    let selected_k = (0..=k_max)
        .min_by(|&a, &b| {
            let ca = best_by_k[a].rss + beta * a as f64;
            let cb = best_by_k[b].rss + beta * b as f64;
            ca.partial_cmp(&cb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);

    let cps = best_by_k[selected_k].change_points.clone();
    let estimates = segment_means(series.values(), &cps);
    let segmentation = Segmentation::new(n, cps, estimates)?;
    Ok(PlscResult {
        best_by_k,
        selected_k,
        beta,
        segmentation,
    })
}

fn segment_means(values: &[f64], change_points: &[usize]) -> Vec<SegmentEstimate> {
    let mut bounds = Vec::with_capacity(change_points.len() + 2);
    bounds.push(0usize);
    bounds.extend_from_slice(change_points);
    bounds.push(values.len());
    bounds
        .windows(2)
        .map(|w| {
            let seg = &values[w[0]..w[1]];
            SegmentEstimate::Scalar(seg.iter().sum::<f64>() / seg.len() as f64)
        })
        .collect()
}
