//! The final segmentation and its JSON wire format.
//!
//! Wire schema:
//! `{"n": int, "change_points": [int], "segments": [{"start": int, "end": int, "estimate": number | [number, number]}]}`
//! with 1-based inclusive segment bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-segment parameter estimate: a scalar (mean, variance) or a
/// `[slope, intercept]` pair for regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentEstimate {
    Scalar(f64),
    Pair([f64; 2]),
}

impl SegmentEstimate {
    /// The scalar path value this estimate contributes to the fitted
    /// step function (the slope for regression pairs).
    pub fn scalar_value(&self) -> f64 {
        match self {
            SegmentEstimate::Scalar(v) => *v,
            SegmentEstimate::Pair([slope, _]) => *slope,
        }
    }
}

/// Estimated change points with per-segment parameter estimates.
///
/// `change_points` are strictly increasing 1-based positions in `1..=n-1`;
/// a change point is the last index of its left segment, so the segments
/// `(tau_k + 1 ..= tau_{k+1})` with `tau_0 = 0`, `tau_{K+1} = n` tile `1..=n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SegmentationDto", into = "SegmentationDto")]
pub struct Segmentation {
    pub n: usize,
    pub change_points: Vec<usize>,
    pub estimates: Vec<SegmentEstimate>,
}

impl Segmentation {
    pub fn new(n: usize, change_points: Vec<usize>, estimates: Vec<SegmentEstimate>) -> Result<Self> {
        let seg = Self { n, change_points, estimates };
        seg.validate()?;
        Ok(seg)
    }

    /// Estimated number of change points.
    pub fn k_hat(&self) -> usize {
        self.change_points.len()
    }

    /// 1-based inclusive `(start, end)` of every segment, in order.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.change_points.len() + 1);
        let mut start = 1;
        for &tau in &self.change_points {
            out.push((start, tau));
            start = tau + 1;
        }
        out.push((start, self.n));
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptySeries);
        }
        if !self.change_points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpec("change points must be strictly increasing".into()));
        }
        if self.change_points.iter().any(|&t| t == 0 || t >= self.n) {
            return Err(Error::InvalidSpec(format!(
                "change points must lie in 1..={}",
                self.n - 1
            )));
        }
        if self.estimates.len() != self.change_points.len() + 1 {
            return Err(Error::InvalidSpec(format!(
                "expected {} segment estimates, got {}",
                self.change_points.len() + 1,
                self.estimates.len()
            )));
        }
        Ok(())
    }

    /// The fitted step function sampled at every 1-based position.
    pub fn scalar_path(&self) -> Vec<f64> {
        let mut path = Vec::with_capacity(self.n);
        for (seg, (start, end)) in self.segments().into_iter().enumerate() {
            let v = self.estimates[seg].scalar_value();
            path.extend(std::iter::repeat_n(v, end - start + 1));
        }
        path
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("segmentation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("bad segmentation JSON: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct SegmentDto {
    start: usize,
    end: usize,
    estimate: SegmentEstimate,
}

#[derive(Serialize, Deserialize)]
struct SegmentationDto {
    n: usize,
    change_points: Vec<usize>,
    segments: Vec<SegmentDto>,
}

impl From<Segmentation> for SegmentationDto {
    fn from(seg: Segmentation) -> Self {
        let segments = seg
            .segments()
            .into_iter()
            .zip(&seg.estimates)
            .map(|((start, end), &estimate)| SegmentDto { start, end, estimate })
            .collect();
        SegmentationDto {
            n: seg.n,
            change_points: seg.change_points,
            segments,
        }
    }
}

impl TryFrom<SegmentationDto> for Segmentation {
    type Error = String;

    fn try_from(dto: SegmentationDto) -> std::result::Result<Self, String> {
        let estimates = dto.segments.iter().map(|s| s.estimate).collect();
        let seg = Segmentation {
            n: dto.n,
            change_points: dto.change_points,
            estimates,
        };
        seg.validate().map_err(|e| e.to_string())?;
        // The DTO carries the bounds redundantly; reject inconsistent files.
        for (dto_seg, (start, end)) in dto.segments.iter().zip(seg.segments()) {
            if dto_seg.start != start || dto_seg.end != end {
                return Err(format!(
                    "segment bounds [{}, {}] disagree with the change points (expected [{start}, {end}])",
                    dto_seg.start, dto_seg.end
                ));
            }
        }
        Ok(seg)
    }
}
