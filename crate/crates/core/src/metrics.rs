//! Depth evaluation metrics: scale-invariant log error, per-range variants,
//! and bin-level accuracy of a depth distribution.

use thiserror::Error;

use crate::depthmap::DepthMap;
use crate::fusion::DepthDistribution;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction {0}x{1} does not match truth {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("mask length {got} does not match {want} pixels")]
    MaskShape { got: usize, want: usize },
    #[error("prediction is not positive at supervised pixel ({y}, {x})")]
    NonPositivePrediction { y: usize, x: usize },
    #[error("no pixel is left to average over after masking")]
    EmptyMask,
    #[error("range edges must be at least two strictly increasing values")]
    BadEdges,
}

fn check_mask(mask: Option<&[bool]>, pixels: usize) -> Result<(), MetricsError> {
    if let Some(m) = mask {
        if m.len() != pixels {
            return Err(MetricsError::MaskShape {
                got: m.len(),
                want: pixels,
            });
        }
    }
    Ok(())
}

/// Scale-invariant logarithmic error, in percent:
/// `100 * sqrt(mean(d^2) - mean(d)^2)` with `d = ln(pred) - ln(truth)`,
/// taken over pixels with positive truth (and `mask`, if given).
///
/// Multiplying the whole prediction by a constant shifts every `d` equally
/// and leaves the value unchanged.
pub fn silog(
    pred: &DepthMap,
    truth: &DepthMap,
    mask: Option<&[bool]>,
) -> Result<f64, MetricsError> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(MetricsError::ShapeMismatch(
            pred.height(),
            pred.width(),
            truth.height(),
            truth.width(),
        ));
    }
    check_mask(mask, pred.width() * pred.height())?;
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let mut n = 0usize;
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            if let Some(m) = mask {
                if !m[y * pred.width() + x] {
                    continue;
                }
            }
            let gt = truth.get(y, x);
            if gt <= 0.0 {
                continue;
            }
            let p = pred.get(y, x);
            if p <= 0.0 {
                return Err(MetricsError::NonPositivePrediction { y, x });
            }
            let d = p.ln() - gt.ln();
            sum += d;
            sum_sq += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    Ok(100.0 * var.sqrt())
}

/// Fraction of supervised pixels whose most likely bin lies within
/// `tolerance_bins` of the truth's nearest bin. Supervised means positive
/// truth inside the distribution's depth range (and `mask`, if given).
pub fn bin_accuracy(
    dist: &DepthDistribution,
    truth: &DepthMap,
    tolerance_bins: usize,
    mask: Option<&[bool]>,
) -> Result<f64, MetricsError> {
    if dist.width() != truth.width() || dist.height() != truth.height() {
        return Err(MetricsError::ShapeMismatch(
            dist.height(),
            dist.width(),
            truth.height(),
            truth.width(),
        ));
    }
    check_mask(mask, dist.width() * dist.height())?;
    let bins = dist.bins();
    let mut hit = 0usize;
    let mut n = 0usize;
    for y in 0..dist.height() {
        for x in 0..dist.width() {
            if let Some(m) = mask {
                if !m[y * dist.width() + x] {
                    continue;
                }
            }
            let gt = truth.get(y, x);
            if gt <= 0.0 || !bins.contains(gt) {
                continue;
            }
            let want = bins.nearest_bin(gt);
            let got = dist.argmax(y, x);
            if want.abs_diff(got) <= tolerance_bins {
                hit += 1;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(hit as f64 / n as f64)
}

/// Half-open depth ranges `[e_i, e_{i+1})` given by ascending edges.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeBins {
    edges: Vec<f64>,
}

impl RangeBins {
    pub fn new(edges: Vec<f64>) -> Result<Self, MetricsError> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MetricsError::BadEdges);
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.edges[i], self.edges[i + 1])
    }

    /// Index of the half-open range containing `depth`, if any.
    pub fn index_of(&self, depth: f64) -> Option<usize> {
        if !(depth >= self.edges[0]) || depth >= *self.edges.last().unwrap() {
            return None;
        }
        // edges are ascending; linear scan, the lists are tiny.
        let mut i = 0;
        while depth >= self.edges[i + 1] {
            i += 1;
        }
        Some(i)
    }
}

impl Default for RangeBins {
    fn default() -> Self {
        Self {
            edges: vec![2.0, 10.0, 20.0, 30.0, 45.0, 58.0],
        }
    }
}

/// Runs `metric` once per range with a pixel mask selecting truth inside
/// that range; `None` entries mean the metric was not computable there
/// (usually an empty range).
pub fn range_binned(
    truth: &DepthMap,
    ranges: &RangeBins,
    mut metric: impl FnMut(&[bool]) -> Option<f64>,
) -> Vec<Option<f64>> {
    let pixels = truth.width() * truth.height();
    let mut out = Vec::with_capacity(ranges.count());
    for i in 0..ranges.count() {
        let (lo, hi) = ranges.bounds(i);
        let mut mask = vec![false; pixels];
        for (m, &gt) in mask.iter_mut().zip(truth.data().iter()) {
            *m = gt >= lo && gt < hi;
        }
        out.push(metric(&mask));
    }
    out
}
