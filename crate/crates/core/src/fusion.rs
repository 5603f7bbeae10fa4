//! Fusion of stereo and monocular depth logits into per-pixel depth
//! distributions, plus decoding and the cross-entropy depth loss.
//!
//! Fusion is a per-bin sum of the two logit fields followed by a softmax
//! over the depth axis, so either branch can veto or reinforce the other.
//! Pixels where both branches are flat (for example, no valid stereo source
//! and an uninformative mono prior) come out exactly uniform.

use thiserror::Error;

use crate::costvol::DepthLogits;
use crate::depthmap::DepthMap;
use crate::hypotheses::DepthHypothesisSet;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("logit fields disagree: {0}x{1} stride {2} vs {3}x{4} stride {5}")]
    ShapeMismatch(usize, usize, u32, usize, usize, u32),
    #[error("logit fields carry different depth hypothesis sets")]
    BinMismatch,
    #[error("ground truth {0}x{1} does not match distribution {2}x{3}")]
    TruthShape(usize, usize, usize, usize),
    #[error("no pixel is left to average over after masking")]
    EmptyMask,
    #[error("mask length {got} does not match {want} pixels")]
    MaskShape { got: usize, want: usize },
}

/// Per-pixel probabilities over depth bins, texel-major (`[y][x][k]`).
/// Every column sums to 1.
#[derive(Debug, Clone)]
pub struct DepthDistribution {
    bins: DepthHypothesisSet,
    height: usize,
    width: usize,
    stride: u32,
    probs: Vec<f64>,
}

impl DepthDistribution {
    /// Wraps raw per-pixel probabilities. Intended for tests and loaders;
    /// `fuse` is the usual constructor.
    pub fn from_probs(
        bins: DepthHypothesisSet,
        height: usize,
        width: usize,
        stride: u32,
        probs: Vec<f64>,
    ) -> Self {
        assert_eq!(
            probs.len(),
            bins.count() * height * width,
            "probability data/shape mismatch"
        );
        Self {
            bins,
            height,
            width,
            stride,
            probs,
        }
    }

    pub fn bins(&self) -> &DepthHypothesisSet {
        &self.bins
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn stride(&self) -> u32 {
        self.stride
    }

    #[inline]
    pub fn column(&self, y: usize, x: usize) -> &[f64] {
        let k = self.bins.count();
        let base = (y * self.width + x) * k;
        &self.probs[base..base + k]
    }

    pub fn data(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the most likely bin; ties resolve to the lowest index.
    pub fn argmax(&self, y: usize, x: usize) -> usize {
        let col = self.column(y, x);
        let mut best = 0;
        for (k, &p) in col.iter().enumerate() {
            if p > col[best] {
                best = k;
            }
        }
        best
    }
}

/// Adds the two logit fields bin-by-bin and normalizes each pixel with a
/// max-stabilized softmax over the depth axis.
pub fn fuse(stereo: &DepthLogits, mono: &DepthLogits) -> Result<DepthDistribution, FusionError> {
    if stereo.height() != mono.height()
        || stereo.width() != mono.width()
        || stereo.stride() != mono.stride()
    {
        return Err(FusionError::ShapeMismatch(
            stereo.height(),
            stereo.width(),
            stereo.stride(),
            mono.height(),
            mono.width(),
            mono.stride(),
        ));
    }
    if stereo.bins() != mono.bins() {
        return Err(FusionError::BinMismatch);
    }
    let k = stereo.bins().count();
    let (height, width) = (stereo.height(), stereo.width());
    let mut probs = vec![0.0f64; k * height * width];
    for y in 0..height {
        for x in 0..width {
            let s = stereo.column(y, x);
            let m = mono.column(y, x);
            let out = &mut probs[(y * width + x) * k..(y * width + x + 1) * k];
            let mut peak = f64::NEG_INFINITY;
            for i in 0..k {
                out[i] = s[i] + m[i];
                peak = peak.max(out[i]);
            }
            let mut total = 0.0;
            for v in out.iter_mut() {
                *v = (*v - peak).exp();
                total += *v;
            }
            for v in out.iter_mut() {
                *v /= total;
            }
        }
    }
    Ok(DepthDistribution::from_probs(
        stereo.bins().clone(),
        height,
        width,
        stereo.stride(),
        probs,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    /// Depth of the most likely bin (ties to the lowest index).
    Argmax,
    /// Probability-weighted mean of the bin centers.
    Expectation,
}

/// Collapses each pixel's distribution to one depth value.
pub fn decode_depth(dist: &DepthDistribution, mode: DecodeMode) -> DepthMap {
    let mut out = DepthMap::zeros(dist.width(), dist.height(), dist.stride());
    let centers = dist.bins().centers();
    for y in 0..dist.height() {
        for x in 0..dist.width() {
            let d = match mode {
                DecodeMode::Argmax => centers[dist.argmax(y, x)],
                DecodeMode::Expectation => {
                    let col = dist.column(y, x);
                    col.iter().zip(centers.iter()).map(|(p, d)| p * d).sum()
                }
            };
            out.set(y, x, d);
        }
    }
    out
}

const BCE_CLAMP: f64 = 1e-7;

/// Binary cross entropy between the predicted distribution and a one-hot
/// encoding of the ground truth at its nearest bin, averaged over
/// (supervised pixel, bin) pairs.
///
/// A pixel is supervised when its truth is positive, falls inside the bin
/// range, and `mask` (row-major over pixels, if given) is true there.
/// Probabilities are clamped away from 0 and 1 before the logs.
pub fn bce_depth_loss(
    dist: &DepthDistribution,
    truth: &DepthMap,
    mask: Option<&[bool]>,
) -> Result<f64, FusionError> {
    if truth.height() != dist.height() || truth.width() != dist.width() {
        return Err(FusionError::TruthShape(
            truth.height(),
            truth.width(),
            dist.height(),
            dist.width(),
        ));
    }
    let pixels = dist.height() * dist.width();
    if let Some(m) = mask {
        if m.len() != pixels {
            return Err(FusionError::MaskShape {
                got: m.len(),
                want: pixels,
            });
        }
    }
    let bins = dist.bins();
    let k = bins.count();
    let mut total = 0.0f64;
    let mut terms = 0usize;
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
            let target = bins.nearest_bin(gt);
            let col = dist.column(y, x);
            for (i, &p) in col.iter().enumerate() {
                let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                total -= if i == target {
                    p.ln()
                } else {
                    (1.0 - p).ln()
                };
            }
            terms += k;
        }
    }
    if terms == 0 {
        return Err(FusionError::EmptyMask);
    }
    Ok(total / terms as f64)
}
