//! Depth hypothesis sets for the plane sweep.
//!
//! A set partitions [d_min, d_max] into `count` bins and sweeps the bin
//! centers. Two spacings exist: uniform (UD) splits linearly, while
//! space-increasing (SID) splits the log range so bin k runs from
//! `exp(ln d_min + k * ln(d_max / d_min) / count)` to the same expression at
//! k + 1; centers sit at k + 0.5 in each parameterization. SID spends its
//! budget at short range where per-bin reprojection gaps would otherwise
//! explode, which is what makes it the default.

use thiserror::Error;

use crate::costvol::DepthLogits;

#[derive(Debug, Error)]
pub enum HypothesisError {
    #[error("need 0 < d_min < d_max and finite bounds, got [{0}, {1}]")]
    BadRange(f64, f64),
    #[error("bin count must be at least 1")]
    EmptySet,
    #[error("cannot expand {from} bins to {to}: target must be a multiple")]
    BinAlignment { from: usize, to: usize },
    #[error("bin sets disagree in mode or range; expansion requires matching families")]
    FamilyMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthMode {
    Uniform,
    Sid,
}

impl DepthMode {
    pub fn name(&self) -> &'static str {
        match self {
            DepthMode::Uniform => "ud",
            DepthMode::Sid => "sid",
        }
    }
}

/// An ordered set of depth-plane hypotheses (bin centers, ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthHypothesisSet {
    mode: DepthMode,
    d_min: f64,
    d_max: f64,
    centers: Vec<f64>,
}

impl DepthHypothesisSet {
    /// Space-increasing discretization: centers form a geometric sequence
    /// with ratio `(d_max / d_min)^(1 / count)`.
    pub fn sid(d_min: f64, d_max: f64, count: usize) -> Result<Self, HypothesisError> {
        Self::validate(d_min, d_max, count)?;
        let log_min = d_min.ln();
        let log_step = (d_max / d_min).ln() / count as f64;
        let centers = (0..count)
            .map(|k| (log_min + (k as f64 + 0.5) * log_step).exp())
            .collect();
        Ok(Self {
            mode: DepthMode::Sid,
            d_min,
            d_max,
            centers,
        })
    }

    /// Uniform discretization: centers `d_min + (k + 0.5) * step`.
    pub fn uniform(d_min: f64, d_max: f64, count: usize) -> Result<Self, HypothesisError> {
        Self::validate(d_min, d_max, count)?;
        let step = (d_max - d_min) / count as f64;
        let centers = (0..count)
            .map(|k| d_min + (k as f64 + 0.5) * step)
            .collect();
        Ok(Self {
            mode: DepthMode::Uniform,
            d_min,
            d_max,
            centers,
        })
    }

    pub fn with_mode(
        mode: DepthMode,
        d_min: f64,
        d_max: f64,
        count: usize,
    ) -> Result<Self, HypothesisError> {
        match mode {
            DepthMode::Sid => Self::sid(d_min, d_max, count),
            DepthMode::Uniform => Self::uniform(d_min, d_max, count),
        }
    }

    fn validate(d_min: f64, d_max: f64, count: usize) -> Result<(), HypothesisError> {
        if !(d_min.is_finite() && d_max.is_finite() && d_min > 0.0 && d_min < d_max) {
            return Err(HypothesisError::BadRange(d_min, d_max));
        }
        if count == 0 {
            return Err(HypothesisError::EmptySet);
        }
        Ok(())
    }

    pub fn mode(&self) -> DepthMode {
        self.mode
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center(&self, k: usize) -> f64 {
        self.centers[k]
    }

    /// True when `d` lies inside the modeled range [d_min, d_max].
    pub fn contains(&self, d: f64) -> bool {
        d >= self.d_min && d <= self.d_max
    }

    /// Continuous bin coordinate of `d`: bin center k sits exactly at k,
    /// measured in log space for SID and linear space for UD. Values outside
    /// [d_min, d_max] extrapolate past the ends.
    pub fn fractional_bin(&self, d: f64) -> f64 {
        let pos = match self.mode {
            DepthMode::Sid => (d.max(1e-12) / self.d_min).ln() / (self.d_max / self.d_min).ln(),
            DepthMode::Uniform => (d - self.d_min) / (self.d_max - self.d_min),
        };
        pos * self.centers.len() as f64 - 0.5
    }

    /// Nearest bin center to `d`, measured in log space for SID and linear
    /// space for UD; clamped to the valid index range. Halfway points round
    /// up to the farther bin.
    pub fn nearest_bin(&self, d: f64) -> usize {
        let k = self.fractional_bin(d).round();
        (k.max(0.0) as usize).min(self.centers.len() - 1)
    }

    /// Same-family set with a different bin count.
    pub fn resampled(&self, count: usize) -> Result<Self, HypothesisError> {
        Self::with_mode(self.mode, self.d_min, self.d_max, count)
    }
}

/// Widens stereo logits from a coarse hypothesis set to a finer one in the
/// same family by duplicating each depth slice `target / from` times; no
/// interpolation, matching the shape-adjustment used between the stereo and
/// monocular depth heads.
pub fn expand_bins(logits: &DepthLogits, target: usize) -> Result<DepthLogits, HypothesisError> {
    let from = logits.bins().count();
    if target % from != 0 {
        return Err(HypothesisError::BinAlignment { from, to: target });
    }
    let factor = target / from;
    let fine = logits.bins().resampled(target)?;
    let (height, width) = (logits.height(), logits.width());
    let mut out = DepthLogits::zeros(fine, height, width, logits.stride());
    for y in 0..height {
        for x in 0..width {
            let src = logits.column(y, x);
            let dst = out.column_mut(y, x);
            for (k, &v) in src.iter().enumerate() {
                for f in 0..factor {
                    dst[k * factor + f] = v;
                }
            }
        }
    }
    Ok(out)
}
