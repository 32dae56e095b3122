//! Per-channel empirical quantile functions and densities.
//!
//! These are the raw material for percentile matching (quantiles) and for
//! the weighted transform-distance metric (densities). Both depend only on
//! the multiset of channel intensities, never on pixel positions.

use crate::colorspace::Channel;
use crate::error::{Error, Result};
use crate::image::ImageBuffer;

/// Empirical quantile function of one CMY channel, sampled at the uniform
/// probabilities k/K for k = 0..=K.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileProfile {
    channel: Channel,
    values: Vec<f64>,
}

impl QuantileProfile {
    pub fn channel(&self) -> Channel {
        self.channel
    }

    /// Number of probability intervals K; there are K + 1 sampled values.
    pub fn intervals(&self) -> usize {
        self.values.len() - 1
    }

    pub fn probability(&self, k: usize) -> f64 {
        k as f64 / self.intervals() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Normalized histogram of one CMY channel over B uniform bins on [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityProfile {
    channel: Channel,
    mass: Vec<f64>,
}

impl DensityProfile {
    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Density value at intensity `x`: bin mass scaled by the bin count, so
    /// the piecewise-constant density integrates to 1.
    pub fn weight_at(&self, x: f64) -> f64 {
        let b = self.mass.len();
        let bin = ((x * b as f64) as usize).min(b - 1);
        self.mass[bin] * b as f64
    }

    /// A flat density over `bins` bins; integrates to 1.
    pub fn uniform(channel: Channel, bins: usize) -> Result<Self> {
        if bins < 1 {
            return Err(Error::invalid("bins", "must be at least 1"));
        }
        Ok(DensityProfile {
            channel,
            mass: vec![1.0 / bins as f64; bins],
        })
    }
}

/// Type-7 quantile of ascending `sorted` at probability `p`: linear
/// interpolation between the closest order statistics.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Empirical quantiles of `channel`'s CMY intensity at probabilities k/K.
pub fn quantiles(
    image: &ImageBuffer,
    channel: Channel,
    intervals: usize,
) -> Result<QuantileProfile> {
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    if intervals < 2 {
        return Err(Error::invalid("quantile intervals", "must be at least 2"));
    }
    let mut sorted: Vec<f64> = image.cmy_values(channel).collect();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("intensities are finite"));
    let values = (0..=intervals)
        .map(|k| quantile_sorted(&sorted, k as f64 / intervals as f64))
        .collect();
    Ok(QuantileProfile { channel, values })
}

/// Histogram of `channel`'s CMY intensity over `bins` uniform bins,
/// normalized to total mass 1.
pub fn density(image: &ImageBuffer, channel: Channel, bins: usize) -> Result<DensityProfile> {
    if image.is_empty() {
        return Err(Error::EmptyImage);
    }
    if bins < 1 {
        return Err(Error::invalid("bins", "must be at least 1"));
    }
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for v in image.cmy_values(channel) {
        let bin = ((v * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
        total += 1;
    }
    let mass = counts
        .into_iter()
        .map(|c| c as f64 / total as f64)
        .collect();
    Ok(DensityProfile { channel, mass })
}
