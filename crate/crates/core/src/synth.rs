//! Synthetic degradation of clean images, for closed-loop testing.
//!
//! Degradations are per-channel power curves x^γ applied to the CMY dye
//! amounts, the same curve family the dyes' fading follows qualitatively:
//! γ > 1 suppresses a dye (its correction curve lies above the identity),
//! γ < 1 boosts it, γ = 1 leaves it alone. The exact inverse x^(1/γ) is
//! available as the ground-truth correction a learner should recover.

use crate::error::{Error, Result};
use crate::transfer::{meta, TransformSet};
use rand::Rng;
use std::collections::BTreeMap;

/// Per-channel gamma exponents in `[cyan, magenta, yellow]` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegradationSpec {
    pub gamma: [f64; 3],
}

impl DegradationSpec {
    pub fn new(gamma: [f64; 3]) -> Result<Self> {
        for (g, channel) in gamma.iter().zip(crate::colorspace::Channel::ALL) {
            // x^γ is monotone increasing on [0,1] only for γ > 0.
            if !g.is_finite() || *g <= 0.0 {
                return Err(Error::invalid(
                    "curve spec",
                    format!("{channel} exponent {g} does not define a monotone curve"),
                ));
            }
        }
        Ok(DegradationSpec { gamma })
    }

    pub fn identity() -> Self {
        DegradationSpec { gamma: [1.0; 3] }
    }

    /// The degradation itself, sampled on the grid. Applying this transform
    /// to a clean image produces the matching damaged image.
    pub fn forward_transform(&self, grid_size: usize) -> Result<TransformSet> {
        let [c, m, y] = self.gamma;
        let mut metadata = BTreeMap::new();
        metadata.insert(meta::SOURCE.to_string(), "synthetic".to_string());
        metadata.insert("curve".to_string(), format!("gamma c={c} m={m} y={y}"));
        TransformSet::from_channel_fns(
            grid_size,
            [&|x: f64| x.powf(c), &|x: f64| x.powf(m), &|x: f64| {
                x.powf(y)
            }],
            metadata,
        )
    }

    /// The exact inverse of the degradation, i.e. what learning from the
    /// degraded/clean pairs should recover.
    pub fn correction_transform(&self, grid_size: usize) -> Result<TransformSet> {
        DegradationSpec {
            gamma: [
                1.0 / self.gamma[0],
                1.0 / self.gamma[1],
                1.0 / self.gamma[2],
            ],
        }
        .forward_transform(grid_size)
    }

    /// Multiplicative log-space jitter per channel, for building training
    /// sets with bounded per-image noise around a shared degradation.
    pub fn jittered(&self, rng: &mut impl Rng, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::invalid("jitter", "must be in [0, 1]"));
        }
        let mut gamma = self.gamma;
        for g in &mut gamma {
            *g *= rng.gen_range(-sigma..=sigma).exp();
        }
        DegradationSpec::new(gamma)
    }
}
