//! Distance metrics and the evaluation harnesses built on them.
//!
//! Two views of quality: a transform-space distance (squared-difference
//! integral of two curve sets, summed over channels, optionally weighted by
//! an image's own intensity density) used by leave-one-out cross-validation,
//! and per-pixel Euclidean distances in perceptual color spaces used to
//! compare corrected images against reference edits.

use crate::colorspace::{pixel_pair_distance, Channel, DistanceSpace};
use crate::error::{Error, Result};
use crate::histogram::{density, DensityProfile};
use crate::image::ImageBuffer;
use crate::transfer::{aggregate_median_refs, estimate_pair, TransformSet};
use rayon::prelude::*;
use serde::Serialize;

/// Factor applied to transform-distance values when they are reported;
/// stored values stay unscaled.
pub const REPORT_SCALE: f64 = 100.0;

/// Neumaier-compensated accumulator: metric sums must not drown in float
/// rounding when grids get dense.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingMode {
    Uniform,
    Weighted,
}

/// How to weight the distance integrand.
pub enum Weighting<'a> {
    Uniform,
    /// Per-channel densities in `[cyan, magenta, yellow]` order.
    Density(&'a [DensityProfile; 3]),
}

/// Squared-difference integral per channel plus the channel sum.
#[derive(Clone, Debug, Serialize)]
pub struct TransformDistance {
    per_channel: [f64; 3],
    total: f64,
    weighting: WeightingMode,
    report_scale: f64,
}

impl TransformDistance {
    pub fn channel(&self, channel: Channel) -> f64 {
        self.per_channel[channel.index()]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn weighting(&self) -> WeightingMode {
        self.weighting
    }

    pub fn scaled_channel(&self, channel: Channel) -> f64 {
        self.channel(channel) * self.report_scale
    }

    pub fn scaled_total(&self) -> f64 {
        self.total * self.report_scale
    }
}

/// Distance between two transform sets: for each channel the integral of
/// the squared output difference over [0, 1], approximated by the trapezoid
/// rule on the shared grid, summed over the three channels. In weighted
/// mode the integrand is scaled by the piecewise-constant density, sampled
/// at segment midpoints so a uniform density reproduces the uniform metric.
pub fn transform_distance(
    f: &TransformSet,
    g: &TransformSet,
    weighting: Weighting<'_>,
) -> Result<TransformDistance> {
    if f.grid_size() != g.grid_size() {
        return Err(Error::GridMismatch {
            left: f.grid_size(),
            right: g.grid_size(),
        });
    }
    if let Weighting::Density(profiles) = &weighting {
        for (profile, want) in profiles.iter().zip(Channel::ALL) {
            if profile.channel() != want {
                return Err(Error::invalid(
                    "weighting",
                    format!("{want} slot holds a {} density", profile.channel()),
                ));
            }
        }
    }

    let grid = f.grid_size();
    let h = 1.0 / grid as f64;
    let mut per_channel = [0.0; 3];
    for channel in Channel::ALL {
        let fo = f.channel(channel).outputs();
        let go = g.channel(channel).outputs();
        let mut acc = CompensatedSum::default();
        let mut prev_sq = (fo[0] - go[0]).powi(2);
        for k in 0..grid {
            let next_sq = (fo[k + 1] - go[k + 1]).powi(2);
            let w = match &weighting {
                Weighting::Uniform => 1.0,
                Weighting::Density(profiles) => {
                    let mid = (k as f64 + 0.5) * h;
                    profiles[channel.index()].weight_at(mid)
                }
            };
            acc.add(w * (prev_sq + next_sq));
            prev_sq = next_sq;
        }
        per_channel[channel.index()] = acc.value() * h / 2.0;
    }
    Ok(TransformDistance {
        per_channel,
        total: per_channel.iter().sum(),
        weighting: match weighting {
            Weighting::Uniform => WeightingMode::Uniform,
            Weighting::Density(_) => WeightingMode::Weighted,
        },
        report_scale: REPORT_SCALE,
    })
}

/// Mean together with the standard error of the mean
/// (sample standard deviation / sqrt(N)).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ErrorStat {
    pub mean: f64,
    pub std_error: f64,
}

pub(crate) fn error_stat(values: &[f64]) -> ErrorStat {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    ErrorStat { mean, std_error }
}

/// A named damaged/reference pair, decoded and ready for estimation.
#[derive(Clone, Debug)]
pub struct ImagePair {
    pub id: String,
    pub damaged: ImageBuffer,
    pub reference: ImageBuffer,
}

/// Which image of a pair supplies the density for the weighted metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightSource {
    Damaged,
    Reference,
}

#[derive(Clone, Debug)]
pub struct LooParams {
    pub quantile_intervals: usize,
    pub grid_size: usize,
    pub density_bins: usize,
    pub weight_source: WeightSource,
}

impl Default for LooParams {
    fn default() -> Self {
        LooParams {
            quantile_intervals: 256,
            grid_size: 255,
            density_bins: 256,
            weight_source: WeightSource::Damaged,
        }
    }
}

/// One image's cross-validation errors, unscaled.
#[derive(Clone, Debug, Serialize)]
pub struct LooRow {
    pub id: String,
    pub identity_uniform: f64,
    pub identity_weighted: f64,
    pub loo_uniform: f64,
    pub loo_weighted: f64,
}

/// Leave-one-out report: per-image errors, the four aggregate cells, and
/// how often the leave-one-out estimator beat the identity transformation.
#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub rows: Vec<LooRow>,
    pub identity_uniform: ErrorStat,
    pub identity_weighted: ErrorStat,
    pub loo_uniform: ErrorStat,
    pub loo_weighted: ErrorStat,
    pub loo_wins_uniform: usize,
    pub loo_wins_weighted: usize,
    pub report_scale: f64,
}

impl EvalReport {
    /// Aligned text table; values scaled by `report_scale`.
    pub fn to_table(&self) -> String {
        let s = self.report_scale;
        let fmt = |e: &ErrorStat| format!("{:.3} \u{b1} {:.3}", e.mean * s, e.std_error * s);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<26}{:<20}{:<20}\n",
            "", "Uniform Error", "Weighted Error"
        ));
        out.push_str(&format!(
            "{:<26}{:<20}{:<20}\n",
            "Identity Transformation",
            fmt(&self.identity_uniform),
            fmt(&self.identity_weighted)
        ));
        out.push_str(&format!(
            "{:<26}{:<20}{:<20}\n",
            "Leave-One-Out Estimator",
            fmt(&self.loo_uniform),
            fmt(&self.loo_weighted)
        ));
        out.push_str(&format!(
            "\nLeave-one-out beat the identity on {}/{} images (uniform), {}/{} (weighted).\n",
            self.loo_wins_uniform,
            self.rows.len(),
            self.loo_wins_weighted,
            self.rows.len()
        ));
        out
    }
}

/// Leave-one-out cross-validation over a training set: for each pair i,
/// its own estimate is compared against the median of all other estimates
/// and against the identity transformation, in both metric modes.
pub fn loo_cv(pairs: &[ImagePair], params: &LooParams) -> Result<EvalReport> {
    if pairs.len() < 2 {
        return Err(Error::invalid(
            "pairs",
            format!("leave-one-out needs at least 2 pairs, got {}", pairs.len()),
        ));
    }

    let estimates: Vec<TransformSet> = pairs
        .par_iter()
        .map(|p| {
            estimate_pair(
                &p.damaged,
                &p.reference,
                params.quantile_intervals,
                params.grid_size,
            )
        })
        .collect::<Result<_>>()?;

    let densities: Vec<[DensityProfile; 3]> = pairs
        .par_iter()
        .map(|p| {
            let img = match params.weight_source {
                WeightSource::Damaged => &p.damaged,
                WeightSource::Reference => &p.reference,
            };
            Ok([
                density(img, Channel::Cyan, params.density_bins)?,
                density(img, Channel::Magenta, params.density_bins)?,
                density(img, Channel::Yellow, params.density_bins)?,
            ])
        })
        .collect::<Result<_>>()?;

    let identity = TransformSet::identity(params.grid_size);

    let mut rows: Vec<LooRow> = (0..pairs.len())
        .into_par_iter()
        .map(|i| {
            let others: Vec<&TransformSet> = estimates
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, e)| e)
                .collect();
            let held_out_median = aggregate_median_refs(&others)?;
            let own = &estimates[i];
            Ok(LooRow {
                id: pairs[i].id.clone(),
                identity_uniform: transform_distance(own, &identity, Weighting::Uniform)?.total(),
                identity_weighted: transform_distance(
                    own,
                    &identity,
                    Weighting::Density(&densities[i]),
                )?
                .total(),
                loo_uniform: transform_distance(own, &held_out_median, Weighting::Uniform)?.total(),
                loo_weighted: transform_distance(
                    own,
                    &held_out_median,
                    Weighting::Density(&densities[i]),
                )?
                .total(),
            })
        })
        .collect::<Result<_>>()?;
    // Canonical row order makes the report independent of input ordering.
    rows.sort_by(|a, b| a.id.cmp(&b.id));

    let collect = |f: fn(&LooRow) -> f64| -> Vec<f64> { rows.iter().map(f).collect() };
    Ok(EvalReport {
        identity_uniform: error_stat(&collect(|r| r.identity_uniform)),
        identity_weighted: error_stat(&collect(|r| r.identity_weighted)),
        loo_uniform: error_stat(&collect(|r| r.loo_uniform)),
        loo_weighted: error_stat(&collect(|r| r.loo_weighted)),
        loo_wins_uniform: rows
            .iter()
            .filter(|r| r.loo_uniform < r.identity_uniform)
            .count(),
        loo_wins_weighted: rows
            .iter()
            .filter(|r| r.loo_weighted < r.identity_weighted)
            .count(),
        rows,
        report_scale: REPORT_SCALE,
    })
}

/// Per-pixel Euclidean distance in the chosen space, averaged over all
/// pixels. Both images must have identical dimensions.
pub fn pixel_distance(a: &ImageBuffer, b: &ImageBuffer, space: DistanceSpace) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    if a.is_empty() {
        return Err(Error::EmptyImage);
    }
    let mut acc = CompensatedSum::default();
    for (pa, pb) in a.rgb_pixels().zip(b.rgb_pixels()) {
        acc.add(pixel_pair_distance(pa, pb, space));
    }
    Ok(acc.value() / a.pixel_count() as f64)
}

/// One comparison triple's mean distances, indexed by [`DistanceSpace::ALL`].
#[derive(Clone, Debug, Serialize)]
pub struct CompareRow {
    pub id: String,
    pub identity: [f64; 4],
    pub corrected: [f64; 4],
}

/// Per color space, mean ± standard error of the per-pixel distance from
/// the reference edits, for the uncorrected and the corrected images.
#[derive(Clone, Debug, Serialize)]
pub struct PixelDistanceReport {
    pub rows: Vec<CompareRow>,
    pub identity_stats: [ErrorStat; 4],
    pub corrected_stats: [ErrorStat; 4],
}

impl PixelDistanceReport {
    pub fn to_table(&self) -> String {
        let fmt = |e: &ErrorStat| format!("{:.2} \u{b1} {:.2}", e.mean, e.std_error);
        let mut out = String::new();
        out.push_str(&format!("{:<26}", "Color Space"));
        for space in DistanceSpace::ALL {
            out.push_str(&format!("{:<18}", space.name()));
        }
        out.push('\n');
        out.push_str(&format!("{:<26}", "Identity Transformation"));
        for stat in &self.identity_stats {
            out.push_str(&format!("{:<18}", fmt(stat)));
        }
        out.push('\n');
        out.push_str(&format!("{:<26}", "Median Estimator"));
        for stat in &self.corrected_stats {
            out.push_str(&format!("{:<18}", fmt(stat)));
        }
        out.push('\n');
        out
    }
}

/// Compare both the originals and the corrected images against independent
/// reference edits, per pixel, in the four perceptual distance spaces. All
/// four slices must be aligned.
pub fn comparison_report(
    ids: &[String],
    reference_edits: &[ImageBuffer],
    originals: &[ImageBuffer],
    corrected: &[ImageBuffer],
) -> Result<PixelDistanceReport> {
    if ids.len() != reference_edits.len()
        || originals.len() != reference_edits.len()
        || corrected.len() != reference_edits.len()
    {
        return Err(Error::invalid(
            "lists",
            format!(
                "misaligned: {} ids, {} edits, {} originals, {} corrected",
                ids.len(),
                reference_edits.len(),
                originals.len(),
                corrected.len()
            ),
        ));
    }
    if reference_edits.is_empty() {
        return Err(Error::invalid("lists", "no comparison triples"));
    }

    let rows: Vec<CompareRow> = (0..ids.len())
        .into_par_iter()
        .map(|i| {
            let mut identity = [0.0; 4];
            let mut corr = [0.0; 4];
            for (s, space) in DistanceSpace::ALL.into_iter().enumerate() {
                identity[s] = pixel_distance(&originals[i], &reference_edits[i], space)?;
                corr[s] = pixel_distance(&corrected[i], &reference_edits[i], space)?;
            }
            Ok(CompareRow {
                id: ids[i].clone(),
                identity,
                corrected: corr,
            })
        })
        .collect::<Result<_>>()?;

    let stat_for = |pick: fn(&CompareRow) -> &[f64; 4], s: usize| -> ErrorStat {
        let values: Vec<f64> = rows.iter().map(|r| pick(r)[s]).collect();
        error_stat(&values)
    };
    Ok(PixelDistanceReport {
        identity_stats: std::array::from_fn(|s| stat_for(|r| &r.identity, s)),
        corrected_stats: std::array::from_fn(|s| stat_for(|r| &r.corrected, s)),
        rows,
    })
}
