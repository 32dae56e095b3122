//! Estimation, aggregation, and application of the per-channel transfer
//! curves.
//!
//! A pair of scans yields one candidate curve per CMY channel by matching
//! the two images' percentiles; a training set of pairs is combined by
//! taking the pointwise median of the candidate curves. Every curve is a
//! monotone piecewise-linear map of [0, 1] onto itself with the endpoints
//! pinned at (0, 0) and (1, 1), so it is well defined for all input values.

use crate::colorspace::Channel;
use crate::error::{Error, Result};
use crate::histogram::{quantiles, QuantileProfile};
use crate::image::{BitDepth, ChannelLuts, ImageBuffer};
use std::collections::BTreeMap;

/// Metadata keys conventionally present in a transform document.
pub mod meta {
    /// Provenance: a pair id, `median-of-N`, `identity`, or `synthetic`.
    pub const SOURCE: &str = "source";
    /// Sorted, `;`-joined pair ids that went into a median.
    pub const PAIRS: &str = "pairs";
    /// RFC 3339 creation timestamp, when the caller supplies one.
    pub const CREATED: &str = "created";
    pub const QUANTILE_INTERVALS: &str = "quantile_intervals";
}

/// Monotone piecewise-linear map on the uniform grid x_k = k/G.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTransform {
    channel: Channel,
    outputs: Vec<f64>,
}

impl ChannelTransform {
    /// Validates the invariants: at least two points, y[0] = 0, y[G] = 1,
    /// outputs non-decreasing and inside [0, 1].
    pub fn new(channel: Channel, outputs: Vec<f64>) -> Result<Self> {
        if outputs.len() < 2 {
            return Err(Error::invalid(
                "outputs",
                format!(
                    "{channel} needs at least 2 grid points, got {}",
                    outputs.len()
                ),
            ));
        }
        for (index, &value) in outputs.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::OutputOutOfRange {
                    channel,
                    index,
                    value,
                });
            }
        }
        if outputs[0] != 0.0 {
            return Err(Error::UnpinnedEndpoint {
                channel,
                index: 0,
                value: outputs[0],
                expected: 0.0,
            });
        }
        let last = outputs.len() - 1;
        if outputs[last] != 1.0 {
            return Err(Error::UnpinnedEndpoint {
                channel,
                index: last,
                value: outputs[last],
                expected: 1.0,
            });
        }
        if let Some(index) = (1..outputs.len()).find(|&k| outputs[k] < outputs[k - 1]) {
            return Err(Error::NonMonotone { channel, index });
        }
        Ok(ChannelTransform { channel, outputs })
    }

    pub fn identity(channel: Channel, grid_size: usize) -> Self {
        let g = grid_size.max(1);
        let outputs = (0..=g).map(|k| k as f64 / g as f64).collect();
        ChannelTransform { channel, outputs }
    }

    /// Sample a monotone function on the grid. The endpoints are pinned to
    /// exactly 0 and 1 regardless of `f`'s values there.
    pub fn from_fn(channel: Channel, grid_size: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let g = grid_size.max(1);
        let mut outputs: Vec<f64> = (0..=g)
            .map(|k| f(k as f64 / g as f64).clamp(0.0, 1.0))
            .collect();
        outputs[0] = 0.0;
        *outputs.last_mut().unwrap() = 1.0;
        ChannelTransform::new(channel, outputs)
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    /// Number of grid intervals G; there are G + 1 stored outputs.
    pub fn grid_size(&self) -> usize {
        self.outputs.len() - 1
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn grid_x(&self, k: usize) -> f64 {
        k as f64 / self.grid_size() as f64
    }

    /// Piecewise-linear evaluation. Errors when `x` is outside [0, 1]; the
    /// batch path uses [`Self::evaluate_clamped`] instead to absorb
    /// quantization noise.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange(x));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn evaluate_clamped(&self, x: f64) -> f64 {
        self.eval_unchecked(x.clamp(0.0, 1.0))
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        let g = self.grid_size();
        let pos = x * g as f64;
        let lo = (pos.floor() as usize).min(g - 1);
        let frac = pos - lo as f64;
        self.outputs[lo] + frac * (self.outputs[lo + 1] - self.outputs[lo])
    }

    /// Largest absolute deviation from the identity map over the grid.
    pub fn max_identity_deviation(&self) -> f64 {
        self.outputs
            .iter()
            .enumerate()
            .map(|(k, &y)| (y - self.grid_x(k)).abs())
            .fold(0.0, f64::max)
    }
}

/// The triple of per-channel transforms plus provenance metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformSet {
    cyan: ChannelTransform,
    magenta: ChannelTransform,
    yellow: ChannelTransform,
    metadata: BTreeMap<String, String>,
}

impl TransformSet {
    /// All three transforms must share one grid and carry the right channel
    /// tags.
    pub fn new(
        cyan: ChannelTransform,
        magenta: ChannelTransform,
        yellow: ChannelTransform,
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        for (t, want) in [
            (&cyan, Channel::Cyan),
            (&magenta, Channel::Magenta),
            (&yellow, Channel::Yellow),
        ] {
            if t.channel() != want {
                return Err(Error::invalid(
                    "channels",
                    format!("{want} slot holds a {} transform", t.channel()),
                ));
            }
        }
        if cyan.grid_size() != magenta.grid_size() || cyan.grid_size() != yellow.grid_size() {
            return Err(Error::GridMismatch {
                left: cyan.grid_size(),
                right: magenta.grid_size().max(yellow.grid_size()),
            });
        }
        Ok(TransformSet {
            cyan,
            magenta,
            yellow,
            metadata,
        })
    }

    pub fn identity(grid_size: usize) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert(meta::SOURCE.to_string(), "identity".to_string());
        TransformSet {
            cyan: ChannelTransform::identity(Channel::Cyan, grid_size),
            magenta: ChannelTransform::identity(Channel::Magenta, grid_size),
            yellow: ChannelTransform::identity(Channel::Yellow, grid_size),
            metadata,
        }
    }

    /// Build a set by sampling one monotone function per channel.
    pub fn from_channel_fns(
        grid_size: usize,
        fns: [&dyn Fn(f64) -> f64; 3],
        metadata: BTreeMap<String, String>,
    ) -> Result<Self> {
        TransformSet::new(
            ChannelTransform::from_fn(Channel::Cyan, grid_size, fns[0])?,
            ChannelTransform::from_fn(Channel::Magenta, grid_size, fns[1])?,
            ChannelTransform::from_fn(Channel::Yellow, grid_size, fns[2])?,
            metadata,
        )
    }

    pub fn channel(&self, channel: Channel) -> &ChannelTransform {
        match channel {
            Channel::Cyan => &self.cyan,
            Channel::Magenta => &self.magenta,
            Channel::Yellow => &self.yellow,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.cyan.grid_size()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn metadata_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.metadata
    }
}

/// Matched percentile graph of one channel, collapsed to a function and
/// pinned at (0,0) and (1,1).
fn matched_graph(
    damaged: &QuantileProfile,
    reference: &QuantileProfile,
    context: &str,
) -> (Vec<f64>, Vec<f64>) {
    let dv = damaged.values();
    let rv = reference.values();
    let mut xs: Vec<f64> = Vec::with_capacity(dv.len() + 2);
    let mut ys: Vec<f64> = Vec::with_capacity(dv.len() + 2);

    // Repeated damaged quantile values would make the graph multivalued;
    // collapse each run to one point carrying the mean reference value.
    let mut i = 0;
    while i < dv.len() {
        let mut j = i;
        while j + 1 < dv.len() && dv[j + 1] == dv[i] {
            j += 1;
        }
        let mean = rv[i..=j].iter().sum::<f64>() / (j - i + 1) as f64;
        xs.push(dv[i]);
        ys.push(mean);
        i = j + 1;
    }

    if xs.len() == 1 {
        log::warn!(
            "{context}: constant {} channel; transform degenerates to the pinned endpoints plus one interior point",
            damaged.channel()
        );
    }

    // Pin the endpoints so the curve is defined on all of [0, 1].
    if xs[0] == 0.0 {
        ys[0] = 0.0;
    } else {
        xs.insert(0, 0.0);
        ys.insert(0, 0.0);
    }
    if *xs.last().unwrap() == 1.0 {
        *ys.last_mut().unwrap() = 1.0;
    } else {
        xs.push(1.0);
        ys.push(1.0);
    }
    (xs, ys)
}

/// Resample a piecewise-linear graph with strictly increasing `xs` onto the
/// uniform grid with `grid_size` intervals.
fn resample_to_grid(xs: &[f64], ys: &[f64], grid_size: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid_size + 1);
    let mut seg = 0;
    for k in 0..=grid_size {
        let x = k as f64 / grid_size as f64;
        while seg + 2 < xs.len() && xs[seg + 1] <= x {
            seg += 1;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let (y0, y1) = (ys[seg], ys[seg + 1]);
        let y = if x1 > x0 {
            y0 + (x - x0) / (x1 - x0) * (y1 - y0)
        } else {
            y0
        };
        out.push(y.clamp(0.0, 1.0));
    }
    out[0] = 0.0;
    out[grid_size] = 1.0;
    // Monotone by construction; enforce against float slip.
    for k in 1..out.len() {
        if out[k] < out[k - 1] {
            out[k] = out[k - 1];
        }
    }
    out
}

fn estimate_channel(
    damaged: &ImageBuffer,
    reference: &ImageBuffer,
    channel: Channel,
    quantile_intervals: usize,
    grid_size: usize,
) -> Result<ChannelTransform> {
    let dq = quantiles(damaged, channel, quantile_intervals)?;
    let rq = quantiles(reference, channel, quantile_intervals)?;
    let (xs, ys) = matched_graph(&dq, &rq, "estimate");
    let outputs = resample_to_grid(&xs, &ys, grid_size.max(1));
    ChannelTransform::new(channel, outputs)
}

/// Estimate the per-channel transfer curves from one damaged/reference pair
/// by matching the two images' percentiles, pinning the endpoints, and
/// interpolating linearly onto the uniform grid.
pub fn estimate_pair(
    damaged: &ImageBuffer,
    reference: &ImageBuffer,
    quantile_intervals: usize,
    grid_size: usize,
) -> Result<TransformSet> {
    let mut metadata = BTreeMap::new();
    metadata.insert(meta::SOURCE.to_string(), "pair".to_string());
    metadata.insert(
        meta::QUANTILE_INTERVALS.to_string(),
        quantile_intervals.to_string(),
    );
    TransformSet::new(
        estimate_channel(
            damaged,
            reference,
            Channel::Cyan,
            quantile_intervals,
            grid_size,
        )?,
        estimate_channel(
            damaged,
            reference,
            Channel::Magenta,
            quantile_intervals,
            grid_size,
        )?,
        estimate_channel(
            damaged,
            reference,
            Channel::Yellow,
            quantile_intervals,
            grid_size,
        )?,
        metadata,
    )
}

fn median_in_place(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("outputs are finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub(crate) fn aggregate_median_refs(estimates: &[&TransformSet]) -> Result<TransformSet> {
    let first = *estimates
        .first()
        .ok_or_else(|| Error::invalid("estimates", "empty list"))?;
    let grid_size = first.grid_size();
    for e in estimates {
        if e.grid_size() != grid_size {
            return Err(Error::GridMismatch {
                left: grid_size,
                right: e.grid_size(),
            });
        }
    }
    let mut channels = Vec::with_capacity(3);
    for channel in Channel::ALL {
        let mut outputs = Vec::with_capacity(grid_size + 1);
        let mut column = vec![0.0; estimates.len()];
        for k in 0..=grid_size {
            for (slot, e) in column.iter_mut().zip(estimates.iter()) {
                *slot = e.channel(channel).outputs()[k];
            }
            outputs.push(median_in_place(&mut column));
        }
        // The pointwise median of monotone curves is monotone and keeps the
        // pinned endpoints; the constructor re-checks.
        channels.push(ChannelTransform::new(channel, outputs)?);
    }
    let yellow = channels.pop().unwrap();
    let magenta = channels.pop().unwrap();
    let cyan = channels.pop().unwrap();
    let mut metadata = BTreeMap::new();
    metadata.insert(
        meta::SOURCE.to_string(),
        format!("median-of-{}", estimates.len()),
    );
    TransformSet::new(cyan, magenta, yellow, metadata)
}

/// Pointwise median of the estimates at every grid point; an even count
/// takes the midpoint of the two central values.
pub fn aggregate_median(estimates: &[TransformSet]) -> Result<TransformSet> {
    let refs: Vec<&TransformSet> = estimates.iter().collect();
    aggregate_median_refs(&refs)
}

fn round_code(value: f64, max_code: f64) -> f64 {
    // Round half up, clamped to the code range.
    (value * max_code + 0.5).floor().clamp(0.0, max_code)
}

fn build_luts(ts: &TransformSet, depth: BitDepth) -> ChannelLuts {
    let max = depth.max_code();
    let map_code = |channel: Channel, code: usize| -> f64 {
        let intensity = code as f64 / max;
        let dye = 1.0 - intensity;
        let corrected = ts.channel(channel).evaluate_clamped(dye);
        round_code(1.0 - corrected, max)
    };
    match depth {
        BitDepth::Eight => {
            let mut tables: Vec<Box<[u8; 256]>> = Vec::with_capacity(3);
            for channel in Channel::ALL {
                let mut t = Box::new([0u8; 256]);
                for (code, slot) in t.iter_mut().enumerate() {
                    *slot = map_code(channel, code) as u8;
                }
                tables.push(t);
            }
            let yellow = tables.pop().unwrap();
            let magenta = tables.pop().unwrap();
            let cyan = tables.pop().unwrap();
            ChannelLuts::Eight([cyan, magenta, yellow])
        }
        BitDepth::Sixteen => {
            let mut tables: Vec<Vec<u16>> = Vec::with_capacity(3);
            for channel in Channel::ALL {
                tables.push(
                    (0..=65535usize)
                        .map(|c| map_code(channel, c) as u16)
                        .collect(),
                );
            }
            let yellow = tables.pop().unwrap();
            let magenta = tables.pop().unwrap();
            let cyan = tables.pop().unwrap();
            ChannelLuts::Sixteen([cyan, magenta, yellow])
        }
    }
}

/// Pass every pixel through the transform set: RGB → CMY, each dye channel
/// through its curve, back to RGB, requantized to the source bit depth.
/// Dimensions and alpha are preserved. Because the mapping is per-channel
/// and pointwise, it is precomputed as one lookup table per channel.
pub fn apply(image: &ImageBuffer, ts: &TransformSet) -> ImageBuffer {
    let luts = build_luts(ts, image.bit_depth());
    image.map_codes(&luts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{transform_distance, Weighting};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: u32, h: u32) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<u8> = (0..w as usize * h as usize * 3)
            .map(|_| rng.gen::<u8>())
            .collect();
        ImageBuffer::from_rgb8(w, h, data).unwrap()
    }

    /// Degrade an image through an exact per-channel dye curve (the same
    /// arithmetic the estimator must invert).
    fn degrade(image: &ImageBuffer, gammas: [f64; 3]) -> ImageBuffer {
        let ts = TransformSet::from_channel_fns(
            1024,
            [
                &|x: f64| x.powf(gammas[0]),
                &|x: f64| x.powf(gammas[1]),
                &|x: f64| x.powf(gammas[2]),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        apply(image, &ts)
    }

    #[test]
    fn worked_percentile_match_point() {
        // Build a 101-pixel pair whose cyan 20th percentile is 0.6 in the
        // damaged image and 0.82 in the reference; the learned curve must
        // send 0.6 to 0.82.
        let ramp = |knee: f64| -> Vec<u8> {
            (0..=100)
                .map(|i| {
                    let c = if i <= 20 {
                        knee * i as f64 / 20.0
                    } else {
                        knee + (1.0 - knee) * (i - 20) as f64 / 80.0
                    };
                    255 - ((c * 255.0) + 0.5).floor() as u8
                })
                .collect()
        };
        let to_img = |codes: Vec<u8>| {
            let data: Vec<u8> = codes.iter().flat_map(|&v| [v, v, v]).collect();
            ImageBuffer::from_rgb8(101, 1, data).unwrap()
        };
        let damaged = to_img(ramp(0.6));
        let reference = to_img(ramp(0.82));
        let ts = estimate_pair(&damaged, &reference, 100, 255).unwrap();
        let got = ts.channel(Channel::Cyan).evaluate(0.6).unwrap();
        assert_abs_diff_eq!(got, 0.82, epsilon = 1.0 / 200.0);
    }

    #[test]
    fn self_pair_is_identity() {
        let img = random_image(3, 32, 32);
        let ts = estimate_pair(&img, &img, 256, 255).unwrap();
        for channel in Channel::ALL {
            let t = ts.channel(channel);
            for k in 0..=t.grid_size() {
                assert_abs_diff_eq!(t.outputs()[k], t.grid_x(k), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn recovers_synthetic_monotone_degradation() {
        let clean = random_image(11, 96, 96);
        let gammas = [1.6, 1.15, 0.75];
        let damaged = degrade(&clean, gammas);
        let ts = estimate_pair(&damaged, &clean, 256, 255).unwrap();

        // Independent check against brute-force quantile matching on the raw
        // pixel multisets.
        for (channel, gamma) in Channel::ALL.into_iter().zip(gammas) {
            let mut dvals: Vec<f64> = damaged.cmy_values(channel).collect();
            let mut rvals: Vec<f64> = clean.cmy_values(channel).collect();
            dvals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rvals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let t = ts.channel(channel);
            for step in 1..40 {
                let p = step as f64 / 40.0;
                let idx = ((dvals.len() - 1) as f64 * p).round() as usize;
                let (x, oracle_y) = (dvals[idx], rvals[idx]);
                if !(0.05..=0.95).contains(&x) {
                    continue;
                }
                let got = t.evaluate(x).unwrap();
                assert!(
                    (got - oracle_y).abs() <= 0.02,
                    "{channel} at {x}: {got} vs oracle {oracle_y}"
                );
                assert!(
                    (got - x.powf(1.0 / gamma)).abs() <= 0.02,
                    "{channel} at {x}: {got} vs analytic {}",
                    x.powf(1.0 / gamma)
                );
            }
        }
    }

    #[test]
    fn median_of_one_is_unchanged() {
        let img = random_image(5, 16, 16);
        let est = estimate_pair(&degrade(&img, [1.4, 1.0, 0.9]), &img, 64, 255).unwrap();
        let agg = aggregate_median(std::slice::from_ref(&est)).unwrap();
        for channel in Channel::ALL {
            assert_eq!(
                agg.channel(channel).outputs(),
                est.channel(channel).outputs()
            );
        }
    }

    #[test]
    fn odd_count_median_picks_middle_value() {
        // Three curves pass through y = {0.4, 0.55, 0.9} at x = 0.5.
        let mk = |mid: f64| {
            TransformSet::new(
                ChannelTransform::new(Channel::Cyan, vec![0.0, mid, 1.0]).unwrap(),
                ChannelTransform::identity(Channel::Magenta, 2),
                ChannelTransform::identity(Channel::Yellow, 2),
                BTreeMap::new(),
            )
            .unwrap()
        };
        let agg = aggregate_median(&[mk(0.9), mk(0.4), mk(0.55)]).unwrap();
        assert_eq!(agg.channel(Channel::Cyan).outputs()[1], 0.55);
        // Even count: midpoint of the two central values.
        let agg4 = aggregate_median(&[mk(0.9), mk(0.4), mk(0.55), mk(0.65)]).unwrap();
        assert_abs_diff_eq!(
            agg4.channel(Channel::Cyan).outputs()[1],
            0.6,
            epsilon = 1e-12
        );
    }

    #[test]
    fn aggregate_rejects_empty_and_mismatched_grids() {
        assert!(aggregate_median(&[]).is_err());
        let a = TransformSet::identity(16);
        let b = TransformSet::identity(32);
        assert!(matches!(
            aggregate_median(&[a, b]),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn median_beats_most_individual_estimates() {
        // 22 noisy curves around one true curve; across draws the median must
        // sit closer to the truth (uniform metric) than >= 75% of them.
        let grid = 255;
        let true_gamma = 1.5;
        let truth = TransformSet::from_channel_fns(
            grid,
            [
                &|x: f64| x.powf(1.0 / true_gamma),
                &|x: f64| x.powf(1.0 / true_gamma),
                &|x: f64| x.powf(1.0 / true_gamma),
            ],
            BTreeMap::new(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (draws, per_draw) = (20usize, 22usize);
        let mut total_beaten = 0usize;
        for draw in 0..draws {
            let estimates: Vec<TransformSet> = (0..per_draw)
                .map(|_| {
                    let g = true_gamma * (rng.gen_range(-0.25..0.25f64)).exp();
                    TransformSet::from_channel_fns(
                        grid,
                        [
                            &|x: f64| x.powf(1.0 / g),
                            &|x: f64| x.powf(1.0 / g),
                            &|x: f64| x.powf(1.0 / g),
                        ],
                        BTreeMap::new(),
                    )
                    .unwrap()
                })
                .collect();
            let agg = aggregate_median(&estimates).unwrap();
            let d_agg = transform_distance(&agg, &truth, Weighting::Uniform)
                .unwrap()
                .total();
            let beaten = estimates
                .iter()
                .filter(|e| {
                    transform_distance(e, &truth, Weighting::Uniform)
                        .unwrap()
                        .total()
                        >= d_agg
                })
                .count();
            // Every draw: the median outranks a clear majority.
            assert!(
                beaten * 2 >= per_draw,
                "draw {draw}: median beat only {beaten}/{per_draw}"
            );
            total_beaten += beaten;
        }
        // Across draws: better than at least 75% of individual estimates.
        assert!(
            total_beaten * 4 >= draws * per_draw * 3,
            "median beat {total_beaten}/{} estimates overall",
            draws * per_draw
        );
    }

    #[test]
    fn evaluate_interpolates_and_checks_domain() {
        let ident = ChannelTransform::identity(Channel::Cyan, 255);
        for x in [0.0, 0.123, 0.6, 1.0] {
            assert_abs_diff_eq!(ident.evaluate(x).unwrap(), x, epsilon = 1e-12);
        }
        let t = ChannelTransform::new(Channel::Cyan, vec![0.0, 1.0]).unwrap();
        // Midway on a 2-point segment: mean of the adjacent outputs.
        assert_abs_diff_eq!(t.evaluate(0.5).unwrap(), 0.5, epsilon = 1e-12);
        let steep = ChannelTransform::new(Channel::Cyan, vec![0.0, 0.9, 1.0]).unwrap();
        assert_abs_diff_eq!(steep.evaluate(0.25).unwrap(), 0.45, epsilon = 1e-12);
        assert_eq!(steep.evaluate(0.5).unwrap(), 0.9);

        assert!(matches!(steep.evaluate(-0.1), Err(Error::OutOfRange(_))));
        assert!(matches!(steep.evaluate(1.1), Err(Error::OutOfRange(_))));
        assert_eq!(steep.evaluate_clamped(1.1), 1.0);
        assert_eq!(steep.evaluate_clamped(-0.2), 0.0);
    }

    #[test]
    fn constant_channel_degenerates_with_pinned_endpoints() {
        // Damaged cyan constant at 0.5 (red code 127 everywhere, magenta and
        // yellow vary); reference varies in all channels.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let damaged_data: Vec<u8> = (0..64)
            .flat_map(|_| [127u8, rng.gen(), rng.gen()])
            .collect();
        let damaged = ImageBuffer::from_rgb8(8, 8, damaged_data).unwrap();
        let reference = random_image(18, 8, 8);
        let ts = estimate_pair(&damaged, &reference, 32, 64).unwrap();
        let t = ts.channel(Channel::Cyan);
        assert_eq!(t.outputs()[0], 0.0);
        assert_eq!(t.outputs()[64], 1.0);
        // The curve is linear from (0,0) to (0.5..., y*) to (1,1).
        for w in t.outputs().windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn apply_identity_round_trips_quantized_pixels() {
        let img = random_image(7, 24, 24);
        let out = apply(&img, &TransformSet::identity(255));
        assert_eq!(out, img);
        // Non-default grid size still reproduces codes exactly after rounding.
        let out2 = apply(&img, &TransformSet::identity(100));
        assert_eq!(out2, img);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data16: Vec<u16> = (0..12 * 12 * 3).map(|_| rng.gen::<u16>()).collect();
        let img16 = ImageBuffer::from_rgb16(12, 12, data16).unwrap();
        assert_eq!(apply(&img16, &TransformSet::identity(255)), img16);
    }

    #[test]
    fn white_stays_white_under_any_transform() {
        let white = ImageBuffer::from_rgb8(3, 2, vec![255; 18]).unwrap();
        let ts = TransformSet::from_channel_fns(
            64,
            [&|x: f64| x.powf(2.0), &|x: f64| x.sqrt(), &|x: f64| {
                x.powf(1.3)
            }],
            BTreeMap::new(),
        )
        .unwrap();
        let out = apply(&white, &ts);
        assert_eq!(out, white);
    }

    #[test]
    fn two_by_two_image_matches_hand_computed_values() {
        // 3-point cyan curve {0, 0.8, 1}, magenta/yellow identity.
        let ts = TransformSet::new(
            ChannelTransform::new(Channel::Cyan, vec![0.0, 0.8, 1.0]).unwrap(),
            ChannelTransform::identity(Channel::Magenta, 2),
            ChannelTransform::identity(Channel::Yellow, 2),
            BTreeMap::new(),
        )
        .unwrap();
        // Pixels chosen so the cyan interpolation is easy to do by hand:
        //   red 255 -> dye 0       -> 0        -> red 255
        //   red 204 -> dye 51/255 = 0.2 -> 0.32 -> red round(0.68*255) = 173
        //   red 127 -> dye 128/255      -> ~0.8  -> red round(...)
        //   red 0   -> dye 1      -> 1         -> red 0
        let img =
            ImageBuffer::from_rgb8(2, 2, vec![255, 10, 20, 204, 30, 40, 127, 50, 60, 0, 70, 80])
                .unwrap();
        let out = apply(&img, &ts);
        let dye: f64 = 128.0 / 255.0;
        let expect_127 = {
            let y = 0.8 + (dye - 0.5) / 0.5 * 0.2;
            ((1.0 - y) * 255.0 + 0.5).floor() as u8
        };
        let expected = ImageBuffer::from_rgb8(
            2,
            2,
            vec![255, 10, 20, 173, 30, 40, expect_127, 50, 60, 0, 70, 80],
        )
        .unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn estimate_rejects_empty_images() {
        let empty = ImageBuffer::from_rgb8(0, 0, vec![]).unwrap();
        let img = random_image(1, 4, 4);
        assert!(matches!(
            estimate_pair(&empty, &img, 16, 64),
            Err(Error::EmptyImage)
        ));
        assert!(matches!(
            estimate_pair(&img, &empty, 16, 64),
            Err(Error::EmptyImage)
        ));
    }

    #[test]
    fn rejects_invalid_output_sequences() {
        assert!(matches!(
            ChannelTransform::new(Channel::Cyan, vec![0.0, 0.5, 0.4, 1.0]),
            Err(Error::NonMonotone { .. })
        ));
        assert!(matches!(
            ChannelTransform::new(Channel::Cyan, vec![0.1, 0.5, 1.0]),
            Err(Error::UnpinnedEndpoint { .. })
        ));
        assert!(matches!(
            ChannelTransform::new(Channel::Cyan, vec![0.0, 0.5, 0.9]),
            Err(Error::UnpinnedEndpoint { .. })
        ));
        assert!(matches!(
            ChannelTransform::new(Channel::Cyan, vec![0.0, 1.5, 1.0]),
            Err(Error::OutputOutOfRange { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn estimates_always_satisfy_curve_invariants(seed in 0u64..500, k in 2usize..64) {
            let damaged = random_image(seed, 12, 12);
            let reference = random_image(seed.wrapping_add(1), 12, 12);
            let ts = estimate_pair(&damaged, &reference, k, 128).unwrap();
            for channel in Channel::ALL {
                let t = ts.channel(channel);
                prop_assert_eq!(t.outputs()[0], 0.0);
                prop_assert_eq!(t.outputs()[t.grid_size()], 1.0);
                for w in t.outputs().windows(2) {
                    prop_assert!(w[1] >= w[0]);
                }
            }
        }

        #[test]
        fn aggregate_is_permutation_invariant_and_idempotent(seed in 0u64..200) {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut sets: Vec<TransformSet> = (0..5)
                .map(|i| {
                    let g: f64 = 1.0 + 0.1 * i as f64;
                    TransformSet::from_channel_fns(
                        64,
                        [&|x: f64| x.powf(g), &|x: f64| x.powf(g), &|x: f64| x.powf(g)],
                        BTreeMap::new(),
                    )
                    .unwrap()
                })
                .collect();
            let a = aggregate_median(&sets).unwrap();
            sets.shuffle(&mut rng);
            let b = aggregate_median(&sets).unwrap();
            for channel in Channel::ALL {
                prop_assert_eq!(a.channel(channel).outputs(), b.channel(channel).outputs());
            }
            let same = vec![sets[0].clone(), sets[0].clone(), sets[0].clone()];
            let collapsed = aggregate_median(&same).unwrap();
            for channel in Channel::ALL {
                prop_assert_eq!(
                    collapsed.channel(channel).outputs(),
                    sets[0].channel(channel).outputs()
                );
            }
        }

        #[test]
        fn apply_preserves_single_channel_ordering(
            r1 in 0u8..=255, r2 in 0u8..=255, g in 0u8..=255, b in 0u8..=255,
        ) {
            // Two pixels differing only in red: red-channel order is weakly
            // preserved by any valid transform.
            let ts = TransformSet::from_channel_fns(
                64,
                [&|x: f64| x.powf(1.7), &|x: f64| x.powf(0.6), &|x: f64| x],
                BTreeMap::new(),
            )
            .unwrap();
            let img = ImageBuffer::from_rgb8(2, 1, vec![r1, g, b, r2, g, b]).unwrap();
            let out = apply(&img, &ts);
            let (o1, o2) = (out.rgb_at(0), out.rgb_at(1));
            if r1 <= r2 {
                prop_assert!(o1.r <= o2.r);
            } else {
                prop_assert!(o1.r >= o2.r);
            }
            prop_assert_eq!(o1.g, o2.g);
            prop_assert_eq!(o1.b, o2.b);
        }
    }
}
