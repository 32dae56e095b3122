//! Batch orchestration: corpus ingestion, training, batch restoration,
//! evaluation, and synthetic-corpus generation.
//!
//! Per-image work runs on a worker pool; aggregation points (the median,
//! report assembly) are single-threaded joins over index-ordered results,
//! so outputs do not depend on the worker count.

use crate::colorspace::Channel;
use crate::curve_export::{write_channel_csvs, write_svg};
use crate::document::{read_document, write_document};
use crate::error::{Error, Result};
use crate::evaluation::{
    comparison_report, loo_cv, EvalReport, ImagePair, LooParams, PixelDistanceReport, WeightSource,
};
use crate::image::ImageBuffer;
use crate::synth::DegradationSpec;
use crate::transfer::{aggregate_median, apply, estimate_pair, meta, TransformSet};
use rand::SeedableRng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const SUPPORTED_EXTENSIONS: [&str; 5] = ["png", "jpg", "jpeg", "tif", "tiff"];

/// Environment variable supplying the default worker count.
pub const WORKERS_ENV: &str = "MHM_WORKERS";

#[derive(Clone, Debug)]
pub struct PairEntry {
    pub id: String,
    pub damaged: PathBuf,
    pub reference: PathBuf,
}

/// The resolved training corpus: pair ids with their two file paths, in
/// lexicographic id order, plus warnings about files that did not pair up.
#[derive(Clone, Debug, Default)]
pub struct PairManifest {
    pub pairs: Vec<PairEntry>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct JobConfig {
    pub quantile_intervals: usize,
    pub grid_size: usize,
    pub density_bins: usize,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub overwrite: bool,
    pub seed: u64,
    /// RFC 3339 timestamp recorded in learned documents; `None` omits it so
    /// reruns stay bitwise identical.
    pub timestamp: Option<String>,
    /// Which image of a pair supplies the density for the weighted metric.
    pub weight_source: WeightSource,
}

impl JobConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        JobConfig {
            quantile_intervals: 256,
            grid_size: 255,
            density_bins: 256,
            workers: default_workers(),
            output_dir: output_dir.into(),
            overwrite: false,
            seed: 0,
            timestamp: None,
            weight_source: WeightSource::Damaged,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.quantile_intervals < 2 {
            return Err(Error::invalid("quantiles", "must be at least 2"));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("grid", "must be at least 2"));
        }
        if self.density_bins < 1 {
            return Err(Error::invalid("bins", "must be at least 1"));
        }
        if self.workers < 1 {
            return Err(Error::invalid("workers", "must be at least 1"));
        }
        Ok(())
    }

    fn loo_params(&self) -> LooParams {
        LooParams {
            quantile_intervals: self.quantile_intervals,
            grid_size: self.grid_size,
            density_bins: self.density_bins,
            weight_source: self.weight_source,
        }
    }
}

/// Worker count from `MHM_WORKERS`, else the machine's parallelism.
pub fn default_workers() -> usize {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
        log::warn!("ignoring invalid {WORKERS_ENV}={v}");
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))
}

fn has_supported_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| SUPPORTED_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Supported image files directly inside `dir`, sorted by file name.
pub fn list_images(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| Error::FileRead {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_supported_extension(p))
        .collect();
    files.sort();
    Ok(files)
}

/// Expand a mix of files and directories into a sorted, deduplicated list
/// of image paths.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            files.extend(list_images(input)?);
        } else {
            files.push(input.clone());
        }
    }
    files.sort();
    files.dedup();
    Ok(files)
}

fn stem_map(dir: &Path, warnings: &mut Vec<String>) -> Result<BTreeMap<String, PathBuf>> {
    let mut map: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in list_images(dir)? {
        let stem = match path.file_stem().and_then(|s| s.to_str()) {
            Some(s) => s.to_string(),
            None => continue,
        };
        if let Some(existing) = map.get(&stem) {
            warnings.push(format!(
                "duplicate stem `{stem}`: keeping {}, ignoring {}",
                existing.display(),
                path.display()
            ));
        } else {
            map.insert(stem, path);
        }
    }
    Ok(map)
}

/// Pair files across two directories by matching file stems. Unmatched
/// files on either side become warnings; zero matches is an error.
pub fn ingest_dirs(
    damaged_dir: impl AsRef<Path>,
    reference_dir: impl AsRef<Path>,
) -> Result<PairManifest> {
    let mut warnings = Vec::new();
    let damaged = stem_map(damaged_dir.as_ref(), &mut warnings)?;
    let mut reference = stem_map(reference_dir.as_ref(), &mut warnings)?;
    let mut pairs = Vec::new();
    for (stem, dpath) in damaged {
        match reference.remove(&stem) {
            Some(rpath) => pairs.push(PairEntry {
                id: stem,
                damaged: dpath,
                reference: rpath,
            }),
            None => warnings.push(format!(
                "no reference scan for `{stem}` ({})",
                dpath.display()
            )),
        }
    }
    for (stem, rpath) in reference {
        warnings.push(format!(
            "no damaged scan for `{stem}` ({})",
            rpath.display()
        ));
    }
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    Ok(PairManifest { pairs, warnings })
}

#[derive(serde::Deserialize)]
struct ManifestRow {
    id: String,
    damaged: String,
    reference: String,
}

/// Load an explicit CSV manifest with header `id,damaged,reference`.
/// Relative paths resolve against the manifest's directory; every path must
/// exist and ids must be unique. Entries are sorted by id.
pub fn ingest_manifest(path: impl AsRef<Path>) -> Result<PairManifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Manifest(e.to_string()))?;
    let mut pairs = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for row in reader.deserialize::<ManifestRow>() {
        let row = row.map_err(|e| Error::Manifest(e.to_string()))?;
        if !seen.insert(row.id.clone()) {
            return Err(Error::Manifest(format!("duplicate pair id `{}`", row.id)));
        }
        let resolve = |p: &str| {
            let candidate = PathBuf::from(p);
            if candidate.is_absolute() {
                candidate
            } else {
                base.join(candidate)
            }
        };
        let entry = PairEntry {
            id: row.id,
            damaged: resolve(&row.damaged),
            reference: resolve(&row.reference),
        };
        for p in [&entry.damaged, &entry.reference] {
            if !p.exists() {
                return Err(Error::Manifest(format!(
                    "pair `{}`: {} does not exist",
                    entry.id,
                    p.display()
                )));
            }
        }
        pairs.push(entry);
    }
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    pairs.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(PairManifest {
        pairs,
        warnings: Vec::new(),
    })
}

/// Decode every pair; failures come back as (id, message) entries.
fn load_pairs(manifest: &PairManifest) -> (Vec<ImagePair>, Vec<(String, String)>) {
    let loaded: Vec<std::result::Result<ImagePair, (String, String)>> = manifest
        .pairs
        .par_iter()
        .map(|entry| {
            let open =
                |p: &Path| ImageBuffer::open(p).map_err(|e| (entry.id.clone(), e.to_string()));
            Ok(ImagePair {
                id: entry.id.clone(),
                damaged: open(&entry.damaged)?,
                reference: open(&entry.reference)?,
            })
        })
        .collect();
    let mut pairs = Vec::new();
    let mut failures = Vec::new();
    for item in loaded {
        match item {
            Ok(p) => pairs.push(p),
            Err(f) => failures.push(f),
        }
    }
    (pairs, failures)
}

#[derive(Debug)]
pub struct LearnOutcome {
    pub transform: TransformSet,
    /// Per-pair estimates (metadata `source` holds `pair:<id>`).
    pub estimates: Vec<TransformSet>,
    pub document_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
    pub svg_path: PathBuf,
    pub failures: Vec<(String, String)>,
}

/// Train on a paired corpus: estimate one transform set per pair, aggregate
/// by the pointwise median, and write the transform document, per-channel
/// curve CSVs, and the combined SVG.
pub fn learn(manifest: &PairManifest, config: &JobConfig) -> Result<LearnOutcome> {
    config.validate()?;
    for warning in &manifest.warnings {
        log::warn!("{warning}");
    }
    std::fs::create_dir_all(&config.output_dir)?;
    let pool = worker_pool(config.workers)?;

    let (estimates, failures): (Vec<TransformSet>, Vec<(String, String)>) = pool.install(|| {
        let (pairs, mut failures) = load_pairs(manifest);
        let estimated: Vec<std::result::Result<TransformSet, (String, String)>> = pairs
            .par_iter()
            .map(|pair| {
                estimate_pair(
                    &pair.damaged,
                    &pair.reference,
                    config.quantile_intervals,
                    config.grid_size,
                )
                .map(|mut ts| {
                    ts.metadata_mut()
                        .insert(meta::SOURCE.to_string(), format!("pair:{}", pair.id));
                    ts
                })
                .map_err(|e| (pair.id.clone(), e.to_string()))
            })
            .collect();
        let mut estimates = Vec::new();
        for item in estimated {
            match item {
                Ok(ts) => estimates.push(ts),
                Err(f) => failures.push(f),
            }
        }
        (estimates, failures)
    });

    for (id, message) in &failures {
        log::warn!("pair `{id}` dropped: {message}");
    }
    if estimates.is_empty() {
        return Err(Error::NoPairs);
    }
    if estimates.len() < 2 && manifest.pairs.len() >= 2 {
        return Err(Error::TooManyPairFailures {
            succeeded: estimates.len(),
            listed: manifest.pairs.len(),
        });
    }
    if estimates.len() == 1 {
        log::warn!("training on a single pair; the transform will overfit that image");
    }

    let mut pair_ids: Vec<&str> = estimates
        .iter()
        .filter_map(|e| e.metadata().get(meta::SOURCE))
        .filter_map(|s| s.strip_prefix("pair:"))
        .collect();
    pair_ids.sort_unstable();

    for est in &estimates {
        let source = est
            .metadata()
            .get(meta::SOURCE)
            .cloned()
            .unwrap_or_default();
        log::info!(
            "{source}: max deviation from identity c={:.4} m={:.4} y={:.4}",
            est.channel(Channel::Cyan).max_identity_deviation(),
            est.channel(Channel::Magenta).max_identity_deviation(),
            est.channel(Channel::Yellow).max_identity_deviation(),
        );
    }

    let mut transform = aggregate_median(&estimates)?;
    transform
        .metadata_mut()
        .insert(meta::PAIRS.to_string(), pair_ids.join(";"));
    transform.metadata_mut().insert(
        meta::QUANTILE_INTERVALS.to_string(),
        config.quantile_intervals.to_string(),
    );
    if let Some(ts) = &config.timestamp {
        transform
            .metadata_mut()
            .insert(meta::CREATED.to_string(), ts.clone());
    }

    let document_path = config.output_dir.join("transform.json");
    write_document(&transform, &document_path)?;
    let csv_paths = write_channel_csvs(&transform, &config.output_dir, "curve")?;
    let svg_path = config.output_dir.join("curves.svg");
    write_svg(&transform, &estimates, &svg_path)?;

    Ok(LearnOutcome {
        transform,
        estimates,
        document_path,
        csv_paths,
        svg_path,
        failures,
    })
}

#[derive(Debug, Default)]
pub struct ApplyOutcome {
    pub written: Vec<PathBuf>,
    pub skipped: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, String)>,
}

enum FileResult {
    Written(PathBuf),
    Skipped(PathBuf),
    Failed(PathBuf, String),
}

/// Restore a batch of images through a transform set, writing each result
/// under the output directory with its original file name and format.
/// Existing outputs are skipped unless `config.overwrite` is set.
pub fn apply_batch(
    inputs: &[PathBuf],
    transform: &TransformSet,
    config: &JobConfig,
) -> Result<ApplyOutcome> {
    config.validate()?;
    let files = collect_inputs(inputs)?;
    if files.is_empty() {
        return Err(Error::invalid("inputs", "no image files found"));
    }
    std::fs::create_dir_all(&config.output_dir)?;
    let pool = worker_pool(config.workers)?;

    let results: Vec<FileResult> = pool.install(|| {
        files
            .par_iter()
            .map(|input| {
                let name = match input.file_name() {
                    Some(n) => n,
                    None => return FileResult::Failed(input.clone(), "no file name".into()),
                };
                let out_path = config.output_dir.join(name);
                if out_path.exists() && !config.overwrite {
                    log::warn!("{} exists; skipping (use overwrite)", out_path.display());
                    return FileResult::Skipped(out_path);
                }
                let run = || -> Result<()> {
                    let image = ImageBuffer::open(input)?;
                    apply(&image, transform).save(&out_path)?;
                    Ok(())
                };
                match run() {
                    Ok(()) => FileResult::Written(out_path),
                    Err(e) => FileResult::Failed(input.clone(), e.to_string()),
                }
            })
            .collect()
    });

    let mut outcome = ApplyOutcome::default();
    for r in results {
        match r {
            FileResult::Written(p) => outcome.written.push(p),
            FileResult::Skipped(p) => outcome.skipped.push(p),
            FileResult::Failed(p, m) => {
                log::error!("{}: {m}", p.display());
                outcome.failures.push((p, m));
            }
        }
    }
    Ok(outcome)
}

#[derive(Debug)]
pub struct LooOutcome {
    pub report: EvalReport,
    pub failures: Vec<(String, String)>,
}

/// Leave-one-out cross-validation over the manifest's pairs.
pub fn evaluate_loo(manifest: &PairManifest, config: &JobConfig) -> Result<LooOutcome> {
    config.validate()?;
    for warning in &manifest.warnings {
        log::warn!("{warning}");
    }
    let pool = worker_pool(config.workers)?;
    pool.install(|| {
        let (pairs, failures) = load_pairs(manifest);
        for (id, message) in &failures {
            log::warn!("pair `{id}` dropped: {message}");
        }
        let report = loo_cv(&pairs, &config.loo_params())?;
        Ok(LooOutcome { report, failures })
    })
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub report: PixelDistanceReport,
    pub warnings: Vec<String>,
    pub failures: Vec<(String, String)>,
}

/// Compare originals and corrected images against reference edits, matching
/// the three directories by file stem.
pub fn evaluate_compare(
    originals_dir: impl AsRef<Path>,
    edited_dir: impl AsRef<Path>,
    corrected_dir: impl AsRef<Path>,
    config: &JobConfig,
) -> Result<CompareOutcome> {
    config.validate()?;
    let mut warnings = Vec::new();
    let originals = stem_map(originals_dir.as_ref(), &mut warnings)?;
    let mut edited = stem_map(edited_dir.as_ref(), &mut warnings)?;
    let mut corrected = stem_map(corrected_dir.as_ref(), &mut warnings)?;

    let mut triples: Vec<(String, PathBuf, PathBuf, PathBuf)> = Vec::new();
    for (stem, original) in originals {
        match (edited.remove(&stem), corrected.remove(&stem)) {
            (Some(e), Some(c)) => triples.push((stem, original, e, c)),
            _ => warnings.push(format!(
                "`{stem}` missing an edited or corrected counterpart"
            )),
        }
    }
    for stem in edited.keys().chain(corrected.keys()) {
        warnings.push(format!("`{stem}` has no original counterpart"));
    }
    if triples.is_empty() {
        return Err(Error::NoPairs);
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    type LoadedTriple = (String, ImageBuffer, ImageBuffer, ImageBuffer);
    let pool = worker_pool(config.workers)?;
    pool.install(|| {
        let loaded: Vec<std::result::Result<LoadedTriple, (String, String)>> = triples
            .par_iter()
            .map(|(id, o, e, c)| {
                let open =
                    |p: &Path| ImageBuffer::open(p).map_err(|err| (id.clone(), err.to_string()));
                Ok((id.clone(), open(o)?, open(e)?, open(c)?))
            })
            .collect();
        let mut ids = Vec::new();
        let mut originals = Vec::new();
        let mut edits = Vec::new();
        let mut correcteds = Vec::new();
        let mut failures = Vec::new();
        for item in loaded {
            match item {
                Ok((id, o, e, c)) => {
                    ids.push(id);
                    originals.push(o);
                    edits.push(e);
                    correcteds.push(c);
                }
                Err(f) => failures.push(f),
            }
        }
        let report = comparison_report(&ids, &edits, &originals, &correcteds)?;
        Ok(CompareOutcome {
            report,
            warnings,
            failures,
        })
    })
}

#[derive(Debug)]
pub struct SynthOutcome {
    pub degraded: Vec<PathBuf>,
    pub skipped: Vec<PathBuf>,
    pub failures: Vec<(PathBuf, String)>,
    pub degradation_doc: PathBuf,
    pub correction_doc: PathBuf,
}

/// Degrade clean images through a known monotone curve triple, writing the
/// degraded copies plus two ground-truth documents: the degradation that
/// was applied and its exact inverse (the correction a learner should
/// recover). `jitter > 0` perturbs each image's exponents by a seeded,
/// per-image factor of at most e^±jitter.
pub fn synthesize(
    inputs: &[PathBuf],
    spec: &DegradationSpec,
    jitter: f64,
    config: &JobConfig,
) -> Result<SynthOutcome> {
    config.validate()?;
    let files = collect_inputs(inputs)?;
    if files.is_empty() {
        return Err(Error::invalid("inputs", "no image files found"));
    }
    std::fs::create_dir_all(&config.output_dir)?;

    let forward = spec.forward_transform(config.grid_size)?;
    let correction = spec.correction_transform(config.grid_size)?;
    let degradation_doc = config.output_dir.join("degradation.json");
    let correction_doc = config.output_dir.join("correction.json");
    write_document(&forward, &degradation_doc)?;
    write_document(&correction, &correction_doc)?;

    let pool = worker_pool(config.workers)?;
    let results: Vec<FileResult> = pool.install(|| {
        files
            .par_iter()
            .enumerate()
            .map(|(index, input)| {
                let name = match input.file_name() {
                    Some(n) => n,
                    None => return FileResult::Failed(input.clone(), "no file name".into()),
                };
                let out_path = config.output_dir.join(name);
                if out_path.exists() && !config.overwrite {
                    return FileResult::Skipped(out_path);
                }
                let run = || -> Result<()> {
                    let ts = if jitter > 0.0 {
                        // Seed per image index so results do not depend on the
                        // worker count or traversal order.
                        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                            config
                                .seed
                                .wrapping_add((index as u64).wrapping_mul(0x9E3779B97F4A7C15)),
                        );
                        spec.jittered(&mut rng, jitter)?
                            .forward_transform(config.grid_size)?
                    } else {
                        forward.clone()
                    };
                    let image = ImageBuffer::open(input)?;
                    apply(&image, &ts).save(&out_path)?;
                    Ok(())
                };
                match run() {
                    Ok(()) => FileResult::Written(out_path),
                    Err(e) => FileResult::Failed(input.clone(), e.to_string()),
                }
            })
            .collect()
    });

    let mut outcome = SynthOutcome {
        degraded: Vec::new(),
        skipped: Vec::new(),
        failures: Vec::new(),
        degradation_doc,
        correction_doc,
    };
    for r in results {
        match r {
            FileResult::Written(p) => outcome.degraded.push(p),
            FileResult::Skipped(p) => outcome.skipped.push(p),
            FileResult::Failed(p, m) => {
                log::error!("{}: {m}", p.display());
                outcome.failures.push((p, m));
            }
        }
    }
    Ok(outcome)
}

/// Re-export curve CSVs and the SVG (medians only) from a saved document.
pub fn export_curves(
    document_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
) -> Result<(Vec<PathBuf>, PathBuf)> {
    let transform = read_document(document_path)?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let csv_paths = write_channel_csvs(&transform, out_dir, "curve")?;
    let svg_path = out_dir.join("curves.svg");
    write_svg(&transform, &[], &svg_path)?;
    Ok((csv_paths, svg_path))
}
