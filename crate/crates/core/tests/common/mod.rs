//! Shared helpers for the integration suites.

use mhm::image::ImageBuffer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

/// Uniform-random 8-bit RGB image; covers the full intensity range, which
/// percentile matching needs to see.
pub fn random_image(seed: u64, w: u32, h: u32) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<u8> = (0..w as usize * h as usize * 3)
        .map(|_| rng.gen())
        .collect();
    ImageBuffer::from_rgb8(w, h, data).unwrap()
}

/// Write `count` random PNGs named img00.png.. into `dir`.
#[allow(dead_code)]
pub fn write_corpus(dir: &Path, count: usize, seed: u64, w: u32, h: u32) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    (0..count)
        .map(|i| {
            let path = dir.join(format!("img{i:02}.png"));
            random_image(seed.wrapping_add(i as u64), w, h)
                .save(&path)
                .unwrap();
            path
        })
        .collect()
}
