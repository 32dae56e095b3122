//! Decoded raster images.
//!
//! Pixels are kept at their source bit depth (8 or 16 bits per channel) and
//! normalized to [0, 1] on access by dividing by the maximum code value.
//! Alpha channels are carried through untouched and ignored for estimation.

use crate::colorspace::{Channel, RgbTriple};
use crate::error::{Error, Result};
use image::{DynamicImage, ImageReader};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum PixelData {
    Rgb8(Vec<u8>),
    Rgba8(Vec<u8>),
    Rgb16(Vec<u16>),
    Rgba16(Vec<u16>),
}

/// A decoded image with per-pixel RGB (and optional alpha) samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: PixelData,
}

/// JPEG output quality used whenever a corrected image is re-encoded as JPEG.
/// Lossless round-trip is impossible for JPEG; the value is fixed so batch
/// runs are reproducible.
pub const JPEG_QUALITY: u8 = 95;

impl ImageBuffer {
    pub fn from_rgb8(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        Self::check_len(width, height, data.len(), 3)?;
        Ok(ImageBuffer {
            width,
            height,
            data: PixelData::Rgb8(data),
        })
    }

    pub fn from_rgba8(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        Self::check_len(width, height, data.len(), 4)?;
        Ok(ImageBuffer {
            width,
            height,
            data: PixelData::Rgba8(data),
        })
    }

    pub fn from_rgb16(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        Self::check_len(width, height, data.len(), 3)?;
        Ok(ImageBuffer {
            width,
            height,
            data: PixelData::Rgb16(data),
        })
    }

    pub fn from_rgba16(width: u32, height: u32, data: Vec<u16>) -> Result<Self> {
        Self::check_len(width, height, data.len(), 4)?;
        Ok(ImageBuffer {
            width,
            height,
            data: PixelData::Rgba16(data),
        })
    }

    fn check_len(width: u32, height: u32, len: usize, channels: usize) -> Result<()> {
        let expected = width as usize * height as usize * channels;
        if len != expected {
            return Err(Error::invalid(
                "data",
                format!("expected {expected} samples for {width}x{height}, got {len}"),
            ));
        }
        Ok(())
    }

    /// Decode an image file. Grayscale inputs are expanded to RGB at their
    /// native depth; float inputs are not supported.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = ImageReader::open(path)
            .map_err(|source| Error::FileRead {
                path: path.to_path_buf(),
                source,
            })?
            .decode()?;
        Self::from_dynamic(decoded)
    }

    fn from_dynamic(decoded: DynamicImage) -> Result<Self> {
        let (width, height) = (decoded.width(), decoded.height());
        let data = match decoded {
            DynamicImage::ImageRgb8(buf) => PixelData::Rgb8(buf.into_raw()),
            DynamicImage::ImageRgba8(buf) => PixelData::Rgba8(buf.into_raw()),
            DynamicImage::ImageRgb16(buf) => PixelData::Rgb16(buf.into_raw()),
            DynamicImage::ImageRgba16(buf) => PixelData::Rgba16(buf.into_raw()),
            DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
                PixelData::Rgb8(decoded.to_rgb8().into_raw())
            }
            DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
                PixelData::Rgb16(decoded.to_rgb16().into_raw())
            }
            other => {
                return Err(Error::invalid(
                    "image",
                    format!("unsupported pixel format {:?}", other.color()),
                ))
            }
        };
        Ok(ImageBuffer {
            width,
            height,
            data,
        })
    }

    /// Encode to `path`, format chosen from the extension. Bit depth and
    /// alpha are preserved where the format allows; JPEG uses a fixed
    /// quality of [`JPEG_QUALITY`].
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dynamic = self.to_dynamic();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        if ext == "jpg" || ext == "jpeg" {
            let file = std::fs::File::create(path).map_err(|source| Error::FileWrite {
                path: path.to_path_buf(),
                source,
            })?;
            let writer = std::io::BufWriter::new(file);
            let encoder = image::codecs::jpeg::JpegEncoder::new_with_quality(writer, JPEG_QUALITY);
            // JPEG has no alpha or 16-bit support.
            dynamic.to_rgb8().write_with_encoder(encoder)?;
        } else {
            dynamic.save(path)?;
        }
        Ok(())
    }

    fn to_dynamic(&self) -> DynamicImage {
        match &self.data {
            PixelData::Rgb8(d) => DynamicImage::ImageRgb8(
                image::RgbImage::from_raw(self.width, self.height, d.clone())
                    .expect("buffer length checked at construction"),
            ),
            PixelData::Rgba8(d) => DynamicImage::ImageRgba8(
                image::RgbaImage::from_raw(self.width, self.height, d.clone())
                    .expect("buffer length checked at construction"),
            ),
            PixelData::Rgb16(d) => DynamicImage::ImageRgb16(
                image::ImageBuffer::from_raw(self.width, self.height, d.clone())
                    .expect("buffer length checked at construction"),
            ),
            PixelData::Rgba16(d) => DynamicImage::ImageRgba16(
                image::ImageBuffer::from_raw(self.width, self.height, d.clone())
                    .expect("buffer length checked at construction"),
            ),
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.pixel_count() == 0
    }

    pub fn bit_depth(&self) -> BitDepth {
        match self.data {
            PixelData::Rgb8(_) | PixelData::Rgba8(_) => BitDepth::Eight,
            PixelData::Rgb16(_) | PixelData::Rgba16(_) => BitDepth::Sixteen,
        }
    }

    pub fn has_alpha(&self) -> bool {
        matches!(self.data, PixelData::Rgba8(_) | PixelData::Rgba16(_))
    }

    fn samples_per_pixel(&self) -> usize {
        if self.has_alpha() {
            4
        } else {
            3
        }
    }

    /// Normalized RGB of the pixel at flat index `i` (row-major).
    pub fn rgb_at(&self, i: usize) -> RgbTriple {
        let s = self.samples_per_pixel();
        match &self.data {
            PixelData::Rgb8(d) | PixelData::Rgba8(d) => RgbTriple::new(
                d[i * s] as f64 / 255.0,
                d[i * s + 1] as f64 / 255.0,
                d[i * s + 2] as f64 / 255.0,
            ),
            PixelData::Rgb16(d) | PixelData::Rgba16(d) => RgbTriple::new(
                d[i * s] as f64 / 65535.0,
                d[i * s + 1] as f64 / 65535.0,
                d[i * s + 2] as f64 / 65535.0,
            ),
        }
    }

    pub fn rgb_pixels(&self) -> impl Iterator<Item = RgbTriple> + '_ {
        (0..self.pixel_count()).map(move |i| self.rgb_at(i))
    }

    /// Normalized CMY intensities of one channel, pixel by pixel.
    pub fn cmy_values(&self, channel: Channel) -> impl Iterator<Item = f64> + '_ {
        let idx = channel.index();
        self.rgb_pixels().map(move |p| 1.0 - p.component(idx))
    }

    /// Remap every pixel through per-channel code lookup tables sized to this
    /// image's bit depth; alpha samples pass through unchanged.
    pub(crate) fn map_codes(&self, luts: &ChannelLuts) -> ImageBuffer {
        let s = self.samples_per_pixel();
        let data = match (&self.data, luts) {
            (PixelData::Rgb8(d) | PixelData::Rgba8(d), ChannelLuts::Eight(t)) => {
                let mut out = d.clone();
                for px in out.chunks_exact_mut(s) {
                    px[0] = t[0][px[0] as usize];
                    px[1] = t[1][px[1] as usize];
                    px[2] = t[2][px[2] as usize];
                }
                if s == 4 {
                    PixelData::Rgba8(out)
                } else {
                    PixelData::Rgb8(out)
                }
            }
            (PixelData::Rgb16(d) | PixelData::Rgba16(d), ChannelLuts::Sixteen(t)) => {
                let mut out = d.clone();
                for px in out.chunks_exact_mut(s) {
                    px[0] = t[0][px[0] as usize];
                    px[1] = t[1][px[1] as usize];
                    px[2] = t[2][px[2] as usize];
                }
                if s == 4 {
                    PixelData::Rgba16(out)
                } else {
                    PixelData::Rgb16(out)
                }
            }
            _ => unreachable!("lookup tables built for the wrong bit depth"),
        };
        ImageBuffer {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Per-channel code remapping tables, indexed `[red, green, blue]`.
pub(crate) enum ChannelLuts {
    Eight([Box<[u8; 256]>; 3]),
    Sixteen([Vec<u16>; 3]),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_buffer_length() {
        assert!(ImageBuffer::from_rgb8(2, 2, vec![0; 11]).is_err());
        assert!(ImageBuffer::from_rgb8(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn normalizes_by_max_code() {
        let img = ImageBuffer::from_rgb8(1, 1, vec![255, 0, 51]).unwrap();
        let p = img.rgb_at(0);
        assert_eq!(p.r, 1.0);
        assert_eq!(p.g, 0.0);
        assert_eq!(p.b, 51.0 / 255.0);

        let img16 = ImageBuffer::from_rgb16(1, 1, vec![65535, 0, 13107]).unwrap();
        let q = img16.rgb_at(0);
        assert_eq!(q.r, 1.0);
        assert_eq!(q.b, 13107.0 / 65535.0);
    }

    #[test]
    fn cmy_values_complement_rgb_channel() {
        let img = ImageBuffer::from_rgb8(2, 1, vec![0, 128, 255, 255, 0, 0]).unwrap();
        let cyans: Vec<f64> = img.cmy_values(Channel::Cyan).collect();
        assert_eq!(cyans, vec![1.0, 0.0]);
        let yellows: Vec<f64> = img.cmy_values(Channel::Yellow).collect();
        assert_eq!(yellows, vec![0.0, 1.0]);
    }

    #[test]
    fn png_round_trip_preserves_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageBuffer::from_rgba8(2, 2, (0..16u8).map(|v| v * 13).collect()).unwrap();
        let path = dir.path().join("t.png");
        img.save(&path).unwrap();
        let back = ImageBuffer::open(&path).unwrap();
        assert_eq!(back, img);

        let img16 = ImageBuffer::from_rgb16(2, 1, vec![0, 700, 65535, 1, 2, 3]).unwrap();
        let path16 = dir.path().join("t16.png");
        img16.save(&path16).unwrap();
        assert_eq!(ImageBuffer::open(&path16).unwrap(), img16);
    }
}
