//! Raster types and PNG/JPEG I/O.
//!
//! All images are row-major with the origin at the top-left corner. Colour
//! input is reduced to a single intensity channel in `[0, 1]` with BT.601
//! luma weights before any filtering or segmentation happens.

use std::path::Path;

use ::image::{imageops, ImageBuffer, ImageReader, Luma, Rgb};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("cannot decode {path}: {reason}")]
    Decode { path: String, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("buffer length {len} does not match {width}x{height}")]
    LengthMismatch { width: usize, height: usize, len: usize },
}

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// Foreground cut-off applied when reading ground-truth masks.
pub const MASK_THRESHOLD: u8 = 128;

fn check_dims(width: usize, height: usize, len: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions { width, height });
    }
    if width * height != len {
        return Err(ImageError::LengthMismatch { width, height, len });
    }
    Ok(())
}

/// 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self, ImageError> {
        check_dims(width, height, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: [u8; 3]) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    /// Bilinear resample to `width` x `height`. Returns a clone when the size
    /// already matches.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidDimensions { width, height });
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let buf = self.to_buffer();
        let out = imageops::resize(&buf, width as u32, height as u32, imageops::FilterType::Triangle);
        Ok(Self::from_buffer(&out))
    }

    fn to_buffer(&self) -> ImageBuffer<Rgb<u8>, Vec<u8>> {
        let raw: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        ImageBuffer::from_raw(self.width as u32, self.height as u32, raw).expect("pixel buffer sized by construction")
    }

    fn from_buffer(buf: &ImageBuffer<Rgb<u8>, Vec<u8>>) -> Self {
        Self {
            width: buf.width() as usize,
            height: buf.height() as usize,
            pixels: buf.pixels().map(|p| p.0).collect(),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        self.to_buffer()
            .save_with_format(path, ::image::ImageFormat::Png)
            .map_err(|e| io_error(path, e))
    }
}

/// Single-channel raster of intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Builds an image from row-major intensities. Values are clamped into
    /// `[0, 1]`; NaN maps to 0.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        check_dims(width, height, data.len())?;
        let data = data.into_iter().map(clamp_unit).collect();
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with clamp-to-edge addressing.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    pub fn mirrored_horizontally(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks(self.width) {
            data.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Adds `offset` to every intensity, clamping the result into `[0, 1]`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| clamp_unit(v + offset)).collect(),
        }
    }

    /// Internal constructor for producers that already guarantee range.
    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(width * height, data.len());
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { width, height, data }
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Per-pixel foreground/background labels. Foreground is the crack class.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    labels: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, labels: Vec<bool>) -> Result<Self, ImageError> {
        check_dims(width, height, labels.len())?;
        Ok(Self { width, height, labels })
    }

    pub fn background(width: usize, height: usize) -> Result<Self, ImageError> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self, ImageError> {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        Self::new(width, height, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, foreground: bool) {
        self.labels[y * self.width + x] = foreground;
    }

    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

fn io_error(path: &Path, err: ::image::ImageError) -> ImageError {
    match err {
        ::image::ImageError::IoError(source) => ImageError::Io {
            path: path.display().to_string(),
            source,
        },
        other => ImageError::Decode {
            path: path.display().to_string(),
            reason: other.to_string(),
        },
    }
}

fn decode(path: &Path) -> Result<::image::DynamicImage, ImageError> {
    if !path.is_file() {
        return Err(ImageError::FileNotFound(path.display().to_string()));
    }
    let reader = ImageReader::open(path)
        .map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| ImageError::Io {
            path: path.display().to_string(),
            source,
        })?;
    reader.decode().map_err(|e| ImageError::Decode {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Decodes a PNG or JPEG file into 8-bit RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage, ImageError> {
    let path = path.as_ref();
    let rgb = decode(path)?.to_rgb8();
    Ok(RgbImage::from_buffer(&rgb))
}

#[inline]
fn luma(p: [u8; 3]) -> f64 {
    LUMA_R * p[0] as f64 + LUMA_G * p[1] as f64 + LUMA_B * p[2] as f64
}

/// BT.601 luma, scaled to `[0, 1]`.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img.pixels.iter().map(|&p| clamp_unit(luma(p) / 255.0)).collect();
    GrayImage::from_raw_unchecked(img.width, img.height, data)
}

/// Quantizes an intensity image to 8 bits and writes it as a grayscale PNG.
pub fn save_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let raw: Vec<u8> = img.data.iter().map(|v| (v * 255.0).round() as u8).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(img.width as u32, img.height as u32, raw).expect("sized");
    buf.save_with_format(path, ::image::ImageFormat::Png)
        .map_err(|e| io_error(path, e))
}

/// Writes an 8-bit single-channel PNG: foreground 255, background 0.
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let raw: Vec<u8> = mask.labels.iter().map(|&l| if l { 255 } else { 0 }).collect();
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width as u32, mask.height as u32, raw).expect("sized");
    buf.save_with_format(path, ::image::ImageFormat::Png)
        .map_err(|e| io_error(path, e))
}

/// Reads a mask image; a pixel is foreground iff its luma is at least 128.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask, ImageError> {
    let path = path.as_ref();
    let rgb = decode(path)?.to_rgb8();
    // integer luma (weights x1000) keeps grey inputs exact at the boundary
    let cut = (MASK_THRESHOLD as u32) * 1000;
    let labels = rgb
        .pixels()
        .map(|p| 299 * p.0[0] as u32 + 587 * p.0[1] as u32 + 114 * p.0[2] as u32 >= cut)
        .collect();
    BinaryMask::new(rgb.width() as usize, rgb.height() as usize, labels)
}
