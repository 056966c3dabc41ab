//! Synthetic road-surface images with known crack masks.
//!
//! A crack is a dark polyline stroke drawn over a flat background with
//! additive Gaussian noise. Stroke edges are anti-aliased over one pixel;
//! the ground truth marks pixels whose centre lies within the stroke's
//! half-width of the centreline.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::cnn::Sample;
use crate::metrics::Label;
use crate::raster::{BinaryMask, GrayImage, RgbImage};

#[derive(Debug, Clone, PartialEq)]
pub struct CrackStyle {
    pub width: usize,
    pub height: usize,
    pub crack_level: f64,
    pub background_level: f64,
    /// Half-range of the per-image uniform jitter applied to both levels.
    pub level_jitter: f64,
    pub noise_sigma: f64,
    /// Stroke half-width range in pixels.
    pub half_width: (f64, f64),
    pub segments: usize,
}

impl Default for CrackStyle {
    fn default() -> Self {
        Self {
            width: 227,
            height: 227,
            crack_level: 0.15,
            background_level: 0.7,
            level_jitter: 0.05,
            noise_sigma: 0.03,
            half_width: (3.0, 5.0),
            segments: 5,
        }
    }
}

impl CrackStyle {
    pub fn sized(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticImage {
    pub gray: GrayImage,
    pub truth: BinaryMask,
}

impl SyntheticImage {
    /// Grey intensities replicated into three 8-bit channels.
    pub fn to_rgb(&self) -> RgbImage {
        let px = self
            .gray
            .data()
            .iter()
            .map(|v| {
                let q = (v * 255.0).round() as u8;
                [q, q, q]
            })
            .collect();
        RgbImage::new(self.gray.width(), self.gray.height(), px).expect("valid dimensions")
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt()
}

/// Random polyline crossing the image from one side to the opposite one.
fn crack_path<R: Rng>(style: &CrackStyle, rng: &mut R) -> Vec<(f64, f64)> {
    let (w, h) = (style.width as f64, style.height as f64);
    let horizontal = rng.random_bool(0.5);
    let n = style.segments.max(1);
    let mut pts = Vec::with_capacity(n + 1);
    let mut cross = rng.random_range(0.25..0.75);
    for i in 0..=n {
        let along = i as f64 / n as f64;
        let (x, y) = if horizontal {
            (along * (w - 1.0), cross * (h - 1.0))
        } else {
            (cross * (w - 1.0), along * (h - 1.0))
        };
        pts.push((x, y));
        cross = (cross + rng.random_range(-0.15..0.15)).clamp(0.1, 0.9);
    }
    pts
}

fn jitter<R: Rng>(level: f64, amount: f64, rng: &mut R) -> f64 {
    if amount > 0.0 {
        level + rng.random_range(-amount..=amount)
    } else {
        level
    }
}

fn render<R: Rng>(style: &CrackStyle, path: Option<&[(f64, f64)]>, rng: &mut R) -> SyntheticImage {
    let bg = jitter(style.background_level, style.level_jitter, rng);
    let fg = jitter(style.crack_level, style.level_jitter, rng);
    let half = if style.half_width.1 > style.half_width.0 {
        rng.random_range(style.half_width.0..style.half_width.1)
    } else {
        style.half_width.0
    };
    let noise = Normal::new(0.0, style.noise_sigma.max(0.0)).expect("finite sigma");
    let (w, h) = (style.width, style.height);
    let mut data = Vec::with_capacity(w * h);
    let mut truth = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let d = path.map_or(f64::INFINITY, |pts| {
                pts.windows(2)
                    .map(|s| segment_distance((x as f64, y as f64), s[0], s[1]))
                    .fold(f64::INFINITY, f64::min)
            });
            let coverage = (half + 0.5 - d).clamp(0.0, 1.0);
            truth.push(d <= half);
            data.push(bg + coverage * (fg - bg) + noise.sample(rng));
        }
    }
    SyntheticImage {
        gray: GrayImage::new(w, h, data).expect("valid dimensions"),
        truth: BinaryMask::new(w, h, truth).expect("valid dimensions"),
    }
}

/// An image containing one crack.
pub fn crack_image<R: Rng>(style: &CrackStyle, rng: &mut R) -> SyntheticImage {
    let path = crack_path(style, rng);
    render(style, Some(&path), rng)
}

/// A crack-free image with the same background statistics.
pub fn plain_image<R: Rng>(style: &CrackStyle, rng: &mut R) -> SyntheticImage {
    render(style, None, rng)
}

/// Alternating crack / plain samples, `per_class` of each, crack first.
pub fn labeled_samples<R: Rng>(style: &CrackStyle, per_class: usize, rng: &mut R) -> Vec<Sample> {
    let mut out = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        out.push(Sample {
            image: crack_image(style, rng).to_rgb(),
            label: Label::Positive,
        });
        out.push(Sample {
            image: plain_image(style, rng).to_rgb(),
            label: Label::Negative,
        });
    }
    out
}
