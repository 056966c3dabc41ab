//! Adaptive threshold selection on a 2D (intensity, neighbourhood mean)
//! histogram.
//!
//! The filtered image is reduced by 3x3 block averaging. Every downsampled
//! pixel then yields a vector `m = [i_ds, i_nb]`, where `i_nb` is the mean of
//! its `(2τ+1)² − 1` neighbours. For each candidate threshold `δ` on the bin
//! grid the histogram is split into four quadrants; only the two diagonal
//! quadrants (both coordinates `≤ δ`, both `> δ`) are clustered, and the `δ`
//! with the smallest within-cluster sum of squares wins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BinaryMask, GrayImage};

pub const DEFAULT_BINS: usize = 256;
pub const DEFAULT_TAU: usize = 1;
pub const DOWNSAMPLE_FACTOR: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum ThresholdError {
    #[error("image {width}x{height} is smaller than one {factor}x{factor} block")]
    ImageTooSmall { width: usize, height: usize, factor: usize },
    #[error("neighbourhood radius must be at least 1")]
    InvalidRadius,
    #[error("histogram needs at least 2 bins, got {0}")]
    InvalidBinCount(usize),
    #[error("dimension mismatch: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("histogram is degenerate: no threshold separates two non-empty clusters")]
    DegenerateHistogram,
}

/// Averages non-overlapping 3x3 blocks. Trailing rows/columns that do not
/// fill a block are dropped.
pub fn downsample(img: &GrayImage) -> Result<GrayImage, ThresholdError> {
    let f = DOWNSAMPLE_FACTOR;
    let (w, h) = (img.width(), img.height());
    if w < f || h < f {
        return Err(ThresholdError::ImageTooSmall {
            width: w,
            height: h,
            factor: f,
        });
    }
    let (ow, oh) = (w / f, h / f);
    let mut out = Vec::with_capacity(ow * oh);
    for by in 0..oh {
        for bx in 0..ow {
            let mut sum = 0.0;
            for y in by * f..(by + 1) * f {
                for x in bx * f..(bx + 1) * f {
                    sum += img.get(x, y);
                }
            }
            out.push((sum / (f * f) as f64).clamp(0.0, 1.0));
        }
    }
    Ok(GrayImage::from_raw_unchecked(ow, oh, out))
}

/// Mean of the `(2τ+1)² − 1` neighbours of each pixel, centre excluded,
/// with clamp-to-edge borders.
pub fn neighborhood_mean(ds: &GrayImage, tau: usize) -> Result<GrayImage, ThresholdError> {
    if tau < 1 {
        return Err(ThresholdError::InvalidRadius);
    }
    let t = tau as isize;
    let count = ((2 * tau + 1) * (2 * tau + 1) - 1) as f64;
    let (w, h) = (ds.width(), ds.height());
    let mut out = Vec::with_capacity(w * h);
    for v in 0..h as isize {
        for u in 0..w as isize {
            let mut sum = 0.0;
            for dy in -t..=t {
                for dx in -t..=t {
                    if dx != 0 || dy != 0 {
                        sum += ds.get_clamped(u + dx, v + dy);
                    }
                }
            }
            out.push((sum / count).clamp(0.0, 1.0));
        }
    }
    Ok(GrayImage::from_raw_unchecked(w, h, out))
}

/// Counts of `(i_ds, i_nb)` vectors on a `B x B` grid. Axis 0 is `i_ds`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram2D {
    bins: usize,
    counts: Vec<u64>,
}

impl Histogram2D {
    pub fn new(bins: usize) -> Result<Self, ThresholdError> {
        if bins < 2 {
            return Err(ThresholdError::InvalidBinCount(bins));
        }
        Ok(Self {
            bins,
            counts: vec![0; bins * bins],
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn bin_of(&self, intensity: f64) -> usize {
        ((intensity * self.bins as f64).floor().max(0.0) as usize).min(self.bins - 1)
    }

    /// Intensity at the centre of bin `k`.
    #[inline]
    pub fn bin_center(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.bins as f64
    }

    pub fn add(&mut self, i_ds: f64, i_nb: f64, count: u64) {
        let (a, b) = (self.bin_of(i_ds), self.bin_of(i_nb));
        self.counts[a * self.bins + b] += count;
    }

    pub fn add_at_bin(&mut self, ds_bin: usize, nb_bin: usize, count: u64) {
        self.counts[ds_bin * self.bins + nb_bin] += count;
    }

    #[inline]
    pub fn count(&self, ds_bin: usize, nb_bin: usize) -> u64 {
        self.counts[ds_bin * self.bins + nb_bin]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Mass in (region 1, region 2, regions 3+4) for the candidate at bin `k`.
    pub fn region_masses(&self, k: usize) -> (u64, u64, u64) {
        let (mut r1, mut r2, mut rest) = (0, 0, 0);
        for a in 0..self.bins {
            for b in 0..self.bins {
                let n = self.count(a, b);
                match (a <= k, b <= k) {
                    (true, true) => r1 += n,
                    (false, false) => r2 += n,
                    _ => rest += n,
                }
            }
        }
        (r1, r2, rest)
    }
}

pub fn build_histogram(ds: &GrayImage, nb: &GrayImage, bins: usize) -> Result<Histogram2D, ThresholdError> {
    if (ds.width(), ds.height()) != (nb.width(), nb.height()) {
        return Err(ThresholdError::DimensionMismatch(
            (ds.width(), ds.height()),
            (nb.width(), nb.height()),
        ));
    }
    let mut hist = Histogram2D::new(bins)?;
    for (&a, &b) in ds.data().iter().zip(nb.data()) {
        hist.add(a, b, 1);
    }
    Ok(hist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// Selected threshold (a bin centre).
    pub delta: f64,
    /// Bin index of `delta`.
    pub bin: usize,
    /// WCSS per candidate bin; `None` where either cluster would be empty.
    pub wcss_curve: Vec<Option<f64>>,
    /// Means of the foreground and background clusters as `[i_ds, i_nb]`.
    pub cluster_means: [[f64; 2]; 2],
}

impl ThresholdResult {
    /// Candidate thresholds paired with their WCSS, skipping invalid ones.
    pub fn curve_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let bins = self.wcss_curve.len() as f64;
        self.wcss_curve
            .iter()
            .enumerate()
            .filter_map(move |(k, w)| w.map(|w| ((k as f64 + 0.5) / bins, w)))
    }
}

/// Integer moments of a set of bins. Coordinates are in doubled bin units
/// (`2k + 1`), so bin centres are exact integers.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u128,
    sa: u128,
    sb: u128,
    sq: u128,
}

impl Moments {
    fn plus(self, o: Self) -> Self {
        Self {
            n: self.n + o.n,
            sa: self.sa + o.sa,
            sb: self.sb + o.sb,
            sq: self.sq + o.sq,
        }
    }
    fn minus(self, o: Self) -> Self {
        Self {
            n: self.n - o.n,
            sa: self.sa - o.sa,
            sb: self.sb - o.sb,
            sq: self.sq - o.sq,
        }
    }

    /// `n · WCSS` in doubled units, exact.
    fn scaled_scatter(&self) -> u128 {
        self.n * self.sq - (self.sa * self.sa + self.sb * self.sb)
    }
}

struct PrefixMoments {
    stride: usize,
    table: Vec<Moments>,
}

impl PrefixMoments {
    fn new(hist: &Histogram2D) -> Self {
        let b = hist.bins;
        let stride = b + 1;
        let mut table = vec![Moments::default(); stride * stride];
        for a in 0..b {
            for c in 0..b {
                let n = hist.count(a, c) as u128;
                let (x, y) = (2 * a as u128 + 1, 2 * c as u128 + 1);
                let cell = Moments {
                    n,
                    sa: n * x,
                    sb: n * y,
                    sq: n * (x * x + y * y),
                };
                let up = table[a * stride + c + 1];
                let left = table[(a + 1) * stride + c];
                let diag = table[a * stride + c];
                table[(a + 1) * stride + c + 1] = cell.plus(up).plus(left).minus(diag);
            }
        }
        Self { stride, table }
    }

    /// Moments over `[0, a) x [0, c)`.
    fn get(&self, a: usize, c: usize) -> Moments {
        self.table[a * self.stride + c]
    }
}

/// Scans every candidate bin and returns the threshold minimising the
/// within-cluster sum of squares of regions 1 and 2. Among candidates whose
/// WCSS equals the minimum (to 1e-12 relative), the median one is returned.
pub fn find_threshold(hist: &Histogram2D) -> Result<ThresholdResult, ThresholdError> {
    let b = hist.bins;
    let prefix = PrefixMoments::new(hist);
    let all = prefix.get(b, b);
    let unit = 2.0 * b as f64;
    let unit2 = unit * unit;

    let mut curve = Vec::with_capacity(b);
    let mut parts = Vec::with_capacity(b);
    for k in 0..b {
        let fg = prefix.get(k + 1, k + 1);
        let bg = all
            .plus(prefix.get(k + 1, k + 1))
            .minus(prefix.get(k + 1, b))
            .minus(prefix.get(b, k + 1));
        if fg.n == 0 || bg.n == 0 {
            curve.push(None);
        } else {
            let w1 = fg.scaled_scatter() as f64 / fg.n as f64;
            let w2 = bg.scaled_scatter() as f64 / bg.n as f64;
            curve.push(Some((w1 + w2) / unit2));
        }
        parts.push((fg, bg));
    }

    let min = curve.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(ThresholdError::DegenerateHistogram);
    }
    let tol = min * 1e-12;
    let argmin: Vec<usize> = curve
        .iter()
        .enumerate()
        .filter_map(|(k, w)| w.filter(|&w| w <= min + tol).map(|_| k))
        .collect();
    let bin = argmin[(argmin.len() - 1) / 2];
    let (fg, bg) = parts[bin];
    let mean = |m: Moments| [m.sa as f64 / m.n as f64 / unit, m.sb as f64 / m.n as f64 / unit];
    Ok(ThresholdResult {
        delta: hist.bin_center(bin),
        bin,
        wcss_curve: curve,
        cluster_means: [mean(fg), mean(bg)],
    })
}

/// Foreground iff intensity is strictly below `delta`.
pub fn segment(filtered: &GrayImage, delta: f64) -> Result<BinaryMask, ThresholdError> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(ThresholdError::InvalidThreshold(delta));
    }
    let labels = filtered.data().iter().map(|&v| v < delta).collect();
    Ok(BinaryMask::new(filtered.width(), filtered.height(), labels).expect("dimensions copied from a valid image"))
}

/// Downsample, build the histogram and search for the threshold in one go.
pub fn adaptive_threshold(filtered: &GrayImage, tau: usize, bins: usize) -> Result<ThresholdResult, ThresholdError> {
    let ds = downsample(filtered)?;
    let nb = neighborhood_mean(&ds, tau)?;
    let hist = build_histogram(&ds, &nb, bins)?;
    find_threshold(&hist)
}
