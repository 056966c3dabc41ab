//! Otsu's global threshold, used as the baseline segmenter.

use crate::raster::GrayImage;
use crate::threshold::ThresholdError;

pub const OTSU_BINS: usize = 256;

pub fn intensity_histogram(img: &GrayImage) -> [u64; OTSU_BINS] {
    let mut hist = [0u64; OTSU_BINS];
    for &v in img.data() {
        let bin = ((v * OTSU_BINS as f64).floor().max(0.0) as usize).min(OTSU_BINS - 1);
        hist[bin] += 1;
    }
    hist
}

/// Index `t` of the split maximising between-class variance, with class 0
/// holding bins `0..=t`. Ties go to the smallest `t`.
pub fn otsu_bin(hist: &[u64; OTSU_BINS]) -> Result<usize, ThresholdError> {
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    if occupied < 2 {
        return Err(ThresholdError::DegenerateHistogram);
    }
    let total: u128 = hist.iter().map(|&c| c as u128).sum();
    let weighted: u128 = hist.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();

    // ω0·ω1·(μ0 − μ1)² = (N·S0 − N0·S)² / (N² · N0 · N1); N² is common to all t.
    let (mut n0, mut s0) = (0u128, 0u128);
    let mut best: Option<(usize, f64)> = None;
    for (t, &c) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        n0 += c as u128;
        s0 += t as u128 * c as u128;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = ((total * s0) as i128 - (n0 * weighted) as i128) as f64;
        let score = diff * diff / (n0 as f64 * n1 as f64);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((t, score));
        }
    }
    best.map(|(t, _)| t).ok_or(ThresholdError::DegenerateHistogram)
}

/// Otsu threshold of an image as the centre of the selected bin.
pub fn otsu_threshold(img: &GrayImage) -> Result<f64, ThresholdError> {
    let t = otsu_bin(&intensity_histogram(img))?;
    Ok((t as f64 + 0.5) / OTSU_BINS as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(hist: &[u64; OTSU_BINS]) -> usize {
        let total: f64 = hist.iter().map(|&c| c as f64).sum();
        let mut best = (0, f64::NEG_INFINITY);
        for t in 0..OTSU_BINS - 1 {
            let (mut w0, mut m0, mut w1, mut m1) = (0.0, 0.0, 0.0, 0.0);
            for (i, &c) in hist.iter().enumerate() {
                if i <= t {
                    w0 += c as f64;
                    m0 += i as f64 * c as f64;
                } else {
                    w1 += c as f64;
                    m1 += i as f64 * c as f64;
                }
            }
            if w0 == 0.0 || w1 == 0.0 {
                continue;
            }
            let var = (w0 / total) * (w1 / total) * (m0 / w0 - m1 / w1).powi(2);
            if var > best.1 * (1.0 + 1e-12) {
                best = (t, var);
            }
        }
        best.0
    }

    #[test]
    fn two_level_threshold_between_levels() {
        let img = GrayImage::from_fn(10, 10, |x, _| if x < 5 { 0.2 } else { 0.8 }).unwrap();
        let t = otsu_threshold(&img).unwrap();
        assert!(t > 0.2 && t < 0.8, "{t}");
        assert_eq!(
            otsu_bin(&intensity_histogram(&img)).unwrap(),
            brute_force(&intensity_histogram(&img))
        );
    }

    #[test]
    fn constant_image_degenerate() {
        let img = GrayImage::filled(8, 8, 0.3).unwrap();
        assert_eq!(otsu_threshold(&img), Err(ThresholdError::DegenerateHistogram));
    }

    #[test]
    fn random_image_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        let img = GrayImage::from_fn(64, 64, |_, _| rng.random::<f64>()).unwrap();
        let hist = intensity_histogram(&img);
        assert_eq!(hist.iter().sum::<u64>(), 64 * 64);
        assert_eq!(otsu_bin(&hist).unwrap(), brute_force(&hist));
    }
}
