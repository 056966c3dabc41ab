//! Bilateral smoothing.
//!
//! Each output pixel is the weighted mean of its `(2ρ+1)²` window, with
//! weight `exp(-d²/σ_s²) · exp(-Δi²/σ_c²)` where `d` is the spatial offset
//! and `Δi` the intensity difference to the centre pixel. Windows that leave
//! the image sample the nearest edge pixel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::GrayImage;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("image is empty")]
    EmptyImage,
    #[error("invalid bilateral parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilateralParams {
    /// Spatial falloff, in pixels.
    pub sigma_s: f64,
    /// Intensity falloff, in unit-intensity units.
    pub sigma_c: f64,
    /// Half-width of the window.
    pub rho: usize,
}

impl Default for BilateralParams {
    fn default() -> Self {
        Self {
            sigma_s: 300.0,
            sigma_c: 0.1,
            rho: 5,
        }
    }
}

impl BilateralParams {
    pub fn new(sigma_s: f64, sigma_c: f64, rho: usize) -> Result<Self, FilterError> {
        let p = Self { sigma_s, sigma_c, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.sigma_s.is_finite() && self.sigma_s > 0.0) {
            return Err(FilterError::InvalidParams("sigma_s must be positive"));
        }
        if !(self.sigma_c.is_finite() && self.sigma_c > 0.0) {
            return Err(FilterError::InvalidParams("sigma_c must be positive"));
        }
        if self.rho < 1 {
            return Err(FilterError::InvalidParams("rho must be at least 1"));
        }
        Ok(())
    }
}

pub fn bilateral_filter(img: &GrayImage, params: &BilateralParams) -> Result<GrayImage, FilterError> {
    params.validate()?;
    if img.is_empty() {
        return Err(FilterError::EmptyImage);
    }
    let (w, h) = (img.width(), img.height());
    let r = params.rho as isize;
    let side = 2 * params.rho + 1;
    let inv_s2 = 1.0 / (params.sigma_s * params.sigma_s);
    let inv_c2 = 1.0 / (params.sigma_c * params.sigma_c);

    let mut spatial = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            spatial.push((-((dx * dx + dy * dy) as f64) * inv_s2).exp());
        }
    }

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        let v = v as isize;
        for (u, px) in row.iter_mut().enumerate() {
            let centre = img.get(u, v as usize);
            let u = u as isize;
            let (mut num, mut den) = (0.0, 0.0);
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let val = img.get_clamped(u + dx, v + dy);
                    let diff = val - centre;
                    let wgt = spatial[k] * (-diff * diff * inv_c2).exp();
                    num += wgt * val;
                    den += wgt;
                    lo = lo.min(val);
                    hi = hi.max(val);
                    k += 1;
                }
            }
            // The centre weight is 1, so den >= 1. Clamping to the window range
            // absorbs rounding so constant windows reproduce their value exactly.
            *px = (num / den).clamp(lo, hi);
        }
    });
    Ok(GrayImage::from_raw_unchecked(w, h, out))
}
