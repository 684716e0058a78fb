//! Shades of Gray illuminant estimation and correction.
//!
//! The illuminant colour is estimated per channel as the Minkowski p-mean of
//! the normalised intensities,
//!
//! ```text
//! e_c = ( (1/N) * sum_x (I_c(x) / 255)^p )^(1/p)
//! ```
//!
//! and then scaled to unit Euclidean length. `p = 1` is the Gray-World
//! estimator and `p -> inf` approaches Max-RGB. Correction multiplies channel
//! `c` by `1 / (sqrt(3) * e_c)`, which leaves an achromatic scene unchanged.

use crate::error::{Error, Result};
use crate::raster::{resize_image, RasterImage};

/// Minkowski order used when none is given.
pub const DEFAULT_MINKOWSKI_P: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorConstancyConfig {
    /// Order of the Minkowski mean; must be at least 1.
    pub minkowski_p: f64,
    /// Estimate and correct on sRGB-linearised intensities instead of the
    /// stored code values.
    pub gamma_linearize: bool,
}

impl Default for ColorConstancyConfig {
    fn default() -> Self {
        Self {
            minkowski_p: DEFAULT_MINKOWSKI_P,
            gamma_linearize: false,
        }
    }
}

impl ColorConstancyConfig {
    pub fn with_p(minkowski_p: f64) -> Result<Self> {
        let cfg = Self {
            minkowski_p,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.minkowski_p.is_finite() && self.minkowski_p >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Minkowski order must be a finite value >= 1, got {}",
                self.minkowski_p
            )));
        }
        Ok(())
    }

    fn intensity(&self, v: u8) -> f64 {
        let v = f64::from(v) / 255.0;
        if self.gamma_linearize {
            srgb_to_linear(v)
        } else {
            v
        }
    }

    fn code_value(&self, v: f64) -> f64 {
        let v = if self.gamma_linearize {
            linear_to_srgb(v.max(0.0))
        } else {
            v
        };
        v * 255.0
    }
}

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// Per-channel Minkowski p-means of the normalised intensities, before the
/// unit-length normalisation.
pub fn channel_norms(img: &RasterImage, cfg: &ColorConstancyConfig) -> Result<[f64; 3]> {
    cfg.validate()?;
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let p = cfg.minkowski_p;
    let mut sums = [0.0f64; 3];
    for px in img.pixels() {
        for (sum, &v) in sums.iter_mut().zip(px) {
            let i = cfg.intensity(v);
            *sum += if p == 1.0 { i } else { i.powf(p) };
        }
    }
    let n = img.pixels().len() as f64;
    Ok(sums.map(|s| (s / n).powf(1.0 / p)))
}

/// Unit-length illuminant colour estimate.
pub fn estimate_illuminant(img: &RasterImage, cfg: &ColorConstancyConfig) -> Result<[f64; 3]> {
    let e = channel_norms(img, cfg)?;
    let len = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if len == 0.0 {
        return Err(Error::AllBlackImage);
    }
    Ok(e.map(|v| v / len))
}

/// What a correction pass did to an image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionReport {
    /// Unit illuminant, or `None` when the image was all black and left as is.
    pub illuminant: Option<[f64; 3]>,
    pub gains: [f64; 3],
    /// Channel values that fell outside `[0, 255]` and were clipped.
    pub clipped: usize,
}

/// Shades of Gray correction. See [`apply_shades_of_gray_with_report`].
pub fn apply_shades_of_gray(img: &RasterImage, cfg: &ColorConstancyConfig) -> Result<RasterImage> {
    apply_shades_of_gray_with_report(img, cfg).map(|(out, _)| out)
}

/// Scale each channel by `1 / (sqrt(3) * e_c)`, clip to `[0, 255]` and round
/// half up. An all-black image comes back unchanged. A channel whose estimate
/// is zero is entirely zero and keeps a gain of 1.
pub fn apply_shades_of_gray_with_report(
    img: &RasterImage,
    cfg: &ColorConstancyConfig,
) -> Result<(RasterImage, CorrectionReport)> {
    let illuminant = match estimate_illuminant(img, cfg) {
        Ok(e) => e,
        Err(Error::AllBlackImage) => {
            let report = CorrectionReport {
                illuminant: None,
                gains: [1.0; 3],
                clipped: 0,
            };
            return Ok((img.clone(), report));
        }
        Err(e) => return Err(e),
    };
    let gains = illuminant.map(|e| {
        if e > 0.0 {
            1.0 / (3f64.sqrt() * e)
        } else {
            1.0
        }
    });

    let mut clipped = 0;
    let pixels = img
        .pixels()
        .iter()
        .map(|px| {
            let mut out = [0u8; 3];
            for c in 0..3 {
                let v = cfg.code_value(cfg.intensity(px[c]) * gains[c]);
                if v > 255.0 {
                    clipped += 1;
                }
                out[c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
            out
        })
        .collect();
    let out = RasterImage::from_pixels(img.width(), img.height(), pixels)?;
    Ok((
        out,
        CorrectionReport {
            illuminant: Some(illuminant),
            gains,
            clipped,
        },
    ))
}

/// Pre-processing stage of the pipeline: optional resize, then colour correction.
pub fn preprocess(
    img: &RasterImage,
    target: Option<(u32, u32)>,
    cfg: &ColorConstancyConfig,
) -> Result<(RasterImage, CorrectionReport)> {
    match target {
        Some((w, h)) => apply_shades_of_gray_with_report(&resize_image(img, w, h)?, cfg),
        None => apply_shades_of_gray_with_report(img, cfg),
    }
}
