//! Turning raw model output into binary predictions.
//!
//! Semantic models hand over a probability map, stored as an 8-bit
//! (`value / 255`) or 16-bit (`value / 65535`) grayscale PNG. Instance models
//! hand over a set of scored masks: a directory of mask PNGs plus a sidecar
//! CSV with header `instance_file,confidence`. Only the highest-confidence
//! instance is kept.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::raster::{
    decode_dynamic, decode_mask, ensure_same_dims, sniff, BinaryMask, ProbabilityMap,
    DEFAULT_LESION_THRESHOLD,
};

/// Default binarisation cutoff; values at or above it are lesion.
pub const DEFAULT_CUTOFF: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    pub cutoff: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl ThresholdConfig {
    pub fn new(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff must lie strictly between 0 and 1, got {cutoff}"
            )));
        }
        Ok(Self { cutoff })
    }
}

/// One candidate mask from an instance-segmentation model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredInstance {
    pub mask: BinaryMask,
    pub confidence: f64,
}

impl ScoredInstance {
    pub fn new(mask: BinaryMask, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidParameter(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self { mask, confidence })
    }
}

pub fn threshold_probability_map(map: &ProbabilityMap, cfg: &ThresholdConfig) -> BinaryMask {
    let bits = map.values().iter().map(|&v| v >= cfg.cutoff).collect();
    BinaryMask::from_bits(map.width(), map.height(), bits)
        .expect("probability map length already matches its dimensions")
}

/// Keep the most confident instance; the first listed wins ties. With no
/// instances at all the result is a blank mask of the declared size, which
/// lets the ensemble fallback take over.
pub fn select_highest_confidence(
    instances: &[ScoredInstance],
    declared: (u32, u32),
) -> Result<BinaryMask> {
    let Some(first) = instances.first() else {
        return Ok(BinaryMask::empty(declared.0, declared.1));
    };
    let mut best = first;
    for inst in &instances[1..] {
        ensure_same_dims(&first.mask, &inst.mask)?;
        if inst.confidence > best.confidence {
            best = inst;
        }
    }
    Ok(best.mask.clone())
}

/// Decode an 8- or 16-bit grayscale PNG into a probability map. Colour
/// inputs are reduced to luminance at their native bit depth.
pub fn decode_probability_map(bytes: &[u8]) -> Result<ProbabilityMap> {
    if sniff(bytes)? != ImageFormat::Png {
        return Err(Error::UnsupportedFormat(
            "probability maps must be PNG".to_owned(),
        ));
    }
    let img = decode_dynamic(bytes, ImageFormat::Png)?;
    let (width, height) = (img.width(), img.height());
    let values = match img {
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => img
            .into_luma16()
            .pixels()
            .map(|p| f64::from(p.0[0]) / 65535.0)
            .collect(),
        other => other
            .into_luma8()
            .pixels()
            .map(|p| f64::from(p.0[0]) / 255.0)
            .collect(),
    };
    ProbabilityMap::from_values(width, height, values)
}

/// Read a sidecar CSV (`instance_file,confidence`) and the masks it names,
/// resolved relative to the CSV's directory.
pub fn load_instance_set(csv_path: &Path) -> Result<Vec<ScoredInstance>> {
    let base = csv_path.parent().unwrap_or(Path::new("."));
    let text = fs::read(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut reader = csv::Reader::from_reader(text.as_slice());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    };
    let file_col = col("instance_file")?;
    let conf_col = col("confidence")?;

    let mut instances = Vec::new();
    for row in reader.records() {
        let row = row?;
        let file = base.join(row[file_col].trim());
        let confidence: f64 = row[conf_col]
            .trim()
            .parse()
            .map_err(|_| Error::Csv(format!("confidence `{}` is not a number", &row[conf_col])))?;
        let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
        let mask = decode_mask(&bytes, DEFAULT_LESION_THRESHOLD)?;
        instances.push(ScoredInstance::new(mask, confidence)?);
    }
    Ok(instances)
}
