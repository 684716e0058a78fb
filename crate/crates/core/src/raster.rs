//! Image and mask containers, PNG/JPEG codecs, and resizing.
//!
//! Masks follow the single-channel 8-bit convention used by the ISIC ground
//! truth: background is `0`, lesion is `255`, and on decode any luminance at
//! or above the lesion threshold (default [`DEFAULT_LESION_THRESHOLD`]) is
//! lesion. Images are resized bilinearly; masks only ever nearest-neighbour,
//! so they stay strictly two-valued.

use std::io::Cursor;

use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};

/// Luminance at or above which a decoded mask pixel counts as lesion.
pub const DEFAULT_LESION_THRESHOLD: u8 = 128;

/// Standard working resolution for dermoscopic images (width, height).
pub const STANDARD_SIZE: (u32, u32) = (500, 375);

/// An 8-bit RGB image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        check_len(width, height, pixels.len())?;
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image of the given size filled with one colour.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![rgb; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[index(self.width, x, y)]
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// A two-valued lesion/background grid stored row-major.
///
/// `true` marks a lesion pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    /// All-background mask.
    pub fn empty(width: u32, height: u32) -> Self {
        Self::filled(width, height, false)
    }

    pub fn filled(width: u32, height: u32, lesion: bool) -> Self {
        Self {
            width,
            height,
            bits: vec![lesion; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        check_len(width, height, bits.len())?;
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[index(self.width, x, y)]
    }

    pub fn set(&mut self, x: u32, y: u32, lesion: bool) {
        let i = index(self.width, x, y);
        self.bits[i] = lesion;
    }

    /// Number of lesion pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// True when the mask holds no lesion pixel, i.e. the model made no prediction.
    pub fn is_blank(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    /// Pixelwise OR.
    pub fn union(&self, other: &Self) -> Result<Self> {
        ensure_same_dims(self, other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a || b)
                .collect(),
        })
    }

    /// True when every lesion pixel of `self` is also lesion in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dimensions() == other.dimensions()
            && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }
}

/// Per-pixel model confidence in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl ProbabilityMap {
    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        check_len(width, height, values.len())?;
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "probability {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub(crate) fn ensure_same_dims(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::DimensionMismatch {
            left_w: a.width,
            left_h: a.height,
            right_w: b.width,
            right_h: b.height,
        });
    }
    Ok(())
}

fn index(width: u32, x: u32, y: u32) -> usize {
    y as usize * width as usize + x as usize
}

fn check_len(width: u32, height: u32, len: usize) -> Result<()> {
    let expected = width as usize * height as usize;
    if len != expected {
        return Err(Error::BufferSize {
            expected,
            actual: len,
        });
    }
    Ok(())
}

pub(crate) fn sniff(bytes: &[u8]) -> Result<ImageFormat> {
    match image::guess_format(bytes) {
        Ok(fmt @ (ImageFormat::Png | ImageFormat::Jpeg)) => Ok(fmt),
        Ok(other) => Err(Error::UnsupportedFormat(format!("{other:?}"))),
        Err(_) => Err(Error::UnsupportedFormat(
            "unrecognised file signature".to_owned(),
        )),
    }
}

pub(crate) fn decode_dynamic(bytes: &[u8], format: ImageFormat) -> Result<DynamicImage> {
    image::load_from_memory_with_format(bytes, format)
        .map_err(|e| Error::MalformedFile(e.to_string()))
}

/// Decode a PNG or JPEG into RGB. Grayscale input is expanded to R=G=B and
/// any alpha channel is dropped.
pub fn decode_image(bytes: &[u8]) -> Result<RasterImage> {
    let format = sniff(bytes)?;
    let rgb = decode_dynamic(bytes, format)?.into_rgb8();
    let (width, height) = rgb.dimensions();
    let pixels = rgb.pixels().map(|p| p.0).collect();
    RasterImage::from_pixels(width, height, pixels)
}

/// Decode a PNG mask; a pixel is lesion iff its luminance is `>= lesion_threshold`.
pub fn decode_mask(bytes: &[u8], lesion_threshold: u8) -> Result<BinaryMask> {
    if lesion_threshold == 0 {
        return Err(Error::InvalidParameter(
            "lesion threshold must be in [1, 255]".to_owned(),
        ));
    }
    match sniff(bytes)? {
        ImageFormat::Png => {}
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "masks must be PNG, got {other:?}"
            )))
        }
    }
    let luma = decode_dynamic(bytes, ImageFormat::Png)?.into_luma8();
    let (width, height) = luma.dimensions();
    let bits = luma.pixels().map(|p| p.0[0] >= lesion_threshold).collect();
    BinaryMask::from_bits(width, height, bits)
}

/// Encode a mask as an 8-bit grayscale PNG with lesion = 255 and background = 0.
pub fn encode_mask(mask: &BinaryMask) -> Vec<u8> {
    let data: Vec<u8> = mask.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_png(&data, mask.width, mask.height, ExtendedColorType::L8)
}

/// Encode an image as an 8-bit RGB PNG.
pub fn encode_image(img: &RasterImage) -> Vec<u8> {
    let data: Vec<u8> = img.pixels.iter().flatten().copied().collect();
    encode_png(&data, img.width, img.height, ExtendedColorType::Rgb8)
}

fn encode_png(data: &[u8], width: u32, height: u32, color: ExtendedColorType) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(data, width, height, color)
        .expect("in-memory PNG encoding of a size-checked buffer cannot fail");
    out.into_inner()
}

fn check_target(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension { width, height });
    }
    Ok(())
}

/// Source coordinate and blend weight for one output sample, using
/// pixel-centre alignment and edge clamping.
fn bilinear_taps(dst: u32, dst_len: u32, src_len: u32) -> (usize, usize, f64) {
    let scale = f64::from(src_len) / f64::from(dst_len);
    let pos = ((f64::from(dst) + 0.5) * scale - 0.5).clamp(0.0, f64::from(src_len - 1));
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(src_len as usize - 1);
    (lo, hi, pos - lo as f64)
}

/// Bilinear resize with pixel-centre alignment.
pub fn resize_image(img: &RasterImage, target_w: u32, target_h: u32) -> Result<RasterImage> {
    check_target(target_w, target_h)?;
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    if (target_w, target_h) == (img.width, img.height) {
        return Ok(img.clone());
    }
    let xs: Vec<_> = (0..target_w)
        .map(|x| bilinear_taps(x, target_w, img.width))
        .collect();
    let w = img.width as usize;
    let mut pixels = Vec::with_capacity(target_w as usize * target_h as usize);
    for y in 0..target_h {
        let (y0, y1, fy) = bilinear_taps(y, target_h, img.height);
        for &(x0, x1, fx) in &xs {
            let p00 = img.pixels[y0 * w + x0];
            let p10 = img.pixels[y0 * w + x1];
            let p01 = img.pixels[y1 * w + x0];
            let p11 = img.pixels[y1 * w + x1];
            let mut out = [0u8; 3];
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
                let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[c] = (v + 0.5).floor().clamp(0.0, 255.0) as u8;
            }
            pixels.push(out);
        }
    }
    RasterImage::from_pixels(target_w, target_h, pixels)
}

/// Nearest source index for `dst` under pixel-centre alignment, in exact integer arithmetic.
fn nearest(dst: u32, dst_len: u32, src_len: u32) -> usize {
    let src = (2 * u64::from(dst) + 1) * u64::from(src_len) / (2 * u64::from(dst_len));
    (src as usize).min(src_len as usize - 1)
}

/// Nearest-neighbour resize; the output is always strictly two-valued.
pub fn resize_mask(mask: &BinaryMask, target_w: u32, target_h: u32) -> Result<BinaryMask> {
    check_target(target_w, target_h)?;
    if mask.bits.is_empty() {
        return Err(Error::EmptyImage);
    }
    if (target_w, target_h) == mask.dimensions() {
        return Ok(mask.clone());
    }
    let xs: Vec<usize> = (0..target_w)
        .map(|x| nearest(x, target_w, mask.width))
        .collect();
    let w = mask.width as usize;
    let mut bits = Vec::with_capacity(target_w as usize * target_h as usize);
    for y in 0..target_h {
        let row = nearest(y, target_h, mask.height) * w;
        bits.extend(xs.iter().map(|&x| mask.bits[row + x]));
    }
    BinaryMask::from_bits(target_w, target_h, bits)
}
