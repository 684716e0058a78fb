//! Procedural test dataset: drawn lesions, ground truth, and two simulated
//! model outputs per case.
//!
//! Every pseudo-random choice comes from [`Lcg`], a 64-bit linear
//! congruential generator with Knuth's MMIX constants, and the geometry uses
//! only `+ - * /` and `sqrt`, so a given [`FixtureSpec`] regenerates
//! byte-identical files on any platform.
//!
//! Output layout under the target directory:
//!
//! ```text
//! manifest.csv           case_id,image,truth,model:deeplab:semantic,model:maskrcnn,lesion_type
//! images/synth_NNN.png   RGB image with a colour cast
//! truth/synth_NNN.png    ground-truth mask
//! deeplab/synth_NNN.png  model A prediction (semantic, cleaned by the harness)
//! maskrcnn/synth_NNN.png model B prediction, stored at `model_b_scale` times the size
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::evaluation::{load_manifest, DatasetManifest, LesionType};
use crate::raster::{encode_image, encode_mask, resize_mask, BinaryMask, RasterImage};

pub const MODEL_A: &str = "deeplab";
pub const MODEL_B: &str = "maskrcnn";

/// MMIX linear congruential generator; the high 32 bits of the state are output.
#[derive(Debug, Clone)]
pub struct Lcg(u64);

impl Lcg {
    pub const MULTIPLIER: u64 = 6_364_136_223_846_793_005;
    pub const INCREMENT: u64 = 1_442_695_040_888_963_407;

    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0 = self
            .0
            .wrapping_mul(Self::MULTIPLIER)
            .wrapping_add(Self::INCREMENT);
        (self.0 >> 32) as u32
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        f64::from(self.next_u32()) / 4_294_967_296.0
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: u32) -> u32 {
        ((u64::from(self.next_u32()) * u64::from(n)) >> 32) as u32
    }
}

/// A controlled corruption of the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    /// Grow by `k` pixels (3x3 structuring element, applied `k` times).
    Dilate(u32),
    /// Shrink by `k` pixels.
    Erode(u32),
    /// Add a detached 2x2 fragment away from the lesion.
    AddSpeck,
    /// Clear a 3x3 hole well inside the lesion.
    PunchHole,
    /// No prediction at all.
    DropPrediction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseRecipe {
    pub model_a: Vec<Perturbation>,
    pub model_b: Vec<Perturbation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub cases: usize,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    /// Recipe per case, cycled when shorter than `cases`.
    pub recipes: Vec<CaseRecipe>,
    /// Model B masks are written this many times larger so the harness has
    /// to resize them back.
    pub model_b_scale: u32,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        use Perturbation::*;
        let r = |a: &[Perturbation], b: &[Perturbation]| CaseRecipe {
            model_a: a.to_vec(),
            model_b: b.to_vec(),
        };
        Self {
            cases: 10,
            width: 64,
            height: 64,
            seed: 2017,
            recipes: vec![
                r(&[Dilate(1)], &[Erode(1)]),
                r(&[AddSpeck], &[Dilate(2)]),
                r(&[PunchHole], &[Erode(2)]),
                r(&[Erode(1), AddSpeck], &[Dilate(1), PunchHole]),
                r(&[Dilate(2), PunchHole], &[Dilate(1)]),
                r(&[Erode(2)], &[AddSpeck]),
                r(&[Dilate(1), AddSpeck], &[Erode(1)]),
                r(&[DropPrediction], &[Dilate(1)]),
                r(&[PunchHole, AddSpeck], &[Erode(1)]),
                r(&[Dilate(1)], &[DropPrediction]),
            ],
            model_b_scale: 2,
        }
    }
}

impl FixtureSpec {
    pub fn recipe(&self, index: usize) -> &CaseRecipe {
        &self.recipes[index % self.recipes.len()]
    }

    fn validate(&self) -> Result<()> {
        if self.cases == 0 || self.recipes.is_empty() {
            return Err(Error::InvalidParameter(
                "fixture spec needs at least one case and one recipe".to_owned(),
            ));
        }
        if self.width < 16 || self.height < 16 || self.model_b_scale == 0 {
            return Err(Error::InvalidParameter(
                "fixture images must be at least 16x16 with a non-zero scale".to_owned(),
            ));
        }
        Ok(())
    }
}

/// One generated case, all masks at the image resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureCase {
    pub case_id: String,
    pub lesion_type: LesionType,
    pub image: RasterImage,
    pub truth: BinaryMask,
    pub model_a: BinaryMask,
    pub model_b: BinaryMask,
}

pub fn case_id(index: usize) -> String {
    format!("synth_{index:03}")
}

fn lesion_type(index: usize) -> LesionType {
    LesionType::REPORTED[index % 3]
}

/// Unit complex number `(cos, sin)` drawn from the generator.
fn unit_phase(rng: &mut Lcg) -> (f64, f64) {
    loop {
        let (a, b) = (rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
        let n = (a * a + b * b).sqrt();
        if n > 0.1 && n <= 1.0 {
            return (a / n, b / n);
        }
    }
}

/// Star-shaped lesion: a rotated ellipse whose radius is modulated by a few
/// low harmonics of the polar angle, evaluated through powers of the unit
/// direction vector.
fn draw_lesion(width: u32, height: u32, rng: &mut Lcg) -> BinaryMask {
    let (w, h) = (f64::from(width), f64::from(height));
    let cx = w * rng.range(0.4, 0.6);
    let cy = h * rng.range(0.4, 0.6);
    let rx = w * rng.range(0.18, 0.3);
    let ry = h * rng.range(0.18, 0.3);
    let (cos, sin) = unit_phase(rng);
    let harmonics: Vec<(u32, f64, (f64, f64))> = (2..=5)
        .map(|k| (k, rng.range(0.0, 0.06), unit_phase(rng)))
        .collect();
    BinaryMask::from_fn(width, height, |x, y| {
        let dx = f64::from(x) + 0.5 - cx;
        let dy = f64::from(y) + 0.5 - cy;
        let u = (dx * cos + dy * sin) / rx;
        let v = (-dx * sin + dy * cos) / ry;
        let rho = (u * u + v * v).sqrt();
        if rho == 0.0 {
            return true;
        }
        let z = (u / rho, v / rho);
        let mut radius = 1.0;
        for &(k, amp, phase) in &harmonics {
            let mut p = phase;
            for _ in 0..k {
                p = (p.0 * z.0 - p.1 * z.1, p.0 * z.1 + p.1 * z.0);
            }
            radius += amp * p.0;
        }
        rho <= radius
    })
}

fn paint_image(truth: &BinaryMask, rng: &mut Lcg) -> RasterImage {
    let skin = [
        rng.range(185.0, 215.0),
        rng.range(135.0, 165.0),
        rng.range(105.0, 135.0),
    ];
    let lesion = [
        rng.range(90.0, 130.0),
        rng.range(55.0, 80.0),
        rng.range(40.0, 65.0),
    ];
    let cast = [
        rng.range(0.75, 1.15),
        rng.range(0.75, 1.15),
        rng.range(0.75, 1.15),
    ];
    RasterImage::from_fn(truth.width(), truth.height(), |x, y| {
        let base = if truth.get(x, y) { lesion } else { skin };
        let mut px = [0u8; 3];
        for c in 0..3 {
            let noise = f64::from(rng.below(13)) - 6.0;
            px[c] = ((base[c] + noise) * cast[c] + 0.5)
                .floor()
                .clamp(0.0, 255.0) as u8;
        }
        px
    })
}

fn neighbourhood(
    mask: &BinaryMask,
    x: u32,
    y: u32,
    radius: i64,
) -> impl Iterator<Item = Option<bool>> + '_ {
    let (w, h) = (i64::from(mask.width()), i64::from(mask.height()));
    let (x, y) = (i64::from(x), i64::from(y));
    (-radius..=radius).flat_map(move |dy| {
        (-radius..=radius).map(move |dx| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && nx < w && ny < h).then(|| mask.get(nx as u32, ny as u32))
        })
    })
}

fn dilate(mask: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        neighbourhood(mask, x, y, 1).any(|v| v == Some(true))
    })
}

fn erode(mask: &BinaryMask) -> BinaryMask {
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        neighbourhood(mask, x, y, 1).all(|v| v == Some(true))
    })
}

fn candidates(mask: &BinaryMask, pred: impl Fn(u32, u32) -> bool) -> Vec<(u32, u32)> {
    (0..mask.height())
        .flat_map(|y| (0..mask.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| pred(x, y))
        .collect()
}

fn apply(mask: &BinaryMask, p: Perturbation, rng: &mut Lcg) -> BinaryMask {
    match p {
        Perturbation::Dilate(k) => (0..k).fold(mask.clone(), |m, _| dilate(&m)),
        Perturbation::Erode(k) => (0..k).fold(mask.clone(), |m, _| erode(&m)),
        Perturbation::DropPrediction => BinaryMask::empty(mask.width(), mask.height()),
        Perturbation::AddSpeck => {
            // Top-left corner of a 2x2 speck with 3 px of clearance.
            let spots = candidates(mask, |x, y| {
                x + 1 < mask.width()
                    && y + 1 < mask.height()
                    && neighbourhood(mask, x, y, 4).all(|v| v != Some(true))
            });
            let mut out = mask.clone();
            if !spots.is_empty() {
                let (x, y) = spots[rng.below(spots.len() as u32) as usize];
                for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                    out.set(x + dx, y + dy, true);
                }
            }
            out
        }
        Perturbation::PunchHole => {
            let centres = candidates(mask, |x, y| {
                neighbourhood(mask, x, y, 3).all(|v| v == Some(true))
            });
            let mut out = mask.clone();
            if !centres.is_empty() {
                let (x, y) = centres[rng.below(centres.len() as u32) as usize];
                for dy in 0..3 {
                    for dx in 0..3 {
                        out.set(x + dx - 1, y + dy - 1, false);
                    }
                }
            }
            out
        }
    }
}

/// Generate one case in memory.
pub fn generate_case(spec: &FixtureSpec, index: usize) -> Result<FixtureCase> {
    spec.validate()?;
    let mut rng = Lcg::new(spec.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..4 {
        rng.next_u32();
    }
    let truth = draw_lesion(spec.width, spec.height, &mut rng);
    let image = paint_image(&truth, &mut rng);
    let recipe = spec.recipe(index);
    let model_a = recipe
        .model_a
        .iter()
        .fold(truth.clone(), |m, &p| apply(&m, p, &mut rng));
    let model_b = recipe
        .model_b
        .iter()
        .fold(truth.clone(), |m, &p| apply(&m, p, &mut rng));
    Ok(FixtureCase {
        case_id: case_id(index),
        lesion_type: lesion_type(index),
        image,
        truth,
        model_a,
        model_b,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Write the whole fixture set plus its manifest and return the loaded manifest.
pub fn generate_fixtures(spec: &FixtureSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let mut manifest =
        format!("case_id,image,truth,model:{MODEL_A}:semantic,model:{MODEL_B},lesion_type\n");
    for index in 0..spec.cases {
        let case = generate_case(spec, index)?;
        let id = &case.case_id;
        let files = [
            format!("images/{id}.png"),
            format!("truth/{id}.png"),
            format!("{MODEL_A}/{id}.png"),
            format!("{MODEL_B}/{id}.png"),
        ];
        let scale = spec.model_b_scale;
        let model_b = resize_mask(
            &case.model_b,
            case.model_b.width() * scale,
            case.model_b.height() * scale,
        )?;
        write(&out_dir.join(&files[0]), &encode_image(&case.image))?;
        write(&out_dir.join(&files[1]), &encode_mask(&case.truth))?;
        write(&out_dir.join(&files[2]), &encode_mask(&case.model_a))?;
        write(&out_dir.join(&files[3]), &encode_mask(&model_b))?;
        manifest.push_str(&format!(
            "{id},{},{},{},{},{}\n",
            files[0], files[1], files[2], files[3], case.lesion_type
        ));
    }
    let path = out_dir.join("manifest.csv");
    write(&path, manifest.as_bytes())?;
    load_manifest(&path)
}
