//! Morphological clean-up of semantic-segmentation masks: fill interior
//! holes, then drop spurious lesion fragments.
//!
//! Holes are background regions that cannot reach the image border through
//! 4-connected background pixels. Lesion components are labelled with the
//! configured connectivity (8 by default, the dual of 4-connected
//! background).

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i32, i32)] {
        const FOUR: [(i32, i32); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        const EIGHT: [(i32, i32); 8] = [
            (-1, -1),
            (0, -1),
            (1, -1),
            (-1, 0),
            (1, 0),
            (-1, 1),
            (0, 1),
            (1, 1),
        ];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Smallest lesion component that survives artifact removal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinArea {
    Pixels(usize),
    /// Fraction of the whole image area, in `[0, 1)`.
    Fraction(f64),
}

impl MinArea {
    fn threshold(self, image_area: usize) -> f64 {
        match self {
            MinArea::Pixels(n) => n as f64,
            MinArea::Fraction(f) => f * image_area as f64,
        }
    }
}

impl std::str::FromStr for MinArea {
    type Err = Error;

    /// `"25"` is an absolute pixel count, `"0.001"` a fraction of the image
    /// and `"0.1%"` a percentage of it.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidParameter(format!("invalid minimum area `{s}`"));
        let area = if let Some(pct) = s.strip_suffix('%') {
            MinArea::Fraction(pct.trim().parse::<f64>().map_err(|_| bad())? / 100.0)
        } else if s.contains(['.', 'e', 'E']) {
            MinArea::Fraction(s.parse().map_err(|_| bad())?)
        } else {
            MinArea::Pixels(s.parse().map_err(|_| bad())?)
        };
        if let MinArea::Fraction(f) = area {
            if !(0.0..1.0).contains(&f) {
                return Err(bad());
            }
        }
        Ok(area)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphologyConfig {
    pub min_component_area: MinArea,
    pub keep_largest_only: bool,
    /// Connectivity used when labelling lesion components.
    pub connectivity: Connectivity,
}

impl Default for MorphologyConfig {
    /// 0.1% of the image area, largest component only, 8-connected.
    fn default() -> Self {
        Self {
            min_component_area: MinArea::Fraction(0.001),
            keep_largest_only: true,
            connectivity: Connectivity::Eight,
        }
    }
}

impl MorphologyConfig {
    pub fn validate(&self) -> Result<()> {
        if let MinArea::Fraction(f) = self.min_component_area {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::InvalidParameter(format!(
                    "area fraction must be in [0, 1), got {f}"
                )));
            }
        }
        Ok(())
    }
}

/// Connected components of one value in a mask.
#[derive(Debug, Clone)]
pub struct Components {
    /// `labels[i]` is the component index of pixel `i`, or `None` for
    /// pixels of the other value.
    pub labels: Vec<Option<u32>>,
    /// Pixel count per component. Components are numbered in row-major
    /// order of their first pixel.
    pub areas: Vec<usize>,
}

/// Label the connected components of pixels equal to `value`.
pub fn label_components(mask: &BinaryMask, value: bool, connectivity: Connectivity) -> Components {
    let (w, h) = (mask.width() as i32, mask.height() as i32);
    let bits = mask.bits();
    let mut labels = vec![None; bits.len()];
    let mut areas = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..bits.len() {
        if bits[start] != value || labels[start].is_some() {
            continue;
        }
        let label = areas.len() as u32;
        let mut area = 0;
        labels[start] = Some(label);
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (x, y) = ((i as i32) % w, (i as i32) / w);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let j = (ny * w + nx) as usize;
                if bits[j] == value && labels[j].is_none() {
                    labels[j] = Some(label);
                    queue.push_back(j);
                }
            }
        }
        areas.push(area);
    }
    Components { labels, areas }
}

/// Convert every background region unreachable from the border into lesion.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let bits = mask.bits();
    let mut outside = vec![false; bits.len()];
    let mut queue = VecDeque::new();
    let seed = |i: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
        if !bits[i] && !outside[i] {
            outside[i] = true;
            queue.push_back(i);
        }
    };
    for x in 0..w {
        seed(x, &mut outside, &mut queue);
        seed((h - 1) * w + x, &mut outside, &mut queue);
    }
    for y in 0..h {
        seed(y * w, &mut outside, &mut queue);
        seed(y * w + w - 1, &mut outside, &mut queue);
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        if x > 0 {
            seed(i - 1, &mut outside, &mut queue);
        }
        if x + 1 < w {
            seed(i + 1, &mut outside, &mut queue);
        }
        if y > 0 {
            seed(i - w, &mut outside, &mut queue);
        }
        if y + 1 < h {
            seed(i + w, &mut outside, &mut queue);
        }
    }
    let filled = outside.into_iter().map(|o| !o).collect();
    BinaryMask::from_bits(mask.width(), mask.height(), filled).expect("dimensions unchanged")
}

/// Remove lesion components smaller than the configured area and, with
/// `keep_largest_only`, every component but the largest. Among equally large
/// components the one whose first pixel comes first in row-major order wins.
pub fn remove_artifacts(mask: &BinaryMask, cfg: &MorphologyConfig) -> BinaryMask {
    let comps = label_components(mask, true, cfg.connectivity);
    let min_area = cfg.min_component_area.threshold(mask.bits().len());
    let mut keep: Vec<bool> = comps.areas.iter().map(|&a| a as f64 >= min_area).collect();
    if cfg.keep_largest_only {
        let mut best: Option<usize> = None;
        for (label, &area) in comps.areas.iter().enumerate() {
            if keep[label] && best.is_none_or(|b| area > comps.areas[b]) {
                best = Some(label);
            }
        }
        keep.iter_mut()
            .enumerate()
            .for_each(|(label, k)| *k = Some(label) == best);
    }
    let bits = comps
        .labels
        .iter()
        .map(|l| l.is_some_and(|l| keep[l as usize]))
        .collect();
    BinaryMask::from_bits(mask.width(), mask.height(), bits).expect("dimensions unchanged")
}

/// [`fill_holes`] followed by [`remove_artifacts`].
pub fn clean(mask: &BinaryMask, cfg: &MorphologyConfig) -> BinaryMask {
    remove_artifacts(&fill_holes(mask), cfg)
}
