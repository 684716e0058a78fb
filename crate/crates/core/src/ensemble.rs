//! Two-model mask fusion.
//!
//! Every strategy first applies the empty-prediction fallback: when one model
//! produced no lesion pixel the other model's mask is used verbatim. After
//! that, ADD takes the pixelwise union and the comparison strategies pick the
//! mask with the larger or smaller lesion area. Equal areas resolve to the
//! first input, which the harness binds to the semantic model.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleStrategy {
    Add,
    ComparisonLarge,
    ComparisonSmall,
}

impl EnsembleStrategy {
    pub const ALL: [EnsembleStrategy; 3] = [
        EnsembleStrategy::Add,
        EnsembleStrategy::ComparisonLarge,
        EnsembleStrategy::ComparisonSmall,
    ];

    /// Short name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            EnsembleStrategy::Add => "add",
            EnsembleStrategy::ComparisonLarge => "large",
            EnsembleStrategy::ComparisonSmall => "small",
        }
    }

    /// Label used in reports (`Ensemble-A`, `Ensemble-L`, `Ensemble-S`).
    pub fn label(self) -> &'static str {
        match self {
            EnsembleStrategy::Add => "Ensemble-A",
            EnsembleStrategy::ComparisonLarge => "Ensemble-L",
            EnsembleStrategy::ComparisonSmall => "Ensemble-S",
        }
    }
}

impl fmt::Display for EnsembleStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for EnsembleStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "add" | "a" | "ensemble-a" => Ok(EnsembleStrategy::Add),
            "large" | "l" | "ensemble-l" => Ok(EnsembleStrategy::ComparisonLarge),
            "small" | "s" | "ensemble-s" => Ok(EnsembleStrategy::ComparisonSmall),
            _ => Err(Error::InvalidParameter(format!(
                "unknown strategy `{s}` (expected add, large or small)"
            ))),
        }
    }
}

/// Fuse two predictions of the same image.
pub fn fuse(a: &BinaryMask, b: &BinaryMask, strategy: EnsembleStrategy) -> Result<BinaryMask> {
    ensure_same_dims(a, b)?;
    let (area_a, area_b) = (a.area(), b.area());
    if area_a == 0 {
        return Ok(b.clone());
    }
    if area_b == 0 {
        return Ok(a.clone());
    }
    Ok(match strategy {
        EnsembleStrategy::Add => a.union(b)?,
        EnsembleStrategy::ComparisonLarge if area_b > area_a => b.clone(),
        EnsembleStrategy::ComparisonSmall if area_b < area_a => b.clone(),
        EnsembleStrategy::ComparisonLarge | EnsembleStrategy::ComparisonSmall => a.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(len: u32, lesion: impl Fn(u32) -> bool) -> BinaryMask {
        BinaryMask::from_fn(len, 1, |x, _| lesion(x))
    }

    #[test]
    fn add_is_union() {
        let a = row(10, |x| (1..=5).contains(&x));
        let b = row(10, |x| (4..=8).contains(&x));
        let fused = fuse(&a, &b, EnsembleStrategy::Add).unwrap();
        assert_eq!(fused, row(10, |x| (1..=8).contains(&x)));
    }

    #[test]
    fn comparison_picks_by_area() {
        let a = row(20, |x| x < 10);
        let b = row(20, |x| x >= 13);
        assert_eq!(fuse(&a, &b, EnsembleStrategy::ComparisonLarge).unwrap(), a);
        assert_eq!(fuse(&a, &b, EnsembleStrategy::ComparisonSmall).unwrap(), b);
        assert_eq!(fuse(&b, &a, EnsembleStrategy::ComparisonLarge).unwrap(), a);
        assert_eq!(fuse(&b, &a, EnsembleStrategy::ComparisonSmall).unwrap(), b);
    }

    #[test]
    fn equal_areas_pick_first() {
        let a = row(8, |x| x < 3);
        let b = row(8, |x| x >= 5);
        for s in [
            EnsembleStrategy::ComparisonLarge,
            EnsembleStrategy::ComparisonSmall,
        ] {
            assert_eq!(fuse(&a, &b, s).unwrap(), a);
            assert_eq!(fuse(&b, &a, s).unwrap(), b);
        }
    }

    #[test]
    fn empty_prediction_falls_back() {
        let empty = BinaryMask::empty(6, 1);
        let b = row(6, |x| x == 2);
        for s in EnsembleStrategy::ALL {
            assert_eq!(fuse(&empty, &b, s).unwrap(), b);
            assert_eq!(fuse(&b, &empty, s).unwrap(), b);
            assert_eq!(fuse(&empty, &empty, s).unwrap(), empty);
        }
    }

    #[test]
    fn agreement_is_a_fixed_point() {
        let a = row(6, |x| x % 2 == 0);
        for s in EnsembleStrategy::ALL {
            assert_eq!(fuse(&a, &a.clone(), s).unwrap(), a);
        }
    }

    #[test]
    fn mismatched_dimensions() {
        let err = fuse(
            &BinaryMask::empty(2, 2),
            &BinaryMask::empty(3, 2),
            EnsembleStrategy::Add,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn names_round_trip() {
        for s in EnsembleStrategy::ALL {
            assert_eq!(s.cli_name().parse::<EnsembleStrategy>().unwrap(), s);
        }
        assert!("median".parse::<EnsembleStrategy>().is_err());
        assert_eq!(EnsembleStrategy::Add.label(), "Ensemble-A");
    }
}
