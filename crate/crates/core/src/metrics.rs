//! Pixel-level segmentation scores.
//!
//! With lesion as the positive class:
//!
//! | metric      | definition                                   |
//! |-------------|----------------------------------------------|
//! | sensitivity | TP / (TP + FN)                               |
//! | specificity | TN / (FP + TN)                               |
//! | accuracy    | (TP + TN) / (TP + FP + TN + FN)              |
//! | jsi         | TP / (TP + FP + FN)                          |
//! | dice        | 2TP / (2TP + FP + FN)                        |
//! | mcc         | (TP·TN − FP·FN) / √((TP+FP)(TP+FN)(TN+FP)(TN+FN)) |
//!
//! Zero denominators: sensitivity, specificity, jsi and dice fall back to 1
//! (nothing to find and nothing wrongly found). MCC is 1 when prediction and
//! truth agree on every pixel, and otherwise 0 whenever a factor under the
//! root vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ensure_same_dims, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Counts with prediction and truth exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            fp: self.fn_,
            fn_: self.fp,
            ..*self
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            tp: self.tp + rhs.tp,
            fp: self.fp + rhs.fp,
            tn: self.tn + rhs.tn,
            fn_: self.fn_ + rhs.fn_,
        }
    }
}

/// The six scores for one prediction against one ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
    pub jsi: f64,
    pub dice: f64,
    pub mcc: f64,
}

impl MetricSet {
    pub const PERFECT: MetricSet = MetricSet {
        sensitivity: 1.0,
        specificity: 1.0,
        accuracy: 1.0,
        jsi: 1.0,
        dice: 1.0,
        mcc: 1.0,
    };

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.sensitivity,
            self.specificity,
            self.accuracy,
            self.jsi,
            self.dice,
            self.mcc,
        ]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self {
            sensitivity: v[0],
            specificity: v[1],
            accuracy: v[2],
            jsi: v[3],
            dice: v[4],
            mcc: v[5],
        }
    }

    /// Field-wise arithmetic mean, summed in iteration order.
    pub fn mean<'a>(sets: impl IntoIterator<Item = &'a MetricSet>) -> Option<MetricSet> {
        let mut sum = [0.0; 6];
        let mut n = 0usize;
        for set in sets {
            for (s, v) in sum.iter_mut().zip(set.to_array()) {
                *s += v;
            }
            n += 1;
        }
        (n > 0).then(|| MetricSet::from_array(sum.map(|s| s / n as f64)))
    }
}

/// Tally per-pixel agreement, lesion being the positive class.
pub fn confusion(pred: &BinaryMask, truth: &BinaryMask) -> Result<ConfusionCounts> {
    ensure_same_dims(pred, truth)?;
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.bits().iter().zip(truth.bits()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(c: &ConfusionCounts) -> Result<MetricSet> {
    if c.total() == 0 {
        return Err(Error::EmptyCounts);
    }
    let ConfusionCounts { tp, fp, tn, fn_ } = *c;
    let mcc = if fp == 0 && fn_ == 0 {
        1.0
    } else {
        let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
        if factors.contains(&0) {
            0.0
        } else {
            let den = factors.iter().map(|&f| f as f64).product::<f64>().sqrt();
            (tp as f64 * tn as f64 - fp as f64 * fn_ as f64) / den
        }
    };
    Ok(MetricSet {
        sensitivity: ratio_or_one(tp, tp + fn_),
        specificity: ratio_or_one(tn, fp + tn),
        accuracy: (tp + tn) as f64 / c.total() as f64,
        jsi: ratio_or_one(tp, tp + fp + fn_),
        dice: ratio_or_one(2 * tp, 2 * tp + fp + fn_),
        mcc,
    })
}

/// [`confusion`] then [`compute_metrics`].
pub fn score(pred: &BinaryMask, truth: &BinaryMask) -> Result<MetricSet> {
    compute_metrics(&confusion(pred, truth)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round4(v: f64) -> f64 {
        (v * 1e4).round() / 1e4
    }

    #[test]
    fn perfect_prediction_counts() {
        let truth = BinaryMask::from_fn(3, 3, |x, y| y == 1 && x < 3);
        let c = confusion(&truth, &truth).unwrap();
        assert_eq!(c, ConfusionCounts::new(3, 0, 6, 0));
        assert_eq!(compute_metrics(&c).unwrap(), MetricSet::PERFECT);
    }

    #[test]
    fn complement_has_no_agreement() {
        let truth = BinaryMask::from_fn(4, 4, |x, y| x > y);
        let c = confusion(&truth.complement(), &truth).unwrap();
        assert_eq!((c.tp, c.tn), (0, 0));
        assert_eq!(c.total(), 16);
        assert_eq!(compute_metrics(&c).unwrap().mcc, -1.0);
    }

    #[test]
    fn constructed_four_by_four() {
        // Rows: truth lesion on the top half; prediction shifted so 4 TP, 2 FP, 2 FN, 8 TN.
        let truth = BinaryMask::from_fn(4, 4, |x, y| y < 2 && x < 3);
        let pred = BinaryMask::from_fn(4, 4, |x, y| {
            (y == 0 && x < 3) || (y == 1 && x == 0) || (y == 2 && x < 2)
        });
        let c = confusion(&pred, &truth).unwrap();
        // Oracle: direct double loop.
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for y in 0..4 {
            for x in 0..4 {
                match (pred.get(x, y), truth.get(x, y)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => tn += 1,
                }
            }
        }
        assert_eq!((tp, fp, fn_, tn), (4, 2, 2, 8));
        assert_eq!(c, ConfusionCounts::new(4, 2, 8, 2));
    }

    #[test]
    fn fixed_counts_hand_values() {
        let m = compute_metrics(&ConfusionCounts::new(4, 2, 8, 2)).unwrap();
        assert_eq!(round4(m.sensitivity), 0.6667);
        assert_eq!(round4(m.specificity), 0.8);
        assert_eq!(round4(m.accuracy), 0.75);
        assert_eq!(round4(m.jsi), 0.5);
        assert_eq!(round4(m.dice), 0.6667);
        // (32 - 4) / sqrt(6 * 6 * 10 * 10) = 28 / 60
        assert_eq!(round4(m.mcc), 0.4667);
        assert!((m.mcc - 28.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn empty_versus_empty_is_perfect() {
        let blank = BinaryMask::empty(5, 5);
        assert_eq!(score(&blank, &blank).unwrap(), MetricSet::PERFECT);
    }

    #[test]
    fn full_versus_full_is_perfect() {
        let full = BinaryMask::filled(5, 5, true);
        assert_eq!(score(&full, &full).unwrap(), MetricSet::PERFECT);
    }

    #[test]
    fn constant_prediction_has_zero_mcc() {
        let truth = BinaryMask::from_fn(4, 4, |x, _| x < 2);
        let m = score(&BinaryMask::filled(4, 4, true), &truth).unwrap();
        assert_eq!(m.mcc, 0.0);
        assert_eq!(m.sensitivity, 1.0);
        assert_eq!(m.specificity, 0.0);
    }

    #[test]
    fn empty_counts_rejected() {
        assert!(matches!(
            compute_metrics(&ConfusionCounts::default()),
            Err(Error::EmptyCounts)
        ));
    }

    #[test]
    fn transposition_swaps_sensitivity_for_precision() {
        let c = ConfusionCounts::new(7, 3, 20, 5);
        let m = compute_metrics(&c).unwrap();
        let t = compute_metrics(&c.transposed()).unwrap();
        assert_eq!(m.dice, t.dice);
        assert_eq!(m.jsi, t.jsi);
        assert_eq!(m.accuracy, t.accuracy);
        assert_eq!(m.mcc, t.mcc);
        assert_eq!(t.sensitivity, 7.0 / 10.0);
    }

    #[test]
    fn mean_of_sets() {
        let a = MetricSet {
            jsi: 0.5,
            ..MetricSet::PERFECT
        };
        let b = MetricSet {
            jsi: 0.7,
            ..MetricSet::PERFECT
        };
        assert!((MetricSet::mean([&a, &b]).unwrap().jsi - 0.6).abs() < 1e-15);
        assert!(MetricSet::mean(std::iter::empty()).is_none());
    }
}
