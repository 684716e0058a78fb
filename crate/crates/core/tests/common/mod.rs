//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::VecDeque;

use lek::raster::BinaryMask;
use rand::Rng;

/// Random mask with the given lesion probability.
pub fn random_mask(rng: &mut impl Rng, w: u32, h: u32, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density))
}

/// Six metrics from set sizes and a Pearson correlation, pixel by pixel.
/// Order: sensitivity, specificity, accuracy, jsi, dice, mcc.
pub fn brute_force_metrics(pred: &BinaryMask, truth: &BinaryMask) -> [f64; 6] {
    let n = pred.bits().len();
    let mut inter = 0usize;
    let mut union = 0usize;
    let mut pred_n = 0usize;
    let mut truth_n = 0usize;
    let mut both_bg = 0usize;
    let mut agree = 0usize;
    for i in 0..n {
        let (p, t) = (pred.bits()[i], truth.bits()[i]);
        inter += (p && t) as usize;
        union += (p || t) as usize;
        pred_n += p as usize;
        truth_n += t as usize;
        both_bg += (!p && !t) as usize;
        agree += (p == t) as usize;
    }
    let truth_bg = n - truth_n;
    let sens = if truth_n == 0 {
        1.0
    } else {
        inter as f64 / truth_n as f64
    };
    let spec = if truth_bg == 0 {
        1.0
    } else {
        both_bg as f64 / truth_bg as f64
    };
    let acc = agree as f64 / n as f64;
    let jsi = if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    };
    let dice = if pred_n + truth_n == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (pred_n + truth_n) as f64
    };
    // Pearson correlation of the two 0/1 vectors.
    let mcc = if agree == n {
        1.0
    } else {
        let mp = pred_n as f64 / n as f64;
        let mt = truth_n as f64 / n as f64;
        let (mut cov, mut vp, mut vt) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let dp = pred.bits()[i] as u8 as f64 - mp;
            let dt = truth.bits()[i] as u8 as f64 - mt;
            cov += dp * dt;
            vp += dp * dp;
            vt += dt * dt;
        }
        if vp == 0.0 || vt == 0.0 {
            0.0
        } else {
            cov / (vp * vt).sqrt()
        }
    };
    [sens, spec, acc, jsi, dice, mcc]
}

/// Count lesion components with a breadth-first flood fill.
pub fn count_components(mask: &BinaryMask, eight: bool) -> usize {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; mask.bits().len()];
    let mut count = 0;
    for sy in 0..h {
        for sx in 0..w {
            let s = (sy * w + sx) as usize;
            if !mask.bits()[s] || seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            let mut q = VecDeque::from([(sx, sy)]);
            while let Some((x, y)) = q.pop_front() {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let j = (ny * w + nx) as usize;
                        if mask.bits()[j] && !seen[j] {
                            seen[j] = true;
                            q.push_back((nx, ny));
                        }
                    }
                }
            }
        }
    }
    count
}

pub fn true_positives(pred: &BinaryMask, truth: &BinaryMask) -> usize {
    pred.bits()
        .iter()
        .zip(truth.bits())
        .filter(|(&p, &t)| p && t)
        .count()
}
