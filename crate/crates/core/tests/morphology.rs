mod common;

use common::{count_components, random_mask};
use lek::postprocess::{
    clean, fill_holes, label_components, remove_artifacts, Connectivity, MinArea, MorphologyConfig,
};
use lek::raster::BinaryMask;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_config(rng: &mut impl Rng) -> MorphologyConfig {
    MorphologyConfig {
        min_component_area: if rng.gen_bool(0.5) {
            MinArea::Pixels(rng.gen_range(0..12))
        } else {
            MinArea::Fraction(rng.gen_range(0.0..0.05))
        },
        keep_largest_only: rng.gen_bool(0.5),
        connectivity: if rng.gen_bool(0.5) {
            Connectivity::Eight
        } else {
            Connectivity::Four
        },
    }
}

#[test]
fn clean_is_idempotent() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let density = rng.gen_range(0.1..0.8);
        let mask = random_mask(&mut rng, w, h, density);
        let cfg = random_config(&mut rng);
        let once = clean(&mask, &cfg);
        assert_eq!(clean(&once, &cfg), once);
    }
}

#[test]
fn stage_monotonicity_and_idempotence() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let density = rng.gen_range(0.1..0.8);
        let mask = random_mask(&mut rng, w, h, density);
        let cfg = random_config(&mut rng);
        let filled = fill_holes(&mask);
        assert!(mask.is_subset_of(&filled));
        assert_eq!(fill_holes(&filled), filled);
        let pruned = remove_artifacts(&mask, &cfg);
        assert!(pruned.is_subset_of(&mask));
        assert_eq!(remove_artifacts(&pruned, &cfg), pruned);
    }
}

#[test]
fn keep_largest_leaves_one_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..1000 {
        let (w, h) = (rng.gen_range(1..=32), rng.gen_range(1..=32));
        let density = rng.gen_range(0.05..0.7);
        let mask = random_mask(&mut rng, w, h, density);
        let mut cfg = random_config(&mut rng);
        cfg.keep_largest_only = true;
        let out = clean(&mask, &cfg);
        let eight = cfg.connectivity == Connectivity::Eight;
        assert!(count_components(&out, eight) <= 1);
    }
}

#[test]
fn labelling_agrees_with_flood_fill_counter() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..300 {
        let density = rng.gen_range(0.1..0.9);
        let mask = random_mask(&mut rng, 20, 17, density);
        assert_eq!(
            label_components(&mask, true, Connectivity::Eight)
                .areas
                .len(),
            count_components(&mask, true)
        );
        assert_eq!(
            label_components(&mask, true, Connectivity::Four)
                .areas
                .len(),
            count_components(&mask, false)
        );
        let areas = label_components(&mask, true, Connectivity::Eight).areas;
        assert_eq!(areas.iter().sum::<usize>(), mask.area());
    }
}

#[test]
fn filled_mask_has_no_enclosed_background() {
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for _ in 0..300 {
        let density = rng.gen_range(0.3..0.9);
        let mask = random_mask(&mut rng, 15, 15, density);
        let filled = fill_holes(&mask);
        // Every remaining background component touches the border.
        let bg = label_components(&filled, false, Connectivity::Four);
        let mut touches = vec![false; bg.areas.len()];
        for y in 0..15u32 {
            for x in 0..15u32 {
                if x == 0 || y == 0 || x == 14 || y == 14 {
                    if let Some(l) = bg.labels[(y * 15 + x) as usize] {
                        touches[l as usize] = true;
                    }
                }
            }
        }
        assert!(touches.iter().all(|&t| t));
    }
}

proptest! {
    #[test]
    fn solid_rectangles_survive_clean(w in 3u32..30, h in 3u32..30, x0 in 0u32..3, y0 in 0u32..3) {
        let mask = BinaryMask::from_fn(w, h, |x, y| x >= x0 && y >= y0 && x + 1 < w && y + 1 < h);
        prop_assume!(!mask.is_blank());
        let cfg = MorphologyConfig { min_component_area: MinArea::Pixels(1), ..Default::default() };
        prop_assert_eq!(clean(&mask, &cfg), mask);
    }
}
