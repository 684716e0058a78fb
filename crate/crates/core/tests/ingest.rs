use lek::ingest::{
    select_highest_confidence, threshold_probability_map, ScoredInstance, ThresholdConfig,
};
use lek::raster::{BinaryMask, ProbabilityMap};
use proptest::prelude::*;

proptest! {
    #[test]
    fn raising_the_cutoff_never_adds_lesion(values in proptest::collection::vec(0.0f64..=1.0, 1..200),
                                            lo in 0.01f64..0.99, delta in 0.0f64..0.5) {
        let hi = (lo + delta).min(0.99);
        let map = ProbabilityMap::from_values(values.len() as u32, 1, values).unwrap();
        let low = threshold_probability_map(&map, &ThresholdConfig::new(lo).unwrap());
        let high = threshold_probability_map(&map, &ThresholdConfig::new(hi).unwrap());
        prop_assert!(high.is_subset_of(&low));
    }

    #[test]
    fn selection_returns_an_input(confs in proptest::collection::vec(0.0f64..=1.0, 0..8)) {
        let instances: Vec<ScoredInstance> = confs
            .iter()
            .enumerate()
            .map(|(i, &c)| ScoredInstance::new(BinaryMask::from_fn(8, 1, |x, _| x as usize == i), c).unwrap())
            .collect();
        let picked = select_highest_confidence(&instances, (8, 1)).unwrap();
        if instances.is_empty() {
            prop_assert!(picked.is_blank());
        } else {
            let best = confs.iter().cloned().fold(f64::MIN, f64::max);
            let first_best = confs.iter().position(|&c| c == best).unwrap();
            prop_assert_eq!(&picked, &instances[first_best].mask);
        }
    }
}
