//! Non-neural stages of a two-model dermoscopic lesion segmentation pipeline.
//!
//! Shades of Gray colour constancy, probability-map and instance ingestion,
//! morphological clean-up, two-model ensemble fusion, the six pixel metrics,
//! and a dataset benchmark harness that reports per lesion type. Any
//! segmentation model's outputs, saved as PNG masks or probability maps, can
//! be fused and scored with it.
//!
//! ```
//! use lek::ensemble::{fuse, EnsembleStrategy};
//! use lek::metrics::score;
//! use lek::raster::BinaryMask;
//!
//! let truth = BinaryMask::from_fn(8, 8, |x, y| (2..6).contains(&x) && (2..6).contains(&y));
//! let semantic = BinaryMask::from_fn(8, 8, |x, y| (2..6).contains(&x) && (2..5).contains(&y));
//! let instance = BinaryMask::from_fn(8, 8, |x, y| (2..5).contains(&x) && (2..6).contains(&y));
//!
//! let fused = fuse(&semantic, &instance, EnsembleStrategy::Add)?;
//! let m = score(&fused, &truth)?;
//! assert_eq!(m.sensitivity, 15.0 / 16.0);
//! assert_eq!(m.specificity, 1.0);
//! # Ok::<(), lek::Error>(())
//! ```
//!
//! The accompanying book (`book/`) walks through each stage; its code
//! listings are compiled and run as doc-tests of this crate.

pub mod color_constancy;
pub mod ensemble;
mod error;
pub mod evaluation;
pub mod fixtures;
pub mod ingest;
pub mod metrics;
pub mod postprocess;
pub mod raster;

pub use color_constancy::{apply_shades_of_gray, estimate_illuminant, ColorConstancyConfig};
pub use ensemble::{fuse, EnsembleStrategy};
pub use error::{Error, Result};
pub use evaluation::{
    aggregate, evaluate_case, evaluate_manifest, load_manifest, render_report, AggregateReport,
    DatasetManifest, EvalConfig, LesionType, ReportFormat, Selector,
};
pub use ingest::{select_highest_confidence, threshold_probability_map, ThresholdConfig};
pub use metrics::{compute_metrics, confusion, ConfusionCounts, MetricSet};
pub use postprocess::{clean, fill_holes, remove_artifacts, MorphologyConfig};
pub use raster::{BinaryMask, ProbabilityMap, RasterImage};

// The book chapters are compiled here so `cargo test --doc` runs their listings.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/masks.md")]
    mod masks {}
    #[doc = include_str!("../../../book/src/color-constancy.md")]
    mod color_constancy {}
    #[doc = include_str!("../../../book/src/ingestion.md")]
    mod ingestion {}
    #[doc = include_str!("../../../book/src/morphology.md")]
    mod morphology {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/fixtures.md")]
    mod fixtures {}
}
