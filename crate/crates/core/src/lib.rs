//! Field extraction for two-sided identity cards.
//!
//! The crate is organised by stage:
//!
//! - [`types`]: shared vocabulary (images, boxes, detections, extraction results)
//! - [`imaging`]: grayscale, blur, Canny, homography rectification, augmentation
//! - [`annotation`]: YOLO label files, dataset configs, seeded dataset splits
//! - [`metrics`]: IoU, matching, precision/recall/F1, PR curves, AP and mAP
//! - [`kernels`]: loss and optimizer kernels with gradient checks
//! - [`textfix`]: edit distance, lexicon correction, date normalization
//! - [`extraction`]: detector/OCR ports and the end-to-end pipeline
//! - [`synth`]: deterministic synthetic card renderer used by tests and fixtures

pub mod annotation;
pub mod error;
pub mod extraction;
pub mod imaging;
pub mod kernels;
pub mod metrics;
pub mod synth;
pub mod textfix;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AbsBox, AnnotationRecord, CategorySchema, Detection, Domain, ExtractionResult, FieldValue,
    GroundTruth, ImageBuffer, NormBox, Side,
};
