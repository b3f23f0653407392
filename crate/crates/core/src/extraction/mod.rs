//! End-to-end field extraction: rectify the card, detect field regions,
//! OCR each crop and repair the text.

mod card;
mod config;
mod ports;

use std::collections::BTreeMap;

pub use card::{
    convex_hull, detect_card_quad, order_corners, polygon_area, preprocess_crop, rectify_card,
    rectify_quad, CROP_BLUR_SIGMA, CROP_BLUR_SIZE, MAX_HULL_POINTS, MIN_QUAD_FRACTION,
};
pub use config::{
    CorrectionKind, CorrectionSettings, FieldCorrection, PipelineConfig, PipelineSettings,
    SchemaSettings,
};
pub use ports::{
    parse_ocr_output, CommandOcr, DetectorPort, DirectoryOcr, FixtureDetector, OcrOutput, OcrPort,
};

use crate::error::{Error, Result};
use crate::imaging::crop;
use crate::textfix::{apply_substitutions, correct_token, normalize_date, standardize_gender};
use crate::types::{norm_to_abs, Detection, ExtractionResult, FieldValue, ImageBuffer, Side};

/// Highest-confidence detection per category at or above `min_conf`,
/// keyed by category. Equal confidences keep the earlier detection.
pub fn select_detections(dets: &[Detection], min_conf: f64) -> BTreeMap<usize, Detection> {
    let mut best: BTreeMap<usize, Detection> = BTreeMap::new();
    for d in dets.iter().filter(|d| d.confidence >= min_conf) {
        match best.get(&d.category) {
            Some(b) if b.confidence >= d.confidence => {}
            _ => {
                best.insert(d.category, *d);
            }
        }
    }
    best
}

/// Substitutions, then the field's configured correction.
/// Returns the field value and an optional warning.
pub fn repair_text(
    field: &str,
    raw: &str,
    confidence: f64,
    cfg: &PipelineConfig,
) -> (FieldValue, Option<String>) {
    let substituted = cfg
        .substitutions
        .iter()
        .filter(|t| t.applies_to(field))
        .fold(raw.to_string(), |s, t| apply_substitutions(&s, t));
    let mut similarity = None;
    let mut warning = None;
    let corrected = match cfg.corrections.get(field) {
        None => substituted,
        Some(FieldCorrection::Date) => match normalize_date(&substituted) {
            Ok(d) => d,
            Err(e) => {
                warning = Some(format!("{field}: {e}"));
                substituted
            }
        },
        Some(FieldCorrection::Lexicon(lex)) | Some(FieldCorrection::Gender(lex)) => {
            let outcome = match cfg.corrections.get(field) {
                Some(FieldCorrection::Gender(_)) => standardize_gender(&substituted, lex),
                _ => correct_token(&substituted, lex),
            }
            .expect("lexicons are non-empty by construction");
            if outcome.applied {
                similarity = Some(outcome.similarity);
            } else if !outcome.value.is_empty() {
                warning = Some(format!(
                    "{field}: no {} entry within threshold (best similarity {:.3})",
                    lex.name(),
                    outcome.similarity
                ));
            }
            outcome.value
        }
    };
    let value = FieldValue {
        correction_applied: corrected != raw,
        raw_text: raw.to_string(),
        corrected_text: corrected,
        confidence,
        similarity,
    };
    (value, warning)
}

fn as_port_error(port: &'static str, e: Error) -> Error {
    match e {
        e @ Error::Port { .. } => e,
        other => ports::port_error(port, other),
    }
}

/// Runs the pipeline on one side. `key` identifies the source image for
/// the detector port.
pub fn extract_side(
    img: &ImageBuffer,
    side: Side,
    key: &str,
    detector: &dyn DetectorPort,
    ocr: &dyn OcrPort,
    cfg: &PipelineConfig,
) -> Result<ExtractionResult> {
    let card =
        rectify_card(img, cfg.rectified_width, cfg.rectified_height, &cfg.canny).map_err(|e| {
            match e {
                Error::NoCardFound { .. } => Error::NoCardFound { side: Some(side) },
                other => other,
            }
        })?;
    let schema = cfg.schema(side);
    let detections = detector
        .detect(&card, side, key)
        .map_err(|e| as_port_error("detector", e))?;
    let mut result = ExtractionResult::empty(side);
    if let Some(d) = detections.iter().find(|d| !schema.contains(d.category)) {
        result.warnings.push(format!(
            "ignored detections with category {} outside the {side} schema",
            d.category
        ));
    }
    let chosen = select_detections(&detections, cfg.min_detection_confidence);
    for (category, name) in schema.names().iter().enumerate() {
        let Some(det) = chosen.get(&category) else {
            result.warnings.push(format!("{name}: not detected"));
            continue;
        };
        let region = norm_to_abs(det.bbox, card.width(), card.height());
        let field_crop = match crop(&card, &region) {
            Ok(c) => preprocess_crop(&c)?,
            Err(Error::DegenerateBox) => {
                result
                    .warnings
                    .push(format!("{name}: detection box is empty after clamping"));
                continue;
            }
            Err(e) => return Err(e),
        };
        let read = ocr
            .recognize(&field_crop, &cfg.ocr_language, name)
            .map_err(|e| as_port_error("ocr", e))?;
        if !(0.0..=1.0).contains(&read.confidence) {
            return Err(ports::port_error(
                "ocr",
                format!("confidence {} outside [0, 1]", read.confidence),
            ));
        }
        let (value, warning) = repair_text(name, &read.text, det.confidence * read.confidence, cfg);
        result.warnings.extend(warning);
        result.fields.insert(name.clone(), value);
    }
    Ok(result)
}

/// Both sides, independently: a failure on one side does not stop the other.
pub fn extract_document(
    front: (&ImageBuffer, &str),
    back: (&ImageBuffer, &str),
    detector: &dyn DetectorPort,
    ocr: &dyn OcrPort,
    cfg: &PipelineConfig,
) -> (Result<ExtractionResult>, Result<ExtractionResult>) {
    (
        extract_side(front.0, Side::Front, front.1, detector, ocr, cfg),
        extract_side(back.0, Side::Back, back.1, detector, ocr, cfg),
    )
}
