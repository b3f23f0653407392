//! Shared domain vocabulary.
//!
//! Image origin is top-left with y growing downward. Geometry is `f64`
//! throughout; rasters stay 8-bit until [`crate::imaging::normalize_pixels`]
//! moves them to the unit interval.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which face of the card an image shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Front,
    Back,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Front => "front",
            Side::Back => "back",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sample domain of an [`ImageBuffer`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    /// 8-bit samples in `[0, 255]`.
    Byte,
    /// Real samples in `[0.0, 1.0]`.
    Unit,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    Byte(Vec<u8>),
    Unit(Vec<f64>),
}

/// Row-major raster with interleaved channels (1 = gray, 3 = RGB).
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    samples: Samples,
}

impl ImageBuffer {
    pub fn from_bytes(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        Self::check_shape(width, height, channels, data.len())?;
        Ok(Self {
            width,
            height,
            channels,
            samples: Samples::Byte(data),
        })
    }

    pub fn from_unit(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        Self::check_shape(width, height, channels, data.len())?;
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidDomain(format!(
                "unit sample {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            samples: Samples::Unit(data),
        })
    }

    /// Uniform byte image.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::from_bytes(
            width,
            height,
            channels,
            vec![value; width * height * channels],
        )
        .expect("filled image shape")
    }

    /// Builds an image in `domain` from real values, rounding and clamping
    /// for bytes and clamping to `[0, 1]` for unit samples.
    pub fn from_reals(
        width: usize,
        height: usize,
        channels: usize,
        domain: Domain,
        values: &[f64],
    ) -> Result<Self> {
        Self::check_shape(width, height, channels, values.len())?;
        let samples = match domain {
            Domain::Byte => Samples::Byte(values.iter().map(|&v| to_byte(v)).collect()),
            Domain::Unit => Samples::Unit(values.iter().map(|&v| v.clamp(0.0, 1.0)).collect()),
        };
        Ok(Self {
            width,
            height,
            channels,
            samples,
        })
    }

    fn check_shape(width: usize, height: usize, channels: usize, len: usize) -> Result<()> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("image dimensions {width}x{height}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "{channels} channels (expected 1 or 3)"
            )));
        }
        let expected = width * height * channels;
        if len != expected {
            return Err(Error::Shape {
                expected,
                actual: len,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn domain(&self) -> Domain {
        match self.samples {
            Samples::Byte(_) => Domain::Byte,
            Samples::Unit(_) => Domain::Unit,
        }
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match &self.samples {
            Samples::Byte(b) => Some(b),
            Samples::Unit(_) => None,
        }
    }

    pub fn as_unit(&self) -> Option<&[f64]> {
        match &self.samples {
            Samples::Unit(u) => Some(u),
            Samples::Byte(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    /// Sample value in the image's own scale (0..255 or 0..1).
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        let i = self.index(x, y, c);
        match &self.samples {
            Samples::Byte(b) => f64::from(b[i]),
            Samples::Unit(u) => u[i],
        }
    }

    pub fn to_reals(&self) -> Vec<f64> {
        match &self.samples {
            Samples::Byte(b) => b.iter().map(|&v| f64::from(v)).collect(),
            Samples::Unit(u) => u.clone(),
        }
    }
}

#[inline]
pub(crate) fn to_byte(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Center-format box normalized to image size (the YOLO convention).
///
/// Fields are public so out-of-range values can be represented and repaired
/// with [`clamp_box`]; [`NormBox::new`] enforces the invariants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct NormBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl From<[f64; 4]> for NormBox {
    fn from([cx, cy, w, h]: [f64; 4]) -> Self {
        NormBox { cx, cy, w, h }
    }
}

impl From<NormBox> for [f64; 4] {
    fn from(b: NormBox) -> Self {
        [b.cx, b.cy, b.w, b.h]
    }
}

impl NormBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        let b = NormBox { cx, cy, w, h };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(Error::Range(format!(
                "normalized box ({cx}, {cy}, {w}, {h}) violates 0<=cx,cy<=1, 0<w,h<=1"
            )))
        }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.cx)
            && (0.0..=1.0).contains(&self.cy)
            && self.w > 0.0
            && self.w <= 1.0
            && self.h > 0.0
            && self.h <= 1.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Corner-format box in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl AbsBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if x1 < x2 && y1 < y2 {
            Ok(AbsBox { x1, y1, x2, y2 })
        } else {
            Err(Error::DegenerateBox)
        }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }
}

/// Clamps a box's corners into the unit square and recomputes center/size.
pub fn clamp_box(b: NormBox) -> Result<NormBox> {
    let x1 = (b.cx - b.w / 2.0).clamp(0.0, 1.0);
    let x2 = (b.cx + b.w / 2.0).clamp(0.0, 1.0);
    let y1 = (b.cy - b.h / 2.0).clamp(0.0, 1.0);
    let y2 = (b.cy + b.h / 2.0).clamp(0.0, 1.0);
    if !(x2 > x1 && y2 > y1) {
        return Err(Error::DegenerateBox);
    }
    let inside = x1 == b.cx - b.w / 2.0
        && x2 == b.cx + b.w / 2.0
        && y1 == b.cy - b.h / 2.0
        && y2 == b.cy + b.h / 2.0;
    if inside {
        return Ok(b);
    }
    Ok(NormBox {
        cx: (x1 + x2) / 2.0,
        cy: (y1 + y2) / 2.0,
        w: x2 - x1,
        h: y2 - y1,
    })
}

pub fn norm_to_abs(b: NormBox, width: usize, height: usize) -> AbsBox {
    let (w, h) = (width as f64, height as f64);
    AbsBox {
        x1: (b.cx - b.w / 2.0) * w,
        y1: (b.cy - b.h / 2.0) * h,
        x2: (b.cx + b.w / 2.0) * w,
        y2: (b.cy + b.h / 2.0) * h,
    }
}

pub fn abs_to_norm(b: AbsBox, width: usize, height: usize) -> NormBox {
    let (w, h) = (width as f64, height as f64);
    NormBox {
        cx: (b.x1 + b.x2) / 2.0 / w,
        cy: (b.y1 + b.y2) / 2.0 / h,
        w: (b.x2 - b.x1) / w,
        h: (b.y2 - b.y1) / h,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category: usize,
    pub confidence: f64,
    #[serde(rename = "box")]
    pub bbox: NormBox,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub category: usize,
    #[serde(rename = "box")]
    pub bbox: NormBox,
}

/// Ordered field names for one card side; a category id is an index into `names`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct CategorySchema {
    side: Side,
    names: Vec<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    side: Side,
    names: Vec<String>,
}

impl TryFrom<RawSchema> for CategorySchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        CategorySchema::new(raw.side, raw.names)
    }
}

impl CategorySchema {
    pub fn new<S: Into<String>>(side: Side, names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::Config(format!("{side} schema has no categories")));
        }
        for (i, n) in names.iter().enumerate() {
            if n.trim().is_empty() {
                return Err(Error::Config(format!("{side} schema has an empty name")));
            }
            if names[..i].contains(n) {
                return Err(Error::Config(format!("{side} schema repeats {n:?}")));
            }
        }
        Ok(Self { side, names })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, category: usize) -> Option<&str> {
        self.names.get(category).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, category: usize) -> bool {
        category < self.names.len()
    }
}

/// Parsed contents of one YOLO label file bound to its image.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationRecord {
    pub image_path: String,
    pub entries: Vec<(usize, NormBox)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldValue {
    pub raw_text: String,
    pub corrected_text: String,
    pub confidence: f64,
    pub correction_applied: bool,
    /// Lexicon similarity, present when a lexicon match replaced the text.
    pub similarity: Option<f64>,
}

impl FieldValue {
    pub fn uncorrected(text: impl Into<String>, confidence: f64) -> Self {
        let text = text.into();
        FieldValue {
            corrected_text: text.clone(),
            raw_text: text,
            confidence,
            correction_applied: false,
            similarity: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub side: Side,
    pub fields: BTreeMap<String, FieldValue>,
    pub warnings: Vec<String>,
}

impl ExtractionResult {
    pub fn empty(side: Side) -> Self {
        ExtractionResult {
            side,
            fields: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: NormBox, b: NormBox, tol: f64) -> bool {
        (a.cx - b.cx).abs() <= tol
            && (a.cy - b.cy).abs() <= tol
            && (a.w - b.w).abs() <= tol
            && (a.h - b.h).abs() <= tol
    }

    #[test]
    fn clamp_leaves_valid_box() {
        let b = NormBox::new(0.5, 0.5, 0.2, 0.1).unwrap();
        assert_eq!(clamp_box(b).unwrap(), b);
    }

    #[test]
    fn clamp_cuts_left_overhang() {
        let b = NormBox {
            cx: 0.0,
            cy: 0.5,
            w: 0.4,
            h: 0.2,
        };
        let c = clamp_box(b).unwrap();
        assert!(
            close(
                c,
                NormBox {
                    cx: 0.1,
                    cy: 0.5,
                    w: 0.2,
                    h: 0.2
                },
                1e-12
            ),
            "{c:?}"
        );
    }

    #[test]
    fn clamp_rejects_box_outside() {
        let b = NormBox {
            cx: -0.5,
            cy: 0.5,
            w: 0.1,
            h: 0.1,
        };
        assert!(matches!(clamp_box(b), Err(Error::DegenerateBox)));
    }

    #[test]
    fn norm_to_abs_examples() {
        let full = norm_to_abs(NormBox::new(0.5, 0.5, 1.0, 1.0).unwrap(), 640, 640);
        assert_eq!(
            full,
            AbsBox {
                x1: 0.0,
                y1: 0.0,
                x2: 640.0,
                y2: 640.0
            }
        );
        let q = norm_to_abs(NormBox::new(0.5, 0.5, 0.5, 0.5).unwrap(), 100, 200);
        assert_eq!(
            q,
            AbsBox {
                x1: 25.0,
                y1: 50.0,
                x2: 75.0,
                y2: 150.0
            }
        );
    }

    #[test]
    fn schema_rejects_duplicates_and_empty() {
        assert!(CategorySchema::new(Side::Front, ["a", "a"]).is_err());
        assert!(CategorySchema::new::<&str>(Side::Front, []).is_err());
        let s = CategorySchema::new(Side::Back, ["issuing_officer", "date_of_issue"]).unwrap();
        assert_eq!(s.index_of("date_of_issue"), Some(1));
    }

    #[test]
    fn image_shape_checked() {
        assert!(ImageBuffer::from_bytes(2, 2, 1, vec![0; 3]).is_err());
        assert!(ImageBuffer::from_bytes(2, 2, 2, vec![0; 8]).is_err());
        assert!(ImageBuffer::from_unit(1, 1, 1, vec![1.5]).is_err());
    }

    #[test]
    fn detection_json_uses_box_array() {
        let d = Detection {
            category: 2,
            confidence: 0.75,
            bbox: NormBox::new(0.5, 0.25, 0.125, 0.5).unwrap(),
        };
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(
            s,
            r#"{"category":2,"confidence":0.75,"box":[0.5,0.25,0.125,0.5]}"#
        );
        assert_eq!(serde_json::from_str::<Detection>(&s).unwrap(), d);
    }

    fn valid_box() -> impl Strategy<Value = NormBox> {
        (0.0..=1.0f64, 0.0..=1.0f64, 1e-3..=1.0f64, 1e-3..=1.0f64)
            .prop_map(|(cx, cy, w, h)| NormBox { cx, cy, w, h })
    }

    proptest! {
        #[test]
        fn abs_norm_round_trip(b in valid_box(), w in 1usize..4000, h in 1usize..4000) {
            let back = abs_to_norm(norm_to_abs(b, w, h), w, h);
            prop_assert!(close(back, b, 1e-9));
        }

        #[test]
        fn clamp_is_idempotent(
            cx in -0.5..1.5f64, cy in -0.5..1.5f64, w in 1e-3..1.0f64, h in 1e-3..1.0f64
        ) {
            if let Ok(once) = clamp_box(NormBox { cx, cy, w, h }) {
                prop_assert!(once.is_valid());
                let twice = clamp_box(once).unwrap();
                prop_assert!(close(once, twice, 1e-12));
            }
        }

        #[test]
        fn extraction_result_json_round_trip(
            texts in proptest::collection::vec("\\PC{0,12}", 1..5),
            conf in 0.0..=1.0f64,
        ) {
            let mut r = ExtractionResult::empty(Side::Front);
            for (i, t) in texts.iter().enumerate() {
                let mut v = FieldValue::uncorrected(format!("{t}कास्की"), conf);
                v.corrected_text.push('।');
                v.correction_applied = true;
                r.fields.insert(format!("f{i}"), v);
            }
            r.warnings.push("जिल्ला".into());
            let json = serde_json::to_string(&r).unwrap();
            let back: ExtractionResult = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(back, r);
        }
    }
}
