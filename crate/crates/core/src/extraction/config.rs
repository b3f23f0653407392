use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::CannyParams;
use crate::textfix::{parse_substitutions, Lexicon, SubstitutionTable, DEFAULT_THRESHOLD};
use crate::types::{CategorySchema, Side};

/// How a field's text is repaired after OCR and substitution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionKind {
    /// Snap to the closest lexicon entry.
    Lexicon,
    /// Snap to a surface form of a mapped lexicon and emit its code.
    Gender,
    /// Normalize to `YYYY-MM-DD`.
    Date,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionSettings {
    pub field: String,
    pub kind: CorrectionKind,
    /// Lexicon file stem inside the lexicon directory.
    #[serde(default)]
    pub lexicon: Option<String>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSettings {
    pub front: Vec<String>,
    pub back: Vec<String>,
}

/// The on-disk (TOML) form of the pipeline configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub min_detection_confidence: f64,
    pub ocr_language: String,
    /// External OCR command template; see [`super::CommandOcr`].
    pub ocr_command: Option<String>,
    pub rectified_width: usize,
    pub rectified_height: usize,
    pub canny: CannyParams,
    pub schema: SchemaSettings,
    /// Substitution table file inside the lexicon directory.
    pub substitutions: Option<String>,
    pub corrections: Vec<CorrectionSettings>,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        let corr = |field: &str, kind, lexicon: Option<&str>| CorrectionSettings {
            field: field.into(),
            kind,
            lexicon: lexicon.map(String::from),
            threshold: DEFAULT_THRESHOLD,
        };
        PipelineSettings {
            min_detection_confidence: 0.25,
            ocr_language: "nep".into(),
            ocr_command: None,
            rectified_width: 1280,
            rectified_height: 800,
            canny: CannyParams::default(),
            schema: SchemaSettings {
                front: names(&[
                    "citizenship_number",
                    "full_name",
                    "gender",
                    "date_of_birth",
                    "birth_district",
                    "permanent_district",
                ]),
                back: names(&["issuing_officer", "date_of_issue"]),
            },
            substitutions: Some("substitutions.tsv".into()),
            corrections: vec![
                corr("gender", CorrectionKind::Gender, Some("gender")),
                corr("date_of_birth", CorrectionKind::Date, None),
                corr("birth_district", CorrectionKind::Lexicon, Some("districts")),
                corr(
                    "permanent_district",
                    CorrectionKind::Lexicon,
                    Some("districts"),
                ),
                corr("date_of_issue", CorrectionKind::Date, None),
            ],
        }
    }
}

impl PipelineSettings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldCorrection {
    Lexicon(Lexicon),
    Gender(Lexicon),
    Date,
}

/// Validated, fully loaded configuration shared read-only by extractions.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub schema_front: CategorySchema,
    pub schema_back: CategorySchema,
    pub corrections: BTreeMap<String, FieldCorrection>,
    pub substitutions: Vec<SubstitutionTable>,
    pub canny: CannyParams,
    pub ocr_language: String,
    pub ocr_command: Option<String>,
    pub min_detection_confidence: f64,
    pub rectified_width: usize,
    pub rectified_height: usize,
}

impl PipelineConfig {
    /// Builds the configuration, reading lexicon and substitution files
    /// from `lexicon_dir`.
    pub fn load(settings: &PipelineSettings, lexicon_dir: &Path) -> Result<Self> {
        let read = |stem: &str, ext: &str| -> Result<String> {
            let path = lexicon_dir.join(format!("{stem}.{ext}"));
            std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        };
        let mut corrections = BTreeMap::new();
        for c in &settings.corrections {
            let lexicon = || -> Result<Lexicon> {
                let stem = c.lexicon.as_deref().ok_or_else(|| {
                    Error::Config(format!("correction for {} needs a lexicon", c.field))
                })?;
                Lexicon::parse(stem, &read(stem, "txt")?, c.threshold)
            };
            let fc = match c.kind {
                CorrectionKind::Lexicon => FieldCorrection::Lexicon(lexicon()?),
                CorrectionKind::Gender => FieldCorrection::Gender(lexicon()?),
                CorrectionKind::Date => FieldCorrection::Date,
            };
            if corrections.insert(c.field.clone(), fc).is_some() {
                return Err(Error::Config(format!("two corrections for {}", c.field)));
            }
        }
        let substitutions = match &settings.substitutions {
            Some(file) => {
                let path = lexicon_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                parse_substitutions(&text)?
            }
            None => Vec::new(),
        };
        Self::new(settings, corrections, substitutions)
    }

    /// Builds the configuration from already-loaded correction data.
    pub fn new(
        settings: &PipelineSettings,
        corrections: BTreeMap<String, FieldCorrection>,
        substitutions: Vec<SubstitutionTable>,
    ) -> Result<Self> {
        let schema_front = CategorySchema::new(Side::Front, settings.schema.front.clone())?;
        let schema_back = CategorySchema::new(Side::Back, settings.schema.back.clone())?;
        if let Some(dup) = schema_front
            .names()
            .iter()
            .find(|n| schema_back.index_of(n).is_some())
        {
            return Err(Error::Config(format!("field {dup} appears on both sides")));
        }
        let known =
            |f: &str| schema_front.index_of(f).is_some() || schema_back.index_of(f).is_some();
        if let Some(f) = corrections.keys().find(|f| !known(f)) {
            return Err(Error::Config(format!("correction for unknown field {f}")));
        }
        if let Some(t) = substitutions
            .iter()
            .find(|t| t.scope != crate::textfix::ALL_FIELDS && !known(&t.scope))
        {
            return Err(Error::Config(format!(
                "substitutions scoped to unknown field {}",
                t.scope
            )));
        }
        if !(0.0..=1.0).contains(&settings.min_detection_confidence) {
            return Err(Error::Config(
                "min_detection_confidence outside [0, 1]".into(),
            ));
        }
        if settings.rectified_width < 2 || settings.rectified_height < 2 {
            return Err(Error::Config("rectified size must be at least 2x2".into()));
        }
        if !(settings.canny.low >= 0.0 && settings.canny.low < settings.canny.high) {
            return Err(Error::Config(
                "canny thresholds need 0 <= low < high".into(),
            ));
        }
        Ok(PipelineConfig {
            schema_front,
            schema_back,
            corrections,
            substitutions,
            canny: settings.canny,
            ocr_language: settings.ocr_language.clone(),
            ocr_command: settings.ocr_command.clone(),
            min_detection_confidence: settings.min_detection_confidence,
            rectified_width: settings.rectified_width,
            rectified_height: settings.rectified_height,
        })
    }

    pub fn schema(&self, side: Side) -> &CategorySchema {
        match side {
            Side::Front => &self.schema_front,
            Side::Back => &self.schema_back,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let s = PipelineSettings::default();
        assert_eq!(PipelineSettings::from_toml(&s.to_toml()).unwrap(), s);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let s = PipelineSettings::from_toml("min_detection_confidence = 0.5\n").unwrap();
        assert_eq!(s.min_detection_confidence, 0.5);
        assert_eq!(s.rectified_width, 1280);
        assert!(PipelineSettings::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn validation() {
        let mut s = PipelineSettings::default();
        s.schema.back.push("gender".into());
        assert!(matches!(
            PipelineConfig::new(&s, BTreeMap::new(), vec![]),
            Err(Error::Config(m)) if m.contains("both sides")
        ));
        let s = PipelineSettings::default();
        let mut c = BTreeMap::new();
        c.insert("shoe_size".to_string(), FieldCorrection::Date);
        assert!(PipelineConfig::new(&s, c, vec![]).is_err());
        assert!(PipelineConfig::new(&s, BTreeMap::new(), vec![]).is_ok());
    }
}
