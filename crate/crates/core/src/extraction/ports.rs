//! Boundaries to the detector and OCR engine, plus the stock adapters:
//! a detector that replays a recorded detection dump, an OCR client that
//! shells out to a command, and a directory-backed OCR stub.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::error::{Error, Result};
use crate::imaging::io::save_png;
use crate::metrics::parse_detection_dump;
use crate::types::{Detection, ImageBuffer, Side};

/// Finds field regions on a rectified card.
pub trait DetectorPort: Send + Sync {
    /// `key` names the source image (a path or a side label) for detectors
    /// that need it; model-backed detectors ignore it.
    fn detect(&self, img: &ImageBuffer, side: Side, key: &str) -> Result<Vec<Detection>>;

    /// Whether `detect` may run from several threads at once.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OcrOutput {
    pub text: String,
    /// In `[0, 1]`.
    pub confidence: f64,
}

/// Reads text from a preprocessed field crop.
pub trait OcrPort: Send + Sync {
    fn recognize(&self, crop: &ImageBuffer, lang: &str, field: &str) -> Result<OcrOutput>;

    fn concurrent_safe(&self) -> bool {
        true
    }
}

pub(crate) fn port_error(port: &'static str, cause: impl ToString) -> Error {
    Error::Port {
        port,
        cause: cause.to_string(),
    }
}

/// Replays detections recorded in the JSON-lines dump format.
///
/// Lookup tries the key verbatim, then its file name, then the side name
/// (`front` / `back`), so one dump serves both file and upload inputs.
#[derive(Clone, Debug, Default)]
pub struct FixtureDetector {
    by_key: HashMap<String, Vec<Detection>>,
}

impl FixtureDetector {
    pub fn from_dump(text: &str) -> Result<Self> {
        let mut by_key = HashMap::new();
        for rec in parse_detection_dump(text, None)? {
            by_key.insert(rec.image, rec.detections);
        }
        Ok(FixtureDetector { by_key })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_dump(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, key: impl Into<String>, detections: Vec<Detection>) {
        self.by_key.insert(key.into(), detections);
    }

    fn lookup(&self, key: &str, side: Side) -> Option<&Vec<Detection>> {
        let file_name = Path::new(key).file_name().and_then(|n| n.to_str());
        self.by_key
            .get(key)
            .or_else(|| file_name.and_then(|n| self.by_key.get(n)))
            .or_else(|| self.by_key.get(side.as_str()))
    }
}

impl DetectorPort for FixtureDetector {
    fn detect(&self, _img: &ImageBuffer, side: Side, key: &str) -> Result<Vec<Detection>> {
        self.lookup(key, side).cloned().ok_or_else(|| {
            port_error(
                "detector",
                format!("no recorded detections for {key:?} ({side})"),
            )
        })
    }
}

/// Splits OCR output into text and an optional trailing tab-separated
/// confidence (defaulting to 1).
pub fn parse_ocr_output(stdout: &str) -> OcrOutput {
    let body = stdout.trim_end_matches(['\n', '\r']);
    if let Some((text, tail)) = body.rsplit_once('\t') {
        if let Ok(c) = tail.trim().parse::<f64>() {
            if (0.0..=1.0).contains(&c) {
                return OcrOutput {
                    text: text.trim().to_string(),
                    confidence: c,
                };
            }
        }
    }
    OcrOutput {
        text: body.trim().to_string(),
        confidence: 1.0,
    }
}

/// Runs an external OCR program per crop.
///
/// The template is split on whitespace (no shell) and `{image}`, `{lang}`
/// and `{field}` are substituted in each argument. A template without an
/// `{image}` placeholder gets the image path and language appended.
/// Exit status 0 means success; stdout is the UTF-8 text.
#[derive(Clone, Debug)]
pub struct CommandOcr {
    program: String,
    args: Vec<String>,
}

impl CommandOcr {
    pub fn new(template: &str) -> Result<Self> {
        let mut parts = template.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty OCR command template".into()))?;
        let mut args: Vec<String> = parts.collect();
        if !template.contains("{image}") {
            args.push("{image}".into());
            args.push("{lang}".into());
        }
        Ok(CommandOcr { program, args })
    }

    fn argv(&self, image: &Path, lang: &str, field: &str) -> Vec<String> {
        let image = image.to_string_lossy();
        self.args
            .iter()
            .map(|a| {
                a.replace("{image}", &image)
                    .replace("{lang}", lang)
                    .replace("{field}", field)
            })
            .collect()
    }
}

impl OcrPort for CommandOcr {
    fn recognize(&self, crop: &ImageBuffer, lang: &str, field: &str) -> Result<OcrOutput> {
        let file = tempfile::Builder::new()
            .prefix("cardex-crop-")
            .suffix(".png")
            .tempfile()
            .map_err(|e| port_error("ocr", e))?;
        save_png(crop, file.path()).map_err(|e| port_error("ocr", e))?;
        let out = Command::new(&self.program)
            .args(self.argv(file.path(), lang, field))
            .output()
            .map_err(|e| port_error("ocr", format!("{}: {e}", self.program)))?;
        if !out.status.success() {
            let stderr = String::from_utf8_lossy(&out.stderr);
            return Err(port_error(
                "ocr",
                format!(
                    "{} exited with {}: {}",
                    self.program,
                    out.status,
                    stderr.trim()
                ),
            ));
        }
        let text = String::from_utf8(out.stdout).map_err(|e| port_error("ocr", e))?;
        Ok(parse_ocr_output(&text))
    }
}

/// Serves `{dir}/{field}.txt` for every crop, in the same format as the
/// command client's stdout. Stands in for a real engine in fixtures.
#[derive(Clone, Debug)]
pub struct DirectoryOcr {
    dir: PathBuf,
}

impl DirectoryOcr {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DirectoryOcr { dir: dir.into() }
    }
}

impl OcrPort for DirectoryOcr {
    fn recognize(&self, _crop: &ImageBuffer, _lang: &str, field: &str) -> Result<OcrOutput> {
        let path = self.dir.join(format!("{field}.txt"));
        let text = std::fs::read_to_string(&path)
            .map_err(|e| port_error("ocr", format!("{}: {e}", path.display())))?;
        Ok(parse_ocr_output(&text))
    }
}
