use std::net::SocketAddr;
use std::path::PathBuf;

use cardex_core::extraction::PipelineSettings;

use crate::ServiceError;

/// Runtime settings, normally read from `CARDEX_*` environment variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// Pipeline TOML; built-in defaults when absent.
    pub pipeline_config: Option<PathBuf>,
    pub lexicon_dir: PathBuf,
    /// Replay recorded detections and serve OCR text from a directory.
    pub fixture_mode: bool,
    /// Detection dump replayed by the detector port.
    pub detections: Option<PathBuf>,
    pub fixture_ocr_dir: PathBuf,
    pub history_path: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            pipeline_config: None,
            lexicon_dir: "data/lexicons".into(),
            fixture_mode: false,
            detections: None,
            fixture_ocr_dir: "fixtures/e2e/ocr".into(),
            history_path: "history.jsonl".into(),
        }
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ServiceError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Same as [`ServiceConfig::from_env`] with an injectable variable source.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        let mut cfg = ServiceConfig::default();
        if let Some(bind) = get("CARDEX_BIND") {
            cfg.bind = bind
                .parse()
                .map_err(|e| ServiceError::Config(format!("CARDEX_BIND={bind:?}: {e}")))?;
        }
        cfg.pipeline_config = get("CARDEX_CONFIG").map(PathBuf::from);
        if let Some(dir) = get("CARDEX_LEXICON_DIR") {
            cfg.lexicon_dir = dir.into();
        }
        if let Some(flag) = get("CARDEX_FIXTURE_MODE") {
            cfg.fixture_mode = match flag.trim().to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "on" => true,
                "" | "0" | "false" | "no" | "off" => false,
                other => {
                    return Err(ServiceError::Config(format!(
                        "CARDEX_FIXTURE_MODE={other:?}"
                    )))
                }
            };
        }
        cfg.detections = get("CARDEX_FIXTURE_DETS").map(PathBuf::from);
        if cfg.fixture_mode && cfg.detections.is_none() {
            cfg.detections = Some("fixtures/e2e/dets.jsonl".into());
        }
        if let Some(dir) = get("CARDEX_FIXTURE_OCR_DIR") {
            cfg.fixture_ocr_dir = dir.into();
        }
        if let Some(path) = get("CARDEX_HISTORY") {
            cfg.history_path = path.into();
        }
        Ok(cfg)
    }

    pub fn pipeline_settings(&self) -> Result<PipelineSettings, ServiceError> {
        Ok(match &self.pipeline_config {
            Some(path) => PipelineSettings::load(path)?,
            None => PipelineSettings::default(),
        })
    }
}
