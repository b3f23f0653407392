use std::sync::{Arc, Mutex};

use cardex_core::extraction::{
    extract_document, CommandOcr, DetectorPort, DirectoryOcr, FixtureDetector, OcrPort,
    PipelineConfig,
};
use cardex_core::{ExtractionResult, ImageBuffer, Result};

use crate::history::FieldNames;
use crate::{ServiceConfig, ServiceError};

/// Configuration plus ports, shared read-only across requests.
pub struct Pipeline {
    pub config: PipelineConfig,
    detector: Arc<dyn DetectorPort>,
    ocr: Arc<dyn OcrPort>,
    /// Held around extractions when a port is not reentrant.
    serial: Option<Mutex<()>>,
}

impl Pipeline {
    pub fn new(
        config: PipelineConfig,
        detector: Arc<dyn DetectorPort>,
        ocr: Arc<dyn OcrPort>,
    ) -> Self {
        let serial =
            (!detector.concurrent_safe() || !ocr.concurrent_safe()).then(|| Mutex::new(()));
        Pipeline {
            config,
            detector,
            ocr,
            serial,
        }
    }

    /// Wires ports from the service settings: recorded detections are
    /// always replayed (no neural detector is bundled); OCR comes from the
    /// fixture directory in fixture mode, else from the configured command.
    pub fn from_service_config(cfg: &ServiceConfig) -> std::result::Result<Self, ServiceError> {
        let settings = cfg.pipeline_settings()?;
        let config = PipelineConfig::load(&settings, &cfg.lexicon_dir)?;
        let dets = cfg.detections.as_deref().ok_or_else(|| {
            ServiceError::Config(
                "no detector configured: set CARDEX_FIXTURE_DETS to a detection dump".into(),
            )
        })?;
        let detector: Arc<dyn DetectorPort> = Arc::new(FixtureDetector::load(dets)?);
        let ocr: Arc<dyn OcrPort> = if cfg.fixture_mode {
            Arc::new(DirectoryOcr::new(&cfg.fixture_ocr_dir))
        } else {
            let template = config.ocr_command.as_deref().ok_or_else(|| {
                ServiceError::Config("ocr_command is not set in the pipeline config".into())
            })?;
            Arc::new(CommandOcr::new(template)?)
        };
        Ok(Self::new(config, detector, ocr))
    }

    pub fn field_names(&self) -> FieldNames {
        FieldNames {
            front: self.config.schema_front.names().to_vec(),
            back: self.config.schema_back.names().to_vec(),
        }
    }

    /// Extracts both sides. Images are keyed `front` and `back` for the
    /// detector port.
    pub fn extract(
        &self,
        front: &ImageBuffer,
        back: &ImageBuffer,
    ) -> (Result<ExtractionResult>, Result<ExtractionResult>) {
        let _guard = self
            .serial
            .as_ref()
            .map(|m| m.lock().expect("pipeline lock poisoned"));
        extract_document(
            (front, "front"),
            (back, "back"),
            self.detector.as_ref(),
            self.ocr.as_ref(),
            &self.config,
        )
    }
}
