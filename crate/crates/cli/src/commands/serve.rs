use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use cardex_service::{build_state, serve, ServiceConfig};

use crate::failure::{CmdResult, Failure};

/// Flags override the `CARDEX_*` environment.
#[derive(clap::Args)]
pub struct Args {
    #[arg(long, env = "CARDEX_BIND")]
    bind: Option<SocketAddr>,
    #[arg(long, env = "CARDEX_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "CARDEX_LEXICON_DIR")]
    lexicons: Option<PathBuf>,
    /// Recorded detections plus OCR text files instead of a live engine
    #[arg(long)]
    fixture_mode: bool,
    #[arg(long, env = "CARDEX_FIXTURE_DETS")]
    dets: Option<PathBuf>,
    #[arg(long, env = "CARDEX_FIXTURE_OCR_DIR")]
    ocr_dir: Option<PathBuf>,
    #[arg(long, env = "CARDEX_HISTORY")]
    history: Option<PathBuf>,
}

pub fn run(args: Args) -> CmdResult {
    let mut cfg = ServiceConfig::from_env().map_err(|e| Failure::usage(e.to_string()))?;
    cfg.fixture_mode |= args.fixture_mode;
    if let Some(b) = args.bind {
        cfg.bind = b;
    }
    cfg.pipeline_config = args.config.or(cfg.pipeline_config);
    if let Some(d) = args.lexicons {
        cfg.lexicon_dir = d;
    }
    cfg.detections = args.dets.or(cfg.detections);
    if cfg.fixture_mode && cfg.detections.is_none() {
        cfg.detections = Some("fixtures/e2e/dets.jsonl".into());
    }
    if let Some(d) = args.ocr_dir {
        cfg.fixture_ocr_dir = d;
    }
    if let Some(h) = args.history {
        cfg.history_path = h;
    }
    let state = build_state(&cfg).map_err(|e| Failure::Runtime(e.into()))?;
    let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(cfg.bind)
            .await
            .with_context(|| format!("binding {}", cfg.bind))?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        serve(listener, state)
            .await
            .map_err(|e| Failure::Runtime(e.into()))
    })
}
