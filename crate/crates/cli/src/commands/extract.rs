use std::path::PathBuf;

use anyhow::Context;
use cardex_core::extraction::{
    extract_document, CommandOcr, DirectoryOcr, FixtureDetector, OcrPort, PipelineConfig,
    PipelineSettings,
};
use cardex_core::imaging::io::load;
use cardex_core::ExtractionResult;

use super::{pretty_json, write_file};
use crate::failure::{require_exists, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    front: PathBuf,
    #[arg(long)]
    back: PathBuf,
    /// Detection dump replayed as the detector, keyed by image path, file name or side
    #[arg(long)]
    dets: PathBuf,
    /// OCR command template with {image}, {lang} and {field} placeholders
    #[arg(long, conflicts_with = "ocr_dir")]
    ocr_cmd: Option<String>,
    /// Serve OCR text from `<dir>/<field>.txt` instead of running an engine
    #[arg(long)]
    ocr_dir: Option<PathBuf>,
    /// Pipeline TOML; built-in defaults otherwise
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "data/lexicons")]
    lexicons: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(serde::Serialize)]
struct Output<'a> {
    front: &'a ExtractionResult,
    back: &'a ExtractionResult,
}

pub fn run(args: Args) -> CmdResult {
    for (path, what) in [
        (&args.front, "front image"),
        (&args.back, "back image"),
        (&args.dets, "detection dump"),
    ] {
        require_exists(path, what)?;
    }
    require_exists(&args.lexicons, "lexicon folder")?;
    let settings = match &args.config {
        Some(p) => {
            require_exists(p, "config")?;
            PipelineSettings::load(p)?
        }
        None => PipelineSettings::default(),
    };
    let cfg = PipelineConfig::load(&settings, &args.lexicons)?;
    let ocr: Box<dyn OcrPort> = match (&args.ocr_cmd, &args.ocr_dir, &cfg.ocr_command) {
        (Some(t), _, _) | (None, None, Some(t)) => Box::new(CommandOcr::new(t)?),
        (None, Some(dir), _) => {
            require_exists(dir, "OCR text folder")?;
            Box::new(DirectoryOcr::new(dir))
        }
        (None, None, None) => {
            return Err(Failure::usage(
                "give --ocr-cmd or --ocr-dir, or set ocr_command in the config",
            ))
        }
    };
    let detector = FixtureDetector::load(&args.dets)?;
    let front = load(&args.front).with_context(|| args.front.display().to_string())?;
    let back = load(&args.back).with_context(|| args.back.display().to_string())?;
    let front_key = args.front.to_string_lossy();
    let back_key = args.back.to_string_lossy();
    let (f, b) = extract_document(
        (&front, &front_key),
        (&back, &back_key),
        &detector,
        ocr.as_ref(),
        &cfg,
    );
    let (f, b) = (f?, b?);
    write_file(
        &args.out,
        pretty_json(&Output {
            front: &f,
            back: &b,
        }),
    )?;
    for r in [&f, &b] {
        for w in &r.warnings {
            eprintln!("warning: {}: {w}", r.side);
        }
        println!("{}: {} field(s)", r.side, r.fields.len());
    }
    Ok(())
}
