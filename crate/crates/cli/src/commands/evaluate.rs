use std::path::PathBuf;

use anyhow::Context;
use cardex_core::extraction::PipelineSettings;
use cardex_core::metrics::{
    curves_csv, default_thresholds, mean_average_precision, parse_detection_dump, EvalOptions,
};
use cardex_core::{CategorySchema, Side};

use super::{pretty_json, write_file};
use crate::failure::{require_exists, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// JSON-lines dump: one `{"image", "detections", "truths"}` object per line
    #[arg(long)]
    dets: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Confidence floor for the confusion matrix and per-category P/R/F1
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    /// Which schema names the categories
    #[arg(long, default_value = "front", value_parser = parse_side)]
    side: Side,
    /// Comma-separated category names, overriding the configured schema
    #[arg(long, value_delimiter = ',')]
    names: Option<Vec<String>>,
    /// Pipeline TOML providing the schemas
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    curves: Option<PathBuf>,
}

pub fn parse_side(s: &str) -> Result<Side, String> {
    match s {
        "front" => Ok(Side::Front),
        "back" => Ok(Side::Back),
        other => Err(format!("side must be front or back, not {other:?}")),
    }
}

pub fn run(args: Args) -> CmdResult {
    require_exists(&args.dets, "detection dump")?;
    if !(0.0..=1.0).contains(&args.iou) || !(0.0..=1.0).contains(&args.conf) {
        return Err(Failure::usage("--iou and --conf must lie in [0, 1]"));
    }
    let names = match args.names {
        Some(n) => n,
        None => {
            let settings = match &args.config {
                Some(p) => PipelineSettings::load(p)?,
                None => PipelineSettings::default(),
            };
            match args.side {
                Side::Front => settings.schema.front,
                Side::Back => settings.schema.back,
            }
        }
    };
    let schema = CategorySchema::new(args.side, names)?;
    let text =
        std::fs::read_to_string(&args.dets).with_context(|| args.dets.display().to_string())?;
    let images =
        parse_detection_dump(&text, None).with_context(|| args.dets.display().to_string())?;
    let opts = EvalOptions {
        iou_threshold: args.iou,
        confidence_threshold: args.conf,
    };
    let report = mean_average_precision(&images, &schema, &opts);
    write_file(&args.out, pretty_json(&report))?;
    if let Some(path) = &args.curves {
        write_file(
            path,
            curves_csv(&images, &schema, args.iou, &default_thresholds())?,
        )?;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for (name, s) in &report.per_category {
        println!(
            "{name}: ap={:.4} precision={:.4} recall={:.4} f1={:.4} support={}",
            s.ap, s.precision, s.recall, s.f1, s.support
        );
    }
    println!("map50={:.6}", report.map50);
    Ok(())
}
