use std::path::PathBuf;

use anyhow::Context;
use cardex_core::annotation::{parse_dataset_config, parse_yolo_label, serialize_yolo_label};
use cardex_core::imaging::io::{load, save_png};
use cardex_core::imaging::{augment, AugmentSpec};
use cardex_core::{CategorySchema, NormBox, Side};

use super::{find_images, write_file};
use crate::failure::{require_exists, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Folder of images with optional `<stem>.txt` YOLO labels
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// flip_h, flip_v, rotate90_cw, brightness_contrast:A:B or scale:F; repeatable
    #[arg(long = "spec", required = true)]
    specs: Vec<AugmentSpec>,
    /// Dataset YAML whose `names` bound the label categories
    #[arg(long)]
    data: Option<PathBuf>,
}

/// Category bound used when no dataset YAML is given.
const OPEN_SCHEMA_SIZE: usize = 1000;

pub fn run(args: Args) -> CmdResult {
    require_exists(&args.input, "input folder")?;
    let schema = match &args.data {
        Some(p) => {
            require_exists(p, "dataset yaml")?;
            let cfg = parse_dataset_config(&std::fs::read_to_string(p)?)?;
            CategorySchema::new(Side::Front, cfg.names)?
        }
        None => CategorySchema::new(Side::Front, (0..OPEN_SCHEMA_SIZE).map(|i| i.to_string()))?,
    };
    let images = find_images(&args.input).context("scanning input")?;
    if images.is_empty() {
        return Err(Failure::usage(format!(
            "no images under {}",
            args.input.display()
        )));
    }
    let mut written = 0usize;
    for rel in &images {
        let img = load(args.input.join(rel)).with_context(|| rel.display().to_string())?;
        let label_path = args.input.join(rel).with_extension("txt");
        let labels = if label_path.is_file() {
            let text = std::fs::read_to_string(&label_path)?;
            Some(
                parse_yolo_label(&text, &schema)
                    .with_context(|| label_path.display().to_string())?,
            )
        } else {
            None
        };
        let (cats, boxes): (Vec<usize>, Vec<NormBox>) = labels.iter().flatten().copied().unzip();
        for spec in &args.specs {
            let (out, moved) = augment(&img, &boxes, spec)?;
            let tag = spec.to_string().replace(':', "_");
            let stem = rel.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            let dest = args
                .output
                .join(rel)
                .with_file_name(format!("{stem}_{tag}.png"));
            if let Some(parent) = dest.parent() {
                std::fs::create_dir_all(parent)?;
            }
            save_png(&out, &dest)?;
            if labels.is_some() {
                let entries: Vec<_> = cats.iter().copied().zip(moved).collect();
                write_file(&dest.with_extension("txt"), serialize_yolo_label(&entries))?;
            }
            written += 1;
        }
    }
    println!("wrote {written} augmented image(s) from {}", images.len());
    Ok(())
}
