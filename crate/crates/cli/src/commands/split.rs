use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cardex_core::annotation::{split_dataset, DatasetItem, SplitSpec};
use sha2::{Digest, Sha256};

use super::find_images;
use crate::failure::{require_exists, CmdResult, Failure};

#[derive(clap::Args)]
pub struct Args {
    /// Folder of images; subfolders are strata, labels sit next to images as `<stem>.txt`
    #[arg(long)]
    input: PathBuf,
    /// Fraction of each stratum assigned to train, strictly between 0 and 1
    #[arg(long, value_parser = parse_ratio)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination; `train/` and `val/` are created inside and must not exist yet
    #[arg(long)]
    output: PathBuf,
    /// Drop images whose bytes duplicate an earlier image
    #[arg(long)]
    dedup: bool,
}

fn parse_ratio(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if r > 0.0 && r < 1.0 {
        Ok(r)
    } else {
        Err(format!("{r} is not strictly between 0 and 1"))
    }
}

pub fn run(args: Args) -> CmdResult {
    require_exists(&args.input, "input folder")?;
    for part in ["train", "val"] {
        if args.output.join(part).exists() {
            return Err(Failure::usage(format!(
                "{} already exists",
                args.output.join(part).display()
            )));
        }
    }
    let images = find_images(&args.input).context("scanning input")?;
    let mut seen = HashSet::new();
    let mut items = Vec::new();
    let mut duplicates = 0usize;
    for rel in images {
        if args.dedup {
            let bytes =
                std::fs::read(args.input.join(&rel)).with_context(|| rel.display().to_string())?;
            if !seen.insert(Sha256::digest(&bytes)) {
                duplicates += 1;
                continue;
            }
        }
        let label = rel.with_extension("txt");
        items.push(DatasetItem {
            stratum: rel
                .parent()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            label: args.input.join(&label).is_file().then_some(label),
            image: rel,
        });
    }
    if items.is_empty() {
        return Err(Failure::usage(format!(
            "no images under {}",
            args.input.display()
        )));
    }
    let split = split_dataset(&items, &SplitSpec::new(args.seed, args.ratio)?)?;
    for (part, members) in [("train", &split.train), ("val", &split.val)] {
        let dir = args.output.join(part);
        let mut listing = String::new();
        for item in members {
            copy(&args.input, &dir, &item.image)?;
            if let Some(label) = &item.label {
                copy(&args.input, &dir, label)?;
            }
            listing.push_str(&format!("{}\n", item.image.display()));
        }
        super::write_file(&args.output.join(format!("{part}.txt")), listing)?;
    }
    for w in &split.warnings {
        eprintln!("warning: {w}");
    }
    if args.dedup {
        println!("duplicates removed: {duplicates}");
    }
    for (stratum, train, val) in &split.strata {
        let name = if stratum.is_empty() { "." } else { stratum };
        println!("{name}: train={train} val={val}");
    }
    println!("train={} val={}", split.train.len(), split.val.len());
    Ok(())
}

fn copy(from_root: &Path, to_root: &Path, rel: &Path) -> CmdResult {
    let dest = to_root.join(rel);
    if let Some(parent) = dest.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::copy(from_root.join(rel), &dest)
        .with_context(|| format!("copying {}", rel.display()))?;
    Ok(())
}
