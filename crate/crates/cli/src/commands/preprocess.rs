use std::path::PathBuf;

use anyhow::Context;
use cardex_core::extraction::rectify_card;
use cardex_core::imaging::io::{load, save_png};
use cardex_core::imaging::{
    canny_edges, gaussian_blur, normalize_pixels, to_grayscale, CannyParams,
};
use cardex_core::ImageBuffer;

use crate::failure::{require_exists, CmdResult};

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum Op {
    Grayscale,
    Normalize,
    Blur,
    Canny,
    Rectify,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    input: PathBuf,
    /// PNG output path
    #[arg(long)]
    output: PathBuf,
    /// Operators applied in the order given
    #[arg(long = "op", required = true)]
    ops: Vec<Op>,
    #[arg(long, default_value_t = 5)]
    blur_size: usize,
    #[arg(long, default_value_t = 1.4)]
    blur_sigma: f64,
    #[arg(long, default_value_t = 50.0)]
    low: f64,
    #[arg(long, default_value_t = 150.0)]
    high: f64,
    /// Rectified card width
    #[arg(long, default_value_t = 1280)]
    width: usize,
    /// Rectified card height
    #[arg(long, default_value_t = 800)]
    height: usize,
}

pub fn run(args: Args) -> CmdResult {
    require_exists(&args.input, "input image")?;
    let mut img: ImageBuffer =
        load(&args.input).with_context(|| args.input.display().to_string())?;
    let canny = CannyParams {
        low: args.low,
        high: args.high,
        blur_size: args.blur_size,
        blur_sigma: args.blur_sigma,
    };
    for op in &args.ops {
        img = match op {
            Op::Grayscale => to_grayscale(&img),
            Op::Normalize => normalize_pixels(&img)?,
            Op::Blur => gaussian_blur(&img, args.blur_size, args.blur_sigma)?,
            Op::Canny => canny_edges(
                &img,
                canny.low,
                canny.high,
                canny.blur_size,
                canny.blur_sigma,
            )?
            .to_image(),
            Op::Rectify => rectify_card(&img, args.width, args.height, &canny)?,
        };
    }
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    save_png(&img, &args.output)?;
    println!(
        "{}x{} -> {}",
        img.width(),
        img.height(),
        args.output.display()
    );
    Ok(())
}
