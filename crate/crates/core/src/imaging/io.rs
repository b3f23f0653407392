//! Raster decode/encode. PNG is the lossless interchange format; JPEG is
//! accepted on input.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::types::{Domain, ImageBuffer};

fn from_dynamic(img: DynamicImage) -> ImageBuffer {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if img.color().has_color() {
        ImageBuffer::from_bytes(w, h, 3, img.into_rgb8().into_raw())
    } else {
        ImageBuffer::from_bytes(w, h, 1, img.into_luma8().into_raw())
    }
    .expect("decoded raster shape")
}

fn to_dynamic(img: &ImageBuffer) -> Result<DynamicImage> {
    let bytes: Vec<u8> = match img.domain() {
        Domain::Byte => img.as_bytes().expect("byte samples").to_vec(),
        Domain::Unit => img
            .to_reals()
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect(),
    };
    let (w, h) = (img.width() as u32, img.height() as u32);
    let err = || Error::invalid("raster does not fit an encoder buffer");
    Ok(match img.channels() {
        1 => DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, bytes).ok_or_else(err)?),
        _ => DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, bytes).ok_or_else(err)?),
    })
}

pub fn decode(bytes: &[u8]) -> Result<ImageBuffer> {
    Ok(from_dynamic(image::load_from_memory(bytes)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>> {
    let mut out = Cursor::new(Vec::new());
    to_dynamic(img)?.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn save_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_png(img)?)?;
    Ok(())
}
