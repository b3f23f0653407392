use crate::error::{Error, Result};
use crate::types::ImageBuffer;

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

/// BT.601 luma. Single-channel input is returned unchanged.
pub fn to_grayscale(img: &ImageBuffer) -> ImageBuffer {
    if img.channels() == 1 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let mut luma = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            luma.push(
                LUMA_R * img.get(x, y, 0) + LUMA_G * img.get(x, y, 1) + LUMA_B * img.get(x, y, 2),
            );
        }
    }
    ImageBuffer::from_reals(w, h, 1, img.domain(), &luma).expect("grayscale shape")
}

/// Rescales 8-bit samples into the unit interval.
pub fn normalize_pixels(img: &ImageBuffer) -> Result<ImageBuffer> {
    let bytes = img
        .as_bytes()
        .ok_or_else(|| Error::InvalidDomain("image is already in the unit domain".to_string()))?;
    let unit = bytes.iter().map(|&v| f64::from(v) / 255.0).collect();
    ImageBuffer::from_unit(img.width(), img.height(), img.channels(), unit)
}
