use crate::error::{Error, Result};
use crate::types::ImageBuffer;

use super::reflect101;

/// Square convolution kernel stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }
}

pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Kernel2D> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::invalid(format!("kernel size {size} must be odd")));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::invalid(format!("sigma {sigma} must be positive")));
    }
    let r = (size / 2) as isize;
    let denom = 2.0 * sigma * sigma;
    let mut weights = Vec::with_capacity(size * size);
    for y in -r..=r {
        for x in -r..=r {
            weights.push((-((x * x + y * y) as f64) / denom).exp());
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    Ok(Kernel2D { size, weights })
}

/// Direct 2D convolution with a Gaussian kernel. Byte images are rounded
/// and clamped on output; unit images stay real-valued.
pub fn gaussian_blur(img: &ImageBuffer, size: usize, sigma: f64) -> Result<ImageBuffer> {
    let kernel = gaussian_kernel(size, sigma)?;
    Ok(convolve(img, &kernel))
}

pub(crate) fn convolve(img: &ImageBuffer, kernel: &Kernel2D) -> ImageBuffer {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let k = kernel.size();
    let r = (k / 2) as isize;
    let src = img.to_reals();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for ky in 0..k {
                    let sy = reflect101(y as isize + ky as isize - r, h);
                    for kx in 0..k {
                        let sx = reflect101(x as isize + kx as isize - r, w);
                        acc += kernel.weight(ky, kx) * src[(sy * w + sx) * ch + c];
                    }
                }
                out[(y * w + x) * ch + c] = acc;
            }
        }
    }
    ImageBuffer::from_reals(w, h, ch, img.domain(), &out).expect("convolution shape")
}

/// Per-pixel Sobel responses of a single-channel image.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// `atan2(gy, gx)` in `(-pi, pi]`.
    pub angle: Vec<f64>,
}

/// 3x3 Sobel derivatives (first channel only), reflect-101 borders.
pub fn sobel_gradients(img: &ImageBuffer) -> Gradients {
    let (w, h) = (img.width(), img.height());
    let at = |x: isize, y: isize| img.get(reflect101(x, w), reflect101(y, h), 0);
    let n = w * h;
    let (mut gx, mut gy) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut magnitude, mut angle) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let mut a = dy.atan2(dx);
            if a <= -std::f64::consts::PI {
                a = std::f64::consts::PI;
            }
            gx.push(dx);
            gy.push(dy);
            magnitude.push(dx.hypot(dy));
            angle.push(a);
        }
    }
    Gradients {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
        angle,
    }
}
