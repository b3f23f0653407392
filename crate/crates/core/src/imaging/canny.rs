use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ImageBuffer;

use super::{color::to_grayscale, filter::gaussian_blur, filter::sobel_gradients};

/// Binary edge mask with the source image's dimensions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub edges: Vec<bool>,
}

impl EdgeMap {
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.edges[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, &e)| e)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// Renders edges as a 0/255 byte image.
    pub fn to_image(&self) -> ImageBuffer {
        let data = self
            .edges
            .iter()
            .map(|&e| if e { 255 } else { 0 })
            .collect();
        ImageBuffer::from_bytes(self.width, self.height, 1, data).expect("edge map shape")
    }
}

/// Thresholds are on the L2 Sobel magnitude in the image's own scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CannyParams {
    pub low: f64,
    pub high: f64,
    pub blur_size: usize,
    pub blur_sigma: f64,
}

impl Default for CannyParams {
    fn default() -> Self {
        CannyParams {
            low: 50.0,
            high: 150.0,
            blur_size: 5,
            blur_sigma: 1.4,
        }
    }
}

pub fn canny_edges(
    img: &ImageBuffer,
    low: f64,
    high: f64,
    blur_size: usize,
    blur_sigma: f64,
) -> Result<EdgeMap> {
    if !(low >= 0.0 && low < high) {
        return Err(Error::invalid(format!(
            "canny thresholds need 0 <= low < high (got {low}, {high})"
        )));
    }
    let gray = to_grayscale(img);
    let smooth = gaussian_blur(&gray, blur_size, blur_sigma)?;
    let g = sobel_gradients(&smooth);
    let (w, h) = (g.width, g.height);

    let mag = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            g.magnitude[y as usize * w + x as usize]
        }
    };

    // Non-maximum suppression along the gradient, quantized to 0/45/90/135
    // degrees. The strict/non-strict pair keeps exactly one pixel of a
    // plateau two pixels wide.
    let mut thin = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let m = g.magnitude[y * w + x];
            if m <= 0.0 || m < low {
                continue;
            }
            let mut deg = g.angle[y * w + x].to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            let (dx, dy) = if !(22.5..157.5).contains(&deg) {
                (1, 0)
            } else if deg < 67.5 {
                (1, 1)
            } else if deg < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let before = mag(xi - dx, yi - dy);
            let after = mag(xi + dx, yi + dy);
            if m > before && m >= after {
                thin[y * w + x] = m;
            }
        }
    }

    // Hysteresis: strong seeds grow through 8-connected weak pixels.
    let mut edges = vec![false; w * h];
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            edges[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for ny in y - 1..=y + 1 {
            for nx in x - 1..=x + 1 {
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges[j] && thin[j] >= low {
                    edges[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }

    Ok(EdgeMap {
        width: w,
        height: h,
        edges,
    })
}
