//! Classical image operators for inference preprocessing and augmentation.
//!
//! Every operator is a pure function of its inputs. Borders use reflect-101
//! (`dcb|abcd|cba`) wherever a neighborhood leaves the raster.

mod augment;
mod canny;
mod color;
mod filter;
mod geometry;
pub mod io;

pub use augment::{augment, AugmentSpec};
pub use canny::{canny_edges, CannyParams, EdgeMap};
pub use color::{normalize_pixels, to_grayscale};
pub use filter::{gaussian_blur, gaussian_kernel, sobel_gradients, Gradients, Kernel2D};
pub use geometry::{crop, resize_bilinear, solve_homography, warp_perspective, Homography, Point};

/// Maps an out-of-range index back into `0..n` by reflection without
/// repeating the edge sample.
#[inline]
pub(crate) fn reflect101(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let last = n as isize - 1;
    loop {
        if i < 0 {
            i = -i;
        } else if i > last {
            i = 2 * last - i;
        } else {
            return i as usize;
        }
    }
}
