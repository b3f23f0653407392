use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AbsBox, ImageBuffer};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point { x, y }
    }
}

/// 3x3 projective map acting on column vectors `(x, y, 1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

const DET_EPS: f64 = 1e-12;

impl Homography {
    pub fn identity() -> Self {
        Homography {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Wraps a matrix, scaling it so `m[2][2] == 1`.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        let h = Homography { m }.normalized()?;
        if h.determinant().abs() <= DET_EPS {
            return Err(Error::DegenerateQuad("homography is singular".into()));
        }
        Ok(h)
    }

    fn normalized(self) -> Result<Self> {
        let s = self.m[2][2];
        if s.abs() <= DET_EPS || !s.is_finite() {
            return Err(Error::DegenerateQuad(
                "homography cannot be normalized (m22 = 0)".into(),
            ));
        }
        let mut m = self.m;
        m.iter_mut().flatten().for_each(|v| *v /= s);
        Ok(Homography { m })
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        self.m
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Maps a point; returns `None` when it lands on the line at infinity.
    pub fn apply(&self, p: Point) -> Option<Point> {
        let m = &self.m;
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if w.abs() < 1e-15 {
            return None;
        }
        Some(Point {
            x: (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w,
            y: (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w,
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        let det = self.determinant();
        if det.abs() <= DET_EPS || !det.is_finite() {
            return Err(Error::DegenerateQuad("homography is not invertible".into()));
        }
        let m = &self.m;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let inv = [
            [
                cof(1, 2, 1, 2) / det,
                -cof(0, 2, 1, 2) / det,
                cof(0, 1, 1, 2) / det,
            ],
            [
                -cof(1, 2, 0, 2) / det,
                cof(0, 2, 0, 2) / det,
                -cof(0, 1, 0, 2) / det,
            ],
            [
                cof(1, 2, 0, 1) / det,
                -cof(0, 2, 0, 1) / det,
                cof(0, 1, 0, 1) / det,
            ],
        ];
        let h = Homography { m: inv };
        // An inverse whose m22 vanishes is still a valid map; keep it unscaled.
        Ok(h.normalized().unwrap_or(h))
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Homography {
        let h = Homography {
            m: matmul(&self.m, &first.m),
        };
        h.normalized().unwrap_or(h)
    }
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Similarity transform moving the centroid to the origin with mean
/// distance sqrt(2). Conditions the linear system.
fn conditioning(pts: &[Point; 4]) -> [[f64; 3]; 3] {
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / 4.0;
    let s = std::f64::consts::SQRT_2 / mean;
    [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]]
}

fn has_collinear_triple(pts: &[Point; 4]) -> bool {
    let scale = pts
        .iter()
        .flat_map(|a| pts.iter().map(move |b| a.distance(b)))
        .fold(0.0, f64::max);
    if scale.is_nan() || scale <= 0.0 {
        return true;
    }
    let tol = 1e-9 * scale * scale;
    let triples = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)];
    triples.iter().any(|&(i, j, k)| {
        let (a, b, c) = (pts[i], pts[j], pts[k]);
        ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs() <= tol
    })
}

/// Solves `A h = b` in place by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve_linear<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..N {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

/// Direct linear transform from four correspondences, solved as an 8x8
/// system on conditioned coordinates.
pub fn solve_homography(src: &[Point; 4], dst: &[Point; 4]) -> Result<Homography> {
    if src
        .iter()
        .chain(dst)
        .any(|p| !p.x.is_finite() || !p.y.is_finite())
    {
        return Err(Error::DegenerateQuad("non-finite point".into()));
    }
    if has_collinear_triple(src) {
        return Err(Error::DegenerateQuad(
            "three source points are collinear".into(),
        ));
    }
    if has_collinear_triple(dst) {
        return Err(Error::DegenerateQuad(
            "three destination points are collinear".into(),
        ));
    }
    let ts = conditioning(src);
    let td = conditioning(dst);
    let cond = |t: &[[f64; 3]; 3], p: &Point| Point {
        x: t[0][0] * p.x + t[0][2],
        y: t[1][1] * p.y + t[1][2],
    };

    let mut a = [[0.0; 8]; 8];
    let mut b = [0.0; 8];
    for i in 0..4 {
        let s = cond(&ts, &src[i]);
        let d = cond(&td, &dst[i]);
        a[2 * i] = [s.x, s.y, 1.0, 0.0, 0.0, 0.0, -s.x * d.x, -s.y * d.x];
        b[2 * i] = d.x;
        a[2 * i + 1] = [0.0, 0.0, 0.0, s.x, s.y, 1.0, -s.x * d.y, -s.y * d.y];
        b[2 * i + 1] = d.y;
    }
    let h = solve_linear(a, b)
        .ok_or_else(|| Error::DegenerateQuad("correspondence system is singular".into()))?;
    let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]];

    let s = td[0][0];
    let td_inv = [
        [1.0 / s, 0.0, -td[0][2] / s],
        [0.0, 1.0 / s, -td[1][2] / s],
        [0.0, 0.0, 1.0],
    ];
    Homography::from_matrix(matmul(&td_inv, &matmul(&hn, &ts)))
}

#[inline]
fn bilinear(img: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (img.width(), img.height());
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as usize, y0 as usize);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
    let bottom = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Inverse-maps every output pixel through `h^-1` and samples bilinearly;
/// samples falling outside the source are black.
pub fn warp_perspective(
    img: &ImageBuffer,
    h: &Homography,
    out_w: usize,
    out_h: usize,
) -> Result<ImageBuffer> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("output size must be at least 1x1"));
    }
    let inv = h.inverse()?;
    let ch = img.channels();
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    const EDGE: f64 = 1e-9;
    let mut out = vec![0.0; out_w * out_h * ch];
    for y in 0..out_h {
        for x in 0..out_w {
            let Some(p) = inv.apply(Point::new(x as f64, y as f64)) else {
                continue;
            };
            if !(p.x >= -EDGE && p.y >= -EDGE && p.x <= max_x + EDGE && p.y <= max_y + EDGE) {
                continue;
            }
            let (sx, sy) = (p.x.clamp(0.0, max_x), p.y.clamp(0.0, max_y));
            for c in 0..ch {
                out[(y * out_w + x) * ch + c] = bilinear(img, sx, sy, c);
            }
        }
    }
    ImageBuffer::from_reals(out_w, out_h, ch, img.domain(), &out)
}

/// Pixel-center aligned bilinear resampling.
pub fn resize_bilinear(img: &ImageBuffer, out_w: usize, out_h: usize) -> Result<ImageBuffer> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("output size must be at least 1x1"));
    }
    let ch = img.channels();
    let sx = img.width() as f64 / out_w as f64;
    let sy = img.height() as f64 / out_h as f64;
    let max_x = (img.width() - 1) as f64;
    let max_y = (img.height() - 1) as f64;
    let mut out = Vec::with_capacity(out_w * out_h * ch);
    for y in 0..out_h {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        for x in 0..out_w {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            for c in 0..ch {
                out.push(bilinear(img, fx, fy, c));
            }
        }
    }
    ImageBuffer::from_reals(out_w, out_h, ch, img.domain(), &out)
}

/// Sub-image covering the integer pixels touched by `b`, clamped to the raster.
pub fn crop(img: &ImageBuffer, b: &AbsBox) -> Result<ImageBuffer> {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x0 = b.x1.max(0.0).floor();
    let y0 = b.y1.max(0.0).floor();
    let x1 = b.x2.min(w).ceil();
    let y1 = b.y2.min(h).ceil();
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::DegenerateBox);
    }
    let (x0, y0, x1, y1) = (x0 as usize, y0 as usize, x1 as usize, y1 as usize);
    let ch = img.channels();
    let (cw, chh) = (x1 - x0, y1 - y0);
    let mut out = Vec::with_capacity(cw * chh * ch);
    for y in y0..y1 {
        for x in x0..x1 {
            for c in 0..ch {
                out.push(img.get(x, y, c));
            }
        }
    }
    ImageBuffer::from_reals(cw, chh, ch, img.domain(), &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(x0: f64, y0: f64, s: f64) -> [Point; 4] {
        [
            Point::new(x0, y0),
            Point::new(x0 + s, y0),
            Point::new(x0 + s, y0 + s),
            Point::new(x0, y0 + s),
        ]
    }

    fn assert_matrix_close(a: [[f64; 3]; 3], b: [[f64; 3]; 3], tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - b[i][j]).abs() < tol, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn identical_quads_give_identity() {
        let q = [
            Point::new(10.0, 20.0),
            Point::new(300.0, 15.0),
            Point::new(320.0, 200.0),
            Point::new(5.0, 220.0),
        ];
        let h = solve_homography(&q, &q).unwrap();
        assert_matrix_close(h.matrix(), Homography::identity().matrix(), 1e-10);
    }

    #[test]
    fn unit_square_scaled_by_two() {
        let h = solve_homography(&sq(0.0, 0.0, 1.0), &sq(0.0, 0.0, 2.0)).unwrap();
        assert_matrix_close(
            h.matrix(),
            [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]],
            1e-12,
        );
    }

    #[test]
    fn collinear_points_rejected() {
        let src = [
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 5.0),
        ];
        assert!(matches!(
            solve_homography(&src, &sq(0.0, 0.0, 1.0)),
            Err(Error::DegenerateQuad(_))
        ));
        assert!(matches!(
            solve_homography(&sq(0.0, 0.0, 1.0), &src),
            Err(Error::DegenerateQuad(_))
        ));
    }

    #[test]
    fn singular_matrix_rejected() {
        let singular = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]];
        assert!(Homography::from_matrix(singular).is_err());
    }

    #[test]
    fn identity_warp_is_exact() {
        let data: Vec<u8> = (0..40 * 30 * 3).map(|i| (i * 7 % 256) as u8).collect();
        let img = ImageBuffer::from_bytes(40, 30, 3, data).unwrap();
        let out = warp_perspective(&img, &Homography::identity(), 40, 30).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn crop_examples() {
        let data: Vec<u8> = (0..100 * 100).map(|i| (i % 253) as u8).collect();
        let img = ImageBuffer::from_bytes(100, 100, 1, data).unwrap();
        let full = crop(&img, &AbsBox::new(0.0, 0.0, 100.0, 100.0).unwrap()).unwrap();
        assert_eq!(full, img);

        let c = crop(&img, &AbsBox::new(10.0, 10.0, 20.0, 20.0).unwrap()).unwrap();
        assert_eq!((c.width(), c.height()), (10, 10));
        for y in 0..10 {
            for x in 0..10 {
                assert_eq!(c.get(x, y, 0), img.get(x + 10, y + 10, 0));
            }
        }

        let outside = AbsBox::new(150.0, 150.0, 160.0, 160.0).unwrap();
        assert!(matches!(crop(&img, &outside), Err(Error::DegenerateBox)));
    }

    #[test]
    fn resize_constant_stays_constant() {
        let img = ImageBuffer::filled(13, 9, 1, 77);
        let r = resize_bilinear(&img, 31, 4).unwrap();
        assert!(r.as_bytes().unwrap().iter().all(|&v| v == 77));
    }
}
