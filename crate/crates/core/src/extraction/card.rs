//! Locating the card in a photo and resampling it to a fixed rectangle.

use crate::error::{Error, Result};
use crate::imaging::{
    canny_edges, gaussian_blur, solve_homography, to_grayscale, warp_perspective, CannyParams,
    Point,
};
use crate::types::ImageBuffer;

/// Hull vertices considered when searching for the best quadrilateral.
pub const MAX_HULL_POINTS: usize = 64;

/// A quad smaller than this fraction of the frame is treated as no card.
pub const MIN_QUAD_FRACTION: f64 = 0.01;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull by the monotone chain method, counter-clockwise in a
/// y-up frame (clockwise on screen), without collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Shoelace area (absolute) of a polygon.
pub fn polygon_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum();
    twice.abs() / 2.0
}

/// Orders four corners top-left, top-right, bottom-right, bottom-left:
/// by angle around the centroid, starting from the corner with the
/// smallest `x + y`.
pub fn order_corners(quad: [Point; 4]) -> [Point; 4] {
    let cx = quad.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = quad.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mut q = quad;
    q.sort_by(|a, b| {
        (a.y - cy)
            .atan2(a.x - cx)
            .total_cmp(&(b.y - cy).atan2(b.x - cx))
    });
    let start = (0..4)
        .min_by(|&i, &j| (q[i].x + q[i].y).total_cmp(&(q[j].x + q[j].y)))
        .expect("four corners");
    q.rotate_left(start);
    q
}

fn largest_quad(hull: &[Point]) -> ([Point; 4], f64) {
    let n = hull.len();
    let mut best = ([hull[0]; 4], -1.0);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let q = [hull[i], hull[j], hull[k], hull[l]];
                    let a = polygon_area(&q);
                    if a > best.1 {
                        best = (q, a);
                    }
                }
            }
        }
    }
    best
}

/// Corners of the card, ordered from the top-left clockwise: the four
/// convex-hull vertices of the Canny edge map spanning the largest area,
/// each then moved to where the fitted lines of its two sides meet.
pub fn detect_card_quad(img: &ImageBuffer, canny: &CannyParams) -> Result<[Point; 4]> {
    let edges = canny_edges(
        img,
        canny.low,
        canny.high,
        canny.blur_size,
        canny.blur_sigma,
    )?;
    // On a clean step the two pixels straddling it have equal gradient and
    // suppression keeps the first, so edge pixels sit half a pixel before
    // the boundary along each axis.
    let points: Vec<Point> = edges
        .points()
        .map(|(x, y)| Point::new(x as f64 + 0.5, y as f64 + 0.5))
        .collect();
    let mut hull = convex_hull(&points);
    if hull.len() > MAX_HULL_POINTS {
        let n = hull.len();
        hull = (0..MAX_HULL_POINTS)
            .map(|i| hull[i * n / MAX_HULL_POINTS])
            .collect();
    }
    if hull.len() < 4 {
        return Err(Error::NoCardFound { side: None });
    }
    let (quad, area) = largest_quad(&hull);
    let frame = (img.width() * img.height()) as f64;
    if area < MIN_QUAD_FRACTION * frame {
        return Err(Error::NoCardFound { side: None });
    }
    Ok(refine_corners(&order_corners(quad), &points))
}

/// Edge pixels farther than this from a quad side do not support it.
const SIDE_BAND: f64 = 3.0;
/// A refined corner may not move farther than this from its hull vertex.
const MAX_CORNER_SHIFT: f64 = 8.0;

/// Total least squares line through `pts`: centroid and unit direction.
fn fit_line(pts: &[Point]) -> (Point, Point) {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.x - cx, p.y - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    (Point::new(cx, cy), Point::new(theta.cos(), theta.sin()))
}

fn intersect(a: (Point, Point), b: (Point, Point)) -> Option<Point> {
    let ((p, d), (q, e)) = (a, b);
    let denom = d.x * e.y - d.y * e.x;
    if denom.abs() < 1e-9 {
        return None;
    }
    let t = ((q.x - p.x) * e.y - (q.y - p.y) * e.x) / denom;
    Some(Point::new(p.x + t * d.x, p.y + t * d.y))
}

/// Hull vertices sit on the blurred, rounded tips of the card. Fitting a
/// line to the edge pixels along the middle of each side and intersecting
/// neighbouring lines recovers the corners the sides actually meet at.
fn refine_corners(quad: &[Point; 4], edges: &[Point]) -> [Point; 4] {
    let mut lines = Vec::with_capacity(4);
    for i in 0..4 {
        let (a, b) = (quad[i], quad[(i + 1) % 4]);
        let len = a.distance(&b);
        if len < 1.0 {
            return *quad;
        }
        let (ux, uy) = ((b.x - a.x) / len, (b.y - a.y) / len);
        let support: Vec<Point> = edges
            .iter()
            .copied()
            .filter(|p| {
                let (dx, dy) = (p.x - a.x, p.y - a.y);
                let along = (dx * ux + dy * uy) / len;
                let across = (dy * ux - dx * uy).abs();
                (0.1..=0.9).contains(&along) && across <= SIDE_BAND
            })
            .collect();
        if support.len() < 10 {
            return *quad;
        }
        lines.push(fit_line(&support));
    }
    let mut out = *quad;
    for i in 0..4 {
        match intersect(lines[(i + 3) % 4], lines[i]) {
            Some(c) if c.distance(&quad[i]) <= MAX_CORNER_SHIFT => out[i] = c,
            _ => return *quad,
        }
    }
    out
}

/// Maps the detected card onto an `out_w x out_h` raster.
pub fn rectify_card(
    img: &ImageBuffer,
    out_w: usize,
    out_h: usize,
    canny: &CannyParams,
) -> Result<ImageBuffer> {
    let quad = detect_card_quad(img, canny)?;
    rectify_quad(img, &quad, out_w, out_h)
}

/// Maps a known quad (top-left first, clockwise) onto an `out_w x out_h` raster.
pub fn rectify_quad(
    img: &ImageBuffer,
    quad: &[Point; 4],
    out_w: usize,
    out_h: usize,
) -> Result<ImageBuffer> {
    if out_w < 2 || out_h < 2 {
        return Err(Error::invalid(format!(
            "rectified size {out_w}x{out_h} is too small"
        )));
    }
    let (w, h) = ((out_w - 1) as f64, (out_h - 1) as f64);
    let target = [
        Point::new(0.0, 0.0),
        Point::new(w, 0.0),
        Point::new(w, h),
        Point::new(0.0, h),
    ];
    let hmg = solve_homography(quad, &target)?;
    warp_perspective(img, &hmg, out_w, out_h)
}

/// Blur applied to field crops before OCR.
pub const CROP_BLUR_SIZE: usize = 3;
pub const CROP_BLUR_SIGMA: f64 = 1.0;

/// Grayscale followed by a light blur.
pub fn preprocess_crop(crop: &ImageBuffer) -> Result<ImageBuffer> {
    gaussian_blur(&to_grayscale(crop), CROP_BLUR_SIZE, CROP_BLUR_SIGMA)
}
