//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::unnecessary_map_or)]

use cardex_core::imaging::{gaussian_kernel, to_grayscale, Point};
use cardex_core::metrics::{iou_norm, ImageEval};
use cardex_core::{Detection, GroundTruth, ImageBuffer, NormBox};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent greedy matcher: walk detections by descending confidence
/// (stable on index) and claim the best remaining same-category truth.
pub fn oracle_tp_flags(dets: &[Detection], truths: &[GroundTruth], thr: f64) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    idx.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .partial_cmp(&dets[a].confidence)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut used = vec![false; truths.len()];
    let mut flags = vec![false; dets.len()];
    for d in idx {
        let mut best: Option<(usize, f64)> = None;
        for (t, gt) in truths.iter().enumerate() {
            if used[t] || gt.category != dets[d].category {
                continue;
            }
            // IoU itself is checked against rasterization separately; sharing it
            // keeps exact-threshold cases (IoU == 0.5 on grid boxes) consistent.
            let v = iou_norm(&dets[d].bbox, &gt.bbox);
            if v >= thr && best.map_or(true, |(_, b)| v > b) {
                best = Some((t, v));
            }
        }
        if let Some((t, _)) = best {
            used[t] = true;
            flags[d] = true;
        }
    }
    flags
}

/// Brute force over every confidence cutoff: re-match the detections at or
/// above the cutoff from scratch, collect (recall, precision), then
/// integrate the upper envelope of precision over recall.
pub fn oracle_ap(images: &[ImageEval], thr: f64) -> f64 {
    let n_truths: usize = images.iter().map(|i| i.truths.len()).sum();
    if n_truths == 0 {
        return 0.0;
    }
    let mut cutoffs: Vec<f64> = images
        .iter()
        .flat_map(|i| i.detections.iter().map(|d| d.confidence))
        .collect();
    cutoffs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    cutoffs.dedup();
    let mut pts = Vec::new();
    for &c in &cutoffs {
        let (mut tp, mut n) = (0usize, 0usize);
        for img in images {
            let kept: Vec<Detection> = img
                .detections
                .iter()
                .filter(|d| d.confidence >= c)
                .copied()
                .collect();
            n += kept.len();
            tp += oracle_tp_flags(&kept, &img.truths, thr)
                .iter()
                .filter(|&&f| f)
                .count();
        }
        pts.push((tp as f64 / n_truths as f64, tp as f64 / n as f64));
    }
    let mut levels: Vec<f64> = pts.iter().map(|p| p.0).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    let mut area = 0.0;
    let mut prev = 0.0;
    for r in levels {
        let p = pts
            .iter()
            .filter(|q| q.0 >= r)
            .map(|q| q.1)
            .fold(0.0, f64::max);
        area += (r - prev) * p;
        prev = r;
    }
    area
}

pub fn random_box(rng: &mut ChaCha8Rng) -> NormBox {
    // a coarse grid so overlaps and exact duplicates both occur
    let g = |rng: &mut ChaCha8Rng, lo: u32, hi: u32| rng.random_range(lo..=hi) as f64 / 20.0;
    NormBox::new(g(rng, 4, 16), g(rng, 4, 16), g(rng, 1, 8), g(rng, 1, 8)).unwrap()
}

pub fn random_instance(rng: &mut ChaCha8Rng, cats: usize, max_boxes: usize) -> Vec<ImageEval> {
    let n_images = rng.random_range(1..=3);
    let mut budget = max_boxes;
    (0..n_images)
        .map(|_| {
            let nt = rng.random_range(0..=budget.min(6));
            budget -= nt;
            let truths: Vec<GroundTruth> = (0..nt)
                .map(|_| GroundTruth {
                    category: rng.random_range(0..cats),
                    bbox: random_box(rng),
                })
                .collect();
            let nd = rng.random_range(0..=budget.min(8));
            budget -= nd;
            let detections = (0..nd)
                .map(|_| {
                    // half the detections jitter a truth so true positives happen
                    let bbox = match truths.get(rng.random_range(0..truths.len().max(1))) {
                        Some(t) if rng.random_bool(0.6) => {
                            let j = rng.random_range(-1i32..=1) as f64 / 40.0;
                            NormBox::new(t.bbox.cx + j, t.bbox.cy, t.bbox.w, t.bbox.h)
                                .unwrap_or(t.bbox)
                        }
                        _ => random_box(rng),
                    };
                    Detection {
                        category: rng.random_range(0..cats),
                        confidence: rng.random_range(1..=10) as f64 / 10.0,
                        bbox,
                    }
                })
                .collect();
            ImageEval {
                image: String::new(),
                detections,
                truths,
            }
        })
        .collect()
}

pub fn only(images: &[ImageEval], category: usize) -> Vec<ImageEval> {
    images
        .iter()
        .map(|i| ImageEval {
            image: i.image.clone(),
            detections: i
                .detections
                .iter()
                .filter(|d| d.category == category)
                .copied()
                .collect(),
            truths: i
                .truths
                .iter()
                .filter(|t| t.category == category)
                .copied()
                .collect(),
        })
        .collect()
}

/// Integer box `(x1, y1, x2, y2)`, half-open on the far edges.
pub type PixelRect = (u32, u32, u32, u32);

pub fn random_pixel_rect(rng: &mut ChaCha8Rng) -> PixelRect {
    let x1 = rng.random_range(0..30u32);
    let y1 = rng.random_range(0..30u32);
    (
        x1,
        y1,
        x1 + rng.random_range(1..=20),
        y1 + rng.random_range(1..=20),
    )
}

/// Overlap ratio by counting covered pixels on a 50x50 grid.
pub fn raster_iou(a: PixelRect, b: PixelRect) -> f64 {
    let inside = |r: PixelRect, x: u32, y: u32| x >= r.0 && x < r.2 && y >= r.1 && y < r.3;
    let (mut both, mut either) = (0u32, 0u32);
    for y in 0..50 {
        for x in 0..50 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            both += u32::from(ia && ib);
            either += u32::from(ia || ib);
        }
    }
    both as f64 / either as f64
}

/// Mirror without repeating the edge sample: -1 -> 1, n -> n - 2.
pub fn mirror(i: i64, n: i64) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Straightforward convolution accumulated in the same row-major kernel
/// order, rounded the same way the image type rounds.
pub fn brute_blur(img: &ImageBuffer, size: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(size, sigma).unwrap();
    let r = (size / 2) as i64;
    let (w, h, ch) = (img.width() as i64, img.height() as i64, img.channels());
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for ky in 0..size as i64 {
                    for kx in 0..size as i64 {
                        let sx = mirror(x + kx - r, w);
                        let sy = mirror(y + ky - r, h);
                        acc += k.weight(ky as usize, kx as usize) * img.get(sx, sy, c);
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, ch: usize) -> ImageBuffer {
    ImageBuffer::from_bytes(w, h, ch, (0..w * h * ch).map(|_| rng.random()).collect()).unwrap()
}

/// Every found edge lies within 1 px of a true edge pixel.
pub fn edges_within(
    found: &[(usize, usize)],
    truth: &dyn Fn(usize, usize) -> bool,
    w: usize,
    h: usize,
) -> bool {
    found.iter().all(|&(x, y)| {
        (x.saturating_sub(1)..=(x + 1).min(w - 1))
            .any(|tx| (y.saturating_sub(1)..=(y + 1).min(h - 1)).any(|ty| truth(tx, ty)))
    })
}

pub fn random_quad(rng: &mut ChaCha8Rng) -> [Point; 4] {
    let j = |rng: &mut ChaCha8Rng| rng.random_range(-20.0..20.0);
    [
        Point::new(50.0 + j(rng), 50.0 + j(rng)),
        Point::new(350.0 + j(rng), 40.0 + j(rng)),
        Point::new(360.0 + j(rng), 260.0 + j(rng)),
        Point::new(40.0 + j(rng), 250.0 + j(rng)),
    ]
}

/// Centroid of dark pixels within `radius` of `near`.
pub fn dark_centroid(img: &ImageBuffer, near: Point, radius: f64) -> Option<Point> {
    let gray = to_grayscale(img);
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    let x0 = (near.x - radius).floor().max(0.0) as usize;
    let y0 = (near.y - radius).floor().max(0.0) as usize;
    let x1 = ((near.x + radius).ceil() as usize).min(img.width() - 1);
    let y1 = ((near.y + radius).ceil() as usize).min(img.height() - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if gray.get(x, y, 0) < 100.0 {
                sx += x as f64;
                sy += y as f64;
                n += 1.0;
            }
        }
    }
    (n > 0.0).then(|| Point::new(sx / n, sy / n))
}

/// Full-table edit distance straight from the recurrence.
pub fn dp_oracle(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
            d[i][j] = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + cost);
        }
    }
    d[a.len()][b.len()]
}

pub const ALPHABET: &[char] = &[
    'a', 'b', 'c', 'k', 'K', ' ', '1', 'क', 'ख', 'ग', 'ा', 'ि', '्', 'ं', 'म', '२', 'é', '字',
];

pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    (0..rng.random_range(0..=12))
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
        .collect()
}
