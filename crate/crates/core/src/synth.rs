//! Deterministic synthetic cards: a light card with text-like bars in known
//! field regions and dark square fiducials, optionally placed in perspective
//! on a black scene. Used for fixtures and oracle tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::imaging::{solve_homography, warp_perspective, Point};
use crate::types::{AbsBox, CategorySchema, Detection, ImageBuffer, NormBox, Side};

const CARD_RGB: [u8; 3] = [236, 232, 222];
const INK: u8 = 40;
const PHOTO: u8 = 150;
const FIDUCIAL: u8 = 20;

/// A field region in card-relative coordinates `[x1, y1, x2, y2]`, each in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRegion {
    pub name: String,
    pub rect: [f64; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct CardLayout {
    pub side: Side,
    pub fields: Vec<FieldRegion>,
    /// Card-relative fiducial centers.
    pub fiducials: Vec<(f64, f64)>,
    /// Fiducial side length as a fraction of card width.
    pub fiducial_size: f64,
    /// Card-relative photo placeholder, if any.
    pub photo: Option<[f64; 4]>,
}

fn region(name: &str, rect: [f64; 4]) -> FieldRegion {
    FieldRegion {
        name: name.to_string(),
        rect,
    }
}

impl CardLayout {
    /// Layout matching the default front and back schemas.
    pub fn standard(side: Side) -> Self {
        let fiducials = vec![(0.05, 0.08), (0.95, 0.08), (0.95, 0.92), (0.05, 0.92)];
        match side {
            Side::Front => CardLayout {
                side,
                fields: vec![
                    region("citizenship_number", [0.30, 0.10, 0.70, 0.18]),
                    region("full_name", [0.30, 0.24, 0.85, 0.32]),
                    region("gender", [0.30, 0.38, 0.45, 0.46]),
                    region("date_of_birth", [0.55, 0.38, 0.85, 0.46]),
                    region("birth_district", [0.30, 0.52, 0.65, 0.60]),
                    region("permanent_district", [0.30, 0.66, 0.65, 0.74]),
                ],
                fiducials,
                fiducial_size: 0.03,
                photo: Some([0.08, 0.20, 0.24, 0.60]),
            },
            Side::Back => CardLayout {
                side,
                fields: vec![
                    region("issuing_officer", [0.10, 0.55, 0.55, 0.65]),
                    region("date_of_issue", [0.60, 0.55, 0.90, 0.65]),
                ],
                fiducials,
                fiducial_size: 0.03,
                photo: None,
            },
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldRegion> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Pixel box of a field on a `width x height` card.
    pub fn field_box(&self, name: &str, width: usize, height: usize) -> Option<AbsBox> {
        let r = self.field(name)?.rect;
        let (w, h) = (width as f64, height as f64);
        AbsBox::new(r[0] * w, r[1] * h, r[2] * w, r[3] * h).ok()
    }

    /// Fiducial centers in pixel coordinates of a `width x height` card,
    /// measured on the pixel-center grid (0 .. width - 1).
    pub fn fiducial_points(&self, width: usize, height: usize) -> Vec<Point> {
        let (sx, sy) = ((width - 1) as f64, (height - 1) as f64);
        self.fiducials
            .iter()
            .map(|&(x, y)| Point::new(x * sx, y * sy))
            .collect()
    }

    /// One detection per field that `schema` knows, as a perfect detector
    /// would report it on the rectified card.
    pub fn detections(&self, schema: &CategorySchema, confidence: f64) -> Vec<Detection> {
        self.fields
            .iter()
            .filter_map(|f| {
                let category = schema.index_of(&f.name)?;
                let [x1, y1, x2, y2] = f.rect;
                let bbox = NormBox::new((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1).ok()?;
                Some(Detection {
                    category,
                    confidence,
                    bbox,
                })
            })
            .collect()
    }
}

fn fill(px: &mut [u8], width: usize, rect: [usize; 4], rgb: [u8; 3]) {
    let [x1, y1, x2, y2] = rect;
    for y in y1..y2 {
        for x in x1..x2 {
            px[(y * width + x) * 3..][..3].copy_from_slice(&rgb);
        }
    }
}

fn to_pixels(r: [f64; 4], width: usize, height: usize) -> [usize; 4] {
    let (w, h) = (width as f64, height as f64);
    [
        (r[0] * w).round() as usize,
        (r[1] * h).round() as usize,
        ((r[2] * w).round() as usize).min(width),
        ((r[3] * h).round() as usize).min(height),
    ]
}

/// Renders a flat RGB card. `seed` varies the glyph pattern only.
pub fn render_card(
    layout: &CardLayout,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<ImageBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut px = Vec::with_capacity(width * height * 3);
    for _ in 0..width * height {
        px.extend_from_slice(&CARD_RGB);
    }
    if let Some(photo) = layout.photo {
        fill(&mut px, width, to_pixels(photo, width, height), [PHOTO; 3]);
    }
    for f in &layout.fields {
        let [x1, y1, x2, y2] = to_pixels(f.rect, width, height);
        let band = y2 - y1;
        let (top, bottom) = (y1 + band / 5, y2 - band / 5);
        let mut x = x1 + 1;
        while x < x2 {
            let glyph = rng.random_range(2..=6).min(x2 - x);
            let gap = rng.random_range(1..=3);
            let rise = rng.random_range(0..=band / 8);
            fill(&mut px, width, [x, top + rise, x + glyph, bottom], [INK; 3]);
            x += glyph + gap;
            if rng.random_bool(0.15) {
                x += 4;
            }
        }
    }
    let side = (layout.fiducial_size * width as f64).round().max(2.0);
    let half = side / 2.0;
    for c in layout.fiducial_points(width, height) {
        let rect = [
            (c.x - half + 0.5).round().max(0.0) as usize,
            (c.y - half + 0.5).round().max(0.0) as usize,
            ((c.x + half + 0.5).round() as usize).min(width),
            ((c.y + half + 0.5).round() as usize).min(height),
        ];
        fill(&mut px, width, rect, [FIDUCIAL; 3]);
    }
    ImageBuffer::from_bytes(width, height, 3, px)
}

/// Places `card` on a black scene so its corner pixels land on `corners`
/// (top-left, top-right, bottom-right, bottom-left).
pub fn place_card(
    card: &ImageBuffer,
    scene_w: usize,
    scene_h: usize,
    corners: &[Point; 4],
) -> Result<ImageBuffer> {
    let (w, h) = ((card.width() - 1) as f64, (card.height() - 1) as f64);
    let src = [
        Point::new(0.0, 0.0),
        Point::new(w, 0.0),
        Point::new(w, h),
        Point::new(0.0, h),
    ];
    let hmg = solve_homography(&src, corners)?;
    warp_perspective(card, &hmg, scene_w, scene_h)
}

/// Corners of a `w x h` rectangle centred at `center`, rotated clockwise
/// (in image coordinates) by `degrees`.
pub fn rotated_rect(center: Point, w: f64, h: f64, degrees: f64) -> [Point; 4] {
    let (s, c) = degrees.to_radians().sin_cos();
    let corner =
        |dx: f64, dy: f64| Point::new(center.x + dx * c - dy * s, center.y + dx * s + dy * c);
    let (hw, hh) = (w / 2.0, h / 2.0);
    [
        corner(-hw, -hh),
        corner(hw, -hh),
        corner(hw, hh),
        corner(-hw, hh),
    ]
}

/// Scene size of [`demo_scene`].
pub const DEMO_SCENE_SIZE: (usize, usize) = (560, 400);

/// The repository's end-to-end fixture: a 480x300 card of the given side
/// photographed with mild perspective on a 560x400 black scene, plus light
/// sensor noise.
pub fn demo_scene(side: Side) -> Result<ImageBuffer> {
    let (corners, seed) = match side {
        Side::Front => (
            [
                Point::new(42.0, 48.0),
                Point::new(518.0, 36.0),
                Point::new(530.0, 352.0),
                Point::new(30.0, 340.0),
            ],
            11,
        ),
        Side::Back => (
            [
                Point::new(36.0, 30.0),
                Point::new(512.0, 50.0),
                Point::new(522.0, 360.0),
                Point::new(44.0, 346.0),
            ],
            12,
        ),
    };
    let card = render_card(&CardLayout::standard(side), 480, 300, seed)?;
    let (w, h) = DEMO_SCENE_SIZE;
    add_noise(&place_card(&card, w, h, &corners)?, 3.0, seed + 100)
}

/// Adds deterministic uniform noise of amplitude `amp` byte levels.
pub fn add_noise(img: &ImageBuffer, amp: f64, seed: u64) -> Result<ImageBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = img
        .to_reals()
        .into_iter()
        .map(|v| v + rng.random_range(-amp..=amp))
        .collect();
    ImageBuffer::from_reals(
        img.width(),
        img.height(),
        img.channels(),
        img.domain(),
        &vals,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_is_deterministic() {
        let layout = CardLayout::standard(Side::Front);
        let a = render_card(&layout, 160, 100, 7).unwrap();
        assert_eq!(a, render_card(&layout, 160, 100, 7).unwrap());
        assert_ne!(a, render_card(&layout, 160, 100, 8).unwrap());
    }

    #[test]
    fn fiducials_are_dark() {
        let layout = CardLayout::standard(Side::Back);
        let card = render_card(&layout, 320, 200, 1).unwrap();
        for p in layout.fiducial_points(320, 200) {
            assert!(card.get(p.x.round() as usize, p.y.round() as usize, 0) < 50.0);
        }
        assert_eq!(card.get(160, 20, 1), CARD_RGB[1] as f64);
    }

    #[test]
    fn placement_maps_corners() {
        let card = ImageBuffer::filled(11, 6, 1, 200);
        let corners = rotated_rect(Point::new(20.0, 20.0), 10.0, 5.0, 0.0);
        let scene = place_card(&card, 40, 40, &corners).unwrap();
        assert_eq!(scene.get(15, 18, 0), 200.0);
        assert_eq!(scene.get(25, 22, 0), 200.0);
        assert_eq!(scene.get(14, 18, 0), 0.0);
        assert_eq!(scene.get(25, 23, 0), 0.0);
    }
}
