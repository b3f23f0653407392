use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ImageBuffer, NormBox};

use super::geometry::resize_bilinear;

/// One label-preserving augmentation. Rotation is restricted to quarter
/// turns so boxes stay axis-aligned without re-boxing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AugmentSpec {
    FlipH,
    FlipV,
    Rotate90Cw,
    /// `v -> clamp(alpha * v + beta)` in the image's own scale.
    BrightnessContrast {
        alpha: f64,
        beta: f64,
    },
    Scale {
        factor: f64,
    },
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AugmentSpec::BrightnessContrast { alpha, beta } => {
                if !(alpha > 0.0 && alpha.is_finite()) || !beta.is_finite() {
                    return Err(Error::invalid(format!(
                        "brightness_contrast needs alpha > 0 and finite beta (got {alpha}, {beta})"
                    )));
                }
            }
            AugmentSpec::Scale { factor } if !(factor > 0.0 && factor.is_finite()) => {
                return Err(Error::invalid(format!("scale factor {factor} must be > 0")));
            }
            _ => {}
        }
        Ok(())
    }
}

impl fmt::Display for AugmentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentSpec::FlipH => f.write_str("flip_h"),
            AugmentSpec::FlipV => f.write_str("flip_v"),
            AugmentSpec::Rotate90Cw => f.write_str("rotate90_cw"),
            AugmentSpec::BrightnessContrast { alpha, beta } => {
                write!(f, "brightness_contrast:{alpha}:{beta}")
            }
            AugmentSpec::Scale { factor } => write!(f, "scale:{factor}"),
        }
    }
}

/// Parses the compact CLI form: `flip_h`, `flip_v`, `rotate90_cw`,
/// `brightness_contrast:ALPHA:BETA`, `scale:FACTOR`.
impl FromStr for AugmentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let op = parts.next().unwrap_or_default();
        let mut num = |what: &str| -> Result<f64> {
            parts
                .next()
                .ok_or_else(|| Error::invalid(format!("{op} is missing {what}")))?
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("{op} {what}: {e}")))
        };
        let spec = match op {
            "flip_h" => AugmentSpec::FlipH,
            "flip_v" => AugmentSpec::FlipV,
            "rotate90_cw" => AugmentSpec::Rotate90Cw,
            "brightness_contrast" => {
                let alpha = num("alpha")?;
                let beta = num("beta")?;
                AugmentSpec::BrightnessContrast { alpha, beta }
            }
            "scale" => AugmentSpec::Scale {
                factor: num("factor")?,
            },
            other => return Err(Error::invalid(format!("unknown augmentation {other:?}"))),
        };
        if parts.next().is_some() {
            return Err(Error::invalid(format!("too many arguments in {s:?}")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Applies `spec` to the raster and maps each box consistently.
pub fn augment(
    img: &ImageBuffer,
    boxes: &[NormBox],
    spec: &AugmentSpec,
) -> Result<(ImageBuffer, Vec<NormBox>)> {
    spec.validate()?;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let remap = |out_w: usize, out_h: usize, src: &dyn Fn(usize, usize) -> (usize, usize)| {
        let mut out = Vec::with_capacity(out_w * out_h * ch);
        for y in 0..out_h {
            for x in 0..out_w {
                let (sx, sy) = src(x, y);
                for c in 0..ch {
                    out.push(img.get(sx, sy, c));
                }
            }
        }
        ImageBuffer::from_reals(out_w, out_h, ch, img.domain(), &out)
    };
    match *spec {
        AugmentSpec::FlipH => {
            let out = remap(w, h, &|x, y| (w - 1 - x, y))?;
            let b = boxes
                .iter()
                .map(|b| NormBox {
                    cx: 1.0 - b.cx,
                    ..*b
                })
                .collect();
            Ok((out, b))
        }
        AugmentSpec::FlipV => {
            let out = remap(w, h, &|x, y| (x, h - 1 - y))?;
            let b = boxes
                .iter()
                .map(|b| NormBox {
                    cy: 1.0 - b.cy,
                    ..*b
                })
                .collect();
            Ok((out, b))
        }
        AugmentSpec::Rotate90Cw => {
            // Output is h x w; output (x, y) comes from source (y, h-1-x).
            let out = remap(h, w, &|x, y| (y, h - 1 - x))?;
            let b = boxes
                .iter()
                .map(|b| NormBox {
                    cx: 1.0 - b.cy,
                    cy: b.cx,
                    w: b.h,
                    h: b.w,
                })
                .collect();
            Ok((out, b))
        }
        AugmentSpec::BrightnessContrast { alpha, beta } => {
            let vals: Vec<f64> = img.to_reals().iter().map(|v| alpha * v + beta).collect();
            let out = ImageBuffer::from_reals(w, h, ch, img.domain(), &vals)?;
            Ok((out, boxes.to_vec()))
        }
        AugmentSpec::Scale { factor } => {
            let nw = ((w as f64 * factor).round() as usize).max(1);
            let nh = ((h as f64 * factor).round() as usize).max(1);
            Ok((resize_bilinear(img, nw, nh)?, boxes.to_vec()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_image(w: usize, h: usize) -> ImageBuffer {
        let data = (0..w * h * 3).map(|i| ((i * 31 + 7) % 256) as u8).collect();
        ImageBuffer::from_bytes(w, h, 3, data).unwrap()
    }

    #[test]
    fn flip_h_is_involution() {
        let img = sample_image(7, 5);
        let boxes = vec![NormBox::new(0.2, 0.3, 0.1, 0.2).unwrap()];
        let (a, ba) = augment(&img, &boxes, &AugmentSpec::FlipH).unwrap();
        assert!((ba[0].cx - 0.8).abs() < 1e-15);
        let (b, bb) = augment(&a, &ba, &AugmentSpec::FlipH).unwrap();
        assert_eq!(b, img);
        assert!((bb[0].cx - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rotate_box_example() {
        let img = sample_image(8, 4);
        let boxes = vec![NormBox::new(0.25, 0.5, 0.1, 0.2).unwrap()];
        let (out, b) = augment(&img, &boxes, &AugmentSpec::Rotate90Cw).unwrap();
        assert_eq!((out.width(), out.height()), (4, 8));
        assert_eq!(
            b[0],
            NormBox {
                cx: 0.5,
                cy: 0.25,
                w: 0.2,
                h: 0.1
            }
        );
        // top-left source pixel ends up in the top-right corner
        assert_eq!(out.get(3, 0, 0), img.get(0, 0, 0));
        assert_eq!(out.get(0, 0, 1), img.get(0, 3, 1));
    }

    #[test]
    fn rotating_four_times_is_identity() {
        let img = sample_image(6, 3);
        let mut cur = img.clone();
        for _ in 0..4 {
            cur = augment(&cur, &[], &AugmentSpec::Rotate90Cw).unwrap().0;
        }
        assert_eq!(cur, img);
    }

    #[test]
    fn neutral_brightness_is_identity() {
        let img = sample_image(5, 5);
        let spec = AugmentSpec::BrightnessContrast {
            alpha: 1.0,
            beta: 0.0,
        };
        assert_eq!(augment(&img, &[], &spec).unwrap().0, img);
    }

    #[test]
    fn brightness_clamps() {
        let img = ImageBuffer::from_bytes(2, 1, 1, vec![100, 250]).unwrap();
        let spec = AugmentSpec::BrightnessContrast {
            alpha: 1.5,
            beta: 10.0,
        };
        assert_eq!(
            augment(&img, &[], &spec).unwrap().0.as_bytes().unwrap(),
            &[160, 255]
        );
    }

    #[test]
    fn scale_resizes_and_keeps_boxes() {
        let img = sample_image(10, 6);
        let boxes = vec![NormBox::new(0.5, 0.5, 0.4, 0.4).unwrap()];
        let (out, b) = augment(&img, &boxes, &AugmentSpec::Scale { factor: 0.5 }).unwrap();
        assert_eq!((out.width(), out.height()), (5, 3));
        assert_eq!(b, boxes);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let img = sample_image(2, 2);
        for spec in [
            AugmentSpec::Scale { factor: 0.0 },
            AugmentSpec::BrightnessContrast {
                alpha: -1.0,
                beta: 0.0,
            },
        ] {
            assert!(matches!(
                augment(&img, &[], &spec),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn parse_cli_form() {
        assert_eq!("flip_v".parse::<AugmentSpec>().unwrap(), AugmentSpec::FlipV);
        assert_eq!(
            "brightness_contrast:1.2:-5".parse::<AugmentSpec>().unwrap(),
            AugmentSpec::BrightnessContrast {
                alpha: 1.2,
                beta: -5.0
            }
        );
        assert!("scale".parse::<AugmentSpec>().is_err());
        assert!("rotate45".parse::<AugmentSpec>().is_err());
        let s = AugmentSpec::Scale { factor: 0.75 };
        assert_eq!(s.to_string().parse::<AugmentSpec>().unwrap(), s);
    }

    proptest! {
        #[test]
        fn geometric_ops_preserve_box_area(
            cx in 0.0..=1.0f64, cy in 0.0..=1.0f64, w in 1e-3..=1.0f64, h in 1e-3..=1.0f64,
            which in 0usize..3,
        ) {
            let spec = [AugmentSpec::FlipH, AugmentSpec::FlipV, AugmentSpec::Rotate90Cw][which];
            let b = NormBox { cx, cy, w, h };
            let (_, out) = augment(&sample_image(3, 2), &[b], &spec).unwrap();
            prop_assert_eq!(out[0].w * out[0].h, b.w * b.h);
            prop_assert!(out[0].is_valid());
        }
    }
}
