//! Seeded inputs for the benchmarks.

use cardex_core::metrics::ImageEval;
use cardex_core::synth::demo_scene;
use cardex_core::{Detection, GroundTruth, ImageBuffer, NormBox, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The front demo scene used by the end-to-end fixtures.
pub fn scene() -> ImageBuffer {
    demo_scene(Side::Front).expect("demo scene renders")
}

/// `n` images, each with about ten truths and fifteen scored detections
/// of one category.
pub fn eval_images(n: usize, seed: u64) -> Vec<ImageEval> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_box = |rng: &mut ChaCha8Rng| {
        NormBox::new(
            rng.random_range(0.2..0.8),
            rng.random_range(0.2..0.8),
            rng.random_range(0.05..0.3),
            rng.random_range(0.05..0.3),
        )
        .expect("box inside the unit square")
    };
    (0..n)
        .map(|i| {
            let truths: Vec<GroundTruth> = (0..10)
                .map(|_| GroundTruth {
                    category: 0,
                    bbox: random_box(&mut rng),
                })
                .collect();
            let detections = (0..15)
                .map(|k| Detection {
                    category: 0,
                    confidence: rng.random_range(0.0..1.0),
                    bbox: truths
                        .get(k)
                        .map_or_else(|| random_box(&mut rng), |t| t.bbox),
                })
                .collect();
            ImageEval {
                image: format!("img_{i}"),
                detections,
                truths,
            }
        })
        .collect()
}

/// Pairs of mixed-script strings of the given length.
pub fn text_pairs(n: usize, len: usize, seed: u64) -> Vec<(String, String)> {
    const CHARS: &[char] = &['a', 'k', 's', 'l', 'i', 'क', 'ा', 'ठ', 'म', 'ड', 'ौ', 'ं'];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let word = |rng: &mut ChaCha8Rng| -> String {
        (0..len)
            .map(|_| CHARS[rng.random_range(0..CHARS.len())])
            .collect()
    };
    (0..n).map(|_| (word(&mut rng), word(&mut rng))).collect()
}
