use std::collections::BTreeSet;
use std::path::PathBuf;

use cardex_core::annotation::{
    parse_dataset_config, parse_yolo_label, serialize_dataset_config, serialize_yolo_label,
    split_dataset, DatasetConfig, DatasetItem, SplitSpec,
};
use cardex_core::types::{CategorySchema, NormBox, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn items(n: usize, strata: usize) -> Vec<DatasetItem> {
    (0..n)
        .map(|i| DatasetItem {
            stratum: format!("s{}", i % strata),
            image: PathBuf::from(format!("img_{i:04}.jpg")),
            label: Some(PathBuf::from(format!("img_{i:04}.txt"))),
        })
        .collect()
}

#[test]
fn split_250_at_084_gives_210_40() {
    let all = items(250, 1);
    for seed in [0, 1, 42, 2024] {
        let spec = SplitSpec::new(seed, 0.84).unwrap();
        let a = split_dataset(&all, &spec).unwrap();
        assert_eq!((a.train.len(), a.val.len()), (210, 40));
        let mut rev = all.clone();
        rev.reverse();
        let b = split_dataset(&rev, &spec).unwrap();
        assert_eq!(a, b, "seed {seed}");
        let train: BTreeSet<_> = a.train.iter().collect();
        assert!(a.val.iter().all(|v| !train.contains(v)));
        assert_eq!(train.len() + a.val.len(), 250);
    }
    let s0 = split_dataset(&all, &SplitSpec::new(0, 0.84).unwrap()).unwrap();
    let s1 = split_dataset(&all, &SplitSpec::new(1, 0.84).unwrap()).unwrap();
    assert_ne!(s0.val, s1.val);
}

#[test]
fn split_is_stratified() {
    let all = items(200, 2);
    let s = split_dataset(&all, &SplitSpec::new(5, 0.8).unwrap()).unwrap();
    assert_eq!(s.strata, vec![("s0".into(), 80, 20), ("s1".into(), 80, 20)]);
}

#[test]
fn yolo_round_trip_on_random_entries() {
    let schema = CategorySchema::new(Side::Front, (0..6).map(|i| format!("c{i}"))).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let entries: Vec<(usize, NormBox)> = (0..1000)
        .map(|_| {
            let w: f64 = rng.random_range(0.001..=1.0);
            let h: f64 = rng.random_range(0.001..=1.0);
            let cx = rng.random_range(w / 2.0..=1.0 - w / 2.0);
            let cy = rng.random_range(h / 2.0..=1.0 - h / 2.0);
            (rng.random_range(0..6), NormBox { cx, cy, w, h })
        })
        .collect();
    let text = serialize_yolo_label(&entries);
    let back = parse_yolo_label(&text, &schema).unwrap();
    assert_eq!(back.len(), entries.len());
    for ((ca, a), (cb, b)) in entries.iter().zip(&back) {
        assert_eq!(ca, cb);
        for (x, y) in <[f64; 4]>::from(*a).iter().zip(<[f64; 4]>::from(*b)) {
            assert!((x - y).abs() <= 1e-6, "{a:?} vs {b:?}");
        }
    }
    assert_eq!(serialize_yolo_label(&back), text);
}

#[test]
fn yolo_rejects_unknown_category_and_bad_boxes() {
    let schema = CategorySchema::new(Side::Back, ["a", "b"]).unwrap();
    assert!(parse_yolo_label("2 0.5 0.5 0.1 0.1\n", &schema).is_err());
    assert!(parse_yolo_label("0 0.5 0.5 1.5 0.1\n", &schema).is_err());
    assert!(parse_yolo_label("0 0.5 0.5 0.1\n", &schema).is_err());
    assert!(parse_yolo_label("\n\n", &schema).unwrap().is_empty());
}

#[test]
fn dataset_config_round_trip_tolerates_extra_keys() {
    let cfg = DatasetConfig {
        train_path: "data/train/images".into(),
        val_path: "data/val: images".into(),
        names: vec!["citizenship_number".into(), "full_name".into()],
    };
    let text = serialize_dataset_config(&cfg);
    assert_eq!(parse_dataset_config(&text).unwrap(), cfg);
    let extended = format!("{text}epochs: 100\naugment:\n  flip: true\n");
    assert_eq!(parse_dataset_config(&extended).unwrap(), cfg);
    assert!(parse_dataset_config("train: a\nnames: [x]\n").is_err());
}
