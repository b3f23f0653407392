//! YOLO label files, dataset configs and deterministic train/val splits.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::types::{CategorySchema, NormBox};

/// Parses `cat cx cy w h` lines. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_yolo_label(text: &str, schema: &CategorySchema) -> Result<Vec<(usize, NormBox)>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != 5 {
            return Err(Error::parse(
                lineno,
                format!("expected 5 fields, found {}", tokens.len()),
            ));
        }
        let category: usize = tokens[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("bad category {:?}", tokens[0])))?;
        if !schema.contains(category) {
            return Err(Error::parse(
                lineno,
                format!("category {category} outside schema of {}", schema.len()),
            ));
        }
        let mut v = [0.0; 4];
        for (slot, tok) in v.iter_mut().zip(&tokens[1..]) {
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::parse(lineno, format!("bad coordinate {tok:?}")))?;
        }
        let b = NormBox::new(v[0], v[1], v[2], v[3])
            .map_err(|e| Error::parse(lineno, e.to_string()))?;
        entries.push((category, b));
    }
    Ok(entries)
}

/// One line per entry with 6-decimal coordinates, joined by newlines.
pub fn serialize_yolo_label(entries: &[(usize, NormBox)]) -> String {
    entries
        .iter()
        .map(|(c, b)| format!("{c} {:.6} {:.6} {:.6} {:.6}", b.cx, b.cy, b.w, b.h))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The training data config: where the splits live and what the classes are.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub train_path: String,
    pub val_path: String,
    pub names: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NamesField {
    List(Vec<String>),
    Indexed(BTreeMap<usize, String>),
}

#[derive(Deserialize)]
struct RawConfig {
    train: Option<String>,
    val: Option<String>,
    names: Option<NamesField>,
}

/// Reads `train`, `val` and `names` from a YAML document; other keys are
/// ignored. `names` may be a list or an index-keyed map.
pub fn parse_dataset_config(text: &str) -> Result<DatasetConfig> {
    let raw: RawConfig =
        serde_yaml::from_str(text).map_err(|e| Error::Config(format!("dataset yaml: {e}")))?;
    let missing = |k: &str| Error::Config(format!("dataset yaml is missing `{k}`"));
    let names = match raw.names.ok_or_else(|| missing("names"))? {
        NamesField::List(v) => v,
        NamesField::Indexed(m) => {
            if m.keys().copied().ne(0..m.len()) {
                return Err(Error::Config("names map must use keys 0..n".into()));
            }
            m.into_values().collect()
        }
    };
    if names.is_empty() {
        return Err(Error::Config("dataset yaml has empty `names`".into()));
    }
    for (i, n) in names.iter().enumerate() {
        if n.trim().is_empty() || names[..i].contains(n) {
            return Err(Error::Config(format!("bad or duplicate class name {n:?}")));
        }
    }
    Ok(DatasetConfig {
        train_path: raw.train.ok_or_else(|| missing("train"))?,
        val_path: raw.val.ok_or_else(|| missing("val"))?,
        names,
    })
}

pub fn serialize_dataset_config(cfg: &DatasetConfig) -> String {
    let mut out = format!(
        "train: {}\nval: {}\nnc: {}\nnames:\n",
        yaml_scalar(&cfg.train_path),
        yaml_scalar(&cfg.val_path),
        cfg.names.len()
    );
    for n in &cfg.names {
        out.push_str(&format!("  - {}\n", yaml_scalar(n)));
    }
    out
}

fn yaml_scalar(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_ratio: f64,
}

impl SplitSpec {
    pub fn new(seed: u64, train_ratio: f64) -> Result<Self> {
        if !(train_ratio > 0.0 && train_ratio < 1.0) {
            return Err(Error::invalid(format!(
                "train ratio {train_ratio} must lie strictly between 0 and 1"
            )));
        }
        Ok(SplitSpec { seed, train_ratio })
    }
}

/// An image with its optional label file; `stratum` is the source subfolder
/// whose proportions the split preserves.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DatasetItem {
    pub stratum: String,
    pub image: PathBuf,
    pub label: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Split {
    pub train: Vec<DatasetItem>,
    pub val: Vec<DatasetItem>,
    pub warnings: Vec<String>,
    /// `(stratum, train count, val count)` in stratum order.
    pub strata: Vec<(String, usize, usize)>,
}

/// Stratified seeded split. Items are sorted first so the result depends
/// only on the item set, the seed and the ratio. Each stratum is shuffled
/// with ChaCha8 seeded from `seed` and the stratum index, then cut at
/// `round(ratio * n)`.
pub fn split_dataset(items: &[DatasetItem], spec: &SplitSpec) -> Result<Split> {
    SplitSpec::new(spec.seed, spec.train_ratio)?;
    if items.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    let mut strata: BTreeMap<&str, Vec<&DatasetItem>> = BTreeMap::new();
    for item in items {
        strata.entry(item.stratum.as_str()).or_default().push(item);
    }
    let mut out = Split::default();
    for (idx, (name, mut members)) in strata.into_iter().enumerate() {
        members.sort();
        if members.len() < 2 {
            out.warnings.push(format!(
                "stratum {name:?} has {} item(s); placed entirely in train",
                members.len()
            ));
            out.strata.push((name.to_string(), members.len(), 0));
            out.train.extend(members.into_iter().cloned());
            continue;
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(spec.seed ^ (idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        members.shuffle(&mut rng);
        let n_train = (spec.train_ratio * members.len() as f64).round() as usize;
        let (train, val) = members.split_at(n_train.min(members.len()));
        out.strata.push((name.to_string(), train.len(), val.len()));
        out.train.extend(train.iter().map(|&i| i.clone()));
        out.val.extend(val.iter().map(|&i| i.clone()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Side;
    use proptest::prelude::*;

    fn schema(n: usize) -> CategorySchema {
        CategorySchema::new(Side::Front, (0..n).map(|i| format!("c{i}"))).unwrap()
    }

    fn items(strata: &[(&str, usize)]) -> Vec<DatasetItem> {
        strata
            .iter()
            .flat_map(|&(s, n)| {
                (0..n).map(move |i| DatasetItem {
                    stratum: s.to_string(),
                    image: PathBuf::from(format!("{s}/img_{i:04}.png")),
                    label: Some(PathBuf::from(format!("{s}/img_{i:04}.txt"))),
                })
            })
            .collect()
    }

    #[test]
    fn parse_single_line() {
        let e = parse_yolo_label("0 0.5 0.5 0.2 0.1", &schema(3)).unwrap();
        assert_eq!(
            e,
            vec![(
                0,
                NormBox {
                    cx: 0.5,
                    cy: 0.5,
                    w: 0.2,
                    h: 0.1
                }
            )]
        );
        assert!(parse_yolo_label("", &schema(3)).unwrap().is_empty());
        assert_eq!(
            parse_yolo_label("\n  \n1 0.1 0.1 0.1 0.1\n", &schema(3))
                .unwrap()
                .len(),
            1
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let s = schema(3);
        let line = |text: &str| match parse_yolo_label(text, &s) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("expected parse error, got {other:?}"),
        };
        assert_eq!(line("7 0.5 0.5 0.2 0.1"), 1);
        assert_eq!(line("0 0.5 0.5 0.2 0.1\n0 0.5 0.5 0.2"), 2);
        assert_eq!(line("0 0.5 0.5 0.2 0.1\n\n0 x 0.5 0.2 0.1"), 3);
        assert_eq!(line("0 1.5 0.5 0.2 0.1"), 1);
        assert_eq!(line("0 0.5 0.5 0.0 0.1"), 1);
        assert_eq!(line("-1 0.5 0.5 0.2 0.1"), 1);
        assert_eq!(line("0 nan 0.5 0.2 0.1"), 1);
    }

    #[test]
    fn serialize_format() {
        assert_eq!(serialize_yolo_label(&[]), "");
        let e = [(
            0,
            NormBox {
                cx: 0.5,
                cy: 0.5,
                w: 0.2,
                h: 0.1,
            },
        )];
        assert_eq!(
            serialize_yolo_label(&e),
            "0 0.500000 0.500000 0.200000 0.100000"
        );
    }

    #[test]
    fn dataset_config_parsing() {
        let cfg =
            parse_dataset_config("train: data/train\nval: data/val\nnames: [name, dob]\n").unwrap();
        assert_eq!(cfg.train_path, "data/train");
        assert_eq!(cfg.names, vec!["name", "dob"]);

        let extra =
            "# front model\npath: ../cards\ntrain: t\nval: v\nnc: 2\nnames:\n  0: name\n  1: dob\n";
        assert_eq!(
            parse_dataset_config(extra).unwrap().names,
            vec!["name", "dob"]
        );

        for bad in [
            "train: t\nval: v\nnames: [a, a]\n",
            "train: t\nval: v\nnames: []\n",
            "val: v\nnames: [a]\n",
            "train: t\nnames: [a]\n",
            "train: t\nval: v\n",
        ] {
            assert!(
                matches!(parse_dataset_config(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn dataset_config_round_trip() {
        let cfg = DatasetConfig {
            train_path: "out/train".into(),
            val_path: "out/val: x".into(),
            names: vec!["नाम".into(), "date_of_birth".into()],
        };
        assert_eq!(
            parse_dataset_config(&serialize_dataset_config(&cfg)).unwrap(),
            cfg
        );
    }

    #[test]
    fn split_sizes() {
        let spec = SplitSpec::new(7, 0.84).unwrap();
        let s = split_dataset(&items(&[("cards", 250)]), &spec).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (210, 40));

        let s = split_dataset(&items(&[("a", 2)]), &SplitSpec::new(1, 0.5).unwrap()).unwrap();
        assert_eq!((s.train.len(), s.val.len()), (1, 1));

        let s = split_dataset(
            &items(&[("front", 100), ("back", 100)]),
            &SplitSpec::new(3, 0.8).unwrap(),
        )
        .unwrap();
        assert_eq!(
            s.strata,
            vec![("back".into(), 80, 20), ("front".into(), 80, 20)]
        );
    }

    #[test]
    fn tiny_stratum_goes_to_train_with_warning() {
        let s = split_dataset(
            &items(&[("big", 10), ("lonely", 1)]),
            &SplitSpec::new(0, 0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.train.iter().any(|i| i.stratum == "lonely"));
        assert_eq!(s.train.len(), 6);
    }

    #[test]
    fn bad_spec_rejected() {
        assert!(SplitSpec::new(0, 1.0).is_err());
        assert!(SplitSpec::new(0, 0.0).is_err());
        let spec = SplitSpec {
            seed: 0,
            train_ratio: 1.0,
        };
        assert!(split_dataset(&items(&[("a", 3)]), &spec).is_err());
        assert!(split_dataset(&[], &SplitSpec::new(0, 0.5).unwrap()).is_err());
    }

    #[test]
    fn split_ignores_input_order() {
        let mut it = items(&[("x", 30), ("y", 11)]);
        let spec = SplitSpec::new(99, 0.7).unwrap();
        let a = split_dataset(&it, &spec).unwrap();
        it.reverse();
        assert_eq!(split_dataset(&it, &spec).unwrap(), a);
    }

    fn entry() -> impl Strategy<Value = (usize, NormBox)> {
        (
            0usize..5,
            0.0..=1.0f64,
            0.0..=1.0f64,
            1e-3..=1.0f64,
            1e-3..=1.0f64,
        )
            .prop_map(|(c, cx, cy, w, h)| (c, NormBox { cx, cy, w, h }))
    }

    proptest! {
        #[test]
        fn label_round_trip(entries in proptest::collection::vec(entry(), 0..40)) {
            let parsed = parse_yolo_label(&serialize_yolo_label(&entries), &schema(5)).unwrap();
            prop_assert_eq!(parsed.len(), entries.len());
            for ((c0, b0), (c1, b1)) in entries.iter().zip(&parsed) {
                prop_assert_eq!(c0, c1);
                for (x, y) in [(b0.cx, b1.cx), (b0.cy, b1.cy), (b0.w, b1.w), (b0.h, b1.h)] {
                    prop_assert!((x - y).abs() <= 1e-6);
                }
            }
        }

        #[test]
        fn split_is_a_reproducible_partition(
            sizes in proptest::collection::vec(1usize..40, 1..4),
            seed in any::<u64>(),
            ratio in 0.05..0.95f64,
        ) {
            let strata: Vec<(String, usize)> =
                sizes.iter().enumerate().map(|(i, &n)| (format!("s{i}"), n)).collect();
            let refs: Vec<(&str, usize)> = strata.iter().map(|(s, n)| (s.as_str(), *n)).collect();
            let all = items(&refs);
            let spec = SplitSpec::new(seed, ratio).unwrap();
            let s = split_dataset(&all, &spec).unwrap();
            let mut joined: Vec<_> = s.train.iter().chain(&s.val).cloned().collect();
            joined.sort();
            let mut expected = all.clone();
            expected.sort();
            prop_assert_eq!(joined, expected);
            prop_assert_eq!(split_dataset(&all, &spec).unwrap(), s);
        }
    }
}
