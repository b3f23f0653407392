//! Detection evaluation: IoU, greedy matching, precision/recall/F1, support,
//! confusion matrices, PR and F1-confidence curves, AP and mAP.
//!
//! Matching is greedy in descending confidence: each detection claims the
//! highest-IoU unclaimed truth of its own category whose IoU reaches the
//! threshold. AP uses all-points interpolation over a precision envelope
//! made non-increasing in recall; detections with equal confidence form a
//! single operating point, so AP depends only on the confidence ranking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{norm_to_abs, AbsBox, CategorySchema, Detection, GroundTruth, NormBox};

pub fn iou(a: &AbsBox, b: &AbsBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// IoU of two normalized boxes (IoU is invariant under per-axis scaling).
pub fn iou_norm(a: &NormBox, b: &NormBox) -> f64 {
    iou(&norm_to_abs(*a, 1, 1), &norm_to_abs(*b, 1, 1))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `(detection index, truth index, iou)`.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

/// Detection indices ordered by descending confidence, ties by index.
fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then(a.cmp(&b))
    });
    order
}

pub fn match_detections(
    dets: &[Detection],
    truths: &[GroundTruth],
    iou_thresh: f64,
) -> MatchResult {
    let mut claimed = vec![false; truths.len()];
    let mut result = MatchResult::default();
    for d in confidence_order(dets) {
        let det = &dets[d];
        let best = truths
            .iter()
            .enumerate()
            .filter(|(t, gt)| !claimed[*t] && gt.category == det.category)
            .map(|(t, gt)| (t, iou_norm(&det.bbox, &gt.bbox)))
            .filter(|&(_, v)| v >= iou_thresh)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((t, v)) => {
                claimed[t] = true;
                result.pairs.push((d, t, v));
            }
            None => result.unmatched_detections.push(d),
        }
    }
    result.unmatched_detections.sort_unstable();
    result.unmatched_truths = (0..truths.len()).filter(|&t| !claimed[t]).collect();
    result
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Always 0 for detection; true negatives are not enumerable there.
    pub tn: u64,
}

impl std::ops::AddAssign for BinaryCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

pub fn binary_counts(m: &MatchResult, n_dets: usize, n_truths: usize) -> BinaryCounts {
    let tp = m.pairs.len() as u64;
    BinaryCounts {
        tp,
        fp: n_dets as u64 - tp,
        fn_: n_truths as u64 - tp,
        tn: 0,
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision(c: &BinaryCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

pub fn recall(c: &BinaryCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

pub fn f1(c: &BinaryCounts) -> f64 {
    f1_from(precision(c), recall(c))
}

fn f1_from(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// `(tp + tn) / total`. Degenerate for detection because `tn` is 0.
pub fn accuracy(c: &BinaryCounts) -> f64 {
    ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn_)
}

/// Per-category truth counts; every schema category is present.
pub fn support(truths: &[GroundTruth], schema: &CategorySchema) -> BTreeMap<usize, usize> {
    let mut out: BTreeMap<usize, usize> = (0..schema.len()).map(|c| (c, 0)).collect();
    for t in truths {
        if let Some(n) = out.get_mut(&t.category) {
            *n += 1;
        }
    }
    out
}

/// Detections and truths of one image: one line of the JSON-lines dump.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub image: String,
    #[serde(default)]
    pub detections: Vec<Detection>,
    #[serde(default)]
    pub truths: Vec<GroundTruth>,
}

impl ImageEval {
    pub fn new(detections: Vec<Detection>, truths: Vec<GroundTruth>) -> Self {
        ImageEval {
            image: String::new(),
            detections,
            truths,
        }
    }

    fn restricted(&self, category: usize, min_conf: f64) -> ImageEval {
        ImageEval {
            image: self.image.clone(),
            detections: self
                .detections
                .iter()
                .filter(|d| d.category == category && d.confidence >= min_conf)
                .copied()
                .collect(),
            truths: self
                .truths
                .iter()
                .filter(|t| t.category == category)
                .copied()
                .collect(),
        }
    }
}

/// Parses a JSON-lines detection dump, validating boxes, confidences and
/// (when given) categories. Errors cite the 1-based line.
pub fn parse_detection_dump(text: &str, schema: Option<&CategorySchema>) -> Result<Vec<ImageEval>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ImageEval =
            serde_json::from_str(line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        for d in &rec.detections {
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(Error::parse(
                    lineno,
                    format!("confidence {} outside [0, 1]", d.confidence),
                ));
            }
        }
        let cats = rec.detections.iter().map(|d| (d.category, d.bbox));
        for (c, b) in cats.chain(rec.truths.iter().map(|t| (t.category, t.bbox))) {
            if !b.is_valid() {
                return Err(Error::parse(
                    lineno,
                    format!("invalid box {:?}", <[f64; 4]>::from(b)),
                ));
            }
            if let Some(s) = schema {
                if !s.contains(c) {
                    return Err(Error::parse(lineno, format!("category {c} outside schema")));
                }
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn serialize_detection_dump(images: &[ImageEval]) -> String {
    images
        .iter()
        .map(|r| serde_json::to_string(r).expect("dump serialization") + "\n")
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn counts_at(images: &[ImageEval], iou_thresh: f64, min_conf: f64) -> BinaryCounts {
    let mut total = BinaryCounts::default();
    for img in images {
        let dets: Vec<Detection> = img
            .detections
            .iter()
            .filter(|d| d.confidence >= min_conf)
            .copied()
            .collect();
        let m = match_detections(&dets, &img.truths, iou_thresh);
        total += binary_counts(&m, dets.len(), img.truths.len());
    }
    total
}

/// Precision/recall/F1 at each confidence threshold, keeping detections
/// with confidence `>= t`.
pub fn pr_f1_curves(
    images: &[ImageEval],
    iou_thresh: f64,
    thresholds: &[f64],
) -> Result<Vec<CurvePoint>> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("curve thresholds must be sorted ascending"));
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let c = counts_at(images, iou_thresh, t);
            CurvePoint {
                threshold: t,
                precision: precision(&c),
                recall: recall(&c),
                f1: f1(&c),
            }
        })
        .collect())
}

/// `0.00, 0.01, ..., 1.00`.
pub fn default_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// All-points AP for a single category across images. No truths gives 0.
pub fn average_precision(images: &[ImageEval], iou_thresh: f64) -> f64 {
    let n_truths: usize = images.iter().map(|i| i.truths.len()).sum();
    if n_truths == 0 {
        log::warn!("average precision requested with no ground truths; reporting 0");
        return 0.0;
    }
    // Label every detection TP/FP with per-image greedy matching.
    let mut scored: Vec<(f64, bool)> = Vec::new();
    for img in images {
        let m = match_detections(&img.detections, &img.truths, iou_thresh);
        let mut hit = vec![false; img.detections.len()];
        for &(d, _, _) in &m.pairs {
            hit[d] = true;
        }
        scored.extend(
            img.detections
                .iter()
                .zip(hit)
                .map(|(d, h)| (d.confidence, h)),
        );
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    // One operating point per distinct confidence.
    let mut points: Vec<(f64, f64)> = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let conf = scored[i].0;
        while i < scored.len() && scored[i].0 == conf {
            seen += 1;
            tp += usize::from(scored[i].1);
            i += 1;
        }
        points.push((tp as f64 / n_truths as f64, tp as f64 / seen as f64));
    }

    let mut envelope = 0.0f64;
    let mut area = 0.0;
    for k in (0..points.len()).rev() {
        envelope = envelope.max(points[k].1);
        let prev_recall = if k == 0 { 0.0 } else { points[k - 1].0 };
        area += (points[k].0 - prev_recall) * envelope;
    }
    area.clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    /// Detections below this confidence are excluded from the confusion
    /// matrix and the per-category precision/recall/F1 (not from AP).
    pub confidence_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            iou_threshold: 0.5,
            confidence_threshold: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: usize,
    pub ap: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub confidence_threshold: f64,
    pub per_category: BTreeMap<String, CategoryStats>,
    pub map50: f64,
    /// Row/column labels of `confusion`: the schema names then `background`.
    pub labels: Vec<String>,
    /// `confusion[truth][predicted]`; the last row holds unmatched
    /// detections and the last column unmatched truths.
    pub confusion: Vec<Vec<u64>>,
    pub overall: BinaryCounts,
    pub warnings: Vec<String>,
}

pub fn mean_average_precision(
    images: &[ImageEval],
    schema: &CategorySchema,
    opts: &EvalOptions,
) -> EvalReport {
    let k = schema.len();
    let mut warnings = Vec::new();
    let mut confusion = vec![vec![0u64; k + 1]; k + 1];
    let mut per_cat_counts = vec![BinaryCounts::default(); k];
    let mut overall = BinaryCounts::default();

    for img in images {
        let dets: Vec<Detection> = img
            .detections
            .iter()
            .filter(|d| d.category < k && d.confidence >= opts.confidence_threshold)
            .copied()
            .collect();
        let truths: Vec<GroundTruth> = img
            .truths
            .iter()
            .filter(|t| t.category < k)
            .copied()
            .collect();
        let outside = img.detections.iter().any(|d| d.category >= k)
            || img.truths.iter().any(|t| t.category >= k);
        if outside {
            warnings.push(format!(
                "{}: entries outside the schema were ignored",
                img.image
            ));
        }
        let m = match_detections(&dets, &truths, opts.iou_threshold);
        for &(d, _, _) in &m.pairs {
            let c = dets[d].category;
            confusion[c][c] += 1;
            per_cat_counts[c].tp += 1;
        }
        for &d in &m.unmatched_detections {
            let c = dets[d].category;
            confusion[k][c] += 1;
            per_cat_counts[c].fp += 1;
        }
        for &t in &m.unmatched_truths {
            let c = truths[t].category;
            confusion[c][k] += 1;
            per_cat_counts[c].fn_ += 1;
        }
        overall += binary_counts(&m, dets.len(), truths.len());
    }

    let all_truths: Vec<GroundTruth> = images
        .iter()
        .flat_map(|i| i.truths.iter().copied())
        .collect();
    let supports = support(&all_truths, schema);
    let mut per_category = BTreeMap::new();
    let mut ap_sum = 0.0;
    let mut ap_n = 0usize;
    for (c, name) in schema.names().iter().enumerate() {
        let restricted: Vec<ImageEval> = images.iter().map(|i| i.restricted(c, 0.0)).collect();
        let sup = supports[&c];
        let ap = if sup == 0 {
            warnings.push(format!(
                "category {name:?} has no ground truths; excluded from mAP"
            ));
            0.0
        } else {
            let ap = average_precision(&restricted, opts.iou_threshold);
            ap_sum += ap;
            ap_n += 1;
            ap
        };
        let counts = &per_cat_counts[c];
        per_category.insert(
            name.clone(),
            CategoryStats {
                category: c,
                ap,
                precision: precision(counts),
                recall: recall(counts),
                f1: f1(counts),
                support: sup,
            },
        );
    }
    let mut labels = schema.names().to_vec();
    labels.push("background".to_string());

    EvalReport {
        iou_threshold: opts.iou_threshold,
        confidence_threshold: opts.confidence_threshold,
        per_category,
        map50: if ap_n == 0 { 0.0 } else { ap_sum / ap_n as f64 },
        labels,
        confusion,
        overall,
        warnings,
    }
}

/// CSV table `category,threshold,precision,recall,f1` with one block per
/// category plus an `all` block.
pub fn curves_csv(
    images: &[ImageEval],
    schema: &CategorySchema,
    iou_thresh: f64,
    thresholds: &[f64],
) -> Result<String> {
    let mut out = String::from("category,threshold,precision,recall,f1\n");
    let mut emit = |label: &str, pts: Vec<CurvePoint>| {
        for p in pts {
            out.push_str(&format!(
                "{label},{:.2},{:.6},{:.6},{:.6}\n",
                p.threshold, p.precision, p.recall, p.f1
            ));
        }
    };
    for (c, name) in schema.names().iter().enumerate() {
        let restricted: Vec<ImageEval> = images.iter().map(|i| i.restricted(c, 0.0)).collect();
        emit(name, pr_f1_curves(&restricted, iou_thresh, thresholds)?);
    }
    emit("all", pr_f1_curves(images, iou_thresh, thresholds)?);
    Ok(out)
}
