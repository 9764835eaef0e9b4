//! Detection evaluation: class-wise NMS, greedy matching, all-point
//! interpolated AP, and mAP at IoU 0.5 and averaged over 0.50:0.05:0.95.

use std::collections::BTreeMap;

use crate::boxgeom::{iou, BBox};
use crate::error::{domain, Result};

/// Class names in id order used when no class map is supplied.
pub const DEFAULT_CLASSES: [&str; 6] = ["trash", "twig", "nest", "kite", "bird", "balloon"];

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.25;
pub const DEFAULT_NMS_IOU: f64 = 0.45;

/// The ten IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: String,
    pub class_id: usize,
    pub score: f64,
    pub bbox: BBox,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, class_id: usize, score: f64, bbox: BBox) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(domain(format!("score {score} outside [0, 1]")));
        }
        Ok(Self {
            image_id: image_id.into(),
            class_id,
            score,
            bbox,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub class_id: usize,
    pub bbox: BBox,
}

impl GroundTruth {
    pub fn new(image_id: impl Into<String>, class_id: usize, bbox: BBox) -> Self {
        Self {
            image_id: image_id.into(),
            class_id,
            bbox,
        }
    }
}

/// Indices of `dets` by descending score; equal scores keep input order.
pub fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

/// Greedy class-wise non-maximum suppression.
///
/// Detections are visited by descending score; one is dropped when its IoU
/// with an already kept detection of the same image and class exceeds
/// `iou_thresh`. Survivors are returned in visiting order.
pub fn nms(dets: &[Detection], iou_thresh: f64) -> Vec<Detection> {
    let mut kept_by_group: BTreeMap<(&str, usize), Vec<BBox>> = BTreeMap::new();
    let mut out = Vec::new();
    for i in score_order(dets) {
        let d = &dets[i];
        let kept = kept_by_group.entry((d.image_id.as_str(), d.class_id)).or_default();
        if kept.iter().all(|k| iou(k, &d.bbox) <= iou_thresh) {
            kept.push(d.bbox);
            out.push(d.clone());
        }
    }
    out
}

/// Outcome of matching detections to ground truth at one IoU threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Indices into the detection slice, by descending score.
    pub order: Vec<usize>,
    /// `true` for a true positive, aligned with `order`.
    pub is_tp: Vec<bool>,
    /// Ground-truth boxes left unmatched.
    pub false_negatives: usize,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.is_tp.iter().filter(|&&t| t).count()
    }

    pub fn false_positives(&self) -> usize {
        self.is_tp.len() - self.true_positives()
    }
}

/// One-to-one greedy matching within each (image, class) group.
///
/// In score order each detection takes the unmatched ground truth of highest
/// IoU (lowest index on ties) if that IoU is at least `iou_thresh`.
pub fn match_detections(dets: &[Detection], gts: &[GroundTruth], iou_thresh: f64) -> MatchResult {
    let mut groups: BTreeMap<(&str, usize), Vec<usize>> = BTreeMap::new();
    for (j, g) in gts.iter().enumerate() {
        groups.entry((g.image_id.as_str(), g.class_id)).or_default().push(j);
    }
    let mut matched = vec![false; gts.len()];
    let order = score_order(dets);
    let mut is_tp = Vec::with_capacity(order.len());
    for &i in &order {
        let d = &dets[i];
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = groups.get(&(d.image_id.as_str(), d.class_id)) {
            for &j in candidates {
                if matched[j] {
                    continue;
                }
                let v = iou(&d.bbox, &gts[j].bbox);
                if best.map_or(true, |(_, b)| v > b) {
                    best = Some((j, v));
                }
            }
        }
        match best {
            Some((j, v)) if v >= iou_thresh => {
                matched[j] = true;
                is_tp.push(true);
            }
            _ => is_tp.push(false),
        }
    }
    MatchResult {
        order,
        is_tp,
        false_negatives: matched.iter().filter(|&&m| !m).count(),
    }
}

/// Area under the monotone precision envelope (all-point interpolation).
///
/// `flags` are true-positive markers ordered by descending score. Returns 0
/// when there is no ground truth.
pub fn average_precision(flags: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for (k, &f) in flags.iter().enumerate() {
        if f {
            tp += 1;
        }
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    // Envelope: running max from the right.
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..flags.len() {
        if recall[k] > prev_recall {
            ap += (recall[k] - prev_recall) * precision[k];
            prev_recall = recall[k];
        }
    }
    ap
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub class_names: Vec<String>,
    /// Detections scoring at least this count toward precision and recall.
    pub conf_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            class_names: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
            conf_threshold: DEFAULT_CONF_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class_id: usize,
    pub name: String,
    pub n_gt: usize,
    /// AP at each of the ten thresholds; `None` when the class has no ground truth.
    pub ap: Option<[f64; 10]>,
    /// Counts at the confidence threshold and IoU 0.5.
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ClassReport {
    pub fn ap50(&self) -> Option<f64> {
        self.ap.map(|a| a[0])
    }

    pub fn ap5095(&self) -> Option<f64> {
        self.ap.map(|a| a.iter().sum::<f64>() / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_class: Vec<ClassReport>,
    /// `None` when no class has ground truth.
    pub map50: Option<f64>,
    pub map5095: Option<f64>,
    /// Pooled over classes at the confidence threshold; 0 with no detections.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub conf_threshold: f64,
}

/// Evaluates detections against ground truth.
///
/// AP uses every detection; precision, recall and the TP/FP/FN counts use the
/// detections scoring at least `conf_threshold`, matched at IoU 0.5. Classes
/// without ground truth are left out of the mAP means.
pub fn evaluate(dets: &[Detection], gts: &[GroundTruth], cfg: &EvalConfig) -> Result<EvalReport> {
    let n_classes = cfg.class_names.len();
    if let Some(d) = dets.iter().find(|d| d.class_id >= n_classes) {
        return Err(domain(format!("detection class {} >= {n_classes}", d.class_id)));
    }
    if let Some(g) = gts.iter().find(|g| g.class_id >= n_classes) {
        return Err(domain(format!("ground-truth class {} >= {n_classes}", g.class_id)));
    }
    let thresholds = iou_thresholds();

    let mut per_class = Vec::with_capacity(n_classes);
    for (class_id, name) in cfg.class_names.iter().enumerate() {
        let cd: Vec<Detection> = dets.iter().filter(|d| d.class_id == class_id).cloned().collect();
        let cg: Vec<GroundTruth> = gts.iter().filter(|g| g.class_id == class_id).cloned().collect();
        let n_gt = cg.len();

        let ap = (n_gt > 0).then(|| {
            thresholds.map(|t| average_precision(&match_detections(&cd, &cg, t).is_tp, n_gt))
        });

        let confident: Vec<Detection> =
            cd.into_iter().filter(|d| d.score >= cfg.conf_threshold).collect();
        let m = match_detections(&confident, &cg, thresholds[0]);
        per_class.push(ClassReport {
            class_id,
            name: name.clone(),
            n_gt,
            ap,
            tp: m.true_positives(),
            fp: m.false_positives(),
            fn_: m.false_negatives,
        });
    }

    let scored: Vec<&ClassReport> = per_class.iter().filter(|c| c.ap.is_some()).collect();
    let mean = |f: &dyn Fn(&ClassReport) -> f64| {
        (!scored.is_empty()).then(|| scored.iter().map(|c| f(c)).sum::<f64>() / scored.len() as f64)
    };
    let per_threshold: Vec<Option<f64>> = (0..thresholds.len())
        .map(|t| mean(&|c| c.ap.map_or(0.0, |a| a[t])))
        .collect();
    let map50 = per_threshold[0];
    let map5095 = map50.map(|_| per_threshold.iter().flatten().sum::<f64>() / thresholds.len() as f64);

    let tp: usize = per_class.iter().map(|c| c.tp).sum();
    let fp: usize = per_class.iter().map(|c| c.fp).sum();
    let fn_: usize = per_class.iter().map(|c| c.fn_).sum();
    let recall = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
    let precision = recall.map(|_| if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 });

    Ok(EvalReport {
        per_class,
        map50,
        map5095,
        precision,
        recall,
        tp,
        fp,
        fn_,
        conf_threshold: cfg.conf_threshold,
    })
}
