//! AP at fixed tIoU thresholds and AR at fixed proposal budgets.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{iou, Modality, ScoredSegment, Segment, VideoAnnotation};
use crate::error::{Error, Result};
use crate::io::{load_annotations, load_predictions, PredictionRecord};
use crate::postprocess::proposal_order;

pub const AP_THRESHOLDS: [f64; 3] = [0.5, 0.75, 0.95];
pub const AR_BUDGETS: [usize; 5] = [100, 90, 50, 20, 10];

/// tIoU thresholds 0.50, 0.55, …, 0.95 used by AR.
pub fn ar_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

/// Predictions and ground truth of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoEval {
    pub video_id: String,
    pub predictions: Vec<ScoredSegment>,
    pub ground_truth: Vec<Segment>,
}

impl VideoEval {
    fn ranked(&self) -> Vec<ScoredSegment> {
        let mut p = self.predictions.clone();
        p.sort_by(proposal_order);
        p
    }
}

/// Greedy one-to-one matching. Predictions are visited in the given order
/// (expected: confidence descending); each takes the unmatched ground truth
/// with the highest IoU if it reaches `tiou`, ties going to the lower index.
pub fn match_predictions(preds: &[ScoredSegment], gts: &[Segment], tiou: f64) -> Vec<Option<usize>> {
    let mut taken = vec![false; gts.len()];
    preds
        .iter()
        .map(|p| {
            let seg = p.segment();
            let mut best: Option<(usize, f64)> = None;
            for (g, gt) in gts.iter().enumerate() {
                if taken[g] {
                    continue;
                }
                let o = iou(&seg, gt);
                if o >= tiou && best.map_or(true, |(_, b)| o > b) {
                    best = Some((g, o));
                }
            }
            best.map(|(g, _)| {
                taken[g] = true;
                g
            })
        })
        .collect()
}

fn total_gt(videos: &[VideoEval]) -> Result<usize> {
    let n: usize = videos.iter().map(|v| v.ground_truth.len()).sum();
    if n == 0 {
        return Err(Error::NoGroundTruth("no ground-truth segments"));
    }
    Ok(n)
}

/// Average precision at one tIoU, pooling predictions over all videos and
/// integrating the precision envelope at every recall step.
pub fn ap_at_tiou(videos: &[VideoEval], tiou: f64) -> Result<f64> {
    if !(tiou > 0.0 && tiou <= 1.0) {
        return Err(Error::InvalidParameter(format!("tIoU {tiou} outside (0, 1]")));
    }
    let n_gt = total_gt(videos)?;
    // (confidence, video, rank within video, is true positive)
    let mut pooled: Vec<(f64, usize, usize, bool)> = Vec::new();
    for (vi, v) in videos.iter().enumerate() {
        let ranked = v.ranked();
        for (ri, m) in match_predictions(&ranked, &v.ground_truth, tiou).into_iter().enumerate() {
            pooled.push((ranked[ri].confidence, vi, ri, m.is_some()));
        }
    }
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut precision = Vec::with_capacity(pooled.len());
    let mut recall = Vec::with_capacity(pooled.len());
    let mut tp = 0usize;
    for (i, p) in pooled.iter().enumerate() {
        tp += p.3 as usize;
        precision.push(tp as f64 / (i + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev) * p;
        prev = *r;
    }
    Ok(ap)
}

/// Recall with at most `k` proposals per video, averaged over `tious`.
pub fn ar_at_k(videos: &[VideoEval], k: usize, tious: &[f64]) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("AR budget must be at least 1".into()));
    }
    if tious.is_empty() {
        return Err(Error::InvalidParameter("AR needs at least one tIoU".into()));
    }
    let n_gt = total_gt(videos)?;
    let ranked: Vec<Vec<ScoredSegment>> =
        videos.iter().map(|v| v.ranked().into_iter().take(k).collect()).collect();
    let mut sum = 0.0;
    for &t in tious {
        let matched: usize = videos
            .iter()
            .zip(&ranked)
            .map(|(v, r)| match_predictions(r, &v.ground_truth, t).iter().filter(|m| m.is_some()).count())
            .sum();
        sum += matched as f64 / n_gt as f64;
    }
    Ok(sum / tious.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoDiagnostic {
    pub video_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Which ground-truth track was scored.
    pub modality: Modality,
    /// Keys like `"0.5"`.
    pub ap_at: BTreeMap<String, f64>,
    /// Keys are budgets.
    pub ar_at: BTreeMap<usize, f64>,
    pub videos: usize,
    pub ground_truth_segments: usize,
    pub per_video_diagnostics: Vec<VideoDiagnostic>,
}

impl EvalReport {
    /// Aligned two-column table with the usual row labels.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, f64)> = Vec::new();
        let mut aps: Vec<(&String, &f64)> = self.ap_at.iter().collect();
        aps.sort_by(|a, b| a.0.parse::<f64>().unwrap_or(0.0).total_cmp(&b.0.parse::<f64>().unwrap_or(0.0)));
        for (t, v) in aps {
            rows.push((format!("AP@{t}"), *v));
        }
        for (k, v) in self.ar_at.iter().rev() {
            rows.push((format!("AR@{k}"), *v));
        }
        let mut out = format!("{:<8} {}\n", "Metric", self.modality.as_str());
        for (name, v) in rows {
            out.push_str(&format!("{name:<8} {v:.4}\n"));
        }
        out
    }
}

/// Which metrics to compute.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub modality: Modality,
    pub ap_thresholds: Vec<f64>,
    pub ar_budgets: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { modality: Modality::Fused, ap_thresholds: AP_THRESHOLDS.to_vec(), ar_budgets: AR_BUDGETS.to_vec() }
    }
}

fn threshold_key(t: f64) -> String {
    format!("{t}")
}

/// Aligns predictions with annotations by video id and scores them.
///
/// Prediction ids without ground truth are an error. Ground-truth videos
/// without predictions are scored as fully missed and listed in the
/// diagnostics. With a per-modality option, only that modality's periods
/// count as ground truth; the prediction segments are used as given.
pub fn evaluate(preds: &[PredictionRecord], gts: &[VideoAnnotation], opts: &EvalOptions) -> Result<EvalReport> {
    let gt_index: HashMap<&str, usize> = gts.iter().enumerate().map(|(i, g)| (g.file_id.as_str(), i)).collect();
    let mut by_video: Vec<Vec<ScoredSegment>> = vec![Vec::new(); gts.len()];
    let mut seen = HashSet::new();
    let mut diags = Vec::new();
    for p in preds {
        let Some(&gi) = gt_index.get(p.video_id.as_str()) else {
            return Err(Error::IdMismatch(format!("prediction for unknown video '{}'", p.video_id)));
        };
        if !seen.insert(gi) {
            diags.push(VideoDiagnostic { video_id: p.video_id.clone(), message: "duplicate prediction record merged".into() });
        }
        by_video[gi].extend(p.segments.iter().copied());
    }
    let mut videos = Vec::with_capacity(gts.len());
    for (gi, g) in gts.iter().enumerate() {
        if !seen.contains(&gi) {
            diags.push(VideoDiagnostic { video_id: g.file_id.clone(), message: "no predictions; counted as missed".into() });
        }
        videos.push(VideoEval {
            video_id: g.file_id.clone(),
            predictions: std::mem::take(&mut by_video[gi]),
            ground_truth: g.periods(opts.modality),
        });
    }
    let n_gt = total_gt(&videos)?;
    let mut ap_at = BTreeMap::new();
    for &t in &opts.ap_thresholds {
        ap_at.insert(threshold_key(t), ap_at_tiou(&videos, t)?);
    }
    let tious = ar_thresholds();
    let mut ar_at = BTreeMap::new();
    for &k in &opts.ar_budgets {
        ar_at.insert(k, ar_at_k(&videos, k, &tious)?);
    }
    Ok(EvalReport {
        modality: opts.modality,
        ap_at,
        ar_at,
        videos: videos.len(),
        ground_truth_segments: n_gt,
        per_video_diagnostics: diags,
    })
}

/// Reads both files and scores them.
pub fn evaluate_run(pred_path: &Path, gt_path: &Path, opts: &EvalOptions) -> Result<EvalReport> {
    let preds = load_predictions(pred_path)?;
    let gts = load_annotations(gt_path)?;
    evaluate(&preds, &gts, opts)
}
