//! Proposal decoding, soft-NMS, modality fusion and the ERF rule set.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::domain::{clamp_segment, iou, Modality, ScoredSegment, Segment};
use crate::error::{Error, Result};
use crate::heads::{BoundaryMap, VideoDecision, VideoLabel};

/// Scored segments for one video, highest confidence first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalList {
    pub video_id: String,
    pub duration: f64,
    pub proposals: Vec<ScoredSegment>,
}

impl ProposalList {
    pub fn new(video_id: impl Into<String>, duration: f64, mut proposals: Vec<ScoredSegment>) -> Self {
        sort_proposals(&mut proposals);
        ProposalList { video_id: video_id.into(), duration, proposals }
    }

    pub fn max_confidence(&self) -> f64 {
        self.proposals.iter().map(|p| p.confidence).fold(0.0, f64::max)
    }
}

/// Confidence descending, then earlier start, then earlier end.
pub fn proposal_order(a: &ScoredSegment, b: &ScoredSegment) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.start.total_cmp(&b.start))
        .then(a.end.total_cmp(&b.end))
        .then(a.modality.as_str().cmp(b.modality.as_str()))
}

pub fn sort_proposals(p: &mut [ScoredSegment]) {
    p.sort_by(proposal_order);
}

/// The `top_k` valid cells by confidence as second-space segments. Ties go
/// to the earlier start, then the shorter duration.
pub fn decode_proposals(map: &BoundaryMap, video_id: &str, duration: f64, top_k: usize) -> ProposalList {
    let mut cells: Vec<(usize, usize, f64)> = map.valid_cells().filter(|c| c.2.is_finite()).collect();
    cells.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let fs = map.frame_seconds;
    let proposals = cells
        .into_iter()
        .filter_map(|(s, d, v)| {
            let seg = clamp_segment(Segment { start: s as f64 * fs, end: (s + d) as f64 * fs }, duration)?;
            Some(ScoredSegment::new(seg, v.clamp(0.0, 1.0), map.modality))
        })
        .take(top_k)
        .collect();
    // already in decode order; keep it rather than re-sorting by seconds
    ProposalList { video_id: video_id.to_string(), duration, proposals }
}

/// Gaussian soft-NMS: repeatedly keep the best remaining proposal and decay
/// every other remaining proposal overlapping it by more than `t1` with
/// `exp(−IoU²/α)`. Proposals ending below `t2` are dropped.
pub fn soft_nms(list: &ProposalList, alpha: f64, t1: f64, t2: f64) -> Result<ProposalList> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("soft-NMS alpha {alpha} must be positive")));
    }
    if !(0.0 <= t1 && t1 < t2 && t2 <= 1.0) {
        return Err(Error::InvalidParameter(format!("soft-NMS thresholds need 0 <= t1 < t2 <= 1, got {t1}, {t2}")));
    }
    let mut remaining = list.proposals.clone();
    let mut kept = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let best = (0..remaining.len())
            .min_by(|&i, &j| proposal_order(&remaining[i], &remaining[j]))
            .expect("nonempty");
        let sel = remaining.swap_remove(best);
        let seg = sel.segment();
        for p in remaining.iter_mut() {
            let o = iou(&seg, &p.segment());
            if o > t1 {
                p.confidence *= (-o * o / alpha).exp();
            }
        }
        kept.push(sel);
    }
    kept.retain(|p| p.confidence >= t2);
    sort_proposals(&mut kept);
    Ok(ProposalList { video_id: list.video_id.clone(), duration: list.duration, proposals: kept })
}

/// Concatenates both lists, drops exact duplicates (same endpoints,
/// confidence within 1e-9) and sorts; every output segment is tagged fused.
pub fn fuse_modalities(audio: &ProposalList, visual: &ProposalList) -> Result<ProposalList> {
    if audio.video_id != visual.video_id {
        return Err(Error::IdMismatch(format!("fusing '{}' with '{}'", audio.video_id, visual.video_id)));
    }
    if audio.duration != visual.duration {
        return Err(Error::InvalidParameter(format!(
            "video '{}' has durations {} and {}",
            audio.video_id, audio.duration, visual.duration
        )));
    }
    let mut all: Vec<ScoredSegment> = visual
        .proposals
        .iter()
        .chain(&audio.proposals)
        .map(|p| ScoredSegment { modality: Modality::Fused, ..*p })
        .collect();
    sort_proposals(&mut all);
    let mut out: Vec<ScoredSegment> = Vec::with_capacity(all.len());
    for p in all {
        let dup = out.iter().any(|q| q.start == p.start && q.end == p.end && (q.confidence - p.confidence).abs() <= 1e-9);
        if !dup {
            out.push(p);
        }
    }
    Ok(ProposalList { video_id: visual.video_id.clone(), duration: visual.duration, proposals: out })
}

/// Video-level rule set: a maximum confidence not exceeding the threshold
/// labels the video real and appends a full-length segment at the real
/// confidence; otherwise the video is fake and the full-length segment gets
/// the fake confidence. Existing proposals are kept.
pub fn erf_decision(list: &ProposalList, duration: f64, cfg: &PipelineConfig) -> (VideoDecision, ProposalList) {
    let c = list.max_confidence();
    let (label, append) = if c > cfg.erf_fake_threshold {
        (VideoLabel::Fake, cfg.erf_fake_append_conf)
    } else {
        (VideoLabel::Real, cfg.erf_real_append_conf)
    };
    let mut proposals = list.proposals.clone();
    proposals.push(ScoredSegment { start: 0.0, end: duration, confidence: append, modality: Modality::Fused });
    sort_proposals(&mut proposals);
    (
        VideoDecision { label, video_confidence: c.clamp(0.0, 1.0) },
        ProposalList { video_id: list.video_id.clone(), duration: list.duration, proposals },
    )
}
