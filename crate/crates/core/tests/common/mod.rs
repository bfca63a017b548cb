//! Shared helpers for the integration tests: brute-force metric oracles and
//! random instance generators.

#![allow(dead_code)]

use avtfl::domain::{Modality, ScoredSegment, Segment};
use avtfl::eval::VideoEval;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn interval_iou(a: &Segment, b: &Segment) -> f64 {
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = (a.end - a.start) + (b.end - b.start) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Largest number of matches over every one-to-one assignment that obeys the
/// greedy-order constraint: visiting predictions in order, a prediction may
/// take gt `g` only if no still-free gt has a strictly higher IoU, and it may
/// stay unmatched only if no free gt reaches `tiou`.
pub fn oracle_true_positives(preds: &[Segment], gts: &[Segment], tiou: f64) -> usize {
    fn rec(i: usize, preds: &[Segment], gts: &[Segment], tiou: f64, free: &mut Vec<bool>) -> Option<usize> {
        if i == preds.len() {
            return Some(0);
        }
        let ious: Vec<f64> = gts.iter().map(|g| interval_iou(&preds[i], g)).collect();
        let best_free = (0..gts.len()).filter(|&g| free[g]).map(|g| ious[g]).fold(f64::NEG_INFINITY, f64::max);
        let mut best: Option<usize> = None;
        // option: stay unmatched
        if !(best_free >= tiou) {
            best = rec(i + 1, preds, gts, tiou, free);
        }
        for g in 0..gts.len() {
            if free[g] && ious[g] >= tiou && ious[g] >= best_free {
                free[g] = false;
                if let Some(n) = rec(i + 1, preds, gts, tiou, free) {
                    best = Some(best.map_or(n + 1, |b| b.max(n + 1)));
                }
                free[g] = true;
            }
        }
        best
    }
    rec(0, preds, gts, tiou, &mut vec![true; gts.len()]).expect("some assignment is always valid")
}

/// Per-prediction match flags from the oracle: prediction `i` is a true
/// positive iff the oracle count on the first `i + 1` predictions exceeds
/// that on the first `i`.
pub fn oracle_tp_flags(preds: &[Segment], gts: &[Segment], tiou: f64) -> Vec<bool> {
    let mut prev = 0;
    (0..preds.len())
        .map(|i| {
            let n = oracle_true_positives(&preds[..=i], gts, tiou);
            let tp = n > prev;
            prev = n;
            tp
        })
        .collect()
}

fn ranked(v: &VideoEval) -> Vec<ScoredSegment> {
    let mut p = v.predictions.clone();
    p.sort_by(|a, b| b.confidence.partial_cmp(&a.confidence).unwrap());
    p
}

/// All-point AP computed straight from its definition: the mean over every
/// recall level j/N of the best precision reached at recall ≥ j/N.
pub fn oracle_ap(videos: &[VideoEval], tiou: f64) -> f64 {
    let n_gt: usize = videos.iter().map(|v| v.ground_truth.len()).sum();
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    for v in videos {
        let r = ranked(v);
        let segs: Vec<Segment> = r.iter().map(|p| p.segment()).collect();
        for (p, tp) in r.iter().zip(oracle_tp_flags(&segs, &v.ground_truth, tiou)) {
            pooled.push((p.confidence, tp));
        }
    }
    pooled.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut points = Vec::new();
    let mut tp = 0;
    for (k, p) in pooled.iter().enumerate() {
        tp += p.1 as usize;
        points.push((tp as f64 / (k + 1) as f64, tp));
    }
    (1..=n_gt)
        .map(|j| points.iter().filter(|p| p.1 >= j).map(|p| p.0).fold(0.0, f64::max))
        .sum::<f64>()
        / n_gt as f64
}

/// Recall at each tIoU with the top `k` proposals per video, averaged.
pub fn oracle_ar(videos: &[VideoEval], k: usize, tious: &[f64]) -> f64 {
    let n_gt: usize = videos.iter().map(|v| v.ground_truth.len()).sum();
    let mut total = 0.0;
    for &t in tious {
        let mut hit = 0;
        for v in videos {
            let top: Vec<Segment> = ranked(v).iter().take(k).map(|p| p.segment()).collect();
            hit += oracle_true_positives(&top, &v.ground_truth, t);
        }
        total += hit as f64 / n_gt as f64;
    }
    total / tious.len() as f64
}

/// A segment inside `[0, duration]` with positive length.
pub fn random_segment(rng: &mut impl Rng, duration: f64) -> Segment {
    let a = rng.gen_range(0.0..duration);
    let b = rng.gen_range(0.0..duration);
    let (s, e) = if a < b { (a, b) } else { (b, a) };
    Segment { start: s, end: e.max(s + 1e-3) }
}

/// Random instance: ≤5 videos, ≤6 predictions and ≤3 ground truths each,
/// at least one ground truth overall. Predictions are often jittered copies
/// of ground truths so matches occur at every threshold.
pub fn random_instance(seed: u64) -> Vec<VideoEval> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n_videos = rng.gen_range(1..=5);
        let videos: Vec<VideoEval> = (0..n_videos)
            .map(|vi| {
                let dur = 10.0;
                let gts: Vec<Segment> = (0..rng.gen_range(0..=3)).map(|_| random_segment(&mut rng, dur)).collect();
                let preds = (0..rng.gen_range(0..=6))
                    .map(|_| {
                        let seg = if !gts.is_empty() && rng.gen_bool(0.6) {
                            let g = gts[rng.gen_range(0..gts.len())];
                            let j = rng.gen_range(0.0..0.3) * (g.end - g.start);
                            let s = (g.start + rng.gen_range(-j..=j)).max(0.0);
                            let e = (g.end + rng.gen_range(-j..=j)).min(dur).max(s + 1e-3);
                            Segment { start: s, end: e }
                        } else {
                            random_segment(&mut rng, dur)
                        };
                        ScoredSegment::new(seg, rng.gen_range(0.0..1.0), Modality::Fused)
                    })
                    .collect();
                VideoEval { video_id: format!("v{vi}"), predictions: preds, ground_truth: gts }
            })
            .collect();
        if videos.iter().any(|v| !v.ground_truth.is_empty()) {
            return videos;
        }
    }
}

use avtfl::config::OptimizerKind;
use avtfl::io::SyntheticSpec;
use avtfl::PipelineConfig;

/// Toy shape with the optimizer settings used for desk-scale training runs.
pub fn trainable_config(seed: u64, epochs: usize) -> PipelineConfig {
    PipelineConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: 1e-3,
        batch_size: 1,
        epochs,
        rng_seed: seed,
        ..PipelineConfig::toy()
    }
}

/// Small synthetic set; `per_mode` counts follow the generator's mode order
/// (both fake, audio only, visual only, real).
pub fn small_spec(per_mode: [usize; 4], seed: u64) -> SyntheticSpec {
    SyntheticSpec { videos_per_mode: per_mode, rng_seed: seed, ..SyntheticSpec::default() }
}

/// Every file under `dir` with its bytes, sorted by relative path.
pub fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
