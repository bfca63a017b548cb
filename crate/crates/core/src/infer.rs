//! Inference driver: encode → enhance → CRATrans → classify → boundary maps
//! → decode → soft-NMS → fuse → ERF.

use std::path::Path;

use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::error::Result;
use crate::io::{save_predictions, DatasetManifest, PredictionRecord, Split};
use crate::model::{Model, VideoSample};
use crate::postprocess::{decode_proposals, erf_decision, fuse_modalities, soft_nms, ProposalList};
use crate::train::load_samples;

/// Postprocessing of one forward pass into the final segment list. Shape
/// comes from the model, postprocessing thresholds from `cfg`.
pub fn infer_video(model: &Model, sample: &VideoSample, cfg: &PipelineConfig) -> Result<PredictionRecord> {
    let out = model.forward(sample)?;
    let id = &sample.video_id;
    let dur = sample.duration;
    let decode = |map| -> Result<ProposalList> {
        let raw = decode_proposals(map, id, dur, cfg.decode_top_k);
        soft_nms(&raw, cfg.nms_alpha, cfg.nms_t1, cfg.nms_t2)
    };
    let visual = decode(&out.visual.boundary.fused)?;
    let audio = decode(&out.audio.boundary.fused)?;
    let fused = fuse_modalities(&audio, &visual)?;
    let (decision, list) = erf_decision(&fused, dur, cfg);
    Ok(PredictionRecord { video_id: id.clone(), duration: dur, label: decision.label, segments: list.proposals })
}

pub fn infer_samples(model: &Model, samples: &[VideoSample], cfg: &PipelineConfig) -> Result<Vec<PredictionRecord>> {
    model.check_compatible(cfg)?;
    samples.par_iter().map(|s| infer_video(model, s, cfg)).collect()
}

/// Runs the model over a manifest split (all videos when `None`) and writes
/// the predictions file in manifest order.
pub fn run_inference(
    manifest: &DatasetManifest,
    model: &Model,
    cfg: &PipelineConfig,
    split: Option<Split>,
    out: &Path,
) -> Result<Vec<PredictionRecord>> {
    model.check_compatible(cfg)?;
    let samples = load_samples(manifest, split, cfg, false)?;
    let records = infer_samples(model, &samples, cfg)?;
    save_predictions(out, &records)?;
    Ok(records)
}

/// Re-applies soft-NMS to a prediction record.
pub fn renms_record(rec: &PredictionRecord, alpha: f64, t1: f64, t2: f64) -> Result<PredictionRecord> {
    let list = ProposalList::new(rec.video_id.clone(), rec.duration, rec.segments.clone());
    let out = soft_nms(&list, alpha, t1, t2)?;
    Ok(PredictionRecord { segments: out.proposals, ..rec.clone() })
}

/// Applies the ERF rule to a prediction record.
pub fn erf_record(rec: &PredictionRecord, cfg: &PipelineConfig) -> PredictionRecord {
    let list = ProposalList::new(rec.video_id.clone(), rec.duration, rec.segments.clone());
    let (decision, out) = erf_decision(&list, rec.duration, cfg);
    PredictionRecord { label: decision.label, segments: out.proposals, ..rec.clone() }
}
