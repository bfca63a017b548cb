//! Toy per-modality encoders: two blocks of (temporal conv, tanh, per-frame
//! projection) followed by a parameter-free layer norm. They honor the
//! contract of the large pretrained backbones they stand in for: raw
//! per-frame features in, `C_f × T` latents out.

use crate::config::PipelineConfig;
use crate::cratrans::FeatureSequence;
use crate::domain::Modality;
use crate::error::{Error, Result};
use crate::tensor::{
    conv3, conv3_backward, layer_norm, layer_norm_backward, linear, linear_backward, seeded_init, tanh_backward,
    InitScheme, LayerNormCache, ParamSet, Tensor2D,
};

const LN_EPS: f64 = 1e-5;

/// Raw features for one modality, stored `input_dim × frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawModalitySequence {
    pub modality: Modality,
    pub values: Tensor2D,
}

impl RawModalitySequence {
    pub fn new(modality: Modality, values: Tensor2D) -> Result<Self> {
        if modality == Modality::Fused {
            return Err(Error::WrongModality { expected: "audio or visual", actual: "fused" });
        }
        values.ensure_finite("raw modality features")?;
        Ok(RawModalitySequence { modality, values })
    }

    pub fn frames(&self) -> usize {
        self.values.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.values.rows()
    }
}

/// Fresh encoder parameters. Weights are uniform-scaled, biases zero.
pub fn encoder_params(input_dim: usize, channels: usize, seed: u64) -> ParamSet {
    let u = |r, c, s| seeded_init(r, c, seed.wrapping_mul(97).wrapping_add(s), InitScheme::UniformScaled);
    ParamSet::new()
        .with("conv1.w", u(3 * input_dim, channels, 1))
        .with("conv1.b", Tensor2D::zeros(1, channels))
        .with("proj1.w", u(channels, channels, 2))
        .with("proj1.b", Tensor2D::zeros(1, channels))
        .with("conv2.w", u(3 * channels, channels, 3))
        .with("conv2.b", Tensor2D::zeros(1, channels))
        .with("proj2.w", u(channels, channels, 4))
        .with("proj2.b", Tensor2D::zeros(1, channels))
}

#[derive(Debug, Clone)]
pub struct EncoderCache {
    x: Tensor2D,
    a1: Tensor2D,
    y1: Tensor2D,
    a2: Tensor2D,
    ln: LayerNormCache,
}

/// Forward pass on time-major input (`T × input_dim`), returning `T × C_f`.
pub fn encoder_forward(x: &Tensor2D, p: &ParamSet) -> Result<(Tensor2D, EncoderCache)> {
    let a1 = conv3(x, p.get("conv1.w"), p.get("conv1.b"))?.map(f64::tanh);
    let y1 = linear(&a1, p.get("proj1.w"), Some(p.get("proj1.b")))?;
    let a2 = conv3(&y1, p.get("conv2.w"), p.get("conv2.b"))?.map(f64::tanh);
    let y2 = linear(&a2, p.get("proj2.w"), Some(p.get("proj2.b")))?;
    let (z, ln) = layer_norm(&y2, LN_EPS);
    Ok((z, EncoderCache { x: x.clone(), a1, y1, a2, ln }))
}

/// Accumulates parameter gradients into `grads`; the input gradient is not needed.
pub fn encoder_backward(cache: &EncoderCache, p: &ParamSet, dz: &Tensor2D, grads: &mut ParamSet) -> Result<()> {
    let dy2 = layer_norm_backward(&cache.ln, dz);
    let (da2, dw, db) = linear_backward(&cache.a2, p.get("proj2.w"), &dy2)?;
    grads.accumulate("proj2.w", &dw);
    grads.accumulate("proj2.b", &db);
    let du2 = tanh_backward(&cache.a2, &da2);
    let (dy1, dw, db) = conv3_backward(&cache.y1, p.get("conv2.w"), &du2)?;
    grads.accumulate("conv2.w", &dw);
    grads.accumulate("conv2.b", &db);
    let (da1, dw, db) = linear_backward(&cache.a1, p.get("proj1.w"), &dy1)?;
    grads.accumulate("proj1.w", &dw);
    grads.accumulate("proj1.b", &db);
    let du1 = tanh_backward(&cache.a1, &da1);
    let (_, dw, db) = conv3_backward(&cache.x, p.get("conv1.w"), &du1)?;
    grads.accumulate("conv1.w", &dw);
    grads.accumulate("conv1.b", &db);
    Ok(())
}

fn encode(seq: &RawModalitySequence, params: &ParamSet, expected: Modality) -> Result<FeatureSequence> {
    if seq.modality != expected {
        return Err(Error::WrongModality { expected: expected.as_str(), actual: seq.modality.as_str() });
    }
    let w = params.get("conv1.w");
    if w.rows() != 3 * seq.input_dim() {
        return Err(Error::shape(
            "encode",
            format!("input dim {} but encoder expects {}", seq.input_dim(), w.rows() / 3),
        ));
    }
    let (z, _) = encoder_forward(&seq.values.transpose(), params)?;
    FeatureSequence::from_time_major(expected, &z)
}

pub fn encode_visual(seq: &RawModalitySequence, params: &ParamSet) -> Result<FeatureSequence> {
    encode(seq, params, Modality::Visual)
}

pub fn encode_audio(seq: &RawModalitySequence, params: &ParamSet) -> Result<FeatureSequence> {
    encode(seq, params, Modality::Audio)
}

/// Linear interpolation along time (columns) onto `target` frames, with the
/// first and last frames of source and target aligned.
pub fn resample_temporal(values: &Tensor2D, target: usize) -> Result<Tensor2D> {
    let src = values.cols();
    if src == 0 || values.rows() == 0 {
        return Err(Error::EmptyInput("resample_temporal source"));
    }
    if target == 0 {
        return Err(Error::EmptyInput("resample_temporal target"));
    }
    if src == target {
        return Ok(values.clone());
    }
    let mut out = Tensor2D::zeros(values.rows(), target);
    for j in 0..target {
        let pos = if target == 1 { 0.0 } else { j as f64 * (src - 1) as f64 / (target - 1) as f64 };
        let lo = (pos.floor() as usize).min(src - 1);
        let hi = (lo + 1).min(src - 1);
        let w = pos - lo as f64;
        for r in 0..values.rows() {
            let v = if w == 0.0 { values.get(r, lo) } else { (1.0 - w) * values.get(r, lo) + w * values.get(r, hi) };
            out.set(r, j, v);
        }
    }
    Ok(out)
}

/// Maps a video's raw features onto the fixed network grid: resamples to the
/// number of frames its duration occupies and zero-pads up to `frames_t`.
/// Returns time-major features and the count of valid frames.
pub fn prepare_input(seq: &RawModalitySequence, duration: f64, cfg: &PipelineConfig) -> Result<(Tensor2D, usize)> {
    if duration > cfg.max_duration_d + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "video duration {duration} s exceeds the maximum of {} s",
            cfg.max_duration_d
        )));
    }
    let valid = valid_frames(duration, cfg);
    let resampled = resample_temporal(&seq.values, valid)?;
    let mut x = Tensor2D::zeros(cfg.frames_t, seq.input_dim());
    for t in 0..valid {
        for c in 0..seq.input_dim() {
            x.set(t, c, resampled.get(c, t));
        }
    }
    Ok((x, valid))
}

pub fn valid_frames(duration: f64, cfg: &PipelineConfig) -> usize {
    ((duration / cfg.frame_seconds()).round() as usize).clamp(1, cfg.frames_t)
}
