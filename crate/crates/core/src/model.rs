//! The full network: per-modality encoder and enhancement, CRATrans, frame
//! classifiers and boundary modules, with one hand-chained backward pass.
//!
//! Parameters live in one [`ParamSet`] under these prefixes:
//! `enc.{visual,audio}.`, `enh.{visual,audio}.`, `cra.`,
//! `cls.{visual,audio}.` and `bnd.{visual,audio}.`.

use crate::config::PipelineConfig;
use crate::cratrans::{
    anomaly_scores, cratrans_backward, cratrans_forward, cratrans_params, Calibration, CraForward, CraUpstream,
    FrameLabel,
};
use crate::domain::{Modality, Segment, VideoAnnotation};
use crate::encoders::{encoder_backward, encoder_forward, encoder_params, prepare_input, EncoderCache, RawModalitySequence};
use crate::error::{Error, Result};
use crate::heads::{
    boundary_backward, boundary_forward, boundary_params, classifier_backward, classifier_forward, classifier_params,
    composite_loss, enhance_backward, enhance_forward, enhance_params, gt_iou_map, BoundaryCache, BoundaryMap,
    BoundaryOutput, CompositeInputs, EnhanceCache, LossBreakdown, ModalityTargets,
};
use crate::tensor::{sigmoid, ParamSet, Tensor2D};

const NAMES: [&str; 2] = ["visual", "audio"];
const MODALITIES: [Modality; 2] = [Modality::Visual, Modality::Audio];

/// Trained (or freshly initialized) weights together with the config that
/// fixes their shapes and the anomaly calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: PipelineConfig,
    pub params: ParamSet,
    pub calibration: Calibration,
}

impl Model {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        let params = init_params(&config)?;
        Ok(Model { config, params, calibration: Calibration::default() })
    }

    /// Errors unless `cfg` describes the same network shape as this model.
    pub fn check_compatible(&self, cfg: &PipelineConfig) -> Result<()> {
        let a = &self.config;
        let same = a.frames_t == cfg.frames_t
            && a.max_duration_d == cfg.max_duration_d
            && a.feature_dim_cf == cfg.feature_dim_cf
            && a.boundary_hidden_dims == cfg.boundary_hidden_dims
            && a.attention_heads == cfg.attention_heads
            && a.visual_input_dim == cfg.visual_input_dim
            && a.audio_input_dim == cfg.audio_input_dim;
        if !same {
            return Err(Error::Checkpoint(format!(
                "checkpoint shape (T={}, D={}, C={}, hidden={:?}, heads={}, inputs={}/{}) differs from config \
                 (T={}, D={}, C={}, hidden={:?}, heads={}, inputs={}/{})",
                a.frames_t,
                a.max_duration_d,
                a.feature_dim_cf,
                a.boundary_hidden_dims,
                a.attention_heads,
                a.visual_input_dim,
                a.audio_input_dim,
                cfg.frames_t,
                cfg.max_duration_d,
                cfg.feature_dim_cf,
                cfg.boundary_hidden_dims,
                cfg.attention_heads,
                cfg.visual_input_dim,
                cfg.audio_input_dim
            )));
        }
        Ok(())
    }
}

/// Seeded parameters for every block.
pub fn init_params(cfg: &PipelineConfig) -> Result<ParamSet> {
    cfg.validate()?;
    let s = cfg.rng_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let c = cfg.feature_dim_cf;
    let inputs = [cfg.visual_input_dim, cfg.audio_input_dim];
    let mut p = ParamSet::new();
    for (m, name) in NAMES.iter().enumerate() {
        let k = s.wrapping_add(m as u64 * 100);
        p.extend_prefixed(&format!("enc.{name}."), &encoder_params(inputs[m], c, k + 1))?;
        p.extend_prefixed(&format!("enh.{name}."), &enhance_params(c, k + 2))?;
    }
    p.extend_prefixed("cra.", &cratrans_params(c, s.wrapping_add(7)))?;
    for (m, name) in NAMES.iter().enumerate() {
        let k = s.wrapping_add(m as u64 * 100);
        p.extend_prefixed(&format!("cls.{name}."), &classifier_params(c, k + 3))?;
        p.extend_prefixed(&format!("bnd.{name}."), &boundary_params(c, cfg.boundary_hidden_dims, k + 4))?;
    }
    Ok(p)
}

/// Training targets on the network grid.
#[derive(Debug, Clone)]
pub struct SampleTargets {
    pub visual: ModalityTargets,
    pub audio: ModalityTargets,
    pub contrastive: Vec<FrameLabel>,
}

/// One video mapped onto the network grid.
#[derive(Debug, Clone)]
pub struct VideoSample {
    pub video_id: String,
    pub duration: f64,
    /// Time-major `T × input_dim`, zero past `valid_frames`.
    pub visual: Tensor2D,
    pub audio: Tensor2D,
    pub valid_frames: usize,
    pub targets: Option<SampleTargets>,
}

/// 1 where the frame center falls inside any period, for the first `valid`
/// of `frames` frames.
pub fn frame_labels(periods: &[Segment], frames: usize, valid: usize, frame_seconds: f64) -> Vec<f64> {
    (0..frames)
        .map(|t| {
            let c = (t as f64 + 0.5) * frame_seconds;
            (t < valid && periods.iter().any(|p| c >= p.start && c < p.end)) as u8 as f64
        })
        .collect()
}

impl VideoSample {
    pub fn new(
        video_id: &str,
        duration: f64,
        visual: &RawModalitySequence,
        audio: &RawModalitySequence,
        annotation: Option<&VideoAnnotation>,
        cfg: &PipelineConfig,
    ) -> Result<Self> {
        if visual.modality != Modality::Visual || audio.modality != Modality::Audio {
            return Err(Error::WrongModality { expected: "visual then audio", actual: visual.modality.as_str() });
        }
        if visual.input_dim() != cfg.visual_input_dim || audio.input_dim() != cfg.audio_input_dim {
            return Err(Error::shape(
                "video_sample",
                format!(
                    "input dims {}/{} vs config {}/{}",
                    visual.input_dim(),
                    audio.input_dim(),
                    cfg.visual_input_dim,
                    cfg.audio_input_dim
                ),
            ));
        }
        let (xv, n) = prepare_input(visual, duration, cfg)?;
        let (xa, _) = prepare_input(audio, duration, cfg)?;
        let targets = annotation.map(|ann| {
            let t = cfg.frames_t;
            let fs = cfg.frame_seconds();
            let mk = |m: Modality| {
                let periods = ann.periods(m);
                ModalityTargets {
                    frame_labels: frame_labels(&periods, t, n, fs),
                    iou_map: mask_map(gt_iou_map(&periods, t, t, fs), n),
                    valid_frames: n,
                }
            };
            let visual = mk(Modality::Visual);
            let audio = mk(Modality::Audio);
            let contrastive = (0..t)
                .map(|i| (i < n).then(|| visual.frame_labels[i] == 0.0 && audio.frame_labels[i] == 0.0))
                .collect();
            SampleTargets { visual, audio, contrastive }
        });
        Ok(VideoSample { video_id: video_id.to_string(), duration, visual: xv, audio: xa, valid_frames: n, targets })
    }
}

fn mask_map(mut m: Tensor2D, valid: usize) -> Tensor2D {
    for s in 0..m.rows() {
        for d in 1..=m.cols() {
            if s + d > valid {
                m.set(s, d - 1, 0.0);
            }
        }
    }
    m
}

struct ModalityPass {
    enc: EncoderCache,
    enh: EnhanceCache,
    probs: Vec<f64>,
    bnd: BoundaryCache,
    maps: BoundaryOutput,
}

struct Pass {
    mods: [ModalityPass; 2],
    cra: CraForward,
}

struct Blocks {
    enc: [ParamSet; 2],
    enh: [ParamSet; 2],
    cra: ParamSet,
    cls: [ParamSet; 2],
    bnd: [ParamSet; 2],
}

impl Blocks {
    fn split(p: &ParamSet) -> Self {
        let pair = |prefix: &str| NAMES.map(|n| p.subset(&format!("{prefix}.{n}.")));
        Blocks { enc: pair("enc"), enh: pair("enh"), cra: p.subset("cra."), cls: pair("cls"), bnd: pair("bnd") }
    }
}

fn forward_pass(b: &Blocks, cfg: &PipelineConfig, sample: &VideoSample) -> Result<Pass> {
    let inputs = [&sample.visual, &sample.audio];
    let mut encs = Vec::with_capacity(2);
    let mut enhs = Vec::with_capacity(2);
    let mut es = Vec::with_capacity(2);
    for m in 0..2 {
        let (z, enc) = encoder_forward(inputs[m], &b.enc[m])?;
        let (e, enh) = enhance_forward(&z, &b.enh[m])?;
        encs.push(enc);
        enhs.push(enh);
        es.push(e);
    }
    let cra = cratrans_forward(&es[0], &es[1], &b.cra, cfg.attention_heads)?;
    let hs = [&cra.h_v, &cra.h_a];
    let mut mods = Vec::with_capacity(2);
    for (m, (enc, enh)) in encs.into_iter().zip(enhs).enumerate() {
        let logits = classifier_forward(hs[m], &b.cls[m])?;
        let probs: Vec<f64> = logits.data().iter().map(|&l| sigmoid(l)).collect();
        let (_, _, bnd) = boundary_forward(hs[m], &probs, &b.bnd[m], cfg.samples_n)?;
        let maps = bnd.output(MODALITIES[m], cfg.frame_seconds(), sample.valid_frames);
        mods.push(ModalityPass { enc, enh, probs, bnd, maps });
    }
    let mut it = mods.into_iter();
    let mods = [it.next().expect("visual"), it.next().expect("audio")];
    Ok(Pass { mods, cra })
}

/// Composite loss of one labelled video and, optionally, its gradient with
/// respect to every parameter.
pub fn sample_loss(
    params: &ParamSet,
    cfg: &PipelineConfig,
    sample: &VideoSample,
    with_grads: bool,
) -> Result<(LossBreakdown, Option<ParamSet>)> {
    let targets = sample
        .targets
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter(format!("video {} has no training targets", sample.video_id)))?;
    let b = Blocks::split(params);
    let pass = forward_pass(&b, cfg, sample)?;
    let [pv, pa] = &pass.mods;
    let inputs = CompositeInputs {
        frame_probs: [&pv.probs, &pa.probs],
        fused_maps: [&pv.maps.fused, &pa.maps.fused],
        attended: [&pass.cra.h_v, &pass.cra.h_a],
        reconstructed: [&pass.cra.rec_v, &pass.cra.rec_a],
        targets: [&targets.visual, &targets.audio],
        contrastive_labels: &targets.contrastive,
    };
    let (breakdown, g) = composite_loss(&inputs, cfg)?;
    if !with_grads {
        return Ok((breakdown, None));
    }

    let mut grads = params.zeros_like();
    let mut merge = |prefix: &str, sub: &ParamSet| {
        for (n, t) in sub.iter() {
            grads.accumulate(&format!("{prefix}{n}"), t);
        }
    };
    let hs = [&pass.cra.h_v, &pass.cra.h_a];
    let mut dh = Vec::with_capacity(2);
    for m in 0..2 {
        let mp = &pass.mods[m];
        let dfused: Vec<f64> =
            mp.bnd.cells().iter().map(|&(s, d)| g.fused_maps[m].get(s, d - 1)).collect();
        let mut gb = b.bnd[m].zeros_like();
        let (dz_b, dprob_b) = boundary_backward(&mp.bnd, &b.bnd[m], &dfused, &mut gb)?;
        merge(&format!("bnd.{}.", NAMES[m]), &gb);
        let dlogits: Vec<f64> = mp
            .probs
            .iter()
            .zip(&g.frame_probs[m])
            .zip(&dprob_b)
            .map(|((p, a), c)| (a + c) * p * (1.0 - p))
            .collect();
        let mut gc = b.cls[m].zeros_like();
        let dlog = Tensor2D::from_vec(dlogits.len(), 1, dlogits)?;
        let mut d = classifier_backward(hs[m], &b.cls[m], &dlog, &mut gc)?;
        merge(&format!("cls.{}.", NAMES[m]), &gc);
        d.add_assign(&dz_b);
        d.add_assign(&g.attended[m]);
        dh.push(d);
    }
    let mut it = dh.into_iter();
    let up = CraUpstream {
        dh_v: it.next().expect("visual"),
        dh_a: it.next().expect("audio"),
        drec_v: g.reconstructed[0].clone(),
        drec_a: g.reconstructed[1].clone(),
    };
    let mut gcra = b.cra.zeros_like();
    let (de_v, de_a) = cratrans_backward(&pass.cra, &b.cra, up, &mut gcra)?;
    merge("cra.", &gcra);
    for (m, de) in [de_v, de_a].iter().enumerate() {
        let mp = &pass.mods[m];
        let mut ge = b.enh[m].zeros_like();
        let dz = enhance_backward(&mp.enh, &b.enh[m], de, &mut ge)?;
        merge(&format!("enh.{}.", NAMES[m]), &ge);
        let mut gn = b.enc[m].zeros_like();
        encoder_backward(&mp.enc, &b.enc[m], &dz, &mut gn)?;
        merge(&format!("enc.{}.", NAMES[m]), &gn);
    }
    Ok((breakdown, Some(grads)))
}

/// Inference-time outputs for one modality.
#[derive(Debug, Clone)]
pub struct ModalityOutput {
    pub probs: Vec<f64>,
    pub boundary: BoundaryOutput,
    /// Per-frame reconstruction error of this modality.
    pub reconstruction_error: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VideoOutput {
    pub visual: ModalityOutput,
    pub audio: ModalityOutput,
    /// Calibrated cross-modal anomaly per frame.
    pub anomaly: Vec<f64>,
    pub valid_frames: usize,
}

impl VideoOutput {
    /// Late fusion of the two frame classifiers (mean).
    pub fn fused_frame_scores(&self) -> Vec<f64> {
        self.visual.probs.iter().zip(&self.audio.probs).take(self.valid_frames).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Cell-wise maximum of the two fused boundary maps.
    pub fn fused_map(&self) -> BoundaryMap {
        let v = &self.visual.boundary.fused;
        let a = &self.audio.boundary.fused;
        BoundaryMap {
            modality: Modality::Fused,
            map: v.map.zip_map(&a.map, f64::max),
            frame_seconds: v.frame_seconds,
            valid_frames: v.valid_frames,
        }
    }
}

impl Model {
    pub fn forward(&self, sample: &VideoSample) -> Result<VideoOutput> {
        let b = Blocks::split(&self.params);
        let pass = forward_pass(&b, &self.config, sample)?;
        let ev = pass.cra.error_visual();
        let ea = pass.cra.error_audio();
        let anomaly = anomaly_scores(&ev, &ea, &self.calibration)?;
        let [pv, pa] = pass.mods;
        Ok(VideoOutput {
            visual: ModalityOutput { probs: pv.probs, boundary: pv.maps, reconstruction_error: ev },
            audio: ModalityOutput { probs: pa.probs, boundary: pa.maps, reconstruction_error: ea },
            anomaly,
            valid_frames: sample.valid_frames,
        })
    }

    /// Fits the anomaly scale to the median per-frame error over the valid
    /// frames of `samples`.
    pub fn calibrate(&mut self, samples: &[VideoSample]) -> Result<()> {
        let mut errors = Vec::new();
        for s in samples {
            let out = self.forward(s)?;
            for t in 0..s.valid_frames {
                errors.push(0.5 * (out.visual.reconstruction_error[t] + out.audio.reconstruction_error[t]));
            }
        }
        self.calibration = Calibration::fit(&errors);
        Ok(())
    }
}
