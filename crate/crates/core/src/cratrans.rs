//! Cross-reconstruction attention: each modality is first refined by its own
//! multi-head self-attention, then reconstructed from the other modality by
//! cross-attention. Per-frame reconstruction error is the manipulation cue.
//!
//! Reconstructing the visual stream uses the audio stream as both residual
//! base and key/value source; the visual stream only supplies the queries.
//! The audio reconstruction mirrors this with the roles swapped.

use crate::domain::Modality;
use crate::error::{Error, Result};
use crate::tensor::{
    multi_head_attention, multi_head_attention_backward, seeded_init, InitScheme, MhaCache, MhaWeights, ParamSet,
    Tensor2D,
};

const NORM_EPS: f64 = 1e-12;

/// `C_f × T` latent features of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    modality: Modality,
    values: Tensor2D,
}

impl FeatureSequence {
    pub fn new(modality: Modality, values: Tensor2D) -> Result<Self> {
        values.ensure_finite("feature sequence")?;
        Ok(FeatureSequence { modality, values })
    }

    /// Builds from a time-major (`T × C_f`) matrix.
    pub fn from_time_major(modality: Modality, z: &Tensor2D) -> Result<Self> {
        Self::new(modality, z.transpose())
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn channels(&self) -> usize {
        self.values.rows()
    }

    pub fn frames(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Tensor2D {
        &self.values
    }

    pub fn time_major(&self) -> Tensor2D {
        self.values.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    /// The self-attended target stream the reconstruction is compared against.
    pub attended: FeatureSequence,
    pub reconstructed: FeatureSequence,
    /// `T × T`, row-stochastic (averaged over heads).
    pub cross_weights: Tensor2D,
    pub per_frame_error: Vec<f64>,
}

const BLOCKS: [&str; 4] = ["visual.self", "audio.self", "visual.cross", "audio.cross"];

/// Randomly initialized parameters for all four attention blocks.
pub fn cratrans_params(channels: usize, seed: u64) -> ParamSet {
    let mut p = ParamSet::new();
    for (b, block) in BLOCKS.iter().enumerate() {
        for (k, name) in ["wq", "wk", "wv", "wo"].iter().enumerate() {
            let s = seed.wrapping_mul(131).wrapping_add((b * 4 + k) as u64);
            p.insert(format!("{block}.{name}"), seeded_init(channels, channels, s, InitScheme::UniformScaled))
                .expect("unique");
        }
    }
    p
}

/// Identity query/key/value projections and zero output projections: every
/// attention block contributes nothing, so each reconstruction equals the
/// other modality's input.
pub fn cratrans_identity_params(channels: usize) -> ParamSet {
    let mut p = ParamSet::new();
    for block in BLOCKS {
        for name in ["wq", "wk", "wv"] {
            p.insert(format!("{block}.{name}"), Tensor2D::identity_like(channels, channels)).expect("unique");
        }
        p.insert(format!("{block}.wo"), Tensor2D::zeros(channels, channels)).expect("unique");
    }
    p
}

fn weights<'a>(p: &'a ParamSet, block: &str) -> MhaWeights<'a> {
    MhaWeights {
        wq: p.get(&format!("{block}.wq")),
        wk: p.get(&format!("{block}.wk")),
        wv: p.get(&format!("{block}.wv")),
        wo: p.get(&format!("{block}.wo")),
    }
}

/// Time-major forward state kept for the backward pass.
#[derive(Debug, Clone)]
pub struct CraForward {
    pub e_v: Tensor2D,
    pub e_a: Tensor2D,
    pub h_v: Tensor2D,
    pub h_a: Tensor2D,
    pub rec_v: Tensor2D,
    pub rec_a: Tensor2D,
    self_v: MhaCache,
    self_a: MhaCache,
    cross_v: MhaCache,
    cross_a: MhaCache,
}

impl CraForward {
    pub fn cross_weights_visual(&self) -> Tensor2D {
        self.cross_v.mean_weights()
    }

    pub fn cross_weights_audio(&self) -> Tensor2D {
        self.cross_a.mean_weights()
    }

    pub fn error_visual(&self) -> Vec<f64> {
        per_frame_mse(&self.rec_v, &self.h_v)
    }

    pub fn error_audio(&self) -> Vec<f64> {
        per_frame_mse(&self.rec_a, &self.h_a)
    }
}

pub fn cratrans_forward(e_v: &Tensor2D, e_a: &Tensor2D, p: &ParamSet, heads: usize) -> Result<CraForward> {
    if e_v.shape() != e_a.shape() {
        return Err(Error::shape("cross_reconstruct", format!("visual {:?} vs audio {:?}", e_v.shape(), e_a.shape())));
    }
    let (sv, self_v) = multi_head_attention(e_v, e_v, weights(p, "visual.self"), heads)?;
    let (sa, self_a) = multi_head_attention(e_a, e_a, weights(p, "audio.self"), heads)?;
    let h_v = e_v.add(&sv);
    let h_a = e_a.add(&sa);
    let (cv, cross_v) = multi_head_attention(&h_v, &h_a, weights(p, "visual.cross"), heads)?;
    let (ca, cross_a) = multi_head_attention(&h_a, &h_v, weights(p, "audio.cross"), heads)?;
    let rec_v = h_a.add(&cv);
    let rec_a = h_v.add(&ca);
    Ok(CraForward { e_v: e_v.clone(), e_a: e_a.clone(), h_v, h_a, rec_v, rec_a, self_v, self_a, cross_v, cross_a })
}

/// Upstream gradients arriving on the CRATrans outputs.
#[derive(Debug, Clone)]
pub struct CraUpstream {
    pub dh_v: Tensor2D,
    pub dh_a: Tensor2D,
    pub drec_v: Tensor2D,
    pub drec_a: Tensor2D,
}

/// Returns gradients with respect to the two inputs and accumulates
/// parameter gradients into `grads`.
pub fn cratrans_backward(
    fwd: &CraForward,
    p: &ParamSet,
    up: CraUpstream,
    grads: &mut ParamSet,
) -> Result<(Tensor2D, Tensor2D)> {
    let CraUpstream { mut dh_v, mut dh_a, drec_v, drec_a } = up;

    dh_a.add_assign(&drec_v);
    let g = multi_head_attention_backward(&fwd.h_v, &fwd.h_a, weights(p, "visual.cross"), &fwd.cross_v, &drec_v)?;
    dh_v.add_assign(&g.dxq);
    dh_a.add_assign(&g.dxkv);
    accumulate_block(grads, "visual.cross", &g);

    dh_v.add_assign(&drec_a);
    let g = multi_head_attention_backward(&fwd.h_a, &fwd.h_v, weights(p, "audio.cross"), &fwd.cross_a, &drec_a)?;
    dh_a.add_assign(&g.dxq);
    dh_v.add_assign(&g.dxkv);
    accumulate_block(grads, "audio.cross", &g);

    let g = multi_head_attention_backward(&fwd.e_v, &fwd.e_v, weights(p, "visual.self"), &fwd.self_v, &dh_v)?;
    let mut de_v = dh_v;
    de_v.add_assign(&g.dxq);
    de_v.add_assign(&g.dxkv);
    accumulate_block(grads, "visual.self", &g);

    let g = multi_head_attention_backward(&fwd.e_a, &fwd.e_a, weights(p, "audio.self"), &fwd.self_a, &dh_a)?;
    let mut de_a = dh_a;
    de_a.add_assign(&g.dxq);
    de_a.add_assign(&g.dxkv);
    accumulate_block(grads, "audio.self", &g);

    Ok((de_v, de_a))
}

fn accumulate_block(grads: &mut ParamSet, block: &str, g: &crate::tensor::MhaGrads) {
    grads.accumulate(&format!("{block}.wq"), &g.dwq);
    grads.accumulate(&format!("{block}.wk"), &g.dwk);
    grads.accumulate(&format!("{block}.wv"), &g.dwv);
    grads.accumulate(&format!("{block}.wo"), &g.dwo);
}

/// Reconstructs each modality from the other. Returns `(visual, audio)`.
pub fn cross_reconstruct(
    z_v: &FeatureSequence,
    z_a: &FeatureSequence,
    params: &ParamSet,
    heads: usize,
) -> Result<(ReconstructionResult, ReconstructionResult)> {
    if z_v.values.shape() != z_a.values.shape() {
        return Err(Error::shape(
            "cross_reconstruct",
            format!("visual {:?} vs audio {:?}", z_v.values.shape(), z_a.values.shape()),
        ));
    }
    let fwd = cratrans_forward(&z_v.time_major(), &z_a.time_major(), params, heads)?;
    let visual = ReconstructionResult {
        attended: FeatureSequence::from_time_major(Modality::Visual, &fwd.h_v)?,
        reconstructed: FeatureSequence::from_time_major(Modality::Visual, &fwd.rec_v)?,
        cross_weights: fwd.cross_weights_visual(),
        per_frame_error: fwd.error_visual(),
    };
    let audio = ReconstructionResult {
        attended: FeatureSequence::from_time_major(Modality::Audio, &fwd.h_a)?,
        reconstructed: FeatureSequence::from_time_major(Modality::Audio, &fwd.rec_a)?,
        cross_weights: fwd.cross_weights_audio(),
        per_frame_error: fwd.error_audio(),
    };
    Ok((visual, audio))
}

/// Channel-mean squared difference per frame (rows are frames).
pub fn per_frame_mse(rec: &Tensor2D, target: &Tensor2D) -> Vec<f64> {
    let c = rec.cols() as f64;
    (0..rec.rows())
        .map(|t| rec.row(t).iter().zip(target.row(t)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / c)
        .collect()
}

/// Mean squared reconstruction error over all frames and channels, with
/// gradients for the reconstruction and the target.
pub fn reconstruction_mse(rec: &Tensor2D, target: &Tensor2D) -> Result<(f64, Tensor2D, Tensor2D)> {
    if rec.shape() != target.shape() {
        return Err(Error::shape("reconstruction_mse", format!("{:?} vs {:?}", rec.shape(), target.shape())));
    }
    let n = rec.len() as f64;
    let diff = rec.sub(target);
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
    let drec = diff.scale(2.0 / n);
    let dtarget = drec.scale(-1.0);
    Ok((loss, drec, dtarget))
}

/// Monotone map from reconstruction error to `[0, 1]`: `1 − exp(−e/τ)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Calibration {
    pub tau: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration { tau: 1.0 }
    }
}

impl Calibration {
    /// Fits `τ` to the median of the given errors. Falls back to 1 when the
    /// median is not positive.
    pub fn fit(errors: &[f64]) -> Self {
        let mut e: Vec<f64> = errors.iter().copied().filter(|v| v.is_finite()).collect();
        if e.is_empty() {
            return Self::default();
        }
        e.sort_by(f64::total_cmp);
        let mid = e.len() / 2;
        let median = if e.len() % 2 == 0 { 0.5 * (e[mid - 1] + e[mid]) } else { e[mid] };
        if median > 0.0 {
            Calibration { tau: median }
        } else {
            Self::default()
        }
    }

    pub fn apply(&self, error: f64) -> f64 {
        1.0 - (-error.max(0.0) / self.tau).exp()
    }
}

/// Per-frame anomaly in `[0, 1]` from the two modalities' reconstruction errors.
pub fn anomaly_scores(err_v: &[f64], err_a: &[f64], calibration: &Calibration) -> Result<Vec<f64>> {
    if err_v.len() != err_a.len() {
        return Err(Error::shape("anomaly_scores", format!("{} vs {} frames", err_v.len(), err_a.len())));
    }
    if err_v.iter().chain(err_a).any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::InvalidParameter("reconstruction errors must be finite and non-negative".into()));
    }
    Ok(err_v.iter().zip(err_a).map(|(v, a)| calibration.apply(0.5 * (v + a))).collect())
}

/// Per-frame label for the contrastive term. `None` marks padding.
pub type FrameLabel = Option<bool>;

fn normalize_row(x: &[f64]) -> (Vec<f64>, f64) {
    let s = (x.iter().map(|v| v * v).sum::<f64>() + NORM_EPS).sqrt();
    (x.iter().map(|v| v / s).collect(), s)
}

/// Backward of `x / sqrt(|x|² + eps)`.
fn normalize_row_backward(x: &[f64], s: f64, dn: &[f64]) -> Vec<f64> {
    let dot: f64 = x.iter().zip(dn).map(|(a, b)| a * b).sum();
    let s3 = s * s * s;
    x.iter().zip(dn).map(|(xi, di)| di / s - xi * dot / s3).collect()
}

/// Margin contrastive loss on L2-normalized per-frame embeddings (rows are
/// frames). Genuine frames (`Some(true)`) contribute `d²`, fake frames
/// `max(0, m − d)²`; the sum is divided by the number of labelled frames.
/// Returns the loss and gradients for both inputs.
pub fn contrastive_loss(
    a: &Tensor2D,
    b: &Tensor2D,
    labels: &[FrameLabel],
    margin: f64,
) -> Result<(f64, Tensor2D, Tensor2D)> {
    if a.shape() != b.shape() || labels.len() != a.rows() {
        return Err(Error::shape(
            "contrastive_term",
            format!("{:?} vs {:?} with {} labels", a.shape(), b.shape(), labels.len()),
        ));
    }
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::InvalidParameter(format!("margin {margin} outside (0, 1]")));
    }
    let count = labels.iter().filter(|l| l.is_some()).count();
    let mut da = Tensor2D::zeros(a.rows(), a.cols());
    let mut db = Tensor2D::zeros(b.rows(), b.cols());
    if count == 0 {
        return Ok((0.0, da, db));
    }
    let inv = 1.0 / count as f64;
    let mut total = 0.0;
    for (t, label) in labels.iter().enumerate() {
        let Some(genuine) = *label else { continue };
        let (na, sa) = normalize_row(a.row(t));
        let (nb, sb) = normalize_row(b.row(t));
        let diff: Vec<f64> = na.iter().zip(&nb).map(|(x, y)| x - y).collect();
        let d2: f64 = diff.iter().map(|v| v * v).sum();
        let d = d2.sqrt();
        // dL/d(diff)
        let coef = if genuine {
            total += d2;
            2.0
        } else if d < margin {
            let gap = margin - d;
            total += gap * gap;
            if d > 0.0 {
                -2.0 * gap / d
            } else {
                0.0
            }
        } else {
            0.0
        };
        if coef != 0.0 {
            let dn: Vec<f64> = diff.iter().map(|v| v * coef * inv).collect();
            let neg: Vec<f64> = dn.iter().map(|v| -v).collect();
            da.row_mut(t).copy_from_slice(&normalize_row_backward(a.row(t), sa, &dn));
            db.row_mut(t).copy_from_slice(&normalize_row_backward(b.row(t), sb, &neg));
        }
    }
    Ok((total * inv, da, db))
}

/// Contrastive term between two feature sequences; `genuine[t]` is true for
/// frames where both modalities are authentic.
pub fn contrastive_term(z_v: &FeatureSequence, z_a: &FeatureSequence, genuine: &[bool], margin: f64) -> Result<f64> {
    let labels: Vec<FrameLabel> = genuine.iter().map(|&g| Some(g)).collect();
    contrastive_loss(&z_v.time_major(), &z_a.time_major(), &labels, margin).map(|(l, _, _)| l)
}
