use crate::config::PipelineConfig;
use crate::cratrans::{contrastive_loss, FrameLabel};
use crate::error::{Error, Result};
use crate::tensor::Tensor2D;

use super::BoundaryMap;

const PROB_CLAMP: f64 = 1e-12;

/// Mean binary cross-entropy with probabilities clamped to
/// `[1e-12, 1 − 1e-12]`. Returns the loss and `dL/dp` (zero where clamped).
pub fn binary_cross_entropy(probs: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if probs.len() != labels.len() {
        return Err(Error::shape("binary_cross_entropy", format!("{} probs vs {} labels", probs.len(), labels.len())));
    }
    if probs.is_empty() {
        return Ok((0.0, Vec::new()));
    }
    let n = probs.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        let clamped = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= y * clamped.ln() + (1.0 - y) * (1.0 - clamped).ln();
        grad.push(if clamped != p { 0.0 } else { ((1.0 - y) / (1.0 - p) - y / p) / n });
    }
    Ok((loss / n, grad))
}

/// Ground truth for one modality of one video.
#[derive(Debug, Clone)]
pub struct ModalityTargets {
    /// 0/1 per frame on the padded grid; only the first `valid_frames` count.
    pub frame_labels: Vec<f64>,
    /// `T × D_max` IoU target (see `gt_iou_map`).
    pub iou_map: Tensor2D,
    pub valid_frames: usize,
}

/// Everything the composite loss reads for one video. Index 0 is visual,
/// index 1 audio. Feature matrices are time-major.
pub struct CompositeInputs<'a> {
    pub frame_probs: [&'a [f64]; 2],
    pub fused_maps: [&'a BoundaryMap; 2],
    pub attended: [&'a Tensor2D; 2],
    pub reconstructed: [&'a Tensor2D; 2],
    pub targets: [&'a ModalityTargets; 2],
    /// Per-frame contrastive label; `None` for padding.
    pub contrastive_labels: &'a [FrameLabel],
}

/// Unweighted terms and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct LossBreakdown {
    pub frame: f64,
    pub boundary: f64,
    pub contrastive: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn recombine(&self, cfg: &PipelineConfig) -> f64 {
        cfg.frame_loss_weight * self.frame + cfg.boundary_loss_weight * self.boundary
            + cfg.contrastive_loss_weight * self.contrastive
    }
}

/// Gradients of the weighted total with respect to each input.
#[derive(Debug, Clone)]
pub struct CompositeGrads {
    pub frame_probs: [Vec<f64>; 2],
    /// Same layout as the maps; masked cells are zero.
    pub fused_maps: [Tensor2D; 2],
    pub attended: [Tensor2D; 2],
    pub reconstructed: [Tensor2D; 2],
}

/// `λ_f · L_frame + λ_b · L_boundary + λ_c · L_contrastive`.
///
/// `L_frame` averages BCE over valid frames of both modalities, `L_boundary`
/// is the masked MSE between fused and target maps averaged over the two
/// modalities, and `L_contrastive` averages the margin loss between each
/// modality's attended stream and its cross reconstruction.
pub fn composite_loss(inp: &CompositeInputs<'_>, cfg: &PipelineConfig) -> Result<(LossBreakdown, CompositeGrads)> {
    let mut br = LossBreakdown::default();
    let mut dprobs: [Vec<f64>; 2] = Default::default();
    let mut dmaps = [Tensor2D::zeros(0, 0), Tensor2D::zeros(0, 0)];
    let mut datt = [Tensor2D::zeros(0, 0), Tensor2D::zeros(0, 0)];
    let mut drec = [Tensor2D::zeros(0, 0), Tensor2D::zeros(0, 0)];

    for m in 0..2 {
        let tg = inp.targets[m];
        let probs = inp.frame_probs[m];
        let map = inp.fused_maps[m];
        let n = tg.valid_frames;
        if probs.len() != tg.frame_labels.len() || n > probs.len() {
            return Err(Error::shape(
                "composite_loss",
                format!("{} probs, {} labels, {} valid", probs.len(), tg.frame_labels.len(), n),
            ));
        }
        if map.map.shape() != tg.iou_map.shape() || map.valid_frames != n {
            return Err(Error::shape(
                "composite_loss",
                format!("map {:?}/{} vs target {:?}/{}", map.map.shape(), map.valid_frames, tg.iou_map.shape(), n),
            ));
        }

        let (bce, g) = binary_cross_entropy(&probs[..n], &tg.frame_labels[..n])?;
        br.frame += 0.5 * bce;
        let mut gp = vec![0.0; probs.len()];
        for (o, v) in gp.iter_mut().zip(g) {
            *o = 0.5 * cfg.frame_loss_weight * v;
        }
        dprobs[m] = gp;

        let cells = map.valid_cells().count();
        let mut dm = Tensor2D::zeros(map.map.rows(), map.map.cols());
        if cells > 0 {
            let scale = 1.0 / cells as f64;
            let mut sse = 0.0;
            for (s, d, v) in map.valid_cells() {
                let diff = v - tg.iou_map.get(s, d - 1);
                sse += diff * diff;
                dm.set(s, d - 1, cfg.boundary_loss_weight * 0.5 * 2.0 * diff * scale);
            }
            br.boundary += 0.5 * sse * scale;
        }
        dmaps[m] = dm;

        let (c, da, db) =
            contrastive_loss(inp.attended[m], inp.reconstructed[m], inp.contrastive_labels, cfg.contrastive_margin)?;
        br.contrastive += 0.5 * c;
        let w = 0.5 * cfg.contrastive_loss_weight;
        datt[m] = da.scale(w);
        drec[m] = db.scale(w);
    }
    br.total = br.recombine(cfg);
    if !br.total.is_finite() {
        return Err(Error::NonFinite(format!("composite loss {br:?}")));
    }
    Ok((br, CompositeGrads { frame_probs: dprobs, fused_maps: dmaps, attended: datt, reconstructed: drec }))
}
