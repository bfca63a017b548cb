use serde::{Deserialize, Serialize};

use crate::cratrans::FeatureSequence;
use crate::domain::Modality;
use crate::error::{Error, Result};
use crate::tensor::{linear, linear_backward, seeded_init, sigmoid, InitScheme, ParamSet, Tensor2D};

/// Per-frame fake probabilities for one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameProbabilities {
    pub modality: Modality,
    pub probs: Vec<f64>,
}

/// Logistic-regression frame classifier: `w` is `C × 1`, `b` is `1 × 1`.
pub fn classifier_params(channels: usize, seed: u64) -> ParamSet {
    ParamSet::new()
        .with("w", seeded_init(channels, 1, seed.wrapping_mul(71).wrapping_add(5), InitScheme::UniformScaled))
        .with("b", Tensor2D::zeros(1, 1))
}

/// Returns per-frame logits (`T × 1`) for time-major features.
pub fn classifier_forward(z: &Tensor2D, p: &ParamSet) -> Result<Tensor2D> {
    if p.get("w").rows() != z.cols() {
        return Err(Error::shape("frame_classify", format!("{} channels vs w {:?}", z.cols(), p.get("w").shape())));
    }
    linear(z, p.get("w"), Some(p.get("b")))
}

/// Gradient w.r.t. the features given gradients on the logits.
pub fn classifier_backward(z: &Tensor2D, p: &ParamSet, dlogits: &Tensor2D, grads: &mut ParamSet) -> Result<Tensor2D> {
    let (dz, dw, db) = linear_backward(z, p.get("w"), dlogits)?;
    grads.accumulate("w", &dw);
    grads.accumulate("b", &db);
    Ok(dz)
}

/// `probs_t = sigmoid(w · z_t + b)`, independently per frame.
pub fn frame_classify(z: &FeatureSequence, params: &ParamSet) -> Result<FrameProbabilities> {
    let logits = classifier_forward(&z.time_major(), params)?;
    Ok(FrameProbabilities { modality: z.modality(), probs: logits.data().iter().map(|&l| sigmoid(l)).collect() })
}
