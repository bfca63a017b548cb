use serde::{Deserialize, Serialize};

use super::BoundaryMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VideoLabel {
    Real,
    Fake,
}

impl VideoLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            VideoLabel::Real => "real",
            VideoLabel::Fake => "fake",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoDecision {
    pub label: VideoLabel,
    pub video_confidence: f64,
}

/// Provisional video decision: the confidence is the maximum over the fused
/// frame scores and the valid cells of the fused map; fake iff above 0.5.
pub fn video_head(frame_scores: &[f64], fused_map: &BoundaryMap) -> VideoDecision {
    let conf = frame_scores
        .iter()
        .copied()
        .chain(fused_map.valid_cells().map(|c| c.2))
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .clamp(0.0, 1.0);
    let label = if conf > 0.5 { VideoLabel::Fake } else { VideoLabel::Real };
    VideoDecision { label, video_confidence: conf }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Modality;
    use crate::tensor::{seeded_init, InitScheme, Tensor2D};

    fn map(t: usize, f: impl Fn(usize, usize) -> f64) -> BoundaryMap {
        BoundaryMap { modality: Modality::Fused, map: Tensor2D::from_fn(t, t, f), frame_seconds: 1.0, valid_frames: t }
    }

    #[test]
    fn extremes() {
        let d = video_head(&[0.0; 5], &map(5, |_, _| 0.0));
        assert_eq!(d, VideoDecision { label: VideoLabel::Real, video_confidence: 0.0 });
        let d = video_head(&[0.0, 1.0, 0.0], &map(3, |_, _| 0.0));
        assert_eq!(d, VideoDecision { label: VideoLabel::Fake, video_confidence: 1.0 });
    }

    #[test]
    fn matches_exhaustive_scan() {
        let t = 9;
        let r = seeded_init(t, t, 4, InitScheme::UniformScaled);
        let m = map(t, |i, j| 0.5 + r.get(i, j));
        let scores: Vec<f64> = (0..t).map(|i| 0.3 + 0.05 * i as f64).collect();
        let mut best = 0.0f64;
        for s in 0..t {
            for d in 1..=t - s {
                best = best.max(m.map.get(s, d - 1));
            }
        }
        for &v in &scores {
            best = best.max(v);
        }
        assert_eq!(video_head(&scores, &m).video_confidence, best);
    }
}
