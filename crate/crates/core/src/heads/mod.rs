//! Feature enhancement, frame classifiers, boundary-map generation, the
//! video-level head and the weighted training loss.

mod boundary;
mod classifier;
mod enhance;
mod loss;
mod video;

pub use boundary::{
    boundary_backward, boundary_forward, boundary_maps, boundary_params, cell_count, gt_iou_map, BoundaryCache,
    BoundaryMap, BoundaryOutput,
};
pub use classifier::{classifier_backward, classifier_forward, classifier_params, frame_classify, FrameProbabilities};
pub use enhance::{enhance_backward, enhance_features, enhance_forward, enhance_params, EnhanceCache};
pub use loss::{binary_cross_entropy, composite_loss, CompositeGrads, CompositeInputs, LossBreakdown, ModalityTargets};
pub use video::{video_head, VideoDecision, VideoLabel};
