//! File formats, the synthetic dataset generator and checkpoints. Every
//! write goes through a temp file followed by a rename.

mod atomic;
mod checkpoint;
mod manifest;
mod records;
mod synth;
mod tensor_file;

pub use atomic::{write_atomic, write_json_atomic};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MANIFEST};
pub use manifest::{load_manifest, DatasetManifest, ManifestEntry, Split};
pub use records::{load_annotations, load_predictions, save_annotations, save_predictions, PredictionRecord};
pub use synth::{generate_synthetic_dataset, SyntheticSpec};
pub use tensor_file::{header_path, load_feature_tensor, save_feature_tensor, Dtype, TensorHeader};
