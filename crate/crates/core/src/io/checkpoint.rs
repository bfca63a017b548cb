//! Checkpoint directory: `checkpoint.json` (config, calibration and the
//! tensor index) next to one `f64` tensor file per parameter.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_feature_tensor, save_feature_tensor, write_json_atomic, Dtype};
use crate::config::PipelineConfig;
use crate::cratrans::Calibration;
use crate::error::{Error, Result};
use crate::model::{init_params, Model};
use crate::tensor::ParamSet;

pub const CHECKPOINT_MANIFEST: &str = "checkpoint.json";
const FORMAT: &str = "avtfl-checkpoint-1";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointIndex {
    format: String,
    config: PipelineConfig,
    calibration: Calibration,
    tensors: Vec<TensorEntry>,
}

/// Writes every tensor, then the index; a crash mid-save leaves the old
/// index in place or none at all.
pub fn save_checkpoint(dir: &Path, model: &Model) -> Result<()> {
    fs::create_dir_all(dir.join("tensors")).map_err(|e| Error::io(dir, e))?;
    let mut tensors = Vec::with_capacity(model.params.len());
    for (i, (name, t)) in model.params.iter().enumerate() {
        let file = format!("tensors/{i:04}.f64");
        save_feature_tensor(&dir.join(&file), t, Dtype::F64)?;
        tensors.push(TensorEntry { name: name.to_string(), rows: t.rows(), cols: t.cols(), file });
    }
    let index =
        CheckpointIndex { format: FORMAT.into(), config: model.config.clone(), calibration: model.calibration, tensors };
    write_json_atomic(&dir.join(CHECKPOINT_MANIFEST), &index)
}

pub fn load_checkpoint(dir: &Path) -> Result<Model> {
    let path = dir.join(CHECKPOINT_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: CheckpointIndex =
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.clone(), message: e.to_string() })?;
    if index.format != FORMAT {
        return Err(Error::Checkpoint(format!("unknown format '{}'", index.format)));
    }
    index.config.validate()?;
    let mut params = ParamSet::new();
    for e in &index.tensors {
        let t = load_feature_tensor(&dir.join(&e.file))?;
        if t.shape() != (e.rows, e.cols) {
            return Err(Error::Checkpoint(format!("tensor {} has shape {:?}, index says {:?}", e.name, t.shape(), (e.rows, e.cols))));
        }
        params.insert(e.name.clone(), t)?;
    }
    if !params.same_layout(&init_params(&index.config)?) {
        return Err(Error::Checkpoint("parameter layout does not match the stored config".into()));
    }
    Ok(Model { config: index.config, params, calibration: index.calibration })
}
