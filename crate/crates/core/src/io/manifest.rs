use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_feature_tensor, write_json_atomic};
use crate::domain::{validate_annotation, Modality, VideoAnnotation};
use crate::encoders::RawModalitySequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One video: its annotation and feature files (relative to the manifest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub annotation: VideoAnnotation,
    pub visual_features: PathBuf,
    pub audio_features: PathBuf,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Directory the feature paths are relative to; not serialized.
    #[serde(skip)]
    pub root: PathBuf,
    pub videos: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.videos.iter().filter(move |e| e.split == split)
    }

    pub fn annotations(&self, split: Option<Split>) -> Vec<VideoAnnotation> {
        self.videos.iter().filter(|e| split.map_or(true, |s| e.split == s)).map(|e| e.annotation.clone()).collect()
    }

    /// Loads both raw feature sequences of an entry (`input_dim × frames`).
    pub fn load_features(&self, entry: &ManifestEntry) -> Result<(RawModalitySequence, RawModalitySequence)> {
        let v = load_feature_tensor(&self.root.join(&entry.visual_features))?;
        let a = load_feature_tensor(&self.root.join(&entry.audio_features))?;
        Ok((RawModalitySequence::new(Modality::Visual, v)?, RawModalitySequence::new(Modality::Audio, a)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_atomic(path, self)
    }
}

/// Reads a manifest, validating every annotation and checking that every
/// referenced feature file and header exists.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })?;
    m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    for e in m.videos.iter_mut() {
        e.annotation = validate_annotation(e.annotation.clone())?;
        for f in [&e.visual_features, &e.audio_features] {
            let full = m.root.join(f);
            if !full.is_file() || !super::header_path(&full).is_file() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("video {}: missing feature file {}", e.annotation.file_id, full.display()),
                });
            }
        }
    }
    Ok(m)
}
