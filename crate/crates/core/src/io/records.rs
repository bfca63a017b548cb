use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_json_atomic;
use crate::domain::{validate_annotation, ScoredSegment, VideoAnnotation};
use crate::error::{Error, Result};
use crate::heads::VideoLabel;

/// One video's final segment list as written by inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub video_id: String,
    pub duration: f64,
    pub label: VideoLabel,
    pub segments: Vec<ScoredSegment>,
}

fn read_array(path: &Path) -> Result<Vec<serde_json::Value>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })
}

fn record_id(v: &serde_json::Value, key: &str) -> String {
    v.get(key).and_then(|s| s.as_str()).unwrap_or("?").to_string()
}

/// Parses and validates a JSON array of annotations, keeping file order.
pub fn load_annotations(path: &Path) -> Result<Vec<VideoAnnotation>> {
    read_array(path)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let id = record_id(&v, "file_id");
            let rec: VideoAnnotation = serde_json::from_value(v).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("record {i} ({id}): {e}"),
            })?;
            validate_annotation(rec)
        })
        .collect()
}

pub fn save_annotations(path: &Path, records: &[VideoAnnotation]) -> Result<()> {
    write_json_atomic(path, records)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    read_array(path)?
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let id = record_id(&v, "video_id");
            let rec: PredictionRecord = serde_json::from_value(v).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("record {i} ({id}): {e}"),
            })?;
            for s in &rec.segments {
                s.validate().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    message: format!("record {i} ({id}): {e}"),
                })?;
            }
            Ok(rec)
        })
        .collect()
}

pub fn save_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    write_json_atomic(path, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ForgeryMode, Modality, Segment};

    #[test]
    fn empty_array_and_invalid_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        fs::write(&p, "[]").unwrap();
        assert!(load_annotations(&p).unwrap().is_empty());
        fs::write(
            &p,
            r#"[{"file_id": "clip7", "duration": 10.0, "visual_fake_periods": [[1.0, 2.0]],
                 "audio_fake_periods": [], "mode": "real"}]"#,
        )
        .unwrap();
        let err = load_annotations(&p).unwrap_err().to_string();
        assert!(err.contains("clip7"), "{err}");
        fs::write(&p, "[{").unwrap();
        assert!(matches!(load_annotations(&p), Err(Error::Parse { .. })));
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pred.json");
        let recs = vec![PredictionRecord {
            video_id: "v1".into(),
            duration: 8.0,
            label: VideoLabel::Fake,
            segments: vec![ScoredSegment::new(Segment { start: 1.0, end: 2.5 }, 0.75, Modality::Fused)],
        }];
        save_predictions(&p, &recs).unwrap();
        assert_eq!(load_predictions(&p).unwrap(), recs);
        let ann = vec![VideoAnnotation {
            file_id: "v1".into(),
            duration: 8.0,
            visual_fake_periods: vec![Segment { start: 1.0, end: 2.0 }],
            audio_fake_periods: vec![],
            mode: ForgeryMode::AudioRealVideoFake,
        }];
        save_annotations(&p, &ann).unwrap();
        assert_eq!(load_annotations(&p).unwrap(), ann);
    }
}
