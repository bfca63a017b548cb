//! Domain types shared by every stage: time segments, scored proposals and
//! ground-truth annotations.
//!
//! Segments are always expressed in seconds. Frame indices only exist inside
//! the network and are converted at the boundary map / annotation edges.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A half-open time interval `[start, end]` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Segment {
    pub start: f64,
    pub end: f64,
}

impl From<[f64; 2]> for Segment {
    fn from([start, end]: [f64; 2]) -> Self {
        Segment { start, end }
    }
}

impl From<Segment> for [f64; 2] {
    fn from(s: Segment) -> Self {
        [s.start, s.end]
    }
}

impl Segment {
    /// Builds a segment, rejecting non-finite, negative or zero-length intervals.
    pub fn new(start: f64, end: f64) -> Result<Self> {
        let s = Segment { start, end };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.start.is_finite() && self.end.is_finite() && self.start >= 0.0 && self.start < self.end {
            Ok(())
        } else {
            Err(Error::InvalidSegment { start: self.start, end: self.end })
        }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn iou(&self, other: &Segment) -> f64 {
        iou(self, other)
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// Temporal intersection over union. Zero for disjoint or touching segments.
pub fn iou(a: &Segment, b: &Segment) -> f64 {
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.length() + b.length() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Intersects `s` with `[0, duration]`. Returns `None` when nothing of
/// positive length remains.
pub fn clamp_segment(s: Segment, duration: f64) -> Option<Segment> {
    let start = s.start.max(0.0);
    let end = s.end.min(duration);
    (start < end).then_some(Segment { start, end })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Audio,
    Visual,
    Fused,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Visual => "visual",
            Modality::Fused => "fused",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A proposal: a segment with a confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub start: f64,
    pub end: f64,
    pub confidence: f64,
    pub modality: Modality,
}

impl ScoredSegment {
    pub fn new(segment: Segment, confidence: f64, modality: Modality) -> Self {
        ScoredSegment { start: segment.start, end: segment.end, confidence, modality }
    }

    pub fn segment(&self) -> Segment {
        Segment { start: self.start, end: self.end }
    }

    pub fn validate(&self) -> Result<()> {
        self.segment().validate()?;
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidParameter(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgeryMode {
    BothFake,
    AudioFakeVideoReal,
    AudioRealVideoFake,
    Real,
}

impl ForgeryMode {
    pub const ALL: [ForgeryMode; 4] = [
        ForgeryMode::BothFake,
        ForgeryMode::AudioFakeVideoReal,
        ForgeryMode::AudioRealVideoFake,
        ForgeryMode::Real,
    ];

    pub fn audio_fake(self) -> bool {
        matches!(self, ForgeryMode::BothFake | ForgeryMode::AudioFakeVideoReal)
    }

    pub fn visual_fake(self) -> bool {
        matches!(self, ForgeryMode::BothFake | ForgeryMode::AudioRealVideoFake)
    }
}

/// Ground truth for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoAnnotation {
    pub file_id: String,
    pub duration: f64,
    pub visual_fake_periods: Vec<Segment>,
    pub audio_fake_periods: Vec<Segment>,
    pub mode: ForgeryMode,
}

impl VideoAnnotation {
    pub fn periods(&self, modality: Modality) -> Vec<Segment> {
        match modality {
            Modality::Audio => self.audio_fake_periods.clone(),
            Modality::Visual => self.visual_fake_periods.clone(),
            Modality::Fused => self.fused_periods(),
        }
    }

    /// Union of audio and visual fake periods; identical periods appear once.
    pub fn fused_periods(&self) -> Vec<Segment> {
        let mut out: Vec<Segment> = Vec::new();
        for p in self.visual_fake_periods.iter().chain(&self.audio_fake_periods) {
            if !out.iter().any(|q| q == p) {
                out.push(*p);
            }
        }
        out
    }
}

/// Checks every annotation invariant, clamping periods into `[0, duration]`.
pub fn validate_annotation(mut record: VideoAnnotation) -> Result<VideoAnnotation> {
    let fail = |reason: String| Error::Annotation { file_id: record.file_id.clone(), reason };
    if record.file_id.is_empty() {
        return Err(fail("empty file_id".into()));
    }
    if !(record.duration.is_finite() && record.duration > 0.0) {
        return Err(fail(format!("duration {} must be positive", record.duration)));
    }
    let duration = record.duration;
    let clamp_all = |periods: &[Segment], which: &str| -> Result<Vec<Segment>> {
        periods
            .iter()
            .map(|p| {
                if !(p.start.is_finite() && p.end.is_finite()) || p.start >= p.end {
                    return Err(fail(format!("{which} period {p} is degenerate")));
                }
                clamp_segment(*p, duration)
                    .ok_or_else(|| fail(format!("{which} period {p} lies outside [0, {duration}]")))
            })
            .collect()
    };
    let visual = clamp_all(&record.visual_fake_periods, "visual")?;
    let audio = clamp_all(&record.audio_fake_periods, "audio")?;

    match record.mode {
        ForgeryMode::Real if !visual.is_empty() || !audio.is_empty() => {
            return Err(fail("mode=real but fake periods are present".into()));
        }
        ForgeryMode::AudioFakeVideoReal if !visual.is_empty() => {
            return Err(fail("mode=audio_fake_video_real but visual fake periods are present".into()));
        }
        ForgeryMode::AudioRealVideoFake if !audio.is_empty() => {
            return Err(fail("mode=audio_real_video_fake but audio fake periods are present".into()));
        }
        _ => {}
    }
    record.visual_fake_periods = visual;
    record.audio_fake_periods = audio;
    Ok(record)
}
