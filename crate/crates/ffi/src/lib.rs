//! C ABI over the `avtfl` pipeline.
//!
//! Every fallible function returns an [`AvtflStatus`]; on failure the message
//! is available from [`avtfl_last_error`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function. Panics
//! never cross the boundary: they are reported as `AVTFL_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use avtfl::domain::{Modality, ScoredSegment, Segment};
use avtfl::encoders::RawModalitySequence;
use avtfl::eval::{evaluate_run, EvalOptions};
use avtfl::heads::VideoLabel;
use avtfl::infer::infer_video;
use avtfl::io::{
    generate_synthetic_dataset, load_checkpoint, load_manifest, save_checkpoint, Split, SyntheticSpec,
};
use avtfl::model::{Model, VideoSample};
use avtfl::postprocess::{soft_nms, ProposalList};
use avtfl::tensor::Tensor2D;
use avtfl::train::run_training;
use avtfl::{Error, PipelineConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvtflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    Config = 6,
    Shape = 7,
    NonFinite = 8,
    IdMismatch = 9,
    NoGroundTruth = 10,
    Checkpoint = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// Which annotation set `avtfl_evaluate` scores against.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvtflModality {
    Fused = 0,
    Visual = 1,
    Audio = 2,
}

/// Manifest split selector; `All` means every video.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvtflSplit {
    All = 0,
    Train = 1,
    Val = 2,
    Test = 3,
}

/// A scored temporal segment in seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvtflSegment {
    pub start: f64,
    pub end: f64,
    pub confidence: f64,
}

/// Headline metrics of one evaluation run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AvtflMetrics {
    pub ap_50: f64,
    pub ap_75: f64,
    pub ap_95: f64,
    pub ar_100: f64,
    pub ar_90: f64,
    pub ar_50: f64,
    pub ar_20: f64,
    pub ar_10: f64,
}

/// Opaque pipeline configuration.
pub struct AvtflConfig {
    inner: PipelineConfig,
}

/// Opaque trained model.
pub struct AvtflModel {
    inner: Model,
}

/// Opaque single-video prediction.
pub struct AvtflPrediction {
    fake: bool,
    segments: Vec<AvtflSegment>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AvtflStatus {
    match e {
        Error::Io { .. } => AvtflStatus::Io,
        Error::Parse { .. } | Error::TensorFormat { .. } | Error::Annotation { .. } => AvtflStatus::Parse,
        Error::Config(_) => AvtflStatus::Config,
        Error::Shape { .. } => AvtflStatus::Shape,
        Error::NonFinite(_) => AvtflStatus::NonFinite,
        Error::IdMismatch(_) => AvtflStatus::IdMismatch,
        Error::NoGroundTruth(_) => AvtflStatus::NoGroundTruth,
        Error::Checkpoint(_) => AvtflStatus::Checkpoint,
        _ => AvtflStatus::InvalidArgument,
    }
}

/// Internal failure: status plus message.
struct Fail(AvtflStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AvtflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AvtflStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            AvtflStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(AvtflStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(AvtflStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, Fail> {
    str_arg(p, name).map(PathBuf::from)
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(AvtflStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(AvtflStatus::NullPointer, format!("{name} is null")))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn avtfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn avtfl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- configuration ----

/// Full-scale defaults. `toy` selects the desk-scale preset instead.
#[no_mangle]
pub extern "C" fn avtfl_config_new(toy: bool) -> *mut AvtflConfig {
    let inner = if toy { PipelineConfig::toy() } else { PipelineConfig::default() };
    Box::into_raw(Box::new(AvtflConfig { inner }))
}

/// Reads a `key = value` config file. Unknown keys are an error.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avtfl_config_from_file(path: *const c_char, out: *mut *mut AvtflConfig) -> AvtflStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = PipelineConfig::from_file(&path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(AvtflConfig { inner: cfg }));
        Ok(())
    })
}

/// Sets one field by its config-file key, then revalidates.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn avtfl_config_set(
    cfg: *mut AvtflConfig,
    key: *const c_char,
    value: *const c_char,
) -> AvtflStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let mut next = cfg.inner.clone();
        if !next.set(key, value)? {
            return Err(Fail(AvtflStatus::Config, format!("unknown config key {key:?}")));
        }
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn avtfl_config_free(cfg: *mut AvtflConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

// ---- model ----

/// Loads a checkpoint directory.
///
/// # Safety
/// `dir` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avtfl_model_load(dir: *const c_char, out: *mut *mut AvtflModel) -> AvtflStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = load_checkpoint(&path_arg(dir, "dir")?)?;
        *out = Box::into_raw(Box::new(AvtflModel { inner: model }));
        Ok(())
    })
}

/// Writes the model as a checkpoint directory.
///
/// # Safety
/// `model` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn avtfl_model_save(model: *const AvtflModel, dir: *const c_char) -> AvtflStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        save_checkpoint(&path_arg(dir, "dir")?, &model.inner)?;
        Ok(())
    })
}

/// Copies the model's configuration into a new handle.
///
/// # Safety
/// `model` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn avtfl_model_config(model: *const AvtflModel, out: *mut *mut AvtflConfig) -> AvtflStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(AvtflConfig { inner: model.inner.config.clone() }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn avtfl_model_free(model: *mut AvtflModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

// ---- pipeline ----

/// Writes a synthetic dataset. `spec_json` may be null for defaults.
///
/// # Safety
/// Non-null string arguments must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn avtfl_synthesize(spec_json: *const c_char, out_dir: *const c_char) -> AvtflStatus {
    guard(|| {
        let spec: SyntheticSpec = if spec_json.is_null() {
            SyntheticSpec::default()
        } else {
            serde_json::from_str(str_arg(spec_json, "spec_json")?)
                .map_err(|e| Fail(AvtflStatus::Parse, format!("synthetic spec: {e}")))?
        };
        generate_synthetic_dataset(&spec, &path_arg(out_dir, "out_dir")?)?;
        Ok(())
    })
}

/// Trains on the manifest's train split and writes a checkpoint directory.
///
/// # Safety
/// `cfg` must come from this library; paths must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn avtfl_train(
    cfg: *const AvtflConfig,
    manifest: *const c_char,
    checkpoint_dir: *const c_char,
) -> AvtflStatus {
    guard(|| {
        let cfg = ref_arg(cfg, "cfg")?;
        let m = load_manifest(&path_arg(manifest, "manifest")?)?;
        run_training(&m, &cfg.inner, &path_arg(checkpoint_dir, "checkpoint_dir")?)?;
        Ok(())
    })
}

/// Runs inference over a manifest split and writes a predictions file.
/// `cfg` may be null to use the model's own configuration.
///
/// # Safety
/// Handles must come from this library; paths must be NUL-terminated;
/// `out_count` may be null.
#[no_mangle]
pub unsafe extern "C" fn avtfl_infer_manifest(
    model: *const AvtflModel,
    cfg: *const AvtflConfig,
    manifest: *const c_char,
    split: AvtflSplit,
    predictions_out: *const c_char,
    out_count: *mut usize,
) -> AvtflStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let cfg = cfg.as_ref().map_or(&model.inner.config, |c| &c.inner);
        let m = load_manifest(&path_arg(manifest, "manifest")?)?;
        let split = match split {
            AvtflSplit::All => None,
            AvtflSplit::Train => Some(Split::Train),
            AvtflSplit::Val => Some(Split::Val),
            AvtflSplit::Test => Some(Split::Test),
        };
        let recs = avtfl::infer::run_inference(&m, &model.inner, cfg, split, &path_arg(predictions_out, "predictions_out")?)?;
        if let Some(n) = out_count.as_mut() {
            *n = recs.len();
        }
        Ok(())
    })
}

unsafe fn raw_features(
    data: *const f64,
    dim: usize,
    frames: usize,
    modality: Modality,
) -> Result<RawModalitySequence, Fail> {
    if data.is_null() {
        return Err(Fail(AvtflStatus::NullPointer, format!("{modality} features are null")));
    }
    let len = dim
        .checked_mul(frames)
        .filter(|&n| n > 0)
        .ok_or_else(|| Fail(AvtflStatus::InvalidArgument, format!("{modality} features: bad size {dim}x{frames}")))?;
    let values = Tensor2D::from_vec(dim, frames, std::slice::from_raw_parts(data, len).to_vec())?;
    Ok(RawModalitySequence::new(modality, values)?)
}

/// Runs the full pipeline on one video. Features are row-major
/// `dim × frames` arrays of raw per-frame features.
///
/// # Safety
/// `model` must come from this library; `visual` and `audio` must point to
/// `visual_dim * visual_frames` and `audio_dim * audio_frames` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn avtfl_infer_features(
    model: *const AvtflModel,
    visual: *const f64,
    visual_dim: usize,
    visual_frames: usize,
    audio: *const f64,
    audio_dim: usize,
    audio_frames: usize,
    duration_seconds: f64,
    out: *mut *mut AvtflPrediction,
) -> AvtflStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let out = out_arg(out, "out")?;
        if !(duration_seconds.is_finite() && duration_seconds > 0.0) {
            return Err(Fail(AvtflStatus::InvalidArgument, format!("duration {duration_seconds} must be positive")));
        }
        let v = raw_features(visual, visual_dim, visual_frames, Modality::Visual)?;
        let a = raw_features(audio, audio_dim, audio_frames, Modality::Audio)?;
        let cfg = &model.inner.config;
        let sample = VideoSample::new("ffi", duration_seconds, &v, &a, None, cfg)?;
        let rec = infer_video(&model.inner, &sample, cfg)?;
        let segments =
            rec.segments.iter().map(|s| AvtflSegment { start: s.start, end: s.end, confidence: s.confidence }).collect();
        *out = Box::into_raw(Box::new(AvtflPrediction { fake: rec.label == VideoLabel::Fake, segments }));
        Ok(())
    })
}

/// Whether the video was classified fake. Null handles read as real.
///
/// # Safety
/// `pred` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn avtfl_prediction_is_fake(pred: *const AvtflPrediction) -> bool {
    pred.as_ref().is_some_and(|p| p.fake)
}

/// Number of segments, in descending confidence order.
///
/// # Safety
/// `pred` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn avtfl_prediction_len(pred: *const AvtflPrediction) -> usize {
    pred.as_ref().map_or(0, |p| p.segments.len())
}

/// Pointer to the segment array (`avtfl_prediction_len` entries), owned by
/// the handle.
///
/// # Safety
/// `pred` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn avtfl_prediction_segments(pred: *const AvtflPrediction) -> *const AvtflSegment {
    pred.as_ref().map_or(ptr::null(), |p| p.segments.as_ptr())
}

/// # Safety
/// `pred` must come from this library (or be null) and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn avtfl_prediction_free(pred: *mut AvtflPrediction) {
    if !pred.is_null() {
        drop(Box::from_raw(pred));
    }
}

/// Soft-NMS over `n` segments of a video of length `duration_seconds`. The
/// result (sorted by confidence) goes to `out`, which must hold `capacity`
/// entries; `out_len` receives the count. Input and output may alias.
///
/// # Safety
/// `segments` must point to `n` entries and `out` to `capacity` entries.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn avtfl_soft_nms(
    segments: *const AvtflSegment,
    n: usize,
    duration_seconds: f64,
    alpha: f64,
    t1: f64,
    t2: f64,
    out: *mut AvtflSegment,
    capacity: usize,
    out_len: *mut usize,
) -> AvtflStatus {
    guard(|| {
        let out_len = out_arg(out_len, "out_len")?;
        if n > 0 && segments.is_null() {
            return Err(Fail(AvtflStatus::NullPointer, "segments is null".into()));
        }
        let input = if n == 0 { &[][..] } else { std::slice::from_raw_parts(segments, n) };
        let proposals = input
            .iter()
            .map(|s| {
                let p = ScoredSegment::new(Segment::new(s.start, s.end)?, s.confidence, Modality::Fused);
                p.validate().map(|_| p)
            })
            .collect::<avtfl::Result<Vec<_>>>()?;
        let result = soft_nms(&ProposalList::new("ffi", duration_seconds, proposals), alpha, t1, t2)?;
        *out_len = result.proposals.len();
        if result.proposals.len() > capacity {
            return Err(Fail(
                AvtflStatus::BufferTooSmall,
                format!("need {} output slots, have {capacity}", result.proposals.len()),
            ));
        }
        if !result.proposals.is_empty() && out.is_null() {
            return Err(Fail(AvtflStatus::NullPointer, "out is null".into()));
        }
        for (i, p) in result.proposals.iter().enumerate() {
            out.add(i).write(AvtflSegment { start: p.start, end: p.end, confidence: p.confidence });
        }
        Ok(())
    })
}

/// Scores a predictions file against an annotations file. When `report_out`
/// is non-null the full JSON report is written there.
///
/// # Safety
/// Paths must be NUL-terminated (`report_out` may be null); `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn avtfl_evaluate(
    predictions: *const c_char,
    annotations: *const c_char,
    modality: AvtflModality,
    report_out: *const c_char,
    out: *mut AvtflMetrics,
) -> AvtflStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let modality = match modality {
            AvtflModality::Fused => Modality::Fused,
            AvtflModality::Visual => Modality::Visual,
            AvtflModality::Audio => Modality::Audio,
        };
        let opts = EvalOptions { modality, ..EvalOptions::default() };
        let rep = evaluate_run(&path_arg(predictions, "predictions")?, &path_arg(annotations, "annotations")?, &opts)?;
        if !report_out.is_null() {
            avtfl::io::write_json_atomic(&path_arg(report_out, "report_out")?, &rep)?;
        }
        let ap = |k: &str| rep.ap_at.get(k).copied().unwrap_or(f64::NAN);
        let ar = |k: usize| rep.ar_at.get(&k).copied().unwrap_or(f64::NAN);
        *out = AvtflMetrics {
            ap_50: ap("0.5"),
            ap_75: ap("0.75"),
            ap_95: ap("0.95"),
            ar_100: ar(100),
            ar_90: ar(90),
            ar_50: ar(50),
            ar_20: ar(20),
            ar_10: ar(10),
        };
        Ok(())
    })
}
