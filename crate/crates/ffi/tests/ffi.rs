use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use avtfl_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn cpath(p: &Path) -> CString {
    c(p.to_str().unwrap())
}

fn last_error() -> String {
    let p = avtfl_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn seg(start: f64, end: f64, confidence: f64) -> AvtflSegment {
    AvtflSegment { start, end, confidence }
}

#[test]
fn config_set_validates_and_reports_unknown_keys() {
    let cfg = avtfl_config_new(true);
    unsafe {
        assert_eq!(avtfl_config_set(cfg, c("epochs").as_ptr(), c("3").as_ptr()), AvtflStatus::Ok);
        assert!(avtfl_last_error().is_null());
        assert_eq!(avtfl_config_set(cfg, c("no_such_key").as_ptr(), c("1").as_ptr()), AvtflStatus::Config);
        assert!(last_error().contains("no_such_key"));
        // nms_t2 must stay below 1
        assert_eq!(avtfl_config_set(cfg, c("nms_t2").as_ptr(), c("1.5").as_ptr()), AvtflStatus::Config);
        assert_eq!(avtfl_config_set(ptr::null_mut(), c("epochs").as_ptr(), c("1").as_ptr()), AvtflStatus::NullPointer);
        avtfl_config_free(cfg);
        avtfl_config_free(ptr::null_mut());
    }
}

#[test]
fn config_from_missing_file_is_io_error() {
    let mut out = ptr::null_mut();
    let st = unsafe { avtfl_config_from_file(c("/nonexistent/cfg.txt").as_ptr(), &mut out) };
    assert_eq!(st, AvtflStatus::Io);
    assert!(out.is_null());
    assert!(last_error().contains("/nonexistent/cfg.txt"));
}

#[test]
fn soft_nms_matches_core_and_handles_buffers() {
    let input = [seg(0.0, 2.0, 0.9), seg(0.1, 2.0, 0.8), seg(5.0, 6.0, 0.7)];
    let mut out = [seg(0.0, 0.0, 0.0); 3];
    let mut len = 0usize;
    let st = unsafe {
        avtfl_soft_nms(input.as_ptr(), 3, 10.0, 0.7234, 0.1968, 0.4123, out.as_mut_ptr(), 3, &mut len)
    };
    assert_eq!(st, AvtflStatus::Ok);
    // runner-up has IoU 0.95 with the leader: 0.8 * exp(-0.95^2 / 0.7234) ~= 0.23 < t2, so it is dropped
    assert_eq!(len, 2);
    assert_eq!(out[0], seg(0.0, 2.0, 0.9));
    assert_eq!(out[1], seg(5.0, 6.0, 0.7));

    let mut small = [seg(0.0, 0.0, 0.0); 1];
    let st = unsafe {
        avtfl_soft_nms(input.as_ptr(), 3, 10.0, 0.7234, 0.1968, 0.4123, small.as_mut_ptr(), 1, &mut len)
    };
    assert_eq!(st, AvtflStatus::BufferTooSmall);
    assert_eq!(len, 2);

    let bad = [seg(2.0, 1.0, 0.5)];
    let st = unsafe { avtfl_soft_nms(bad.as_ptr(), 1, 10.0, 0.7, 0.2, 0.4, out.as_mut_ptr(), 3, &mut len) };
    assert_eq!(st, AvtflStatus::InvalidArgument);

    let st = unsafe { avtfl_soft_nms(ptr::null(), 0, 10.0, 0.7, 0.2, 0.4, ptr::null_mut(), 0, &mut len) };
    assert_eq!(st, AvtflStatus::Ok);
    assert_eq!(len, 0);
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let ckpt = dir.path().join("ckpt");
    let preds = dir.path().join("pred.json");
    let spec = c(r#"{"videos_per_mode":[2,2,2,2],"rng_seed":7}"#);
    unsafe {
        assert_eq!(avtfl_synthesize(spec.as_ptr(), cpath(&data).as_ptr()), AvtflStatus::Ok);
        assert_eq!(avtfl_synthesize(c("{\"bogus\":1}").as_ptr(), cpath(&data).as_ptr()), AvtflStatus::Parse);

        let cfg = avtfl_config_new(true);
        assert_eq!(avtfl_config_set(cfg, c("epochs").as_ptr(), c("1").as_ptr()), AvtflStatus::Ok);
        let manifest = cpath(&data.join("manifest.json"));
        assert_eq!(avtfl_train(cfg, manifest.as_ptr(), cpath(&ckpt).as_ptr()), AvtflStatus::Ok);
        avtfl_config_free(cfg);

        let mut model = ptr::null_mut();
        assert_eq!(avtfl_model_load(cpath(&ckpt).as_ptr(), &mut model), AvtflStatus::Ok);
        let mut count = 0usize;
        let st = avtfl_infer_manifest(
            model,
            ptr::null(),
            manifest.as_ptr(),
            AvtflSplit::All,
            cpath(&preds).as_ptr(),
            &mut count,
        );
        assert_eq!(st, AvtflStatus::Ok);
        assert_eq!(count, 8);

        let mut metrics = AvtflMetrics::default();
        let report = dir.path().join("report.json");
        let st = avtfl_evaluate(
            cpath(&preds).as_ptr(),
            cpath(&data.join("annotations.json")).as_ptr(),
            AvtflModality::Fused,
            cpath(&report).as_ptr(),
            &mut metrics,
        );
        assert_eq!(st, AvtflStatus::Ok);
        assert!(report.exists());
        for v in [metrics.ap_50, metrics.ap_75, metrics.ap_95, metrics.ar_100, metrics.ar_10] {
            assert!((0.0..=1.0).contains(&v), "{metrics:?}");
        }

        // single-video path: 16-dim features at 8 fps for 4 s
        let frames = 32;
        let visual: Vec<f64> = (0..16 * frames).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        let audio: Vec<f64> = (0..16 * frames).map(|i| ((i * 5 % 11) as f64 - 5.0) / 5.0).collect();
        let mut pred = ptr::null_mut();
        let st = avtfl_infer_features(model, visual.as_ptr(), 16, frames, audio.as_ptr(), 16, frames, 4.0, &mut pred);
        assert_eq!(st, AvtflStatus::Ok, "{}", last_error());
        let n = avtfl_prediction_len(pred);
        assert!(n > 0);
        let segs = std::slice::from_raw_parts(avtfl_prediction_segments(pred), n);
        for w in segs.windows(2) {
            assert!(w[0].confidence >= w[1].confidence);
        }
        for s in segs {
            assert!(0.0 <= s.start && s.start < s.end && s.end <= 4.0 + 1e-9);
        }
        let _ = avtfl_prediction_is_fake(pred);
        avtfl_prediction_free(pred);

        // wrong feature width is a shape error, not a crash
        let st = avtfl_infer_features(model, visual.as_ptr(), 8, 2 * frames, audio.as_ptr(), 16, frames, 4.0, &mut pred);
        assert_ne!(st, AvtflStatus::Ok);
        assert_ne!(st, AvtflStatus::Panic);

        let resaved = dir.path().join("ckpt2");
        assert_eq!(avtfl_model_save(model, cpath(&resaved).as_ptr()), AvtflStatus::Ok);
        let mut cfg_out = ptr::null_mut();
        assert_eq!(avtfl_model_config(model, &mut cfg_out), AvtflStatus::Ok);
        avtfl_config_free(cfg_out);
        avtfl_model_free(model);
    }
}

#[test]
fn evaluate_reports_id_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let preds = dir.path().join("p.json");
    let gts = dir.path().join("g.json");
    std::fs::write(
        &preds,
        r#"[{"video_id":"x","duration":4.0,"label":"fake","segments":[{"start":0.0,"end":1.0,"confidence":0.5,"modality":"fused"}]}]"#,
    )
    .unwrap();
    std::fs::write(
        &gts,
        r#"[{"file_id":"y","duration":4.0,"visual_fake_periods":[[0.0,1.0]],"audio_fake_periods":[[0.0,1.0]],"mode":"both_fake"}]"#,
    )
    .unwrap();
    let mut m = AvtflMetrics::default();
    let st = unsafe {
        avtfl_evaluate(cpath(&preds).as_ptr(), cpath(&gts).as_ptr(), AvtflModality::Fused, ptr::null(), &mut m)
    };
    assert_eq!(st, AvtflStatus::IdMismatch, "{}", last_error());
}

#[test]
fn header_is_current_and_compiles_as_c() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/avtfl.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "avtfl_last_error",
        "avtfl_config_new",
        "avtfl_model_load",
        "avtfl_infer_features",
        "avtfl_soft_nms",
        "avtfl_evaluate",
        "AVTFL_STATUS_BUFFER_TOO_SMALL",
    ] {
        assert!(text.contains(sym), "header lacks {sym}");
    }
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping compile check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "avtfl.h"
int main(void) {
    AvtflSegment in[2] = {{0.0, 2.0, 0.9}, {0.5, 2.0, 0.8}};
    AvtflSegment out[2];
    size_t n = 0;
    AvtflStatus st = avtfl_soft_nms(in, 2, 10.0, 0.7234, 0.1968, 0.4123, out, 2, &n);
    return (st == AVTFL_STATUS_OK && n == 2) ? 0 : 1;
}
"#,
    )
    .unwrap();
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(root.join("include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success(), "header does not compile as C99");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
