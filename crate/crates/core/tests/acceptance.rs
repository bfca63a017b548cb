//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the console.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use avtfl::config::PipelineConfig;
use avtfl::cratrans::{contrastive_loss, FeatureSequence, FrameLabel};
use avtfl::domain::{Modality, ScoredSegment, Segment};
use avtfl::eval::{ap_at_tiou, ar_at_k, ar_thresholds, evaluate, EvalOptions};
use avtfl::heads::{
    binary_cross_entropy, boundary_maps, boundary_params, classifier_backward, classifier_forward, classifier_params,
    composite_loss, enhance_features, enhance_params, BoundaryMap, CompositeInputs, FrameProbabilities,
    ModalityTargets, VideoLabel,
};
use avtfl::infer::{infer_samples, run_inference};
use avtfl::io::{generate_synthetic_dataset, load_checkpoint, DatasetManifest, Split, SyntheticSpec};
use avtfl::model::Model;
use avtfl::postprocess::{erf_decision, soft_nms, ProposalList};
use avtfl::tensor::{
    finite_diff_grad_check, multi_head_attention, multi_head_attention_backward, seeded_init, sigmoid, InitScheme,
    MhaWeights, ParamSet, Tensor2D,
};
use avtfl::train::{load_samples, run_training, train};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------- 1

fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let tious = ar_thresholds();
    let mut worst: f64 = 0.0;
    for seed in 0..500u64 {
        let videos = random_instance(90_000 + seed);
        for t in [0.5, 0.75, 0.95] {
            worst = worst.max((ap_at_tiou(&videos, t).unwrap() - oracle_ap(&videos, t)).abs());
        }
        for k in [1, 3, 100] {
            worst = worst.max((ar_at_k(&videos, k, &tious).unwrap() - oracle_ar(&videos, k, &tious)).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-9, format!("max deviation {worst:e} > 1e-9"))?;
    check(secs < 10.0, format!("took {secs:.2} s"))?;
    Ok(format!("500 instances, max |metric - oracle| = {worst:.1e}, {secs:.2} s"))
}

// ---------------------------------------------------------------- 2

const ALPHA: f64 = 0.7234;
const T1: f64 = 0.1968;
const T2: f64 = 0.4123;

fn sp(s: f64, e: f64, c: f64) -> ScoredSegment {
    ScoredSegment::new(Segment { start: s, end: e }, c, Modality::Fused)
}

fn soft_nms_contract() -> Outcome {
    let run = |p: Vec<ScoredSegment>| soft_nms(&ProposalList::new("v", 40.0, p), ALPHA, T1, T2).unwrap().proposals;
    check(run(vec![sp(1.0, 4.0, 0.7)]) == vec![sp(1.0, 4.0, 0.7)], "single proposal changed")?;
    let disjoint = run(vec![sp(0.0, 5.0, 0.9), sp(10.0, 15.0, 0.6)]);
    check(disjoint == vec![sp(0.0, 5.0, 0.9), sp(10.0, 15.0, 0.6)], format!("disjoint pair changed: {disjoint:?}"))?;
    let rescored = 0.8 * (-1.0f64 / ALPHA).exp();
    check((rescored - 0.2008).abs() < 5e-5 && rescored < T2, format!("oracle rescoring {rescored}"))?;
    let dup = run(vec![sp(0.0, 10.0, 0.9), sp(0.0, 10.0, 0.8)]);
    check(dup == vec![sp(0.0, 10.0, 0.9)], format!("duplicate case gave {dup:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for case in 0..200 {
        let n = rng.gen_range(0..12);
        let list: Vec<ScoredSegment> =
            (0..n).map(|_| ScoredSegment::new(random_segment(&mut rng, 40.0), rng.gen_range(0.0..1.0), Modality::Fused)).collect();
        let base = run(list.clone());
        let mut shuffled = list.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.gen_range(0..=i));
        }
        check(run(shuffled) == base, format!("case {case}: order dependence"))?;
        for out in &base {
            let raised = !list.iter().any(|p| p.start == out.start && p.end == out.end && out.confidence <= p.confidence);
            check(!raised, format!("case {case}: a score increased"))?;
        }
    }
    Ok(format!("3 examples exact (suppressed score {rescored:.4}), 200 random lists order-invariant, no score raised"))
}

// ---------------------------------------------------------------- 3

fn erf_rules() -> Outcome {
    let cfg = PipelineConfig::default();
    let list = |c: &[f64]| {
        ProposalList::new("v", 40.0, c.iter().enumerate().map(|(i, &c)| sp(i as f64, i as f64 + 1.0, c)).collect())
    };
    let cases: [(&[f64], VideoLabel, f64); 4] = [
        (&[0.4, 0.1], VideoLabel::Real, 0.95),
        (&[0.6, 0.2], VideoLabel::Fake, 0.55),
        (&[0.5], VideoLabel::Real, 0.95),
        (&[], VideoLabel::Real, 0.95),
    ];
    for (scores, label, appended) in cases {
        let input = list(scores);
        let (d, out) = erf_decision(&input, 40.0, &cfg);
        check(d.label == label, format!("max {scores:?}: label {:?}", d.label))?;
        check(out.proposals.len() == input.proposals.len() + 1, format!("{scores:?}: not exactly one appended"))?;
        let full = out.proposals.iter().filter(|p| p.start == 0.0 && p.end == 40.0 && p.confidence == appended).count();
        check(full == 1, format!("{scores:?}: no [0,40]@{appended}"))?;
        for p in &input.proposals {
            check(out.proposals.iter().any(|q| q.start == p.start && q.end == p.end && q.confidence == p.confidence), "original dropped")?;
        }
    }
    Ok("max 0.4 -> Real +[0,40]@0.95; max 0.6 -> Fake +[0,40]@0.55; max 0.5 and empty -> Real".into())
}

// ---------------------------------------------------------------- 4

fn grad_checks() -> Outcome {
    let start = Instant::now();
    let eps = 1e-5;
    let mut report = Vec::new();

    // composite loss over its differentiable inputs
    let (t, n, c) = (8, 6, 4);
    let u = |r, cc, s| seeded_init(r, cc, s, InitScheme::UniformScaled);
    let mut params = ParamSet::new();
    for m in 0..2u64 {
        params.insert(format!("p{m}"), u(t, 1, 1 + m).map(|v| 0.5 + 0.4 * v)).unwrap();
        params.insert(format!("map{m}"), u(t, t, 3 + m).map(|v| 0.5 + 0.4 * v)).unwrap();
        params.insert(format!("att{m}"), u(t, c, 5 + m)).unwrap();
        params.insert(format!("rec{m}"), u(t, c, 7 + m)).unwrap();
    }
    let targets: Vec<ModalityTargets> = (0..2u64)
        .map(|m| ModalityTargets {
            frame_labels: (0..t).map(|i| ((i as u64 + m) % 3 == 0) as u8 as f64).collect(),
            iou_map: u(t, t, 10 + m).map(f64::abs),
            valid_frames: n,
        })
        .collect();
    let labels: Vec<FrameLabel> = (0..t).map(|i| if i < n { Some(i % 4 != 1) } else { None }).collect();
    let cfg = PipelineConfig::default();
    let composite = |p: &ParamSet| {
        let probs: Vec<Vec<f64>> = (0..2).map(|m| p.get(&format!("p{m}")).data().to_vec()).collect();
        let maps: Vec<BoundaryMap> = (0..2)
            .map(|m| BoundaryMap {
                modality: [Modality::Visual, Modality::Audio][m],
                map: p.get(&format!("map{m}")).clone(),
                frame_seconds: 0.5,
                valid_frames: n,
            })
            .collect();
        let inputs = CompositeInputs {
            frame_probs: [&probs[0], &probs[1]],
            fused_maps: [&maps[0], &maps[1]],
            attended: [p.get("att0"), p.get("att1")],
            reconstructed: [p.get("rec0"), p.get("rec1")],
            targets: [&targets[0], &targets[1]],
            contrastive_labels: &labels,
        };
        let (b, g) = composite_loss(&inputs, &cfg)?;
        let mut out = p.zeros_like();
        for m in 0..2 {
            out.accumulate(&format!("p{m}"), &Tensor2D::from_vec(t, 1, g.frame_probs[m].clone())?);
            out.accumulate(&format!("map{m}"), &g.fused_maps[m]);
            out.accumulate(&format!("att{m}"), &g.attended[m]);
            out.accumulate(&format!("rec{m}"), &g.reconstructed[m]);
        }
        Ok((b.total, out))
    };
    report.push(("composite_loss", finite_diff_grad_check(composite, &params, eps).unwrap()));

    // contrastive term, with fake frames on both sides of the margin
    let mut cp = ParamSet::new();
    cp.insert("a", u(10, 6, 21)).unwrap();
    cp.insert("b", u(10, 6, 22)).unwrap();
    let clabels: Vec<FrameLabel> = (0..10).map(|i| Some(i % 3 != 0)).collect();
    let contrastive = |p: &ParamSet| {
        let (l, da, db) = contrastive_loss(p.get("a"), p.get("b"), &clabels, 0.99)?;
        Ok((l, ParamSet::new().with("a", da).with("b", db)))
    };
    report.push(("contrastive_term", finite_diff_grad_check(contrastive, &cp, eps).unwrap()));

    // multi-head attention: projections and both inputs
    let mut ap = ParamSet::new();
    for (i, k) in ["wq", "wk", "wv", "wo"].iter().enumerate() {
        ap.insert(*k, u(8, 8, 30 + i as u64)).unwrap();
    }
    ap.insert("xq", u(7, 8, 40).scale(3.0)).unwrap();
    ap.insert("xkv", u(9, 8, 41).scale(3.0)).unwrap();
    let probe = u(7, 8, 42);
    let attention = |p: &ParamSet| {
        let w = MhaWeights { wq: p.get("wq"), wk: p.get("wk"), wv: p.get("wv"), wo: p.get("wo") };
        let (out, cache) = multi_head_attention(p.get("xq"), p.get("xkv"), w, 2)?;
        let loss: f64 = out.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum();
        let g = multi_head_attention_backward(p.get("xq"), p.get("xkv"), w, &cache, &probe)?;
        Ok((
            loss,
            ParamSet::new()
                .with("wq", g.dwq)
                .with("wk", g.dwk)
                .with("wv", g.dwv)
                .with("wo", g.dwo)
                .with("xq", g.dxq)
                .with("xkv", g.dxkv),
        ))
    };
    report.push(("attention", finite_diff_grad_check(attention, &ap, eps).unwrap()));

    // frame classifier under BCE
    let z = u(12, 5, 50).scale(3.0);
    let y: Vec<f64> = (0..12).map(|i| (i % 2) as f64).collect();
    let classifier = |p: &ParamSet| {
        let probs: Vec<f64> = classifier_forward(&z, p)?.data().iter().map(|&l| sigmoid(l)).collect();
        let (l, dp) = binary_cross_entropy(&probs, &y)?;
        let dl: Vec<f64> = dp.iter().zip(&probs).map(|(g, p)| g * p * (1.0 - p)).collect();
        let mut g = p.zeros_like();
        classifier_backward(&z, p, &Tensor2D::from_vec(12, 1, dl)?, &mut g)?;
        Ok((l, g))
    };
    report.push(("frame classifier", finite_diff_grad_check(classifier, &classifier_params(5, 9), eps).unwrap()));

    let secs = start.elapsed().as_secs_f64();
    let summary: Vec<String> = report.iter().map(|(n, r)| format!("{n} {:.1e}", r.max_relative_error)).collect();
    for (name, r) in &report {
        check(r.max_relative_error <= 1e-4, format!("{name}: relative error {:e} ({:?})", r.max_relative_error, r.worst))?;
    }
    check(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!("max relative error: {}; {secs:.2} s", summary.join(", ")))
}

// ---------------------------------------------------------------- 5

fn structural(manifest: &DatasetManifest) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_row: f64 = 0.0;
    for trial in 0..20u64 {
        let x = seeded_init(16, 8, trial, InitScheme::UniformScaled).scale(rng.gen_range(1.0..20.0));
        let kv = seeded_init(12, 8, trial + 100, InitScheme::UniformScaled).scale(5.0);
        let w: Vec<Tensor2D> = (0..4).map(|i| seeded_init(8, 8, trial * 7 + i, InitScheme::UniformScaled)).collect();
        let (_, cache) = multi_head_attention(&x, &kv, MhaWeights { wq: &w[0], wk: &w[1], wv: &w[2], wo: &w[3] }, 4).unwrap();
        for h in cache.head_weights().chain(std::iter::once(&cache.mean_weights())) {
            for r in 0..h.rows() {
                worst_row = worst_row.max((h.row(r).iter().sum::<f64>() - 1.0).abs());
                check(h.row(r).iter().all(|&v| v >= 0.0), "negative attention weight")?;
            }
        }
    }
    check(worst_row <= 1e-10, format!("attention row sum off by {worst_row:e}"))?;

    let cfg = PipelineConfig::toy();
    let model = Model::new(cfg.clone()).unwrap();
    let samples = load_samples(manifest, None, &cfg, false).unwrap();
    let mut cells = 0usize;
    for s in &samples {
        let out = model.forward(s).unwrap();
        for m in [&out.visual.boundary, &out.audio.boundary] {
            for map in [&m.position, &m.channel, &m.fused] {
                check(map.same_mask(&m.fused), "maps disagree on validity mask")?;
                for (_, _, v) in map.valid_cells() {
                    check((0.0..=1.0).contains(&v), format!("valid cell value {v}"))?;
                    cells += 1;
                }
            }
        }
    }

    let z = FeatureSequence::from_time_major(Modality::Visual, &seeded_init(20, 6, 3, InitScheme::UniformScaled)).unwrap();
    let fp = FrameProbabilities { modality: Modality::Visual, probs: (0..20).map(|i| i as f64 / 20.0).collect() };
    let mut p = boundary_params(6, [8, 4], 11);
    p.get_mut("fuse.w").set(0, 0, 1.0);
    p.get_mut("fuse.w").set(0, 1, 0.0);
    let out = boundary_maps(&z, &fp, &p, 10, 0.5).unwrap();
    check(out.fused.map == out.position.map, "mixing (1,0) differs from position map")?;

    let zero = enhance_params(6, 1).zeros_like();
    check(enhance_features(&z, &zero).unwrap() == z, "zero-parameter enhancement is not the identity")?;
    Ok(format!(
        "attention rows within {worst_row:.1e} of 1; {cells} boundary cells in [0,1]; mixing (1,0) = position map; zero enhancement = identity"
    ))
}

// ---------------------------------------------------------------- 6

fn easy_spec(seed: u64, real_videos: usize) -> SyntheticSpec {
    SyntheticSpec { videos_per_mode: [12, 12, 12, real_videos], split_fractions: [0.5, 0.0], rng_seed: seed, ..SyntheticSpec::default() }
}

struct RunScore {
    ap50: f64,
    ar100: f64,
    untrained_ap50: f64,
    train_secs: f64,
}

fn end_to_end_run(seed: u64, real_videos: usize, dir: &Path) -> RunScore {
    let m = generate_synthetic_dataset(&easy_spec(seed, real_videos), dir).unwrap();
    let cfg = trainable_config(seed, 150);
    let train_set = load_samples(&m, Some(Split::Train), &cfg, true).unwrap();
    let test_set = load_samples(&m, Some(Split::Test), &cfg, false).unwrap();
    let gts = m.annotations(Some(Split::Test));
    let opts = EvalOptions::default();

    let mut untrained = Model::new(cfg.clone()).unwrap();
    untrained.calibrate(&train_set).unwrap();
    let before = evaluate(&infer_samples(&untrained, &test_set, &cfg).unwrap(), &gts, &opts).unwrap();

    let start = Instant::now();
    let (model, _) = train(&cfg, &train_set, &[]).unwrap();
    let train_secs = start.elapsed().as_secs_f64();
    let after = evaluate(&infer_samples(&model, &test_set, &cfg).unwrap(), &gts, &opts).unwrap();
    RunScore { ap50: after.ap_at["0.5"], ar100: after.ar_at[&100], untrained_ap50: before.ap_at["0.5"], train_secs }
}

fn median3(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn end_to_end() -> Outcome {
    let mut runs = Vec::new();
    for seed in 0..3 {
        let dir = tempfile::tempdir().unwrap();
        let r = end_to_end_run(seed, 0, dir.path());
        println!(
            "    seed {seed}: AP@0.5 {:.3}  AR@100 {:.3}  untrained AP@0.5 {:.3}  training {:.0} s",
            r.ap50, r.ar100, r.untrained_ap50, r.train_secs
        );
        runs.push(r);
    }
    let ap = median3(runs.iter().map(|r| r.ap50).collect());
    let ar = median3(runs.iter().map(|r| r.ar100).collect());
    let worst_untrained = runs.iter().map(|r| r.untrained_ap50).fold(0.0, f64::max);
    let slowest = runs.iter().map(|r| r.train_secs).fold(0.0, f64::max);
    check(ap >= 0.90, format!("median AP@0.5 {ap:.3} < 0.90"))?;
    check(ar >= 0.85, format!("median AR@100 {ar:.3} < 0.85"))?;
    check(worst_untrained <= 0.30, format!("untrained AP@0.5 {worst_untrained:.3} > 0.30"))?;
    check(slowest <= 300.0, format!("training took {slowest:.0} s"))?;
    Ok(format!(
        "median AP@0.5 {ap:.3}, median AR@100 {ar:.3}, untrained AP@0.5 <= {worst_untrained:.3}, training <= {slowest:.0} s per seed"
    ))
}

// ---------------------------------------------------------------- 7

fn determinism(work: &Path) -> Outcome {
    let spec = small_spec([2, 2, 2, 2], 31);
    let (a, b) = (work.join("synth_a"), work.join("synth_b"));
    generate_synthetic_dataset(&spec, &a).unwrap();
    generate_synthetic_dataset(&spec, &b).unwrap();
    check(snapshot(&a) == snapshot(&b), "synth outputs differ")?;

    let m = avtfl::io::load_manifest(&a.join("manifest.json")).unwrap();
    let cfg = trainable_config(2, 3);
    run_training(&m, &cfg, &work.join("ck_a")).unwrap();
    run_training(&m, &cfg, &work.join("ck_b")).unwrap();
    check(snapshot(&work.join("ck_a")) == snapshot(&work.join("ck_b")), "checkpoints differ")?;

    let model = load_checkpoint(&work.join("ck_a")).unwrap();
    run_inference(&m, &model, &cfg, None, &work.join("p_a.json")).unwrap();
    run_inference(&m, &model, &cfg, None, &work.join("p_b.json")).unwrap();
    let (pa, pb) = (std::fs::read(work.join("p_a.json")).unwrap(), std::fs::read(work.join("p_b.json")).unwrap());
    check(pa == pb, "predictions differ")?;
    Ok(format!("synth ({} files), train (checkpoint + log) and infer ({} bytes) bit-identical", snapshot(&a).len(), pa.len()))
}

// ---------------------------------------------------------------- 8

fn loss_weights() -> Outcome {
    let (t, n, c) = (8, 6, 3);
    let u = |r, cc, s| seeded_init(r, cc, s, InitScheme::UniformScaled);
    let targets: Vec<ModalityTargets> = (0..2u64)
        .map(|m| {
            let mut map = u(t, t, 60 + m).map(f64::abs);
            for s in 0..t {
                for d in 1..=t {
                    if s + d > n {
                        map.set(s, d - 1, 0.0);
                    }
                }
            }
            ModalityTargets { frame_labels: (0..t).map(|i| ((i as u64 + m) % 2) as f64).collect(), iou_map: map, valid_frames: n }
        })
        .collect();
    let att = [u(t, c, 70), u(t, c, 71)];
    let rec = [u(t, c, 72), u(t, c, 73)];
    let probs = [u(t, 1, 74).map(|v| 0.5 + 0.4 * v).data().to_vec(), u(t, 1, 75).map(|v| 0.5 + 0.4 * v).data().to_vec()];
    let maps: Vec<BoundaryMap> = (0..2)
        .map(|m| BoundaryMap { modality: Modality::Visual, map: u(t, t, 76 + m as u64).map(|v| 0.5 + 0.4 * v), frame_seconds: 0.5, valid_frames: n })
        .collect();
    let mixed: Vec<FrameLabel> = (0..t).map(|i| if i < n { Some(i % 3 != 0) } else { None }).collect();
    let cfg = PipelineConfig::default();
    check(
        (cfg.frame_loss_weight, cfg.boundary_loss_weight, cfg.contrastive_loss_weight) == (2.0, 1.0, 0.1),
        "default weights are not 2.0/1.0/0.1",
    )?;
    let (b, _) = composite_loss(
        &CompositeInputs {
            frame_probs: [&probs[0], &probs[1]],
            fused_maps: [&maps[0], &maps[1]],
            attended: [&att[0], &att[1]],
            reconstructed: [&rec[0], &rec[1]],
            targets: [&targets[0], &targets[1]],
            contrastive_labels: &mixed,
        },
        &cfg,
    )
    .unwrap();
    let gap = (b.total - (2.0 * b.frame + 1.0 * b.boundary + 0.1 * b.contrastive)).abs();
    check(gap <= 1e-12, format!("recombination gap {gap:e}"))?;

    let perfect_maps: Vec<BoundaryMap> =
        (0..2).map(|m| BoundaryMap { map: targets[m].iou_map.clone(), ..maps[m].clone() }).collect();
    let genuine: Vec<FrameLabel> = (0..t).map(|i| if i < n { Some(true) } else { None }).collect();
    let (p, _) = composite_loss(
        &CompositeInputs {
            frame_probs: [&targets[0].frame_labels, &targets[1].frame_labels],
            fused_maps: [&perfect_maps[0], &perfect_maps[1]],
            attended: [&att[0], &att[1]],
            reconstructed: [&att[0], &att[1]],
            targets: [&targets[0], &targets[1]],
            contrastive_labels: &genuine,
        },
        &cfg,
    )
    .unwrap();
    check(p.total <= 1e-6, format!("perfect-prediction total {:e}", p.total))?;
    Ok(format!("recombination gap {gap:.1e}; perfect predictions total {:.1e}", p.total))
}

// ---------------------------------------------------------------- informational

fn mixed_mode_note() {
    let dir = tempfile::tempdir().unwrap();
    let r = end_to_end_run(0, 12, dir.path());
    println!(
        "info: with 12 real videos added (seed 0): AP@0.5 {:.3}, AR@100 {:.3}; every real video receives the full-length 0.95 segment",
        r.ap50, r.ar100
    );
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let shared = generate_synthetic_dataset(&small_spec([1, 1, 1, 1], 77), &work.path().join("shared")).unwrap();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("metric oracle equivalence", Box::new(metric_oracle)),
        ("soft-NMS contract", Box::new(soft_nms_contract)),
        ("ERF rule fidelity", Box::new(erf_rules)),
        ("gradient integrity", Box::new(grad_checks)),
        ("structural invariants", Box::new(|| structural(&shared))),
        ("end-to-end synthetic localization", Box::new(end_to_end)),
        ("determinism", Box::new(|| determinism(work.path()))),
        ("loss-weight arithmetic", Box::new(loss_weights)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if std::env::var_os("AVTFL_ACCEPTANCE_SKIP_INFO").is_none() {
        mixed_mode_note();
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
