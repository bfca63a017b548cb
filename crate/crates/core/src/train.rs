//! Mini-batch training with plain gradient descent or Adam, both with
//! decoupled weight decay. Per-video gradients run in parallel and are summed
//! in a fixed order, so results do not depend on the thread count.

use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{OptimizerKind, PipelineConfig};
use crate::error::{Error, Result};
use crate::heads::LossBreakdown;
use crate::io::{save_checkpoint, write_json_atomic, DatasetManifest, Split};
use crate::model::{sample_loss, Model, VideoSample};
use crate::tensor::ParamSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean over the epoch's batches, measured before each update.
    pub train: LossBreakdown,
    pub val: Option<LossBreakdown>,
}

/// Loads one split of a manifest onto the network grid.
pub fn load_samples(
    manifest: &DatasetManifest,
    split: Option<Split>,
    cfg: &PipelineConfig,
    with_targets: bool,
) -> Result<Vec<VideoSample>> {
    manifest
        .videos
        .iter()
        .filter(|e| split.map_or(true, |s| e.split == s))
        .map(|e| {
            let (v, a) = manifest.load_features(e)?;
            let ann = &e.annotation;
            VideoSample::new(&ann.file_id, ann.duration, &v, &a, with_targets.then_some(ann), cfg)
        })
        .collect()
}

fn add_breakdown(acc: &mut LossBreakdown, b: &LossBreakdown, w: f64) {
    acc.frame += w * b.frame;
    acc.boundary += w * b.boundary;
    acc.contrastive += w * b.contrastive;
    acc.total += w * b.total;
}

/// Mean loss over `samples` without gradients.
pub fn mean_loss(params: &ParamSet, cfg: &PipelineConfig, samples: &[VideoSample]) -> Result<LossBreakdown> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("loss samples"));
    }
    let parts: Vec<LossBreakdown> = samples
        .par_iter()
        .map(|s| sample_loss(params, cfg, s, false).map(|r| r.0))
        .collect::<Result<_>>()?;
    let mut acc = LossBreakdown::default();
    let w = 1.0 / samples.len() as f64;
    for p in &parts {
        add_breakdown(&mut acc, p, w);
    }
    Ok(acc)
}

enum Optimizer {
    Sgd,
    Adam { m: ParamSet, v: ParamSet, step: i32 },
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    fn new(kind: OptimizerKind, params: &ParamSet) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam { m: params.zeros_like(), v: params.zeros_like(), step: 0 },
        }
    }

    fn step(&mut self, params: &mut ParamSet, grads: &ParamSet, lr: f64, decay: f64) {
        match self {
            Optimizer::Sgd => {
                params.scale(1.0 - lr * decay);
                params.add_scaled(grads, -lr);
            }
            Optimizer::Adam { m, v, step } => {
                *step += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*step);
                let c2 = 1.0 - ADAM_BETA2.powi(*step);
                for (((_, p), (_, g)), ((_, mt), (_, vt))) in
                    params.iter_mut().zip(grads.iter()).zip(m.iter_mut().zip(v.iter_mut()))
                {
                    let (p, g, mt, vt) = (p.data_mut(), g.data(), mt.data_mut(), vt.data_mut());
                    for i in 0..p.len() {
                        mt[i] = ADAM_BETA1 * mt[i] + (1.0 - ADAM_BETA1) * g[i];
                        vt[i] = ADAM_BETA2 * vt[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                        let update = (mt[i] / c1) / ((vt[i] / c2).sqrt() + ADAM_EPS);
                        p[i] -= lr * (update + decay * p[i]);
                    }
                }
            }
        }
    }
}

/// Trains a fresh model from `cfg`, then fits its anomaly calibration on the
/// training samples.
pub fn train(cfg: &PipelineConfig, train: &[VideoSample], val: &[VideoSample]) -> Result<(Model, Vec<EpochLog>)> {
    let model = Model::new(cfg.clone())?;
    train_from(model, train, val)
}

/// Continues training `model` with its own config.
pub fn train_from(mut model: Model, train: &[VideoSample], val: &[VideoSample]) -> Result<(Model, Vec<EpochLog>)> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    let cfg = model.config.clone();
    let mut opt = Optimizer::new(cfg.optimizer, &model.params);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed ^ (epoch as u64).wrapping_mul(0xA24B_AED4_963E_E407));
        order.shuffle(&mut rng);
        let mut epoch_loss = LossBreakdown::default();
        let batches = order.chunks(cfg.batch_size.max(1)).count() as f64;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let results: Vec<(LossBreakdown, ParamSet)> = batch
                .par_iter()
                .map(|&i| {
                    let (b, g) = sample_loss(&model.params, &cfg, &train[i], true).map_err(|e| match e {
                        Error::NonFinite(msg) => {
                            Error::NonFinite(format!("epoch {epoch}, video {}: {msg}", train[i].video_id))
                        }
                        other => other,
                    })?;
                    Ok((b, g.expect("gradients requested")))
                })
                .collect::<Result<_>>()?;
            let w = 1.0 / batch.len() as f64;
            let mut grads = model.params.zeros_like();
            for (b, g) in &results {
                add_breakdown(&mut epoch_loss, b, w / batches);
                grads.add_scaled(g, w);
            }
            if !grads.is_finite() {
                return Err(Error::NonFinite(format!("gradient at epoch {epoch}")));
            }
            opt.step(&mut model.params, &grads, cfg.learning_rate, cfg.weight_decay);
            if !model.params.is_finite() {
                return Err(Error::NonFinite(format!("parameters after an update in epoch {epoch}")));
            }
        }
        let val_loss = if val.is_empty() { None } else { Some(mean_loss(&model.params, &cfg, val)?) };
        info!(
            "epoch {epoch}: total {:.6} frame {:.6} boundary {:.6} contrastive {:.6}{}",
            epoch_loss.total,
            epoch_loss.frame,
            epoch_loss.boundary,
            epoch_loss.contrastive,
            val_loss.map(|v| format!(" | val total {:.6}", v.total)).unwrap_or_default()
        );
        log.push(EpochLog { epoch, train: epoch_loss, val: val_loss });
    }
    model.calibrate(train)?;
    Ok((model, log))
}

/// Trains on the manifest's train split (validating on val), writes the
/// checkpoint and `training_log.json` into `checkpoint_out`.
pub fn run_training(manifest: &DatasetManifest, cfg: &PipelineConfig, checkpoint_out: &Path) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    let train_set = load_samples(manifest, Some(Split::Train), cfg, true)?;
    let val_set = load_samples(manifest, Some(Split::Val), cfg, true)?;
    info!("training on {} videos, validating on {}", train_set.len(), val_set.len());
    let (model, log) = train(cfg, &train_set, &val_set)?;
    save_checkpoint(checkpoint_out, &model)?;
    write_json_atomic(&checkpoint_out.join("training_log.json"), &log)?;
    Ok(log)
}
