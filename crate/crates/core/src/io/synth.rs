//! Seeded synthetic dataset: genuine frames come from a shared latent AR(1)
//! Gaussian process projected into each modality plus noise; fake windows
//! add a fixed per-modality mean shift of the configured strength.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{save_annotations, save_feature_tensor, write_json_atomic, DatasetManifest, Dtype, ManifestEntry, Split};
use crate::domain::{ForgeryMode, Segment, VideoAnnotation};
use crate::error::{Error, Result};
use crate::tensor::Tensor2D;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    /// Videos per mode, in the order both_fake, audio_fake_video_real,
    /// audio_real_video_fake, real.
    pub videos_per_mode: [usize; 4],
    /// Seconds, inclusive range.
    pub duration_range: [f64; 2],
    /// Fake windows per faked modality, inclusive range.
    pub window_count: [usize; 2],
    /// Window length in seconds, inclusive range.
    pub window_seconds: [f64; 2],
    pub visual_dim: usize,
    pub audio_dim: usize,
    /// Native frame rate of the emitted features.
    pub fps: f64,
    pub latent_dim: usize,
    /// AR(1) coefficient of the latent process.
    pub latent_correlation: f64,
    pub noise: f64,
    /// Length of the mean shift applied inside fake windows.
    pub strength: f64,
    /// Train and validation fractions; the rest is test.
    pub split_fractions: [f64; 2],
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            videos_per_mode: [8, 8, 8, 8],
            duration_range: [6.0, 8.0],
            window_count: [1, 2],
            window_seconds: [0.75, 2.0],
            visual_dim: 16,
            audio_dim: 16,
            fps: 8.0,
            latent_dim: 8,
            latent_correlation: 0.9,
            noise: 0.3,
            strength: 3.0,
            split_fractions: [0.6, 0.2],
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("synthetic spec: {m}")));
        let [d0, d1] = self.duration_range;
        let [w0, w1] = self.window_seconds;
        let [c0, c1] = self.window_count;
        if !(d0 > 0.0 && d0 <= d1 && d1.is_finite()) {
            return bad("duration range must satisfy 0 < min <= max");
        }
        if !(w0 > 0.0 && w0 <= w1) {
            return bad("window length range must satisfy 0 < min <= max");
        }
        if c0 > c1 {
            return bad("window count range is inverted");
        }
        if c1 > 0 && (c1 as f64) * w1 > d0 {
            return bad("the largest windows cannot fit in the shortest video");
        }
        if !(self.strength > 0.0) {
            return bad("strength must be positive");
        }
        if !(self.fps > 0.0) || self.visual_dim == 0 || self.audio_dim == 0 || self.latent_dim == 0 {
            return bad("fps and dimensions must be positive");
        }
        if !(self.noise >= 0.0) || !(self.latent_correlation.abs() < 1.0) {
            return bad("noise must be non-negative and |latent_correlation| < 1");
        }
        let [a, b] = self.split_fractions;
        if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0) {
            return bad("split fractions must be non-negative and sum to at most 1");
        }
        Ok(())
    }

    pub fn total_videos(&self) -> usize {
        self.videos_per_mode.iter().sum()
    }

    /// Expected number of fake windows per video over the mode mix.
    pub fn expected_windows_per_video(&self) -> f64 {
        let n = self.total_videos() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let faked: f64 = ForgeryMode::ALL
            .iter()
            .zip(self.videos_per_mode)
            .map(|(m, c)| c as f64 * (m.audio_fake() as u8 + m.visual_fake() as u8) as f64)
            .sum();
        let mean_count = 0.5 * (self.window_count[0] + self.window_count[1]) as f64;
        faked / n * mean_count
    }

    /// Expected fraction of modality-time covered by fake windows.
    pub fn expected_fake_fraction(&self) -> f64 {
        let mean_len = 0.5 * (self.window_seconds[0] + self.window_seconds[1]);
        let mean_dur = 0.5 * (self.duration_range[0] + self.duration_range[1]);
        self.expected_windows_per_video() * mean_len / (2.0 * mean_dur)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / n).collect()
}

/// Non-overlapping windows on the native frame grid, as frame ranges.
fn draw_windows(spec: &SyntheticSpec, frames: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let count = rng.gen_range(spec.window_count[0]..=spec.window_count[1]);
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 1000 {
        tries += 1;
        let secs = rng.gen_range(spec.window_seconds[0]..=spec.window_seconds[1]);
        let len = ((secs * spec.fps).round() as usize).clamp(1, frames);
        let start = rng.gen_range(0..=frames - len);
        // keep a one-frame gap so windows never touch
        if out.iter().all(|&(s, e)| start + len < s || start > e) {
            out.push((start, start + len));
        }
    }
    out.sort_unstable();
    out
}

struct Projection {
    visual: Tensor2D,
    audio: Tensor2D,
    shift_visual: Vec<f64>,
    shift_audio: Vec<f64>,
}

fn synth_modality(
    latent: &[Vec<f64>],
    proj: &Tensor2D,
    shift: &[f64],
    windows: &[(usize, usize)],
    spec: &SyntheticSpec,
    rng: &mut ChaCha8Rng,
) -> Tensor2D {
    let frames = latent.len();
    let dim = proj.rows();
    let mut x = Tensor2D::zeros(dim, frames);
    for (t, z) in latent.iter().enumerate() {
        let fake = windows.iter().any(|&(s, e)| t >= s && t < e);
        for r in 0..dim {
            let mut v: f64 = proj.row(r).iter().zip(z).map(|(a, b)| a * b).sum();
            v += spec.noise * gaussian(rng);
            if fake {
                v += spec.strength * shift[r];
            }
            x.set(r, t, v);
        }
    }
    x
}

/// Writes features, `manifest.json`, `annotations.json` and one annotation
/// file per split into `out_dir`. Identical specs give identical bytes.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, out_dir: &Path) -> Result<DatasetManifest> {
    spec.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let k = spec.latent_dim;
    let scale = 1.0 / (k as f64).sqrt();
    let proj = |dim: usize, rng: &mut ChaCha8Rng| Tensor2D::from_fn(dim, k, |_, _| gaussian(rng) * scale);
    let projection = Projection {
        visual: proj(spec.visual_dim, &mut master),
        audio: proj(spec.audio_dim, &mut master),
        shift_visual: unit_vector(spec.visual_dim, &mut master),
        shift_audio: unit_vector(spec.audio_dim, &mut master),
    };

    let mut modes: Vec<ForgeryMode> = Vec::with_capacity(spec.total_videos());
    for (m, &c) in ForgeryMode::ALL.iter().zip(&spec.videos_per_mode) {
        modes.extend(std::iter::repeat(*m).take(c));
    }
    modes.shuffle(&mut master);
    let n = modes.len();
    let n_train = (n as f64 * spec.split_fractions[0]).round() as usize;
    let n_val = ((n as f64 * spec.split_fractions[1]).round() as usize).min(n - n_train);

    let feat_dir = out_dir.join("features");
    let mut videos = Vec::with_capacity(n);
    for (i, &mode) in modes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
        let id = format!("syn{i:05}");
        let duration = if spec.duration_range[0] == spec.duration_range[1] {
            spec.duration_range[0]
        } else {
            rng.gen_range(spec.duration_range[0]..=spec.duration_range[1])
        };
        let frames = ((duration * spec.fps).round() as usize).max(1);
        // snap the duration to whole native frames so windows align exactly
        let duration = frames as f64 / spec.fps;

        let rho = spec.latent_correlation;
        let innov = (1.0 - rho * rho).sqrt();
        let mut z: Vec<f64> = (0..k).map(|_| gaussian(&mut rng)).collect();
        let mut latent = Vec::with_capacity(frames);
        for _ in 0..frames {
            latent.push(z.clone());
            for v in z.iter_mut() {
                *v = rho * *v + innov * gaussian(&mut rng);
            }
        }
        let wv = if mode.visual_fake() { draw_windows(spec, frames, &mut rng) } else { Vec::new() };
        let wa = if mode.audio_fake() { draw_windows(spec, frames, &mut rng) } else { Vec::new() };
        let xv = synth_modality(&latent, &projection.visual, &projection.shift_visual, &wv, spec, &mut rng);
        let xa = synth_modality(&latent, &projection.audio, &projection.shift_audio, &wa, spec, &mut rng);

        let to_periods = |w: &[(usize, usize)]| -> Vec<Segment> {
            w.iter().map(|&(s, e)| Segment { start: s as f64 / spec.fps, end: e as f64 / spec.fps }).collect()
        };
        let annotation = VideoAnnotation {
            file_id: id.clone(),
            duration,
            visual_fake_periods: to_periods(&wv),
            audio_fake_periods: to_periods(&wa),
            mode,
        };
        let vis_rel = PathBuf::from("features").join(format!("{id}.visual.f32"));
        let aud_rel = PathBuf::from("features").join(format!("{id}.audio.f32"));
        save_feature_tensor(&feat_dir.join(format!("{id}.visual.f32")), &xv, Dtype::F32)?;
        save_feature_tensor(&feat_dir.join(format!("{id}.audio.f32")), &xa, Dtype::F32)?;
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        videos.push(ManifestEntry { annotation, visual_features: vis_rel, audio_features: aud_rel, split });
    }

    let manifest = DatasetManifest { root: out_dir.to_path_buf(), videos };
    manifest.save(&out_dir.join("manifest.json"))?;
    save_annotations(&out_dir.join("annotations.json"), &manifest.annotations(None))?;
    for s in Split::ALL {
        save_annotations(&out_dir.join(format!("annotations_{}.json", s.as_str())), &manifest.annotations(Some(s)))?;
    }
    write_json_atomic(&out_dir.join("synthetic_spec.json"), spec)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_bad_specs() {
        assert!(SyntheticSpec::default().validate().is_ok());
        let bad = [
            SyntheticSpec { strength: 0.0, ..Default::default() },
            SyntheticSpec { duration_range: [5.0, 4.0], ..Default::default() },
            SyntheticSpec { window_count: [3, 1], ..Default::default() },
            SyntheticSpec { window_seconds: [1.0, 4.0], window_count: [1, 2], ..Default::default() },
        ];
        for s in bad {
            assert!(s.validate().is_err(), "{s:?}");
        }
    }

    #[test]
    fn windows_do_not_overlap() {
        let spec = SyntheticSpec { window_count: [2, 2], ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let w = draw_windows(&spec, 50, &mut rng);
            for p in w.windows(2) {
                assert!(p[0].1 < p[1].0);
            }
        }
    }
}
