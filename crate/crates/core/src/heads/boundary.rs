//! Position/channel-aware boundary maps.
//!
//! Each modality owns one boundary module. Its input is the time-major latent
//! sequence with the frame probabilities appended as an extra channel. Two
//! attention branches refine that input: temporal self-attention (position
//! branch) and channel self-attention (channel branch). Each branch scores
//! every candidate `(start, duration)` cell by pooling `samples_n` points
//! inside the cell and in half-length context windows on either side, then
//! running a two-hidden-layer MLP. A learned 1×1 mix of the two branch logits
//! gives the fused map.
//!
//! The first MLP layer is applied per frame before pooling, which is exact
//! because pooling is linear.

use crate::domain::{iou, Modality, Segment};
use crate::error::{Error, Result};
use crate::tensor::{
    scaled_dot_attention, scaled_dot_attention_backward, seeded_init, sigmoid, softmax_rows, softmax_rows_backward,
    AttentionCache, InitScheme, ParamSet, Tensor2D,
};

/// Confidence over every candidate segment, indexed `(start frame, duration - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMap {
    pub modality: Modality,
    pub map: Tensor2D,
    pub frame_seconds: f64,
    /// Cells with `start + duration > valid_frames` are masked.
    pub valid_frames: usize,
}

impl BoundaryMap {
    pub fn frames(&self) -> usize {
        self.map.rows()
    }

    pub fn is_valid(&self, start: usize, duration: usize) -> bool {
        duration >= 1 && duration <= self.map.cols() && start + duration <= self.valid_frames.min(self.frames())
    }

    pub fn get(&self, start: usize, duration: usize) -> f64 {
        self.map.get(start, duration - 1)
    }

    /// Iterates valid cells as `(start, duration, value)`.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.valid_frames.min(self.frames());
        (0..n).flat_map(move |s| (1..=(n - s).min(self.map.cols())).map(move |d| (s, d, self.get(s, d))))
    }

    pub fn same_mask(&self, other: &BoundaryMap) -> bool {
        self.map.shape() == other.map.shape() && self.valid_frames == other.valid_frames
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryOutput {
    pub position: BoundaryMap,
    pub channel: BoundaryMap,
    pub fused: BoundaryMap,
}

/// Number of cells on a `T`-frame grid with durations up to `T`.
pub fn cell_count(frames: usize) -> usize {
    frames * (frames + 1) / 2
}

fn cells(frames: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(cell_count(frames));
    for s in 0..frames {
        for d in 1..=frames - s {
            out.push((s, d));
        }
    }
    out
}

const REGIONS: [&str; 3] = ["w1_in", "w1_left", "w1_right"];

/// Sparse interpolation weights that average `samples` points over a
/// region, per cell and region.
struct SamplingPlan {
    entries: Vec<(u32, f64)>,
    offsets: Vec<usize>,
}

impl SamplingPlan {
    fn new(cells: &[(usize, usize)], frames: usize, samples: usize) -> Self {
        let mut entries = Vec::new();
        let mut offsets = Vec::with_capacity(cells.len() * 3 + 1);
        offsets.push(0);
        let inv = 1.0 / samples as f64;
        for &(s, d) in cells {
            let (s, d) = (s as f64, d as f64);
            for (lo, hi) in [(s, s + d), (s - 0.5 * d, s), (s + d, s + 1.5 * d)] {
                let start = entries.len();
                for j in 0..samples {
                    let x = lo + (j as f64 + 0.5) * (hi - lo) / samples as f64;
                    let idx = x - 0.5;
                    let f0 = idx.floor();
                    let w1 = idx - f0;
                    for (f, w) in [(f0, 1.0 - w1), (f0 + 1.0, w1)] {
                        if w == 0.0 || f < 0.0 || f >= frames as f64 {
                            continue;
                        }
                        let f = f as u32;
                        match entries[start..].iter_mut().find(|(g, _)| *g == f) {
                            Some((_, acc)) => *acc += w * inv,
                            None => entries.push((f, w * inv)),
                        }
                    }
                }
                offsets.push(entries.len());
            }
        }
        SamplingPlan { entries, offsets }
    }

    fn region(&self, cell: usize, region: usize) -> &[(u32, f64)] {
        let k = cell * 3 + region;
        &self.entries[self.offsets[k]..self.offsets[k + 1]]
    }
}

/// Fresh parameters for one modality's boundary module.
pub fn boundary_params(channels: usize, hidden: [usize; 2], seed: u64) -> ParamSet {
    let cin = channels + 1;
    let [h1, h2] = hidden;
    let mut k = 0u64;
    let mut u = |r: usize, c: usize| {
        k += 1;
        seeded_init(r, c, seed.wrapping_mul(1009).wrapping_add(k), InitScheme::UniformScaled)
    };
    let mut p = ParamSet::new()
        .with("pam.wq", u(cin, cin))
        .with("pam.wk", u(cin, cin))
        .with("pam.wv", u(cin, cin))
        .with("pam.gamma", Tensor2D::filled(1, 1, 0.1))
        .with("cam.gamma", Tensor2D::filled(1, 1, 0.1));
    for branch in ["pos", "chn"] {
        for r in REGIONS {
            // three pooled regions feed one hidden layer
            let w = u(cin, h1).scale(1.0 / 3f64.sqrt());
            p.insert(format!("{branch}.{r}"), w).expect("unique");
        }
        p.insert(format!("{branch}.b1"), Tensor2D::zeros(1, h1)).expect("unique");
        p.insert(format!("{branch}.w2"), u(h1, h2)).expect("unique");
        p.insert(format!("{branch}.b2"), Tensor2D::zeros(1, h2)).expect("unique");
        p.insert(format!("{branch}.w3"), u(h2, 1)).expect("unique");
        p.insert(format!("{branch}.b3"), Tensor2D::zeros(1, 1)).expect("unique");
    }
    p.with("fuse.w", Tensor2D::from_vec(1, 2, vec![0.5, 0.5]).expect("1x2"))
        .with("fuse.b", Tensor2D::zeros(1, 1))
}

struct BranchCache {
    xb: Tensor2D,
    a1: Tensor2D,
    a2: Tensor2D,
    logits: Vec<f64>,
}

pub struct BoundaryCache {
    x: Tensor2D,
    cells: Vec<(usize, usize)>,
    plan: SamplingPlan,
    pam_q: Tensor2D,
    pam_k: Tensor2D,
    pam_v: Tensor2D,
    pam_attn: AttentionCache,
    pam_ctx: Tensor2D,
    cam_a: Tensor2D,
    cam_y: Tensor2D,
    pos: BranchCache,
    chn: BranchCache,
    fused: Vec<f64>,
}

fn branch_forward(
    xb: Tensor2D,
    p: &ParamSet,
    branch: &str,
    cells: &[(usize, usize)],
    plan: &SamplingPlan,
) -> Result<BranchCache> {
    let h: Vec<Tensor2D> =
        REGIONS.iter().map(|r| xb.matmul(p.get(&format!("{branch}.{r}")))).collect::<Result<_>>()?;
    let b1 = p.get(&format!("{branch}.b1"));
    let h1 = b1.cols();
    let mut u = Tensor2D::zeros(cells.len(), h1);
    for c in 0..cells.len() {
        let row = u.row_mut(c);
        row.copy_from_slice(b1.data());
        for (r, hr) in h.iter().enumerate() {
            for &(f, w) in plan.region(c, r) {
                for (o, v) in row.iter_mut().zip(hr.row(f as usize)) {
                    *o += w * v;
                }
            }
        }
    }
    let a1 = u.map(f64::tanh);
    let mut z2 = a1.matmul(p.get(&format!("{branch}.w2")))?;
    z2.add_row_broadcast(p.get(&format!("{branch}.b2")));
    let a2 = z2.map(f64::tanh);
    let b3 = p.get(&format!("{branch}.b3")).get(0, 0);
    let logits = a2.matmul(p.get(&format!("{branch}.w3")))?.data().iter().map(|l| l + b3).collect();
    Ok(BranchCache { xb, a1, a2, logits })
}

/// Returns the gradient with respect to the branch input.
fn branch_backward(
    cache: &BranchCache,
    p: &ParamSet,
    branch: &str,
    plan: &SamplingPlan,
    dlogits: &[f64],
    grads: &mut ParamSet,
) -> Result<Tensor2D> {
    let n = dlogits.len();
    let dl = Tensor2D::from_vec(n, 1, dlogits.to_vec())?;
    grads.accumulate(&format!("{branch}.w3"), &cache.a2.matmul_tn(&dl)?);
    grads.accumulate(&format!("{branch}.b3"), &Tensor2D::filled(1, 1, dlogits.iter().sum()));
    let da2 = dl.matmul_nt(p.get(&format!("{branch}.w3")))?;
    let dz2 = cache.a2.zip_map(&da2, |a, d| d * (1.0 - a * a));
    grads.accumulate(&format!("{branch}.w2"), &cache.a1.matmul_tn(&dz2)?);
    grads.accumulate(&format!("{branch}.b2"), &dz2.sum_rows());
    let da1 = dz2.matmul_nt(p.get(&format!("{branch}.w2")))?;
    let du = cache.a1.zip_map(&da1, |a, d| d * (1.0 - a * a));
    grads.accumulate(&format!("{branch}.b1"), &du.sum_rows());

    let frames = cache.xb.rows();
    let h1 = du.cols();
    let mut dx = Tensor2D::zeros(frames, cache.xb.cols());
    for (r, name) in REGIONS.iter().enumerate() {
        let mut dh = Tensor2D::zeros(frames, h1);
        for c in 0..n {
            let src = du.row(c);
            for &(f, w) in plan.region(c, r) {
                for (o, v) in dh.row_mut(f as usize).iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        let wname = format!("{branch}.{name}");
        grads.accumulate(&wname, &cache.xb.matmul_tn(&dh)?);
        dx.add_assign(&dh.matmul_nt(p.get(&wname))?);
    }
    Ok(dx)
}

/// Forward pass. `z` is time-major `T × C`, `probs` has length `T`.
pub fn boundary_forward(
    z: &Tensor2D,
    probs: &[f64],
    p: &ParamSet,
    samples: usize,
) -> Result<(Vec<f64>, Vec<f64>, BoundaryCache)> {
    let frames = z.rows();
    if probs.len() != frames {
        return Err(Error::shape("boundary_maps", format!("{} frames vs {} probabilities", frames, probs.len())));
    }
    let cin = z.cols() + 1;
    if p.get("pam.wq").rows() != cin {
        return Err(Error::shape(
            "boundary_maps",
            format!("input width {cin} vs module width {}", p.get("pam.wq").rows()),
        ));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples_n must be positive".into()));
    }
    let x = z.hcat(&Tensor2D::from_vec(frames, 1, probs.to_vec())?)?;
    let cells = cells(frames);
    let plan = SamplingPlan::new(&cells, frames, samples);

    // position branch: temporal self-attention
    let pam_q = x.matmul(p.get("pam.wq"))?;
    let pam_k = x.matmul(p.get("pam.wk"))?;
    let pam_v = x.matmul(p.get("pam.wv"))?;
    let (pam_ctx, pam_attn) = scaled_dot_attention(&pam_q, &pam_k, &pam_v)?;
    let mut xp = x.clone();
    xp.add_scaled(&pam_ctx, p.get("pam.gamma").get(0, 0));

    // channel branch: channel self-attention over the T-averaged Gram matrix
    let energy = x.matmul_tn(&x)?.scale(1.0 / frames as f64);
    let cam_a = softmax_rows(&energy);
    let cam_y = x.matmul_nt(&cam_a)?;
    let mut xc = x.clone();
    xc.add_scaled(&cam_y, p.get("cam.gamma").get(0, 0));

    let pos = branch_forward(xp, p, "pos", &cells, &plan)?;
    let chn = branch_forward(xc, p, "chn", &cells, &plan)?;
    let fw = p.get("fuse.w");
    let fb = p.get("fuse.b").get(0, 0);
    let fused_logits: Vec<f64> =
        pos.logits.iter().zip(&chn.logits).map(|(a, b)| fw.get(0, 0) * a + fw.get(0, 1) * b + fb).collect();
    let fused: Vec<f64> = fused_logits.iter().map(|&l| sigmoid(l)).collect();
    let cache = BoundaryCache { x, cells, plan, pam_q, pam_k, pam_v, pam_attn, pam_ctx, cam_a, cam_y, pos, chn, fused };
    Ok((fused_logits, cache.fused.clone(), cache))
}

impl BoundaryCache {
    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn fused(&self) -> &[f64] {
        &self.fused
    }

    fn to_map(&self, values: impl Iterator<Item = f64>, modality: Modality, frame_seconds: f64, valid: usize) -> BoundaryMap {
        let t = self.x.rows();
        let mut map = Tensor2D::zeros(t, t);
        for (&(s, d), v) in self.cells.iter().zip(values) {
            if s + d <= valid {
                map.set(s, d - 1, v);
            }
        }
        BoundaryMap { modality, map, frame_seconds, valid_frames: valid }
    }

    /// Materializes the three maps; cells past `valid_frames` are masked to 0.
    pub fn output(&self, modality: Modality, frame_seconds: f64, valid_frames: usize) -> BoundaryOutput {
        BoundaryOutput {
            position: self.to_map(self.pos.logits.iter().map(|&l| sigmoid(l)), modality, frame_seconds, valid_frames),
            channel: self.to_map(self.chn.logits.iter().map(|&l| sigmoid(l)), modality, frame_seconds, valid_frames),
            fused: self.to_map(self.fused.iter().copied(), modality, frame_seconds, valid_frames),
        }
    }
}

/// Backward pass given gradients on the fused probabilities (one per cell,
/// in cache cell order). Returns `(dz, dprobs)`.
pub fn boundary_backward(
    cache: &BoundaryCache,
    p: &ParamSet,
    dfused: &[f64],
    grads: &mut ParamSet,
) -> Result<(Tensor2D, Vec<f64>)> {
    if dfused.len() != cache.cells.len() {
        return Err(Error::shape("boundary_backward", "gradient length differs from cell count"));
    }
    let fw = p.get("fuse.w");
    let (w0, w1) = (fw.get(0, 0), fw.get(0, 1));
    let dlf: Vec<f64> = dfused.iter().zip(&cache.fused).map(|(g, f)| g * f * (1.0 - f)).collect();
    let mut dfw = Tensor2D::zeros(1, 2);
    dfw.set(0, 0, dlf.iter().zip(&cache.pos.logits).map(|(a, b)| a * b).sum());
    dfw.set(0, 1, dlf.iter().zip(&cache.chn.logits).map(|(a, b)| a * b).sum());
    grads.accumulate("fuse.w", &dfw);
    grads.accumulate("fuse.b", &Tensor2D::filled(1, 1, dlf.iter().sum()));
    let dlp: Vec<f64> = dlf.iter().map(|g| g * w0).collect();
    let dlc: Vec<f64> = dlf.iter().map(|g| g * w1).collect();

    let dxp = branch_backward(&cache.pos, p, "pos", &cache.plan, &dlp, grads)?;
    let dxc = branch_backward(&cache.chn, p, "chn", &cache.plan, &dlc, grads)?;

    let x = &cache.x;
    let frames = x.rows() as f64;
    let mut dx = dxp.add(&dxc);

    // channel attention
    let gc = p.get("cam.gamma").get(0, 0);
    let dgc: f64 = dxc.data().iter().zip(cache.cam_y.data()).map(|(a, b)| a * b).sum();
    grads.accumulate("cam.gamma", &Tensor2D::filled(1, 1, dgc));
    let dy = dxc.scale(gc);
    dx.add_assign(&dy.matmul(&cache.cam_a)?);
    let da = dy.matmul_tn(x)?;
    let de = softmax_rows_backward(&cache.cam_a, &da);
    let de_sym = de.add(&de.transpose()).scale(1.0 / frames);
    dx.add_assign(&x.matmul(&de_sym)?);

    // position attention
    let gp = p.get("pam.gamma").get(0, 0);
    let dgp: f64 = dxp.data().iter().zip(cache.pam_ctx.data()).map(|(a, b)| a * b).sum();
    grads.accumulate("pam.gamma", &Tensor2D::filled(1, 1, dgp));
    let dctx = dxp.scale(gp);
    let g = scaled_dot_attention_backward(&cache.pam_q, &cache.pam_k, &cache.pam_v, &cache.pam_attn, &dctx, None)?;
    grads.accumulate("pam.wq", &x.matmul_tn(&g.dq)?);
    grads.accumulate("pam.wk", &x.matmul_tn(&g.dk)?);
    grads.accumulate("pam.wv", &x.matmul_tn(&g.dv)?);
    dx.add_assign(&g.dq.matmul_nt(p.get("pam.wq"))?);
    dx.add_assign(&g.dk.matmul_nt(p.get("pam.wk"))?);
    dx.add_assign(&g.dv.matmul_nt(p.get("pam.wv"))?);

    let c = x.cols() - 1;
    let dz = dx.columns(0, c);
    let dprobs = dx.column(c);
    Ok((dz, dprobs))
}

/// Position, channel and fused boundary maps for one modality.
pub fn boundary_maps(
    z: &crate::cratrans::FeatureSequence,
    frame_probs: &super::FrameProbabilities,
    params: &ParamSet,
    samples: usize,
    frame_seconds: f64,
) -> Result<BoundaryOutput> {
    let (_, _, cache) = boundary_forward(&z.time_major(), &frame_probs.probs, params, samples)?;
    Ok(cache.output(z.modality(), frame_seconds, z.frames()))
}

/// Training target: cell `(s, d)` holds the best IoU between the segment
/// `[s, s + d]` (in seconds) and any ground-truth period.
pub fn gt_iou_map(periods: &[Segment], frames: usize, max_duration_frames: usize, frame_seconds: f64) -> Tensor2D {
    let mut map = Tensor2D::zeros(frames, max_duration_frames);
    if periods.is_empty() {
        return map;
    }
    for s in 0..frames {
        for d in 1..=max_duration_frames.min(frames - s) {
            let cand = Segment { start: s as f64 * frame_seconds, end: (s + d) as f64 * frame_seconds };
            let best = periods.iter().map(|p| iou(&cand, p)).fold(0.0, f64::max);
            map.set(s, d - 1, best);
        }
    }
    map
}
