use super::kernels::{softmax_rows, softmax_rows_backward};
use super::Tensor2D;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub weights: Tensor2D,
    scale: f64,
}

#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub dq: Tensor2D,
    pub dk: Tensor2D,
    pub dv: Tensor2D,
}

/// `softmax(Q Kᵀ / √d_k) · V`. Returns the context and the row-stochastic
/// weight matrix.
pub fn scaled_dot_attention(q: &Tensor2D, k: &Tensor2D, v: &Tensor2D) -> Result<(Tensor2D, AttentionCache)> {
    if q.cols() != k.cols() {
        return Err(Error::shape("attention", format!("Q {:?} vs K {:?}", q.shape(), k.shape())));
    }
    if k.rows() != v.rows() {
        return Err(Error::shape("attention", format!("K {:?} vs V {:?}", k.shape(), v.shape())));
    }
    if k.rows() == 0 {
        return Err(Error::EmptyInput("attention keys"));
    }
    let scale = 1.0 / (q.cols().max(1) as f64).sqrt();
    let scores = q.matmul_nt(k)?.scale(scale);
    let weights = softmax_rows(&scores);
    let context = weights.matmul(v)?;
    Ok((context, AttentionCache { weights, scale }))
}

/// Backward pass. `dweights` carries any gradient arriving directly on the
/// attention weights (for example from a loss on the weights themselves).
pub fn scaled_dot_attention_backward(
    q: &Tensor2D,
    k: &Tensor2D,
    v: &Tensor2D,
    cache: &AttentionCache,
    dcontext: &Tensor2D,
    dweights: Option<&Tensor2D>,
) -> Result<AttentionGrads> {
    let mut dw = dcontext.matmul_nt(v)?;
    if let Some(extra) = dweights {
        dw.add_assign(extra);
    }
    let dv = cache.weights.matmul_tn(dcontext)?;
    let ds = softmax_rows_backward(&cache.weights, &dw).scale(cache.scale);
    let dq = ds.matmul(k)?;
    let dk = ds.matmul_tn(q)?;
    Ok(AttentionGrads { dq, dk, dv })
}

/// Projection matrices of one multi-head attention block, each `C × C`.
#[derive(Debug, Clone, Copy)]
pub struct MhaWeights<'a> {
    pub wq: &'a Tensor2D,
    pub wk: &'a Tensor2D,
    pub wv: &'a Tensor2D,
    pub wo: &'a Tensor2D,
}

#[derive(Debug, Clone)]
pub struct MhaCache {
    q: Tensor2D,
    k: Tensor2D,
    v: Tensor2D,
    heads: Vec<AttentionCache>,
    context: Tensor2D,
}

impl MhaCache {
    /// Attention weights averaged over heads; still row-stochastic.
    pub fn mean_weights(&self) -> Tensor2D {
        let mut acc = Tensor2D::zeros(self.q.rows(), self.k.rows());
        for h in &self.heads {
            acc.add_assign(&h.weights);
        }
        acc.scale(1.0 / self.heads.len() as f64)
    }

    pub fn head_weights(&self) -> impl Iterator<Item = &Tensor2D> {
        self.heads.iter().map(|h| &h.weights)
    }
}

#[derive(Debug, Clone)]
pub struct MhaGrads {
    pub dxq: Tensor2D,
    pub dxkv: Tensor2D,
    pub dwq: Tensor2D,
    pub dwk: Tensor2D,
    pub dwv: Tensor2D,
    pub dwo: Tensor2D,
}

/// Multi-head attention realized as blocked projections: the projected
/// queries, keys and values are split into `heads` contiguous column blocks.
pub fn multi_head_attention(
    xq: &Tensor2D,
    xkv: &Tensor2D,
    w: MhaWeights<'_>,
    heads: usize,
) -> Result<(Tensor2D, MhaCache)> {
    let c = w.wq.cols();
    if heads == 0 || c % heads != 0 {
        return Err(Error::shape("multi_head_attention", format!("{heads} heads for width {c}")));
    }
    let q = xq.matmul(w.wq)?;
    let k = xkv.matmul(w.wk)?;
    let v = xkv.matmul(w.wv)?;
    if k.cols() != c || v.cols() != c {
        return Err(Error::shape("multi_head_attention", "projection widths differ"));
    }
    let dk = c / heads;
    let mut context = Tensor2D::zeros(q.rows(), c);
    let mut caches = Vec::with_capacity(heads);
    for h in 0..heads {
        let (ctx, cache) = scaled_dot_attention(&q.columns(h * dk, dk), &k.columns(h * dk, dk), &v.columns(h * dk, dk))?;
        context.set_columns(h * dk, &ctx);
        caches.push(cache);
    }
    let out = context.matmul(w.wo)?;
    Ok((out, MhaCache { q, k, v, heads: caches, context }))
}

pub fn multi_head_attention_backward(
    xq: &Tensor2D,
    xkv: &Tensor2D,
    w: MhaWeights<'_>,
    cache: &MhaCache,
    dout: &Tensor2D,
) -> Result<MhaGrads> {
    let c = w.wq.cols();
    let heads = cache.heads.len();
    let dk = c / heads;
    let dwo = cache.context.matmul_tn(dout)?;
    let dcontext = dout.matmul_nt(w.wo)?;
    let mut dq = Tensor2D::zeros(cache.q.rows(), c);
    let mut dkk = Tensor2D::zeros(cache.k.rows(), c);
    let mut dv = Tensor2D::zeros(cache.v.rows(), c);
    for (h, hc) in cache.heads.iter().enumerate() {
        let g = scaled_dot_attention_backward(
            &cache.q.columns(h * dk, dk),
            &cache.k.columns(h * dk, dk),
            &cache.v.columns(h * dk, dk),
            hc,
            &dcontext.columns(h * dk, dk),
            None,
        )?;
        dq.set_columns(h * dk, &g.dq);
        dkk.set_columns(h * dk, &g.dk);
        dv.set_columns(h * dk, &g.dv);
    }
    let dwq = xq.matmul_tn(&dq)?;
    let dwk = xkv.matmul_tn(&dkk)?;
    let dwv = xkv.matmul_tn(&dv)?;
    let dxq = dq.matmul_nt(w.wq)?;
    let mut dxkv = dkk.matmul_nt(w.wk)?;
    dxkv.add_assign(&dv.matmul_nt(w.wv)?);
    Ok(MhaGrads { dxq, dxkv, dwq, dwk, dwv, dwo })
}
