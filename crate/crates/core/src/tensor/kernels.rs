use super::Tensor2D;
use crate::error::{Error, Result};

/// Numerically stable softmax of a vector.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax_rows(x: &Tensor2D) -> Tensor2D {
    let mut out = x.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

/// Backward of row-wise softmax given its output `w` and upstream `dw`.
pub fn softmax_rows_backward(w: &Tensor2D, dw: &Tensor2D) -> Tensor2D {
    let mut ds = Tensor2D::zeros(w.rows(), w.cols());
    for r in 0..w.rows() {
        let (wr, dr) = (w.row(r), dw.row(r));
        let dot: f64 = wr.iter().zip(dr).map(|(a, b)| a * b).sum();
        for ((o, &a), &b) in ds.row_mut(r).iter_mut().zip(wr).zip(dr) {
            *o = a * (b - dot);
        }
    }
    ds
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `dy * (1 - y^2)` where `y = tanh(u)`.
pub fn tanh_backward(y: &Tensor2D, dy: &Tensor2D) -> Tensor2D {
    y.zip_map(dy, |y, d| d * (1.0 - y * y))
}

/// `x · w + b` with `x: n×in`, `w: in×out`, `b: 1×out`.
pub fn linear(x: &Tensor2D, w: &Tensor2D, b: Option<&Tensor2D>) -> Result<Tensor2D> {
    let mut y = x.matmul(w)?;
    if let Some(b) = b {
        if b.shape() != (1, w.cols()) {
            return Err(Error::shape("linear bias", format!("{:?} for {} outputs", b.shape(), w.cols())));
        }
        y.add_row_broadcast(b);
    }
    Ok(y)
}

/// Returns `(dx, dw, db)`.
pub fn linear_backward(x: &Tensor2D, w: &Tensor2D, dy: &Tensor2D) -> Result<(Tensor2D, Tensor2D, Tensor2D)> {
    let dx = dy.matmul_nt(w)?;
    let dw = x.matmul_tn(dy)?;
    Ok((dx, dw, dy.sum_rows()))
}

fn im2col3(x: &Tensor2D) -> Tensor2D {
    let (t, c) = x.shape();
    let mut u = Tensor2D::zeros(t, 3 * c);
    for i in 0..t {
        let row = u.row_mut(i);
        if i > 0 {
            row[..c].copy_from_slice(x.row(i - 1));
        }
        row[c..2 * c].copy_from_slice(x.row(i));
        if i + 1 < t {
            row[2 * c..].copy_from_slice(x.row(i + 1));
        }
    }
    u
}

/// Temporal convolution with window 3 and zero padding.
///
/// `x` is time-major (`T × in`), `w` is `3·in × out` with taps ordered
/// `[t-1, t, t+1]`.
pub fn conv3(x: &Tensor2D, w: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    if w.rows() != 3 * x.cols() {
        return Err(Error::shape("conv3", format!("input width {} vs kernel {:?}", x.cols(), w.shape())));
    }
    linear(&im2col3(x), w, Some(b))
}

/// Returns `(dx, dw, db)`.
pub fn conv3_backward(x: &Tensor2D, w: &Tensor2D, dy: &Tensor2D) -> Result<(Tensor2D, Tensor2D, Tensor2D)> {
    let u = im2col3(x);
    let (du, dw, db) = linear_backward(&u, w, dy)?;
    let (t, c) = x.shape();
    let mut dx = Tensor2D::zeros(t, c);
    for i in 0..t {
        let drow = du.row(i);
        if i > 0 {
            for (o, v) in dx.row_mut(i - 1).iter_mut().zip(&drow[..c]) {
                *o += v;
            }
        }
        for (o, v) in dx.row_mut(i).iter_mut().zip(&drow[c..2 * c]) {
            *o += v;
        }
        if i + 1 < t {
            for (o, v) in dx.row_mut(i + 1).iter_mut().zip(&drow[2 * c..]) {
                *o += v;
            }
        }
    }
    Ok((dx, dw, db))
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Tensor2D,
    inv_std: Vec<f64>,
}

/// Per-row normalization to zero mean and unit variance, without affine terms.
pub fn layer_norm(x: &Tensor2D, eps: f64) -> (Tensor2D, LayerNormCache) {
    let (rows, cols) = x.shape();
    let mut y = Tensor2D::zeros(rows, cols);
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let xr = x.row(r);
        let mean = xr.iter().sum::<f64>() / cols as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let is = 1.0 / (var + eps).sqrt();
        for (o, v) in y.row_mut(r).iter_mut().zip(xr) {
            *o = (v - mean) * is;
        }
        inv_std.push(is);
    }
    (y.clone(), LayerNormCache { normalized: y, inv_std })
}

pub fn layer_norm_backward(cache: &LayerNormCache, dy: &Tensor2D) -> Tensor2D {
    let (rows, cols) = dy.shape();
    let n = cols as f64;
    let mut dx = Tensor2D::zeros(rows, cols);
    for r in 0..rows {
        let xh = cache.normalized.row(r);
        let d = dy.row(r);
        let mean_d = d.iter().sum::<f64>() / n;
        let mean_dx: f64 = d.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / n;
        let is = cache.inv_std[r];
        for ((o, &dv), &h) in dx.row_mut(r).iter_mut().zip(d).zip(xh) {
            *o = is * (dv - mean_d - h * mean_dx);
        }
    }
    dx
}
