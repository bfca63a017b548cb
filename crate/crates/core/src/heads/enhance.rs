use crate::cratrans::FeatureSequence;
use crate::error::{Error, Result};
use crate::tensor::{
    conv3, conv3_backward, linear, linear_backward, seeded_init, tanh_backward, InitScheme, ParamSet, Tensor2D,
};

/// Residual enhancement parameters. The output projection starts small so the
/// block begins close to the identity.
pub fn enhance_params(channels: usize, seed: u64) -> ParamSet {
    ParamSet::new()
        .with("conv.w", seeded_init(3 * channels, channels, seed.wrapping_mul(53).wrapping_add(1), InitScheme::UniformScaled))
        .with("conv.b", Tensor2D::zeros(1, channels))
        .with(
            "proj.w",
            seeded_init(channels, channels, seed.wrapping_mul(53).wrapping_add(2), InitScheme::UniformScaled).scale(0.1),
        )
        .with("proj.b", Tensor2D::zeros(1, channels))
}

#[derive(Debug, Clone)]
pub struct EnhanceCache {
    z: Tensor2D,
    a: Tensor2D,
}

/// `z + tanh(conv3(z)) · W + b` on time-major features.
pub fn enhance_forward(z: &Tensor2D, p: &ParamSet) -> Result<(Tensor2D, EnhanceCache)> {
    let a = conv3(z, p.get("conv.w"), p.get("conv.b"))?.map(f64::tanh);
    let f = linear(&a, p.get("proj.w"), Some(p.get("proj.b")))?;
    if f.shape() != z.shape() {
        return Err(Error::shape("enhance_features", format!("{:?} vs {:?}", f.shape(), z.shape())));
    }
    Ok((z.add(&f), EnhanceCache { z: z.clone(), a }))
}

pub fn enhance_backward(cache: &EnhanceCache, p: &ParamSet, dout: &Tensor2D, grads: &mut ParamSet) -> Result<Tensor2D> {
    let (da, dw, db) = linear_backward(&cache.a, p.get("proj.w"), dout)?;
    grads.accumulate("proj.w", &dw);
    grads.accumulate("proj.b", &db);
    let du = tanh_backward(&cache.a, &da);
    let (dz, dw, db) = conv3_backward(&cache.z, p.get("conv.w"), &du)?;
    grads.accumulate("conv.w", &dw);
    grads.accumulate("conv.b", &db);
    Ok(dz.add(dout))
}

pub fn enhance_features(z: &FeatureSequence, params: &ParamSet) -> Result<FeatureSequence> {
    let w = params.get("conv.w");
    if w.rows() != 3 * z.channels() {
        return Err(Error::shape("enhance_features", format!("{} channels vs kernel {:?}", z.channels(), w.shape())));
    }
    let (out, _) = enhance_forward(&z.time_major(), params)?;
    FeatureSequence::from_time_major(z.modality(), &out)
}
