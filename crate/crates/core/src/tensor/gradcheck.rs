use super::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name, row and column of the worst scalar.
    pub worst: Option<(String, usize, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
}

/// Compares the analytic gradient returned by `loss_fn` against central
/// differences `(f(θ+ε) − f(θ−ε)) / 2ε` for every scalar parameter.
///
/// Relative error uses the denominator `max(|g_a|, |g_n|, 1e-8)`.
pub fn finite_diff_grad_check<F>(loss_fn: F, params: &ParamSet, epsilon: f64) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(f64, ParamSet)>,
{
    finite_diff_grad_check_with_floor(loss_fn, params, epsilon, 1e-8)
}

/// Same check with a caller-chosen denominator floor. Deep compositions
/// have gradients near 1e-9 where central differences carry ~1e-11 of
/// rounding noise; a larger floor treats those as absolute comparisons.
pub fn finite_diff_grad_check_with_floor<F>(
    mut loss_fn: F,
    params: &ParamSet,
    epsilon: f64,
    floor: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(f64, ParamSet)>,
{
    let (loss, analytic) = loss_fn(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss at base point".into()));
    }
    if !analytic.same_layout(params) {
        return Err(Error::shape("finite_diff_grad_check", "gradient layout differs from parameters"));
    }
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        checked: 0,
    };
    for i in 0..params.scalar_count() {
        let base = params.scalar(i);
        *probe.scalar_mut(i) = base + epsilon;
        let (plus, _) = loss_fn(&probe)?;
        *probe.scalar_mut(i) = base - epsilon;
        let (minus, _) = loss_fn(&probe)?;
        *probe.scalar_mut(i) = base;
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::NonFinite(format!("loss while perturbing scalar {i}")));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let ga = analytic.scalar(i);
        let rel = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(floor);
        report.checked += 1;
        if rel > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = rel;
            report.worst = params.locate(i).map(|(n, r, c)| (n.to_string(), r, c));
            report.worst_analytic = ga;
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{seeded_init, InitScheme, Tensor2D};

    #[test]
    fn quadratic_is_exact() {
        let params = ParamSet::new()
            .with("a", seeded_init(3, 4, 1, InitScheme::UniformScaled))
            .with("b", seeded_init(1, 5, 2, InitScheme::UniformScaled));
        let loss = |p: &ParamSet| -> Result<(f64, ParamSet)> {
            let mut g = p.zeros_like();
            let mut total = 0.0;
            for (n, t) in p.iter() {
                total += t.data().iter().map(|v| v * v).sum::<f64>();
                g.accumulate(n, &t.scale(2.0));
            }
            Ok((total, g))
        };
        let r = finite_diff_grad_check(loss, &params, 1e-5).unwrap();
        assert_eq!(r.checked, 17);
        assert!(r.max_relative_error <= 1e-8, "{r:?}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let params = ParamSet::new().with("x", Tensor2D::filled(1, 1, 0.7));
        let loss = |p: &ParamSet| -> Result<(f64, ParamSet)> {
            let x = p.get("x").get(0, 0);
            let mut g = p.zeros_like();
            g.get_mut("x").set(0, 0, 3.0 * x);
            Ok((x * x, g))
        };
        let r = finite_diff_grad_check(loss, &params, 1e-5).unwrap();
        assert!(r.max_relative_error > 0.3);
    }

    #[test]
    fn non_finite_loss_is_error() {
        let params = ParamSet::new().with("x", Tensor2D::filled(1, 1, 0.0));
        let loss = |p: &ParamSet| -> Result<(f64, ParamSet)> { Ok((f64::NAN, p.zeros_like())) };
        assert!(finite_diff_grad_check(loss, &params, 1e-5).is_err());
    }
}
