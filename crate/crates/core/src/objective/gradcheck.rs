use super::ObjectiveError;

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter index where the maximum occurred.
    pub worst_index: usize,
}

/// Compares `analytic` against central differences of `loss` at `params`.
///
/// Per parameter the error is `|a - c| / max(1e-8, |a| + |c|)`.
pub fn grad_check<F>(mut loss: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<GradCheck, ObjectiveError>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(ObjectiveError::BadEpsilon);
    }
    if analytic.len() != params.len() {
        return Err(ObjectiveError::ShapeMismatch {
            expected: params.len(),
            got: analytic.len(),
        });
    }
    let mut theta = params.to_vec();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + eps;
        let up = loss(&theta);
        theta[i] = orig - eps;
        let down = loss(&theta);
        theta[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(ObjectiveError::NonFinite);
        }
        let central = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - central).abs() / (a.abs() + central.abs()).max(1e-8);
        if err > out.max_rel_error {
            out = GradCheck {
                max_rel_error: err,
                worst_index: i,
            };
        }
    }
    Ok(out)
}
