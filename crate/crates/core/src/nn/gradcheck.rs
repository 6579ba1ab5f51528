//! Central finite-difference gradient checking on the 64-bit path.

use super::mlp::{Mlp, MlpGrads};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Relative error `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    libm::fabs(a - b) / libm::fabs(a).max(libm::fabs(b)).max(floor)
}

/// Compares `analytic` to central differences of `loss` for every parameter
/// of `params`. `params` is restored before returning.
pub fn check_gradients<F>(params: &mut Mlp<f64>, analytic: &MlpGrads<f64>, h: f64, floor: f64, mut loss: F) -> GradCheckReport
where
    F: FnMut(&Mlp<f64>) -> f64,
{
    let analytic: alloc::vec::Vec<f64> = analytic.values().collect();
    let mut report = GradCheckReport { checked: 0, max_abs_error: 0.0, max_rel_error: 0.0, worst_index: 0 };
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *params.param_mut(i).unwrap();
        *params.param_mut(i).unwrap() = orig + h;
        let up = loss(params);
        *params.param_mut(i).unwrap() = orig - h;
        let down = loss(params);
        *params.param_mut(i).unwrap() = orig;
        let numeric = (up - down) / (2.0 * h);
        let abs = libm::fabs(a - numeric);
        let rel = relative_error(a, numeric, floor);
        report.checked += 1;
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    report
}

/// Adds `U(-scale, scale)` noise to every parameter. Freshly initialized
/// hidden biases are zero, which puts all-zero input rows exactly on the
/// activation's second-derivative jump, where central differences are only
/// first-order accurate.
pub fn jitter(params: &mut Mlp<f64>, scale: f64, rng: &mut crate::rng::Rng) {
    use rand::Rng as _;
    for p in params.params_mut() {
        *p += rng.random_range(-scale..scale);
    }
}
