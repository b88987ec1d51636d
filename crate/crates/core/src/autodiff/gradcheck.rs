use serde::Serialize;

use super::{Graph, ParamStore, Var};
use crate::error::Result;

/// Elements whose analytic and numeric gradients are both below this
/// magnitude are excluded from the relative-error maximum.
pub const MAGNITUDE_FLOOR: f64 = 1e-6;

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Elements that entered the relative-error maximum.
    pub checked: usize,
    /// Elements below [`MAGNITUDE_FLOOR`] on both sides.
    pub below_floor: usize,
    /// `(parameter name, flat index)` of the worst relative error.
    pub worst: Option<(String, usize)>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Compares the gradient of the scalar built by `f` against central finite
/// differences with step `epsilon`, over every element of every parameter.
pub fn gradient_check<F>(f: F, params: &ParamStore, epsilon: f64, tolerance: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new(params);
        let loss = f(&mut g)?;
        g.backward(loss)?
    };
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::frozen(store);
        let loss = f(&mut g)?;
        Ok(g.scalar(loss))
    };

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
        below_floor: 0,
        worst: None,
        tolerance,
    };
    for id in params.ids() {
        for i in 0..params.get(id).numel() {
            let original = params.get(id).values()[i];
            probe.get_mut(id).values_mut()[i] = original + epsilon;
            let plus = eval(&probe)?;
            probe.get_mut(id).values_mut()[i] = original - epsilon;
            let minus = eval(&probe)?;
            probe.get_mut(id).values_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic.param(id).values()[i];
            let abs = (numeric - exact).abs();
            report.max_abs_error = report.max_abs_error.max(abs);
            let scale = numeric.abs().max(exact.abs());
            if scale < MAGNITUDE_FLOOR {
                report.below_floor += 1;
                continue;
            }
            report.checked += 1;
            let rel = abs / scale;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((params.name(id).to_string(), i));
            }
        }
    }
    Ok(report)
}
