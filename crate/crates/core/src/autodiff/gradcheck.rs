use super::tape::{Tape, Var};
use super::AdError;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// Largest `|a - n| / max(1, |a|, |n|)` over all inputs.
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Error measure used by [`gradcheck`]: relative for large gradients,
/// absolute below magnitude 1.
pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / 1f64.max(a.abs()).max(n.abs())
}

/// Compares reverse-mode gradients of `f` at `inputs` with central finite
/// differences of step `step`.
///
/// `f` is re-run on a fresh tape for every finite-difference evaluation.
pub fn gradcheck<F>(f: F, inputs: &[f64], step: f64, tolerance: f64) -> Result<GradcheckReport, AdError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, AdError>,
{
    let eval = |x: &[f64]| -> Result<f64, AdError> {
        let tape = Tape::new();
        let vars = tape.vars(x);
        Ok(f(&tape, &vars)?.value())
    };
    gradcheck_with_reference(&f, eval, inputs, step, tolerance)
}

/// Like [`gradcheck`], but the finite differences are taken of `reference`
/// instead of `f`.
///
/// This verifies surrogate gradients: the straight-through operators record
/// the derivative of a relaxed function whose forward value they do not
/// return.
pub fn gradcheck_with_reference<F, R>(
    f: F,
    reference: R,
    inputs: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<GradcheckReport, AdError>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>, AdError>,
    R: Fn(&[f64]) -> Result<f64, AdError>,
{
    let eval = |x: &[f64]| -> Result<f64, AdError> {
        let v = reference(x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(AdError::NonFiniteEvaluation)
        }
    };

    let tape = Tape::new();
    let vars = tape.vars(inputs);
    let out = f(&tape, &vars)?;
    if !out.value().is_finite() {
        return Err(AdError::NonFiniteEvaluation);
    }
    let analytic = tape.backward(out)?.wrt_all(&vars);

    let mut numeric = Vec::with_capacity(inputs.len());
    let mut x = inputs.to_vec();
    for i in 0..inputs.len() {
        x[i] = inputs[i] + step;
        let hi = eval(&x)?;
        x[i] = inputs[i] - step;
        let lo = eval(&x)?;
        x[i] = inputs[i];
        numeric.push((hi - lo) / (2.0 * step));
    }
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| relative_error(*a, *n))
        .fold(0.0, f64::max);
    Ok(GradcheckReport {
        analytic,
        numeric,
        max_rel_error,
        tolerance,
        passed: max_rel_error <= tolerance,
    })
}
