//! Central finite-difference verification of analytic gradients.

use super::graph::{Graph, NodeId};
use super::store::ParamStore;
use super::tensor::Precision;
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;
/// Denominator floor of the relative error, so that gradients that are zero
/// up to rounding are compared in absolute terms.
pub const DEFAULT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat element index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compare the analytic gradient of `build`'s scalar output against central
/// differences for every parameter element, or an evenly spaced subset of at
/// most `max_per_tensor` elements per tensor. The store must be double
/// precision and is restored before returning.
pub fn check_gradients<F>(
    store: &mut ParamStore,
    build: F,
    eps: f64,
    floor: f64,
    max_per_tensor: Option<usize>,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<NodeId>,
{
    if store.precision != Precision::Double {
        return Err(Error::InvalidArgument("gradient checks need a double-precision store".into()));
    }
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(s);
        let l = build(&mut g)?;
        Ok(g.scalar(l))
    };
    let grads = {
        let mut g = Graph::new(store);
        let l = build(&mut g)?;
        g.backward(l)?
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for idx in 0..store.len() {
        let n = store.tensor(idx).len();
        let analytic = grads.dense(idx);
        let stride = match max_per_tensor {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        for k in (0..n).step_by(stride) {
            let orig = store.tensor(idx).data[k];
            store.tensor_mut(idx).data[k] = orig + eps;
            let plus = eval(store);
            store.tensor_mut(idx).data[k] = orig - eps;
            let minus = eval(store);
            store.tensor_mut(idx).data[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let err = relative_error(analytic[k], numeric, floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = err;
                report.worst = Some((store.name(idx).to_string(), k));
            }
        }
    }
    Ok(report)
}
