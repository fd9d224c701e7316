use alloc::string::String;
use alloc::vec::Vec;

use super::backward::{backward, loss};
use super::{GnnModel, GraphInput};
use crate::Result;

/// Relative errors below this denominator are measured against it instead,
/// so entries that are zero analytically and numerically compare as equal.
pub const REL_ERR_FLOOR: f64 = 1e-7;

/// Worst-case disagreement for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
    /// Flat index of the worst entry.
    pub worst: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares every analytic gradient entry with a central difference of step `h`.
pub fn gradient_check(model: &GnnModel<f64>, input: &GraphInput<f64>, labels: &[f64], h: f64) -> Result<Vec<TensorCheck>> {
    let (_, grads) = backward(model, input, labels)?;
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|(n, t)| (n, t.as_slice().to_vec())).collect();
    let mut probe = model.clone();
    let mut out = Vec::with_capacity(analytic.len());
    for (ti, (name, a)) in analytic.iter().enumerate() {
        let mut check = TensorCheck { name: name.clone(), entries: a.len(), max_rel_err: 0.0, worst: 0 };
        for (k, &ak) in a.iter().enumerate() {
            let orig = model.tensors()[ti].1.as_slice()[k];
            set(&mut probe, ti, k, orig + h);
            let up = loss(&probe, input, labels)?;
            set(&mut probe, ti, k, orig - h);
            let down = loss(&probe, input, labels)?;
            set(&mut probe, ti, k, orig);
            let err = relative_error(ak, (up - down) / (2.0 * h));
            if err > check.max_rel_err || err.is_nan() {
                check.max_rel_err = err;
                check.worst = k;
            }
        }
        out.push(check);
    }
    Ok(out)
}

fn set(m: &mut GnnModel<f64>, tensor: usize, k: usize, v: f64) {
    let mut ts = m.tensors_mut();
    ts[tensor].1.as_mut_slice()[k] = v;
}
