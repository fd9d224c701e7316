use alloc::format;
use alloc::vec::Vec;

use super::{GnnModel, GraphInput};
use crate::linalg::{Matrix, Real};
use crate::{Error, Result};

/// `upstream ⊙ [pre > 0]`
fn relu_grad<T: Real>(upstream: &Matrix<T>, pre: &Matrix<T>) -> Matrix<T> {
    let mut out = upstream.clone();
    out.as_mut_slice()
        .iter_mut()
        .zip(pre.as_slice())
        .for_each(|(g, &z)| if z <= T::ZERO { *g = T::ZERO });
    out
}

/// Mean binary cross-entropy of the logits against `labels`, and its
/// gradient with respect to every tensor.
///
/// An empty graph has zero loss and zero gradients.
pub fn backward<T: Real>(model: &GnnModel<T>, input: &GraphInput<T>, labels: &[f64]) -> Result<(f64, GnnModel<T>)> {
    let v = input.vertex_count();
    if labels.len() != v {
        return Err(Error::shape("gnn backward", format!("{} labels for {v} vertices", labels.len())));
    }
    if let Some(y) = labels.iter().find(|y| !(0.0..=1.0).contains(*y)) {
        return Err(Error::invalid("gnn backward", format!("label {y} outside [0, 1]")));
    }
    let mut grads = GnnModel::zeros(model.dims);
    if v == 0 {
        return Ok((0.0, grads));
    }
    let act = model.activations(input)?;
    let n = model.dims.layers;
    let d = model.dims.d;

    let mut loss = 0.0;
    let dz: Vec<T> = act
        .logits
        .as_slice()
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let z = z.to_f64();
            loss += crate::math::softplus(z) - y * z;
            T::from_f64((crate::math::sigmoid(z) - y) / v as f64)
        })
        .collect();
    let loss = loss / v as f64;
    let dz = Matrix::from_vec(v, 1, dz)?;

    grads.head_w2 = act.a3.tmatmul(&dz)?;
    grads.head_b2 = dz.col_sums();
    let dz3 = relu_grad(&dz.matmul_t(&model.head_w2)?, &act.z3);
    grads.head_w1 = act.h.tmatmul(&dz3)?;
    grads.head_b1 = dz3.col_sums();
    let dh = dz3.matmul_t(&model.head_w1)?;
    let mut de = dh.columns(0, d);
    let mut dg = dh.columns(d, d);

    for l in (0..n).rev() {
        let dq = relu_grad(&de, &act.qe[l]);
        grads.gcn_ws[l] = act.pe[l].tmatmul(&dq)?;
        // Â is symmetric, so Âᵀ applies as Â.
        de.add_assign(&input.adjacency.apply(&dq.matmul_t(&model.gcn_ws[l])?));

        let dq = relu_grad(&dg, &act.qg[l]);
        grads.gcn_wg[l] = act.pg[l].tmatmul(&dq)?;
        dg.add_assign(&input.adjacency.apply(&dq.matmul_t(&model.gcn_wg[l])?));
    }
    debug_assert_eq!(act.e.len(), n + 1);
    debug_assert_eq!(act.g.len(), n + 1);

    grads.phi_w2 = act.a1.tmatmul(&de)?;
    grads.phi_b2 = de.col_sums();
    let dz1 = relu_grad(&de.matmul_t(&model.phi_w2)?, &act.z1);
    grads.phi_w1 = input.semantic.tmatmul(&dz1)?;
    grads.phi_b1 = dz1.col_sums();
    grads.psi_w = input.geometric.tmatmul(&dg)?;
    Ok((loss, grads))
}

/// Mean binary cross-entropy without gradients.
pub(crate) fn loss<T: Real>(model: &GnnModel<T>, input: &GraphInput<T>, labels: &[f64]) -> Result<f64> {
    let logits = model.logits(input)?;
    if logits.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = logits.iter().zip(labels).map(|(&z, &y)| crate::math::softplus(z) - y * z).sum();
    Ok(total / logits.len() as f64)
}
