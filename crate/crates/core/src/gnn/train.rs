use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::backward::{backward, loss};
use super::{GnnModel, GraphInput};
use crate::linalg::{Matrix, Real};
use crate::{Error, Result};

/// One graph with a binary label per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample<T> {
    pub input: GraphInput<T>,
    pub labels: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss over the dataset before each step, then once after the last.
    pub losses: Vec<f64>,
    /// Running minimum of `losses`.
    pub smoothed: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(f64::NAN)
    }
}

fn mean_loss<T: Real>(model: &GnnModel<T>, data: &[TrainSample<T>]) -> Result<f64> {
    let mut total = 0.0;
    for s in data {
        total += loss(model, &s.input, &s.labels)?;
    }
    Ok(total / data.len() as f64)
}

fn first_non_finite<T: Real>(m: &GnnModel<T>) -> Option<String> {
    m.tensors().into_iter().find(|(_, t)| !t.is_finite()).map(|(n, _)| n)
}

/// Full-batch gradient descent on the mean per-graph loss.
///
/// Aborts with [`Error::NonFinite`] naming the step at which the loss or a
/// gradient stopped being finite.
pub fn train_toy<T: Real>(
    mut model: GnnModel<T>,
    data: &[TrainSample<T>],
    steps: usize,
    lr: f64,
) -> Result<(GnnModel<T>, TrainReport)> {
    if data.is_empty() {
        return Err(Error::invalid("train_toy", "dataset is empty"));
    }
    if !lr.is_finite() {
        return Err(Error::invalid("train_toy", format!("learning rate {lr} is not finite")));
    }
    let scale = 1.0 / data.len() as f64;
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..steps {
        let mut total = 0.0;
        let mut acc = GnnModel::<T>::zeros(model.dims);
        for s in data {
            let (l, g) = backward(&model, &s.input, &s.labels)?;
            total += l;
            for ((_, a), (_, b)) in acc.tensors_mut().into_iter().zip(g.tensors()) {
                a.add_assign(b);
            }
        }
        let l = total * scale;
        if !l.is_finite() {
            return Err(Error::NonFinite { term: "loss".into(), step: Some(step) });
        }
        if let Some(name) = first_non_finite(&acc) {
            return Err(Error::NonFinite { term: format!("gradient of {name}"), step: Some(step) });
        }
        losses.push(l);
        if lr != 0.0 {
            let k = T::from_f64(-lr * scale);
            for ((_, w), (_, g)) in model.tensors_mut().into_iter().zip(acc.tensors()) {
                sgd(w, g, k);
            }
        }
    }
    let l = mean_loss(&model, data)?;
    if !l.is_finite() {
        return Err(Error::NonFinite { term: "loss".into(), step: Some(steps) });
    }
    losses.push(l);
    let smoothed = losses
        .iter()
        .scan(f64::INFINITY, |m, &l| {
            *m = m.min(l);
            Some(*m)
        })
        .collect();
    Ok((model, TrainReport { losses, smoothed }))
}

fn sgd<T: Real>(w: &mut Matrix<T>, g: &Matrix<T>, k: T) {
    w.as_mut_slice().iter_mut().zip(g.as_slice()).for_each(|(w, &g)| *w += k * g);
}

/// Fraction of vertices whose thresholded score agrees with the label.
pub fn accuracy<T: Real>(model: &GnnModel<T>, data: &[TrainSample<T>]) -> Result<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for s in data {
        let logits = model.logits(&s.input)?;
        hit += logits.iter().zip(&s.labels).filter(|(&z, &y)| (z > 0.0) == (y > 0.5)).count();
        total += logits.len();
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}
