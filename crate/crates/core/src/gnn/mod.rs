//! Relation reasoning over the candidate line graph.
//!
//! Each line vertex gets a semantic embedding (two-layer perceptron on the
//! pooled features) and a geometric embedding (linear projection of center
//! and shift). The two streams run through `n` residual graph convolutions
//!
//! ```text
//! X(l+1) = relu(Â X(l) W(l)) + X(l),   Â = D̃^-1/2 (A + I) D̃^-1/2
//! ```
//!
//! with separate weights, are concatenated, and a two-layer head emits one
//! logit per line.

mod backward;
mod gradcheck;
pub mod toy;
mod train;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assemble::Adjacency;
use crate::linalg::{Matrix, Real};
use crate::{Error, LineFeatures, Result};

pub use backward::backward;
pub use gradcheck::{gradient_check, relative_error, TensorCheck, REL_ERR_FLOOR};
pub use train::{accuracy, train_toy, TrainReport, TrainSample};

/// Geometric feature width: center x, y and shift x, y.
pub const GEOMETRIC_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnDims {
    pub semantic_dim: usize,
    /// Embedding width for both streams.
    pub d: usize,
    pub head_hidden: usize,
    /// Number of residual graph convolution layers.
    pub layers: usize,
}

impl Default for GnnDims {
    fn default() -> Self {
        Self { semantic_dim: 2048, d: 256, head_hidden: 32, layers: 3 }
    }
}

/// Network weights. Biases are stored as `1 x k` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel<T = f32> {
    pub dims: GnnDims,
    pub phi_w1: Matrix<T>,
    pub phi_b1: Matrix<T>,
    pub phi_w2: Matrix<T>,
    pub phi_b2: Matrix<T>,
    pub psi_w: Matrix<T>,
    pub gcn_ws: Vec<Matrix<T>>,
    pub gcn_wg: Vec<Matrix<T>>,
    pub head_w1: Matrix<T>,
    pub head_b1: Matrix<T>,
    pub head_w2: Matrix<T>,
    pub head_b2: Matrix<T>,
}

impl<T: Real> GnnModel<T> {
    pub fn zeros(dims: GnnDims) -> Self {
        let GnnDims { semantic_dim, d, head_hidden: h, layers } = dims;
        Self {
            dims,
            phi_w1: Matrix::zeros(semantic_dim, d),
            phi_b1: Matrix::zeros(1, d),
            phi_w2: Matrix::zeros(d, d),
            phi_b2: Matrix::zeros(1, d),
            psi_w: Matrix::zeros(GEOMETRIC_DIM, d),
            gcn_ws: (0..layers).map(|_| Matrix::zeros(d, d)).collect(),
            gcn_wg: (0..layers).map(|_| Matrix::zeros(d, d)).collect(),
            head_w1: Matrix::zeros(2 * d, h),
            head_b1: Matrix::zeros(1, h),
            head_w2: Matrix::zeros(h, 1),
            head_b2: Matrix::zeros(1, 1),
        }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(dims: GnnDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(dims);
        for (name, w) in m.tensors_mut() {
            if name.ends_with(".b1") || name.ends_with(".b2") {
                continue;
            }
            let a = libm::sqrt(6.0 / (w.rows() + w.cols()) as f64);
            w.as_mut_slice().iter_mut().for_each(|v| *v = T::from_f64(rng.random_range(-a..a)));
        }
        m
    }

    /// Every tensor with its manifest name, in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out: Vec<(String, &Matrix<T>)> = vec![
            ("phi.w1".into(), &self.phi_w1),
            ("phi.b1".into(), &self.phi_b1),
            ("phi.w2".into(), &self.phi_w2),
            ("phi.b2".into(), &self.phi_b2),
            ("psi.w".into(), &self.psi_w),
        ];
        for (l, (ws, wg)) in self.gcn_ws.iter().zip(&self.gcn_wg).enumerate() {
            out.push((format!("gcn.{l}.ws"), ws));
            out.push((format!("gcn.{l}.wg"), wg));
        }
        out.push(("head.w1".into(), &self.head_w1));
        out.push(("head.b1".into(), &self.head_b1));
        out.push(("head.w2".into(), &self.head_w2));
        out.push(("head.b2".into(), &self.head_b2));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix<T>)> {
        let mut out: Vec<(String, &mut Matrix<T>)> = vec![
            ("phi.w1".into(), &mut self.phi_w1),
            ("phi.b1".into(), &mut self.phi_b1),
            ("phi.w2".into(), &mut self.phi_w2),
            ("phi.b2".into(), &mut self.phi_b2),
            ("psi.w".into(), &mut self.psi_w),
        ];
        for (l, (ws, wg)) in self.gcn_ws.iter_mut().zip(self.gcn_wg.iter_mut()).enumerate() {
            out.push((format!("gcn.{l}.ws"), ws));
            out.push((format!("gcn.{l}.wg"), wg));
        }
        out.push(("head.w1".into(), &mut self.head_w1));
        out.push(("head.b1".into(), &mut self.head_b1));
        out.push(("head.w2".into(), &mut self.head_w2));
        out.push(("head.b2".into(), &mut self.head_b2));
        out
    }

    /// Assembles a model from named tensors; every expected name must be
    /// present with the shape implied by `dims`.
    pub fn from_tensors(dims: GnnDims, mut named: Vec<(String, Matrix<T>)>) -> Result<Self> {
        let mut m = Self::zeros(dims);
        for (name, slot) in m.tensors_mut() {
            let pos = named
                .iter()
                .position(|(n, _)| *n == name)
                .ok_or_else(|| Error::invalid("gnn weights", format!("missing tensor `{name}`")))?;
            let (_, t) = named.swap_remove(pos);
            if t.shape() != slot.shape() {
                return Err(Error::shape("gnn weights", format!("`{name}` is {:?}, expected {:?}", t.shape(), slot.shape())));
            }
            *slot = t;
        }
        if let Some((name, _)) = named.first() {
            return Err(Error::invalid("gnn weights", format!("unexpected tensor `{name}`")));
        }
        Ok(m)
    }

    pub fn convert<U: Real>(&self) -> GnnModel<U> {
        GnnModel {
            dims: self.dims,
            phi_w1: self.phi_w1.convert(),
            phi_b1: self.phi_b1.convert(),
            phi_w2: self.phi_w2.convert(),
            phi_b2: self.phi_b2.convert(),
            psi_w: self.psi_w.convert(),
            gcn_ws: self.gcn_ws.iter().map(Matrix::convert).collect(),
            gcn_wg: self.gcn_wg.iter().map(Matrix::convert).collect(),
            head_w1: self.head_w1.convert(),
            head_b1: self.head_b1.convert(),
            head_w2: self.head_w2.convert(),
            head_b2: self.head_b2.convert(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.as_slice().len()).sum()
    }
}

/// `D̃^-1/2 (A + I) D̃^-1/2` as a dense matrix. `A` must be a symmetric 0/1
/// matrix with zero diagonal.
pub fn normalize_adjacency(a: &[Vec<u8>]) -> Result<Vec<Vec<f64>>> {
    let adj = Adjacency::from_dense(a)?;
    let n = adj.len();
    let norm = NormalizedAdjacency::<f64>::new(&adj);
    let mut out = alloc::vec![alloc::vec![0.0; n]; n];
    for (i, row) in norm.rows.iter().enumerate() {
        for &(j, w) in row {
            out[i][j] = w;
        }
    }
    Ok(out)
}

/// Sparse symmetric-normalized adjacency with self loops.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> NormalizedAdjacency<T> {
    pub fn new(adj: &Adjacency) -> Self {
        // 1 / sqrt(d_i d_j) is exact whenever the degrees are equal squares apart.
        let deg: Vec<f64> = (0..adj.len()).map(|v| (adj.degree(v) + 1) as f64).collect();
        let w = |i: usize, j: usize| T::from_f64(1.0 / libm::sqrt(deg[i] * deg[j]));
        let rows = (0..adj.len())
            .map(|i| {
                let mut row: Vec<(usize, T)> = adj
                    .neighbors(i)
                    .iter()
                    .map(|&j| (j, w(i, j)))
                    .collect();
                let pos = row.partition_point(|&(j, _)| j < i);
                row.insert(pos, (i, w(i, i)));
                row
            })
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `Â x` by adjacency-list accumulation.
    pub fn apply(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for (i, row) in self.rows.iter().enumerate() {
            let dst = out.row_mut(i);
            for &(j, w) in row {
                dst.iter_mut().zip(x.row(j)).for_each(|(o, &v)| *o += w * v);
            }
        }
        out
    }
}

/// One residual graph convolution: `relu(Â X W) + X`.
pub fn gcn_layer<T: Real>(x: &Matrix<T>, norm: &NormalizedAdjacency<T>, w: &Matrix<T>) -> Result<Matrix<T>> {
    if norm.len() != x.rows() || w.shape() != (x.cols(), x.cols()) {
        return Err(Error::shape(
            "gcn_layer",
            format!("x {:?}, adjacency {}, w {:?}", x.shape(), norm.len(), w.shape()),
        ));
    }
    let mut out = norm.apply(x).matmul(w)?.relu();
    out.add_assign(x);
    Ok(out)
}

/// Stacked per-vertex inputs for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput<T> {
    pub semantic: Matrix<T>,
    pub geometric: Matrix<T>,
    pub adjacency: NormalizedAdjacency<T>,
}

impl<T: Real> GraphInput<T> {
    pub fn new(features: &[LineFeatures], adj: &Adjacency) -> Result<Self> {
        if features.len() != adj.len() {
            return Err(Error::shape("gnn input", format!("{} feature rows for {} vertices", features.len(), adj.len())));
        }
        let s = features.first().map_or(0, |f| f.semantic.len());
        if let Some((i, f)) = features.iter().enumerate().find(|(_, f)| f.semantic.len() != s) {
            return Err(Error::shape("gnn input", format!("vertex {i} has {} semantic values, expected {s}", f.semantic.len())));
        }
        let semantic = Matrix::from_fn(features.len(), s, |r, c| T::from_f64(features[r].semantic[c]));
        let geometric = Matrix::from_fn(features.len(), GEOMETRIC_DIM, |r, c| T::from_f64(features[r].geometric[c]));
        Ok(Self { semantic, geometric, adjacency: NormalizedAdjacency::new(adj) })
    }

    pub fn from_parts(semantic: Matrix<T>, geometric: Matrix<T>, adj: &Adjacency) -> Result<Self> {
        if semantic.rows() != adj.len() || geometric.rows() != adj.len() || geometric.cols() != GEOMETRIC_DIM {
            return Err(Error::shape(
                "gnn input",
                format!("semantic {:?}, geometric {:?}, {} vertices", semantic.shape(), geometric.shape(), adj.len()),
            ));
        }
        Ok(Self { semantic, geometric, adjacency: NormalizedAdjacency::new(adj) })
    }

    pub fn vertex_count(&self) -> usize {
        self.semantic.rows()
    }
}

/// Intermediate activations kept for the backward pass.
pub(crate) struct Activations<T> {
    pub z1: Matrix<T>,
    pub a1: Matrix<T>,
    /// `E(l)` for l = 0..=n
    pub e: Vec<Matrix<T>>,
    pub g: Vec<Matrix<T>>,
    /// `Â E(l)` and its product with `W_s(l)`, per layer
    pub pe: Vec<Matrix<T>>,
    pub qe: Vec<Matrix<T>>,
    pub pg: Vec<Matrix<T>>,
    pub qg: Vec<Matrix<T>>,
    pub h: Matrix<T>,
    pub z3: Matrix<T>,
    pub a3: Matrix<T>,
    pub logits: Matrix<T>,
}

impl<T: Real> GnnModel<T> {
    fn check_input(&self, input: &GraphInput<T>) -> Result<()> {
        if input.semantic.cols() != self.dims.semantic_dim && input.vertex_count() > 0 {
            return Err(Error::shape(
                "gnn forward",
                format!("semantic width {} but model expects {}", input.semantic.cols(), self.dims.semantic_dim),
            ));
        }
        if input.adjacency.len() != input.vertex_count() {
            return Err(Error::shape("gnn forward", "adjacency size differs from vertex count"));
        }
        Ok(())
    }

    pub(crate) fn activations(&self, input: &GraphInput<T>) -> Result<Activations<T>> {
        self.check_input(input)?;
        let mut z1 = input.semantic.matmul(&self.phi_w1)?;
        z1.add_row(&self.phi_b1);
        let a1 = z1.relu();
        let mut e0 = a1.matmul(&self.phi_w2)?;
        e0.add_row(&self.phi_b2);
        let g0 = input.geometric.matmul(&self.psi_w)?;

        let n = self.dims.layers;
        let (mut e, mut g) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
        let (mut pe, mut qe, mut pg, mut qg) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        e.push(e0);
        g.push(g0);
        for l in 0..n {
            let p = input.adjacency.apply(&e[l]);
            let q = p.matmul(&self.gcn_ws[l])?;
            let mut next = q.relu();
            next.add_assign(&e[l]);
            pe.push(p);
            qe.push(q);
            e.push(next);

            let p = input.adjacency.apply(&g[l]);
            let q = p.matmul(&self.gcn_wg[l])?;
            let mut next = q.relu();
            next.add_assign(&g[l]);
            pg.push(p);
            qg.push(q);
            g.push(next);
        }
        let h = e[n].hcat(&g[n]);
        let mut z3 = h.matmul(&self.head_w1)?;
        z3.add_row(&self.head_b1);
        let a3 = z3.relu();
        let mut logits = a3.matmul(&self.head_w2)?;
        logits.add_row(&self.head_b2);
        Ok(Activations { z1, a1, e, g, pe, qe, pg, qg, h, z3, a3, logits })
    }

    /// Pre-sigmoid logit per vertex.
    pub fn logits(&self, input: &GraphInput<T>) -> Result<Vec<f64>> {
        if input.vertex_count() == 0 {
            return Ok(Vec::new());
        }
        Ok(self.activations(input)?.logits.as_slice().iter().map(|v| v.to_f64()).collect())
    }

    /// Score in `[0, 1]` per vertex.
    pub fn forward(&self, input: &GraphInput<T>) -> Result<Vec<f64>> {
        Ok(self.logits(input)?.into_iter().map(crate::math::sigmoid).collect())
    }
}

/// Scores lines from their pooled features and adjacency.
pub fn forward<T: Real>(model: &GnnModel<T>, features: &[LineFeatures], adj: &Adjacency) -> Result<Vec<f64>> {
    model.forward(&GraphInput::new(features, adj)?)
}
