use super::{GridSpec, ScalarField, TensorField, VectorField};
use crate::error::Result;

/// Accuracy order of the finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn from_order(order: usize) -> Option<Self> {
        match order {
            2 => Some(Self::Second),
            4 => Some(Self::Fourth),
            _ => None,
        }
    }
}

// Weights times the common denominator; (offset from the evaluation point, weight).
const D1_O2_CENTRAL: (&[(isize, f64)], f64) = (&[(-1, -1.0), (1, 1.0)], 2.0);
const D1_O2_EDGE: (&[(isize, f64)], f64) = (&[(0, -3.0), (1, 4.0), (2, -1.0)], 2.0);
const D1_O4_CENTRAL: (&[(isize, f64)], f64) = (&[(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)], 12.0);
const D1_O4_EDGE0: (&[(isize, f64)], f64) = (
    &[(0, -25.0), (1, 48.0), (2, -36.0), (3, 16.0), (4, -3.0)],
    12.0,
);
const D1_O4_EDGE1: (&[(isize, f64)], f64) = (
    &[(-1, -3.0), (0, -10.0), (1, 18.0), (2, -6.0), (3, 1.0)],
    12.0,
);

const D2_O2_CENTRAL: (&[(isize, f64)], f64) = (&[(-1, 1.0), (0, -2.0), (1, 1.0)], 1.0);
const D2_O2_EDGE: (&[(isize, f64)], f64) = (&[(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)], 1.0);
const D2_O4_CENTRAL: (&[(isize, f64)], f64) = (
    &[(-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)],
    12.0,
);
const D2_O4_EDGE0: (&[(isize, f64)], f64) = (
    &[
        (0, 45.0),
        (1, -154.0),
        (2, 214.0),
        (3, -156.0),
        (4, 61.0),
        (5, -10.0),
    ],
    12.0,
);
const D2_O4_EDGE1: (&[(isize, f64)], f64) = (
    &[
        (-1, 10.0),
        (0, -15.0),
        (1, -4.0),
        (2, 14.0),
        (3, -6.0),
        (4, 1.0),
    ],
    12.0,
);

type Stencil = (&'static [(isize, f64)], f64);

/// Stencil for position `k` of `n` points. Edge stencils are mirrored at the
/// far end; odd derivatives flip sign under mirroring.
fn pick(first: bool, order: StencilOrder, k: usize, n: usize) -> (Stencil, bool) {
    let from_end = n - 1 - k;
    let (central, edges): (Stencil, &[Stencil]) = match (first, order) {
        (true, StencilOrder::Second) => (D1_O2_CENTRAL, &[D1_O2_EDGE]),
        (true, StencilOrder::Fourth) => (D1_O4_CENTRAL, &[D1_O4_EDGE0, D1_O4_EDGE1]),
        (false, StencilOrder::Second) => (D2_O2_CENTRAL, &[D2_O2_EDGE]),
        (false, StencilOrder::Fourth) => (D2_O4_CENTRAL, &[D2_O4_EDGE0, D2_O4_EDGE1]),
    };
    if k < edges.len() {
        (edges[k], false)
    } else if from_end < edges.len() {
        (edges[from_end], true)
    } else {
        (central, false)
    }
}

fn apply(data: &[f64], grid: &GridSpec, axis: usize, order: StencilOrder, first: bool) -> Vec<f64> {
    let n = grid.points();
    let stride = grid.stride(axis);
    let h = grid.spacing();
    let scale = if first { h } else { h * h };
    let mut out = vec![0.0; data.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let k = (idx / stride) % n;
        let ((weights, denom), mirrored) = pick(first, order, k, n);
        let mut s = 0.0;
        for &(off, w) in weights {
            let off = if mirrored { -off } else { off };
            let pos = (idx as isize + off * stride as isize) as usize;
            s += w * data[pos];
        }
        if mirrored && first {
            s = -s;
        }
        *o = s / (denom * scale);
    }
    out
}

/// First derivative along `axis`.
pub fn derivative(s: &ScalarField, axis: usize, order: StencilOrder) -> Vec<f64> {
    apply(&s.data, &s.grid, axis, order, true)
}

pub fn second_derivative(s: &ScalarField, axis: usize, order: StencilOrder) -> Vec<f64> {
    apply(&s.data, &s.grid, axis, order, false)
}

pub fn laplacian(s: &ScalarField, order: StencilOrder) -> Vec<f64> {
    let mut out = vec![0.0; s.data.len()];
    for axis in 0..s.grid.dim() {
        for (o, v) in out.iter_mut().zip(second_derivative(s, axis, order)) {
            *o += v;
        }
    }
    out
}

/// `d_k v_i` in entry `(i, k)`.
pub fn gradient(v: &VectorField, order: StencilOrder) -> TensorField {
    let n = v.dim();
    let mut t = TensorField::zeros(v.grid, v.components.len(), n);
    for (i, c) in v.components.iter().enumerate() {
        for k in 0..n {
            *t.entry_mut(i, k) = apply(c, &v.grid, k, order, true);
        }
    }
    t
}

pub fn divergence(v: &VectorField, order: StencilOrder) -> Result<ScalarField> {
    let mut out = ScalarField::zeros(v.grid);
    for (k, c) in v.components.iter().enumerate() {
        for (o, d) in out.data.iter_mut().zip(apply(c, &v.grid, k, order, true)) {
            *o += d;
        }
    }
    Ok(out)
}
