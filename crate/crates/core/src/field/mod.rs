//! Dense scalar, vector and tensor fields on a centred, cell-centred grid over
//! `[-L, L)^n`, plus the norms and radial statistics computed from them.

mod io;
mod norms;
mod profile;
mod stencil;

pub use io::{read_nsf1, write_nsf1, RawField, NSF1_MAGIC, NSF1_VERSION};
pub(crate) use norms::for_each_in_ball;
pub use norms::{
    cd1_norm, lp_norm, lp_norm_with_coverage, morrey_norm, positive_part, weighted_sup_norm,
    MorreySample, Pointwise, Region,
};
pub(crate) use profile::least_squares;
pub use profile::{radial_profile, radial_profile_with_window, DecayProfile, DEFAULT_FIT_WINDOW};
pub use stencil::{derivative, divergence, gradient, laplacian, second_derivative, StencilOrder};

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 3;
pub const MAX_DIM: usize = 7;

/// Regular grid with `points` cells per axis; cell centres sit at
/// `(k + 1/2) h - L` with `h = 2L / points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    points: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if !(MIN_DIM..=MAX_DIM).contains(&dim) {
            return Err(Error::Grid(format!(
                "dimension {dim} outside {MIN_DIM}..={MAX_DIM}"
            )));
        }
        if points < 2 || points % 2 != 0 {
            return Err(Error::Grid(format!(
                "points per axis must be even and >= 2, got {points}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Grid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        let total = points
            .checked_pow(dim as u32)
            .filter(|t| t.checked_mul(8).is_some_and(|b| b <= isize::MAX as usize))
            .ok_or_else(|| Error::Grid(format!("{points}^{dim} points do not fit in memory")))?;
        debug_assert!(total > 0);
        Ok(Self {
            dim,
            points,
            half_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stride of `axis` in the row-major layout.
    pub fn stride(&self, axis: usize) -> usize {
        self.points.pow((self.dim - 1 - axis) as u32)
    }

    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * self.spacing() - self.half_width
    }

    /// Index along one axis of the cell containing `x`, if inside the box.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let k = ((x + self.half_width) / self.spacing()).floor();
        (k >= 0.0 && k < self.points as f64).then_some(k as usize)
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &k| acc * self.points + k)
    }

    pub fn multi_index(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = idx % self.points;
            idx /= self.points;
        }
    }

    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let mut idx = idx;
        for a in (0..self.dim).rev() {
            out[a] = self.coord(idx % self.points);
            idx /= self.points;
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let mut idx = idx;
        let mut r2 = 0.0;
        for _ in 0..self.dim {
            let c = self.coord(idx % self.points);
            r2 += c * c;
            idx /= self.points;
        }
        r2.sqrt()
    }

    /// Grid point index whose centre is within `1e-9 h` of `x`.
    pub fn grid_point_at(&self, x: &[f64]) -> Option<usize> {
        let h = self.spacing();
        let mut idx = 0;
        for &xa in x {
            let k = ((xa + self.half_width) / h - 0.5).round();
            if k < 0.0 || k >= self.points as f64 {
                return None;
            }
            if (self.coord(k as usize) - xa).abs() > 1e-9 * h {
                return None;
            }
            idx = idx * self.points + k as usize;
        }
        Some(idx)
    }

    /// Mask of points with every coordinate inside `[-fraction L, fraction L]`.
    pub fn interior_mask(&self, fraction: f64) -> Vec<bool> {
        let bound = fraction * self.half_width;
        let inside: Vec<bool> = (0..self.points)
            .map(|k| self.coord(k).abs() <= bound)
            .collect();
        let mut multi = vec![0; self.dim];
        (0..self.len())
            .map(|idx| {
                self.multi_index(idx, &mut multi);
                multi.iter().all(|&k| inside[k])
            })
            .collect()
    }

    pub fn describe(&self) -> String {
        format!("n={} N={} L={}", self.dim, self.points, self.half_width)
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.describe(),
                right: other.describe(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_data(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Grid(format!(
                "{} values for a grid of {} points",
                data.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let data = (0..grid.len())
            .map(|idx| {
                grid.point(idx, &mut x);
                f(&x)
            })
            .collect();
        Self { grid, data }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Vector field stored component-wise; all components share one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            components: vec![vec![0.0; grid.len()]; grid.dim()],
        }
    }

    pub fn from_components(grid: GridSpec, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != grid.dim() || components.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Grid(format!(
                "vector field needs {} components of {} values",
                grid.dim(),
                grid.len()
            )));
        }
        Ok(Self { grid, components })
    }

    /// Samples `f(x, out)` which writes the `n` components at `x`.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let n = grid.dim();
        let mut components = vec![vec![0.0; grid.len()]; n];
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; n];
        for idx in 0..grid.len() {
            grid.point(idx, &mut x);
            v.iter_mut().for_each(|c| *c = 0.0);
            f(&x, &mut v);
            for a in 0..n {
                components[a][idx] = v[a];
            }
        }
        Self { grid, components }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn component(&self, i: usize) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.components[i].clone(),
        }
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField {
        let data = (0..self.grid.len())
            .map(|idx| {
                self.components
                    .iter()
                    .map(|c| c[idx] * c[idx])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        ScalarField {
            grid: self.grid,
            data,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
                .collect(),
        })
    }

    /// Discrete `L^2` norm over the whole grid.
    pub fn l2(&self) -> f64 {
        let s: f64 = self
            .components
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| v * v)
            .sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().flatten().all(|v| *v == 0.0)
    }
}

/// Matrix-valued field; entry `(i, k)` usually holds `d_k v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub grid: GridSpec,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<f64>>,
}

impl TensorField {
    pub fn zeros(grid: GridSpec, rows: usize, cols: usize) -> Self {
        Self {
            grid,
            rows,
            cols,
            entries: vec![vec![0.0; grid.len()]; rows * cols],
        }
    }

    pub fn entry(&self, i: usize, k: usize) -> &[f64] {
        &self.entries[i * self.cols + k]
    }

    pub fn entry_mut(&mut self, i: usize, k: usize) -> &mut Vec<f64> {
        &mut self.entries[i * self.cols + k]
    }

    /// Pointwise Frobenius norm.
    pub fn magnitude(&self) -> ScalarField {
        let data = (0..self.grid.len())
            .map(|idx| {
                self.entries
                    .iter()
                    .map(|c| c[idx] * c[idx])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        ScalarField {
            grid: self.grid,
            data,
        }
    }

    /// All entries viewed as one long vector field, for weighted norms.
    pub fn flattened(&self) -> VectorField {
        VectorField {
            grid: self.grid,
            components: self.entries.clone(),
        }
    }

    /// Takes entries from `inside` where `mask` holds and from `self` elsewhere.
    pub fn blend(&self, inside: &TensorField, mask: &[bool]) -> Result<Self> {
        self.grid.ensure_same(&inside.grid)?;
        let entries = self
            .entries
            .iter()
            .zip(&inside.entries)
            .map(|(out, inn)| {
                out.iter()
                    .zip(inn)
                    .zip(mask)
                    .map(|((o, i), m)| if *m { *i } else { *o })
                    .collect()
            })
            .collect();
        Ok(Self {
            grid: self.grid,
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }
}
