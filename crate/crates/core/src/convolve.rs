//! Free-space convolution with the Stokes kernel family on a box grid.
//!
//! Kernels are sampled at the lattice offsets `j h`, `j in [-N, N-1]^n`, on a
//! grid padded to `2N` points per axis, with a separate rule for the origin
//! cell (see [`SingularCell`]). Source and kernel are multiplied mode by mode and
//! the result is restricted to the original box. Offsets with a coordinate
//! equal to `-N` never connect two box cells; those planes are zeroed so that
//! even kernels have purely real spectra and odd kernels purely imaginary
//! ones, and each table is stored as a single real array.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{param, Error, Result};
use crate::fft::PaddedTransform;
use crate::field::{gradient, GridSpec, ScalarField, StencilOrder, TensorField, VectorField};
use crate::kernel::{Component, StokesKernel};

/// Per-axis subsamples used for the origin cell average.
pub const SINGULAR_CELL_SUBSAMPLES: usize = 5;

/// Value used for the kernel at the origin cell. Odd components are 0 under
/// both rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularCell {
    /// Weight completing the lattice sum to fourth order
    /// ([`crate::kernel::lattice_origin_weight`]).
    LatticeCorrected,
    /// Mean of the closed form over the cell from
    /// [`SINGULAR_CELL_SUBSAMPLES`] points per axis. Leaves an `O(h^2)`
    /// error proportional to the source at each point.
    CellAverage,
}

impl SingularCell {
    pub fn origin_value(self, kernel: &StokesKernel, c: Component, h: f64) -> f64 {
        match self {
            SingularCell::LatticeCorrected => kernel.lattice_origin_value(c, h),
            SingularCell::CellAverage => kernel.cell_average(c, h, SINGULAR_CELL_SUBSAMPLES),
        }
    }

    /// Kernel value at an integer offset, including the rule's corrections.
    pub fn value(
        self,
        kernel: &StokesKernel,
        c: Component,
        offset: &[isize],
        h: f64,
        x: &mut [f64],
    ) -> f64 {
        if offset.iter().all(|&o| o == 0) {
            return self.origin_value(kernel, c, h);
        }
        for (xa, &o) in x.iter_mut().zip(offset) {
            *xa = o as f64 * h;
        }
        let v = kernel.component(c, x);
        match self {
            SingularCell::LatticeCorrected => v + kernel.lattice_neighbor_value(c, offset, h),
            SingularCell::CellAverage => v,
        }
    }

    pub fn describe(self) -> String {
        match self {
            SingularCell::LatticeCorrected => {
                "origin cell: lattice-corrected weight; pressure adds a first-moment \
                 correction at the nearest neighbours; other odd components 0"
                    .to_string()
            }
            SingularCell::CellAverage => format!(
                "origin cell: mean of closed form over {SINGULAR_CELL_SUBSAMPLES}^n subsamples, \
                 centre subcell closed by homogeneity; odd components 0"
            ),
        }
    }
}

pub const DEFAULT_MEMORY_BUDGET: usize = 2 << 30;

/// Storage policy for the `grad U` tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientTables {
    /// Store them when they fit in the budget, otherwise rebuild per use.
    Auto,
    Stored,
    OnDemand,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub pressure: bool,
    pub gradient: GradientTables,
    /// Upper bound in bytes on stored kernel tables.
    pub memory_budget: usize,
    pub singular_cell: SingularCell,
}

impl Default for PlanOptions {
    fn default() -> Self {
        Self {
            pressure: true,
            gradient: GradientTables::Auto,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            singular_cell: SingularCell::LatticeCorrected,
        }
    }
}

impl PlanOptions {
    pub fn velocity_only() -> Self {
        Self {
            pressure: false,
            gradient: GradientTables::OnDemand,
            ..Self::default()
        }
    }
}

/// Which convolution [`direct_quadrature`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Velocity,
    Pressure,
    VelocityGradient,
}

/// Transforms of the sources `g_j`, reusable across kernel products.
pub struct SourceSpectrum {
    grid: GridSpec,
    spectra: Vec<Vec<Complex64>>,
}

pub struct ConvolutionPlan {
    grid: GridSpec,
    kernel: StokesKernel,
    transform: PaddedTransform,
    /// `U_ij` for `i <= j`, real parts.
    velocity: Vec<Vec<f64>>,
    /// `P_j`, imaginary parts.
    pressure: Option<Vec<Vec<f64>>>,
    /// `d_k U_ij` for `i <= j`, imaginary parts.
    gradient: Option<Vec<Vec<f64>>>,
    singular_cell: SingularCell,
    footprint: usize,
}

impl std::fmt::Debug for ConvolutionPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvolutionPlan")
            .field("grid", &self.grid)
            .field("padded_points", &self.padded_points())
            .field("pressure", &self.pressure.is_some())
            .field("gradient_stored", &self.gradient.is_some())
            .field("footprint", &self.footprint)
            .finish()
    }
}

fn sym(i: usize, j: usize, n: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

impl ConvolutionPlan {
    pub fn new(grid: GridSpec) -> Result<Self> {
        Self::build(grid, PlanOptions::default())
    }

    pub fn build(grid: GridSpec, options: PlanOptions) -> Result<Self> {
        let n = grid.dim();
        let kernel = StokesKernel::new(n)?;
        let transform = PaddedTransform::new(n, grid.points());
        let table = transform.spectrum_len() * std::mem::size_of::<f64>();
        let nv = n * (n + 1) / 2;
        let np = if options.pressure { n } else { 0 };
        let ng = nv * n;
        let base = (nv + np) * table;
        if base > options.memory_budget {
            return Err(Error::MemoryBudget {
                required: base,
                budget: options.memory_budget,
            });
        }
        let store_gradient = match options.gradient {
            GradientTables::Stored => {
                let required = base + ng * table;
                if required > options.memory_budget {
                    return Err(Error::MemoryBudget {
                        required,
                        budget: options.memory_budget,
                    });
                }
                true
            }
            GradientTables::OnDemand => false,
            GradientTables::Auto => base + ng * table <= options.memory_budget,
        };
        let mut plan = Self {
            grid,
            kernel,
            transform,
            velocity: Vec::with_capacity(nv),
            pressure: None,
            gradient: None,
            singular_cell: options.singular_cell,
            footprint: 0,
        };
        for i in 0..n {
            for j in i..n {
                let t = plan.kernel_table(Component::Velocity(i, j));
                plan.velocity.push(t);
            }
        }
        if options.pressure {
            let t = (0..n)
                .map(|j| plan.kernel_table(Component::Pressure(j)))
                .collect();
            plan.pressure = Some(t);
        }
        if store_gradient {
            let mut t = Vec::with_capacity(ng);
            for i in 0..n {
                for j in i..n {
                    for k in 0..n {
                        t.push(plan.kernel_table(Component::VelocityGradient(i, j, k)));
                    }
                }
            }
            plan.gradient = Some(t);
        }
        plan.footprint = (plan.velocity.len()
            + plan.pressure.as_ref().map_or(0, Vec::len)
            + plan.gradient.as_ref().map_or(0, Vec::len))
            * table;
        Ok(plan)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn padded_points(&self) -> usize {
        self.transform.padded_points()
    }

    /// Bytes held by the stored kernel tables.
    pub fn footprint_bytes(&self) -> usize {
        self.footprint
    }

    pub fn has_pressure(&self) -> bool {
        self.pressure.is_some()
    }

    pub fn stores_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn singular_cell(&self) -> SingularCell {
        self.singular_cell
    }

    pub fn singular_cell_rule(&self) -> String {
        self.singular_cell.describe()
    }

    /// Kernel weight `K(j h) h^n` for an integer offset, with the origin rule.
    fn weight(&self, c: Component, offset: &[isize], x: &mut [f64]) -> f64 {
        let h = self.grid.spacing();
        self.singular_cell.value(&self.kernel, c, offset, h, x) * self.grid.cell_volume()
    }

    fn kernel_table(&self, c: Component) -> Vec<f64> {
        let n = self.grid.dim();
        let big_n = self.grid.points() as isize;
        let m = self.transform.padded_points();
        let mut sampled = vec![0.0; self.transform.padded_len()];
        sampled.par_chunks_mut(m).enumerate().for_each_init(
            || (vec![0isize; n], vec![0.0; n]),
            |(offset, x), (row, out)| {
                let mut r = row;
                let mut skip = false;
                for a in (0..n - 1).rev() {
                    let q = (r % m) as isize;
                    r /= m;
                    if q == big_n {
                        skip = true;
                    }
                    offset[a] = if q < big_n { q } else { q - 2 * big_n };
                }
                if skip {
                    return;
                }
                for (q, o) in out.iter_mut().enumerate() {
                    let q = q as isize;
                    if q == big_n {
                        continue;
                    }
                    offset[n - 1] = if q < big_n { q } else { q - 2 * big_n };
                    *o = self.weight(c, offset, x);
                }
            },
        );
        let spec = self.transform.forward_full(&sampled);
        if c.is_odd() {
            spec.into_iter().map(|z| z.im).collect()
        } else {
            spec.into_iter().map(|z| z.re).collect()
        }
    }

    pub fn source_spectrum(&self, g: &VectorField) -> Result<SourceSpectrum> {
        self.grid.ensure_same(&g.grid)?;
        if g.dim() != self.grid.dim() {
            return Err(param(
                "g",
                format!("{} components, expected {}", g.dim(), self.grid.dim()),
            ));
        }
        Ok(SourceSpectrum {
            grid: self.grid,
            spectra: g
                .components
                .iter()
                .map(|c| self.transform.forward_box(c))
                .collect(),
        })
    }

    fn check(&self, s: &SourceSpectrum) -> Result<()> {
        self.grid.ensure_same(&s.grid)
    }

    /// `sum_j T_j G_j`, with `T_j` real (even) or imaginary (odd) tables.
    fn combine(&self, tables: &[&[f64]], spectra: &[Vec<Complex64>], odd: bool) -> Vec<f64> {
        const CHUNK: usize = 4096;
        let mut out = vec![Complex64::default(); self.transform.spectrum_len()];
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, block)| {
                let start = c * CHUNK;
                for (t, g) in tables.iter().zip(spectra) {
                    let t = &t[start..start + block.len()];
                    let g = &g[start..start + block.len()];
                    if odd {
                        for ((o, &w), z) in block.iter_mut().zip(t).zip(g) {
                            *o += Complex64::new(-w * z.im, w * z.re);
                        }
                    } else {
                        for ((o, &w), z) in block.iter_mut().zip(t).zip(g) {
                            *o += z * w;
                        }
                    }
                }
            });
        self.transform.inverse_box(&mut out)
    }

    pub fn velocity(&self, s: &SourceSpectrum) -> Result<VectorField> {
        self.check(s)?;
        let n = self.grid.dim();
        let components = (0..n)
            .map(|i| {
                let tables: Vec<&[f64]> = (0..n)
                    .map(|j| self.velocity[sym(i, j, n)].as_slice())
                    .collect();
                self.combine(&tables, &s.spectra, false)
            })
            .collect();
        VectorField::from_components(self.grid, components)
    }

    pub fn pressure(&self, s: &SourceSpectrum) -> Result<ScalarField> {
        self.check(s)?;
        let tables = self
            .pressure
            .as_ref()
            .ok_or_else(|| param("pressure", "plan was built without pressure tables"))?;
        let tables: Vec<&[f64]> = tables.iter().map(Vec::as_slice).collect();
        ScalarField::from_data(self.grid, self.combine(&tables, &s.spectra, true))
    }

    /// `d_k u_i = sum_j d_k U_ij * g_j` in entry `(i, k)`.
    pub fn velocity_gradient(&self, s: &SourceSpectrum) -> Result<TensorField> {
        self.check(s)?;
        let n = self.grid.dim();
        let mut t = TensorField::zeros(self.grid, n, n);
        match &self.gradient {
            Some(stored) => {
                for i in 0..n {
                    for k in 0..n {
                        let tables: Vec<&[f64]> = (0..n)
                            .map(|j| stored[sym(i, j, n) * n + k].as_slice())
                            .collect();
                        *t.entry_mut(i, k) = self.combine(&tables, &s.spectra, true);
                    }
                }
            }
            None => {
                for k in 0..n {
                    let mut acc =
                        vec![vec![Complex64::default(); self.transform.spectrum_len()]; n];
                    for i in 0..n {
                        for j in i..n {
                            let table = self.kernel_table(Component::VelocityGradient(i, j, k));
                            accumulate_odd(&mut acc[i], &table, &s.spectra[j]);
                            if i != j {
                                accumulate_odd(&mut acc[j], &table, &s.spectra[i]);
                            }
                        }
                    }
                    for (i, mut a) in acc.into_iter().enumerate() {
                        *t.entry_mut(i, k) = self.transform.inverse_box(&mut a);
                    }
                }
            }
        }
        Ok(t)
    }
}

fn accumulate_odd(acc: &mut [Complex64], table: &[f64], g: &[Complex64]) {
    acc.par_iter_mut()
        .zip(table.par_iter())
        .zip(g.par_iter())
        .for_each(|((o, &w), z)| *o += Complex64::new(-w * z.im, w * z.re));
}

/// Velocity and pressure of the Stokes problem with source `g`.
pub fn stokes_solve(plan: &ConvolutionPlan, g: &VectorField) -> Result<(VectorField, ScalarField)> {
    let s = plan.source_spectrum(g)?;
    Ok((plan.velocity(&s)?, plan.pressure(&s)?))
}

/// Direct summation `sum_y K(x - y) g(y) h^n` at one point, using the
/// default origin-cell rule when `x` is a grid point. Velocity returns `n`
/// values, pressure 1, and the gradient `n*n` values with `d_k u_i` at
/// `i*n + k`.
pub fn direct_quadrature(g: &VectorField, x: &[f64], which: Which) -> Result<Vec<f64>> {
    direct_quadrature_with_rule(g, x, which, PlanOptions::default().singular_cell)
}

pub fn direct_quadrature_with_rule(
    g: &VectorField,
    x: &[f64],
    which: Which,
    rule: SingularCell,
) -> Result<Vec<f64>> {
    let grid = g.grid;
    let n = grid.dim();
    if x.len() != n {
        return Err(param(
            "x",
            format!("{} coordinates, dimension is {n}", x.len()),
        ));
    }
    let kernel = StokesKernel::new(n)?;
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let on_grid = grid.grid_point_at(x);
    let mut x_multi = vec![0usize; n];
    if let Some(idx) = on_grid {
        grid.multi_index(idx, &mut x_multi);
    }
    let out_len = match which {
        Which::Velocity => n,
        Which::Pressure => 1,
        Which::VelocityGradient => n * n,
    };
    let chunk = grid.points().pow(n as u32 - 1);
    let partial = (0..grid.points())
        .into_par_iter()
        .map(|slab| {
            let mut out = vec![0.0; out_len];
            let mut y_multi = vec![0usize; n];
            let mut d = vec![0.0; n];
            let mut off = vec![0isize; n];
            let mut scratch = vec![0.0; n];
            for idx in slab * chunk..(slab + 1) * chunk {
                if (0..n).all(|j| g.components[j][idx] == 0.0) {
                    continue;
                }
                grid.multi_index(idx, &mut y_multi);
                let lattice = on_grid.is_some();
                if lattice {
                    for a in 0..n {
                        off[a] = x_multi[a] as isize - y_multi[a] as isize;
                    }
                } else {
                    for a in 0..n {
                        d[a] = x[a] - grid.coord(y_multi[a]);
                    }
                }
                let mut k = |c: Component| {
                    if lattice {
                        rule.value(&kernel, c, &off, h, &mut scratch)
                    } else {
                        kernel.component(c, &d)
                    }
                };
                for j in 0..n {
                    let gj = g.components[j][idx] * vol;
                    if gj == 0.0 {
                        continue;
                    }
                    match which {
                        Which::Velocity => {
                            for i in 0..n {
                                out[i] += k(Component::Velocity(i, j)) * gj;
                            }
                        }
                        Which::Pressure => out[0] += k(Component::Pressure(j)) * gj,
                        Which::VelocityGradient => {
                            for i in 0..n {
                                for kk in 0..n {
                                    out[i * n + kk] +=
                                        k(Component::VelocityGradient(i, j, kk)) * gj;
                                }
                            }
                        }
                    }
                }
            }
            out
        })
        .reduce(
            || vec![0.0; out_len],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(partial)
}

/// `(u . grad) u` with fourth-order differences.
pub fn apply_nonlinearity(u: &VectorField) -> VectorField {
    let grad = gradient(u, StencilOrder::Fourth);
    advect(u, &grad)
}

/// `sum_k u_k d_k u_j` from a precomputed gradient.
pub(crate) fn advect(u: &VectorField, grad: &TensorField) -> VectorField {
    let n = u.dim();
    let components = (0..n)
        .map(|j| {
            let mut out = vec![0.0; u.grid.len()];
            for k in 0..n {
                for ((o, uk), d) in out.iter_mut().zip(&u.components[k]).zip(grad.entry(j, k)) {
                    *o += uk * d;
                }
            }
            out
        })
        .collect();
    VectorField {
        grid: u.grid,
        components,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_index_is_dense() {
        let n = 4;
        let mut seen = vec![false; n * (n + 1) / 2];
        for i in 0..n {
            for j in i..n {
                assert!(!seen[sym(i, j, n)]);
                seen[sym(i, j, n)] = true;
                assert_eq!(sym(i, j, n), sym(j, i, n));
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn footprint_follows_layout() {
        let g = GridSpec::new(3, 8, 2.0).unwrap();
        let plan = ConvolutionPlan::build(
            g,
            PlanOptions {
                pressure: true,
                gradient: GradientTables::Stored,
                memory_budget: usize::MAX,
                ..PlanOptions::default()
            },
        )
        .unwrap();
        let table = 16 * 16 * 9 * 8;
        assert_eq!(plan.footprint_bytes(), (6 + 3 + 18) * table);
        let err = ConvolutionPlan::build(
            g,
            PlanOptions {
                memory_budget: 1000,
                ..PlanOptions::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { required, .. } if required == 9 * table));
    }

    #[test]
    fn stored_and_on_demand_gradients_agree() {
        let g = GridSpec::new(3, 8, 2.0).unwrap();
        let src = VectorField::from_fn(g, |x, out| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            out[0] = (-r2).exp();
            out[2] = x[1] * (-r2).exp();
        });
        let a = ConvolutionPlan::build(
            g,
            PlanOptions {
                gradient: GradientTables::Stored,
                ..PlanOptions::default()
            },
        )
        .unwrap();
        let b = ConvolutionPlan::build(g, PlanOptions::velocity_only()).unwrap();
        let ta = a
            .velocity_gradient(&a.source_spectrum(&src).unwrap())
            .unwrap();
        let tb = b
            .velocity_gradient(&b.source_spectrum(&src).unwrap())
            .unwrap();
        for (x, y) in ta.entries.iter().flatten().zip(tb.entries.iter().flatten()) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
