//! Quantities certifying a computed solution: decay exponents, the energy
//! identity, the head pressure equation, scaled vorticity, tail energy and
//! the `L^r` norm of the positive head pressure.

use crate::convolve::{advect, ConvolutionPlan};
use crate::error::{param, Error, Result};
use crate::field::for_each_in_ball;
use crate::field::{
    derivative, divergence, gradient, laplacian, lp_norm, positive_part,
    radial_profile_with_window, DecayProfile, GridSpec, Region, ScalarField, StencilOrder,
    TensorField, VectorField, DEFAULT_FIT_WINDOW,
};

/// Fraction of the half width used for PDE residuals.
pub const INTERIOR_FRACTION: f64 = 2.0 / 3.0;

const ORDER: StencilOrder = StencilOrder::Fourth;

/// `|u|^2 / 2 + p`.
pub fn head_pressure(u: &VectorField, p: &ScalarField) -> Result<ScalarField> {
    u.grid.ensure_same(&p.grid)?;
    let data = p
        .data
        .iter()
        .enumerate()
        .map(|(idx, pv)| 0.5 * u.components.iter().map(|c| c[idx] * c[idx]).sum::<f64>() + pv)
        .collect();
    ScalarField::from_data(u.grid, data)
}

fn masked_l2(v: &[f64], mask: &[bool], vol: f64) -> f64 {
    (v.iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(x, _)| x * x)
        .sum::<f64>()
        * vol)
        .sqrt()
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `sum_{i<j} (d_i u_j - d_j u_i)^2`, i.e. half the sum over ordered pairs.
fn vorticity_pairs(grad: &TensorField, idx: usize) -> f64 {
    let n = grad.rows;
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let w = grad.entry(j, i)[idx] - grad.entry(i, j)[idx];
            s += w * w;
        }
    }
    s
}

/// Both sides of the head pressure equation
/// `-Lap theta + u . grad theta = -sum_{i<j} (d_i u_j - d_j u_i)^2 + f . u - div f`.
pub fn head_pressure_sides(
    u: &VectorField,
    p: &ScalarField,
    f: &VectorField,
) -> Result<(Vec<f64>, Vec<f64>)> {
    u.grid.ensure_same(&f.grid)?;
    let theta = head_pressure(u, p)?;
    let n = u.dim();
    let lap = laplacian(&theta, ORDER);
    let mut lhs: Vec<f64> = lap.iter().map(|v| -v).collect();
    for k in 0..n {
        let d = derivative(&theta, k, ORDER);
        for ((l, uk), dk) in lhs.iter_mut().zip(&u.components[k]).zip(d) {
            *l += uk * dk;
        }
    }
    let grad = gradient(u, ORDER);
    let div_f = divergence(f, ORDER)?;
    let rhs = (0..u.grid.len())
        .map(|idx| {
            let fu: f64 = (0..n)
                .map(|k| f.components[k][idx] * u.components[k][idx])
                .sum();
            -vorticity_pairs(&grad, idx) + fu - div_f.data[idx]
        })
        .collect();
    Ok((lhs, rhs))
}

/// `||LHS - RHS|| / (||LHS|| + ||RHS||)` of the head pressure equation on the
/// interior two-thirds of the box; `0/0` is reported as 0.
pub fn head_pressure_residual(u: &VectorField, p: &ScalarField, f: &VectorField) -> Result<f64> {
    let (lhs, rhs) = head_pressure_sides(u, p, f)?;
    let mask = u.grid.interior_mask(INTERIOR_FRACTION);
    let vol = u.grid.cell_volume();
    let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(ratio(
        masked_l2(&diff, &mask, vol),
        masked_l2(&lhs, &mask, vol) + masked_l2(&rhs, &mask, vol),
    ))
}

/// `||-Lap u + (u.grad)u + grad p - f|| / ||f||` on the interior two-thirds.
pub fn momentum_residual(u: &VectorField, p: &ScalarField, f: &VectorField) -> Result<f64> {
    u.grid.ensure_same(&p.grid)?;
    u.grid.ensure_same(&f.grid)?;
    let grid = u.grid;
    let mask = grid.interior_mask(INTERIOR_FRACTION);
    let grad = gradient(u, ORDER);
    let adv = advect(u, &grad);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..u.dim() {
        let uj = u.component(j);
        let lap = laplacian(&uj, ORDER);
        let dp = derivative(p, j, ORDER);
        for idx in 0..grid.len() {
            if !mask[idx] {
                continue;
            }
            let fj = f.components[j][idx];
            let r = -lap[idx] + adv.components[j][idx] + dp[idx] - fj;
            num += r * r;
            den += fj * fj;
        }
    }
    Ok(ratio(num.sqrt(), den.sqrt()))
}

/// `||div u|| / ||grad u||` on the interior two-thirds.
pub fn divergence_ratio(u: &VectorField) -> Result<f64> {
    let grid = u.grid;
    let mask = grid.interior_mask(INTERIOR_FRACTION);
    let div = divergence(u, ORDER)?;
    let grad = gradient(u, ORDER);
    let vol = grid.cell_volume();
    let g2: f64 = grad
        .entries
        .iter()
        .map(|e| masked_l2(e, &mask, vol).powi(2))
        .sum();
    Ok(ratio(masked_l2(&div.data, &mask, vol), g2.sqrt()))
}

fn grad_energy(grad: &TensorField) -> f64 {
    let vol = grad.grid.cell_volume();
    grad.entries.iter().flatten().map(|v| v * v).sum::<f64>() * vol
}

/// `|int |grad u|^2 - int f . u| / int |grad u|^2` over the box with the given gradient.
pub fn energy_gap_with_gradient(
    grad: &TensorField,
    u: &VectorField,
    f: &VectorField,
) -> Result<f64> {
    u.grid.ensure_same(&f.grid)?;
    u.grid.ensure_same(&grad.grid)?;
    let vol = u.grid.cell_volume();
    let e = grad_energy(grad);
    let fu: f64 = u
        .components
        .iter()
        .zip(&f.components)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
        .sum::<f64>()
        * vol;
    if e == 0.0 {
        if fu == 0.0 && f.is_zero() {
            return Ok(0.0);
        }
        return Err(param("u", "zero gradient energy with nonzero force"));
    }
    Ok((e - fu).abs() / e)
}

/// Energy gap with fourth-order difference gradients.
pub fn energy_gap(u: &VectorField, f: &VectorField) -> Result<f64> {
    energy_gap_with_gradient(&gradient(u, ORDER), u, f)
}

/// `r^-(n-4) int_{B_r(x0)} sum_{i,j} (d_i u_j - d_j u_i)^2`, summed over
/// ordered pairs.
pub fn scaled_vorticity_with_gradient(grad: &TensorField, x0: &[f64], r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(param("r", format!("radius must be positive, got {r}")));
    }
    let grid = grad.grid;
    let n = grid.dim();
    if x0.len() != n {
        return Err(param(
            "x0",
            format!("{} coordinates, dimension is {n}", x0.len()),
        ));
    }
    let mut s = 0.0;
    for_each_in_ball(&grid, x0, r, |idx| s += 2.0 * vorticity_pairs(grad, idx));
    Ok(s * grid.cell_volume() * r.powf(-(n as f64 - 4.0)))
}

pub fn scaled_vorticity(u: &VectorField, x0: &[f64], r: f64) -> Result<f64> {
    scaled_vorticity_with_gradient(&gradient(u, ORDER), x0, r)
}

/// Largest scaled vorticity over a set of centres and radii.
#[derive(Debug, Clone, PartialEq)]
pub struct VorticityScan {
    pub max: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Per radius, the maximum over centres.
    pub per_radius: Vec<(f64, f64)>,
}

pub fn scaled_vorticity_scan(
    grad: &TensorField,
    centers: &[Vec<f64>],
    radii: &[f64],
) -> Result<VorticityScan> {
    if centers.is_empty() || radii.is_empty() {
        return Err(param("centers", "empty scan"));
    }
    let mut best = VorticityScan {
        max: f64::NEG_INFINITY,
        center: centers[0].clone(),
        radius: radii[0],
        per_radius: Vec::with_capacity(radii.len()),
    };
    for &r in radii {
        let mut m = f64::NEG_INFINITY;
        for c in centers {
            let v = scaled_vorticity_with_gradient(grad, c, r)?;
            if v > m {
                m = v;
            }
            if v > best.max {
                best.max = v;
                best.center = c.clone();
                best.radius = r;
            }
        }
        best.per_radius.push((r, m));
    }
    Ok(best)
}

/// `int_{box \ B_R} |grad u|^2` for each `R`.
pub fn tail_energy_with_gradient(grad: &TensorField, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    let grid = grad.grid;
    let l = grid.half_width();
    let vol = grid.cell_volume();
    let dens: Vec<f64> = (0..grid.len())
        .map(|idx| grad.entries.iter().map(|e| e[idx] * e[idx]).sum())
        .collect();
    radii
        .iter()
        .map(|&r| {
            if !(r >= 0.0 && r < l) {
                return Err(param("radii", format!("{r} outside [0, {l})")));
            }
            let s: f64 = dens
                .iter()
                .enumerate()
                .filter(|(idx, _)| grid.radius(*idx) > r)
                .map(|(_, d)| d)
                .sum();
            Ok((r, s * vol))
        })
        .collect()
}

pub fn tail_energy(u: &VectorField, radii: &[f64]) -> Result<Vec<(f64, f64)>> {
    tail_energy_with_gradient(&gradient(u, ORDER), radii)
}

/// Default exponent for `||theta_+||_{L^r}`: `r = n q / (n - 2q)` with `q`
/// the midpoint of `[max(2, n/4), min(4, n/2)]`. When that `q` is not below
/// `n/2` (so `r` would be infinite or negative, as for `n <= 4`), `r = n`.
pub fn default_theta_exponent(n: usize) -> f64 {
    let nf = n as f64;
    let q = (f64::max(2.0, nf / 4.0) + f64::min(4.0, nf / 2.0)) / 2.0;
    if nf - 2.0 * q > 0.0 {
        nf * q / (nf - 2.0 * q)
    } else {
        nf
    }
}

/// Gradient from the kernel convolution outside `supp f` and from fourth-order
/// differences inside.
pub fn blended_gradient(
    plan: &ConvolutionPlan,
    u: &VectorField,
    f: &VectorField,
) -> Result<TensorField> {
    plan.grid().ensure_same(&u.grid)?;
    u.grid.ensure_same(&f.grid)?;
    let fd = gradient(u, ORDER);
    let source = f.combine(1.0, &advect(u, &fd), -1.0)?;
    let conv = plan.velocity_gradient(&plan.source_spectrum(&source)?)?;
    let mask: Vec<bool> = (0..u.grid.len())
        .map(|idx| f.components.iter().any(|c| c[idx] != 0.0))
        .collect();
    conv.blend(&fd, &mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsParams {
    pub shells: usize,
    /// Fit window as fractions of the half width.
    pub fit_window: (f64, f64),
    /// `None` selects [`default_theta_exponent`].
    pub theta_exponent: Option<f64>,
    /// Centre lattice stride, in grid cells, for the vorticity scan.
    pub vorticity_stride: usize,
    /// Vorticity radii as multiples of `h`; doubled until reaching `L/2`.
    pub vorticity_min_radius: f64,
    /// Tail radii as fractions of the half width.
    pub tail_fractions: Vec<f64>,
}

impl Default for DiagnosticsParams {
    fn default() -> Self {
        Self {
            shells: 24,
            fit_window: DEFAULT_FIT_WINDOW,
            theta_exponent: None,
            vorticity_stride: 8,
            vorticity_min_radius: 2.0,
            tail_fractions: vec![0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75],
        }
    }
}

impl DiagnosticsParams {
    pub fn validate(&self) -> Result<()> {
        if self.shells < 4 {
            return Err(param("shells", format!("at least 4, got {}", self.shells)));
        }
        let (a, b) = self.fit_window;
        if !(0.0 < a && a < b && b <= 1.0) {
            return Err(param(
                "fit_window",
                format!("need 0 < a < b <= 1, got ({a}, {b})"),
            ));
        }
        if let Some(r) = self.theta_exponent {
            if !(r >= 1.0) {
                return Err(param("theta_exponent", format!("need r >= 1, got {r}")));
            }
        }
        if self.vorticity_stride == 0 {
            return Err(param("vorticity_stride", "must be positive"));
        }
        if !(self.vorticity_min_radius > 0.0) {
            return Err(param("vorticity_min_radius", "must be positive"));
        }
        if self.tail_fractions.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(param("tail_fractions", "fractions must lie in [0, 1)"));
        }
        Ok(())
    }

    fn vorticity_radii(&self, grid: &GridSpec) -> Vec<f64> {
        let mut r = self.vorticity_min_radius * grid.spacing();
        let mut out = Vec::new();
        while r <= 0.5 * grid.half_width() {
            out.push(r);
            r *= 2.0;
        }
        if out.is_empty() {
            out.push(0.5 * grid.half_width());
        }
        out
    }

    fn vorticity_centers(&self, grid: &GridSpec) -> Vec<Vec<f64>> {
        let mask = grid.interior_mask(0.5);
        let mut multi = vec![0; grid.dim()];
        let mut x = vec![0.0; grid.dim()];
        let half = grid.points() / 2;
        (0..grid.len())
            .filter(|&idx| {
                if !mask[idx] {
                    return false;
                }
                grid.multi_index(idx, &mut multi);
                multi.iter().all(|&k| {
                    (k as isize - half as isize).rem_euclid(self.vorticity_stride as isize) == 0
                })
            })
            .map(|idx| {
                grid.point(idx, &mut x);
                x.clone()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsBundle {
    pub u_decay: DecayProfile,
    pub grad_u_decay: DecayProfile,
    pub p_decay: DecayProfile,
    pub energy_gap: f64,
    pub head_pressure_residual: f64,
    pub momentum_residual: f64,
    pub divergence_ratio: f64,
    pub theta_plus_lr: f64,
    pub theta_exponent: f64,
    pub scaled_vorticity: VorticityScan,
    pub tail_energy: Vec<(f64, f64)>,
    /// `sup (1+|x|)^(n-3)|u| + sup (1+|x|)^(n-2)|grad u|` over the box.
    pub cd1_norm: f64,
}

fn profile_or_flat<F: crate::field::Pointwise>(
    s: &F,
    grid: &GridSpec,
    params: &DiagnosticsParams,
) -> Result<DecayProfile> {
    let l = grid.half_width();
    let window = (params.fit_window.0 * l, params.fit_window.1 * l);
    match radial_profile_with_window(s, params.shells, window) {
        Err(Error::Fit(_)) if (0..grid.len()).all(|i| s.abs_at(i) == 0.0) => Ok(DecayProfile {
            shell_radii: Vec::new(),
            sup_radii: Vec::new(),
            shell_sup: Vec::new(),
            shell_mean: Vec::new(),
            shell_count: Vec::new(),
            fitted_exponent: 0.0,
            fit_window: window,
            fit_residual: 0.0,
            fit_points: 0,
        }),
        other => other,
    }
}

/// All diagnostics for `(u, p)` with force `f`. A pure function of its inputs.
pub fn full_bundle(
    plan: &ConvolutionPlan,
    u: &VectorField,
    p: &ScalarField,
    f: &VectorField,
    params: &DiagnosticsParams,
) -> Result<DiagnosticsBundle> {
    let grad = blended_gradient(plan, u, f)?;
    bundle_with_gradient(plan, u, p, f, &grad, params)
}

/// [`full_bundle`] with the gradient already computed by [`blended_gradient`].
pub fn bundle_with_gradient(
    plan: &ConvolutionPlan,
    u: &VectorField,
    p: &ScalarField,
    f: &VectorField,
    grad: &TensorField,
    params: &DiagnosticsParams,
) -> Result<DiagnosticsBundle> {
    params.validate()?;
    let grid = *plan.grid();
    grid.ensure_same(&u.grid)?;
    grid.ensure_same(&p.grid)?;
    grid.ensure_same(&f.grid)?;
    grid.ensure_same(&grad.grid)?;
    let theta = head_pressure(u, p)?;
    let r = params
        .theta_exponent
        .unwrap_or_else(|| default_theta_exponent(grid.dim()));
    let l = grid.half_width();
    let tail_radii: Vec<f64> = params.tail_fractions.iter().map(|t| t * l).collect();
    let bundle = DiagnosticsBundle {
        u_decay: profile_or_flat(u, &grid, params)?,
        grad_u_decay: profile_or_flat(grad, &grid, params)?,
        p_decay: profile_or_flat(p, &grid, params)?,
        energy_gap: if u.is_zero() && f.is_zero() {
            0.0
        } else {
            energy_gap_with_gradient(grad, u, f)?
        },
        head_pressure_residual: head_pressure_residual(u, p, f)?,
        momentum_residual: momentum_residual(u, p, f)?,
        divergence_ratio: divergence_ratio(u)?,
        theta_plus_lr: lp_norm(&positive_part(&theta), r, &Region::Whole)?,
        theta_exponent: r,
        scaled_vorticity: scaled_vorticity_scan(
            grad,
            &params.vorticity_centers(&grid),
            &params.vorticity_radii(&grid),
        )?,
        tail_energy: tail_energy_with_gradient(grad, &tail_radii)?,
        cd1_norm: crate::field::cd1_norm(u, grad)?,
    };
    Ok(bundle)
}

fn fmt_point(x: &[f64]) -> String {
    x.iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl DiagnosticsBundle {
    /// `(name, value, params)` rows.
    pub fn rows(&self) -> Vec<(String, f64, String)> {
        let mut rows = Vec::new();
        for (name, prof) in [
            ("u_decay", &self.u_decay),
            ("grad_u_decay", &self.grad_u_decay),
            ("p_decay", &self.p_decay),
        ] {
            rows.push((
                format!("{name}.fitted_exponent"),
                prof.fitted_exponent,
                format!(
                    "window={} {};points={}",
                    prof.fit_window.0, prof.fit_window.1, prof.fit_points
                ),
            ));
            rows.push((
                format!("{name}.fit_residual"),
                prof.fit_residual,
                String::new(),
            ));
        }
        rows.push(("energy_gap".into(), self.energy_gap, String::new()));
        rows.push((
            "head_pressure_residual".into(),
            self.head_pressure_residual,
            format!("interior={INTERIOR_FRACTION}"),
        ));
        rows.push((
            "momentum_residual".into(),
            self.momentum_residual,
            format!("interior={INTERIOR_FRACTION}"),
        ));
        rows.push((
            "divergence_ratio".into(),
            self.divergence_ratio,
            format!("interior={INTERIOR_FRACTION}"),
        ));
        rows.push((
            "theta_plus_lr".into(),
            self.theta_plus_lr,
            format!("r={}", self.theta_exponent),
        ));
        rows.push((
            "scaled_vorticity_max".into(),
            self.scaled_vorticity.max,
            format!(
                "x0={};r={}",
                fmt_point(&self.scaled_vorticity.center),
                self.scaled_vorticity.radius
            ),
        ));
        for (r, v) in &self.scaled_vorticity.per_radius {
            rows.push(("scaled_vorticity".into(), *v, format!("r={r}")));
        }
        for (r, v) in &self.tail_energy {
            rows.push(("tail_energy".into(), *v, format!("R={r}")));
        }
        rows.push(("cd1_norm".into(), self.cd1_norm, String::new()));
        rows
    }
}
