//! Compactly supported force families.
//!
//! Every profile is `A exp(-d^2 / w^2)` in some distance `d`, set to zero for
//! `d >= 4w` where it is below `1.2e-7 A`.

use crate::error::{param, Result};
use crate::field::{GridSpec, VectorField};

pub const CUTOFF_WIDTHS: f64 = 4.0;

fn profile(d2: f64, width: f64) -> f64 {
    if d2 >= (CUTOFF_WIDTHS * width).powi(2) {
        0.0
    } else {
        (-d2 / (width * width)).exp()
    }
}

fn check(grid: &GridSpec, width: f64, vecs: &[(&'static str, &[f64])]) -> Result<()> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(param("width", format!("must be positive, got {width}")));
    }
    for (name, v) in vecs {
        if v.len() != grid.dim() {
            return Err(param(
                name,
                format!("{} entries, dimension is {}", v.len(), grid.dim()),
            ));
        }
    }
    Ok(())
}

/// `A exp(-|x - c|^2 / w^2) e`, with `e` the given direction (not normalised).
pub fn gaussian_bump(
    grid: GridSpec,
    amplitude: f64,
    width: f64,
    center: &[f64],
    direction: &[f64],
) -> Result<VectorField> {
    check(
        &grid,
        width,
        &[("center", center), ("direction", direction)],
    )?;
    Ok(VectorField::from_fn(grid, |x, out| {
        let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        let s = amplitude * profile(d2, width);
        for (o, e) in out.iter_mut().zip(direction) {
            *o = s * e;
        }
    }))
}

/// Swirling force around the circle of radius `radius` in the `(x_0, x_1)`
/// plane: `A exp(-d^2 / w^2) (-x_1, x_0, 0, ...) / rho`, with `d` the
/// distance to the circle and `rho` the distance to the `x_0 x_1` axis.
pub fn ring(grid: GridSpec, amplitude: f64, width: f64, radius: f64) -> Result<VectorField> {
    check(&grid, width, &[])?;
    if !(radius > 0.0) {
        return Err(param("radius", format!("must be positive, got {radius}")));
    }
    Ok(VectorField::from_fn(grid, |x, out| {
        let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let rest: f64 = x[2..].iter().map(|v| v * v).sum();
        let d2 = (rho - radius).powi(2) + rest;
        let s = amplitude * profile(d2, width);
        if rho > 0.0 && s != 0.0 {
            out[0] = -s * x[1] / rho;
            out[1] = s * x[0] / rho;
        }
    }))
}

/// Two opposite bumps along `direction` at `c +- (separation/2) axis`.
pub fn dipole(
    grid: GridSpec,
    amplitude: f64,
    width: f64,
    separation: f64,
    axis: &[f64],
    direction: &[f64],
) -> Result<VectorField> {
    check(&grid, width, &[("axis", axis), ("direction", direction)])?;
    let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(param("axis", "must be nonzero"));
    }
    let off: Vec<f64> = axis.iter().map(|v| 0.5 * separation * v / norm).collect();
    Ok(VectorField::from_fn(grid, |x, out| {
        let dp: f64 = x.iter().zip(&off).map(|(a, b)| (a - b) * (a - b)).sum();
        let dm: f64 = x.iter().zip(&off).map(|(a, b)| (a + b) * (a + b)).sum();
        let s = amplitude * (profile(dp, width) - profile(dm, width));
        for (o, e) in out.iter_mut().zip(direction) {
            *o = s * e;
        }
    }))
}
