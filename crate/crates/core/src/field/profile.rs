use super::norms::Pointwise;
use crate::error::{param, Error, Result};

pub const DEFAULT_FIT_WINDOW: (f64, f64) = (0.3, 0.75);

/// Radial shell statistics of `|field|` and a power-law fit `sup ~ r^(-e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    /// Geometric centres of the equal-log-width shells.
    pub shell_radii: Vec<f64>,
    /// Radius of the grid point attaining each shell's supremum.
    pub sup_radii: Vec<f64>,
    pub shell_sup: Vec<f64>,
    pub shell_mean: Vec<f64>,
    pub shell_count: Vec<usize>,
    pub fitted_exponent: f64,
    pub fit_window: (f64, f64),
    /// RMS of the log-log residuals.
    pub fit_residual: f64,
    pub fit_points: usize,
}

pub fn radial_profile<F: Pointwise>(s: &F, shells: usize) -> Result<DecayProfile> {
    let l = s.grid().half_width();
    radial_profile_with_window(
        s,
        shells,
        (DEFAULT_FIT_WINDOW.0 * l, DEFAULT_FIT_WINDOW.1 * l),
    )
}

/// Bins grid points into `shells` equal-log-width shells on `[h, L]` and fits
/// `log sup` against `log r` over shells whose supremum radius lies in
/// `window`. A field decaying like `r^(-e)` gives `fitted_exponent = e`.
pub fn radial_profile_with_window<F: Pointwise>(
    s: &F,
    shells: usize,
    window: (f64, f64),
) -> Result<DecayProfile> {
    if shells < 4 {
        return Err(param(
            "shells",
            format!("at least 4 shells required, got {shells}"),
        ));
    }
    let grid = *s.grid();
    let (r0, r1) = (grid.spacing(), grid.half_width());
    if !(window.0 < window.1) {
        return Err(param("fit_window", format!("empty window {window:?}")));
    }
    let log_width = (r1 / r0).ln() / shells as f64;
    let mut sup = vec![0.0f64; shells];
    let mut sup_r = vec![0.0f64; shells];
    let mut sum = vec![0.0f64; shells];
    let mut count = vec![0usize; shells];
    for idx in 0..grid.len() {
        let r = grid.radius(idx);
        if r < r0 || r >= r1 {
            continue;
        }
        let k = (((r / r0).ln() / log_width) as usize).min(shells - 1);
        let v = s.abs_at(idx);
        if count[k] == 0 || v > sup[k] || (v == sup[k] && r < sup_r[k]) {
            sup[k] = v;
            sup_r[k] = r;
        }
        sum[k] += v;
        count[k] += 1;
    }
    let shell_radii: Vec<f64> = (0..shells)
        .map(|k| r0 * (log_width * (k as f64 + 0.5)).exp())
        .collect();
    let mean: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();

    let pts: Vec<(f64, f64)> = (0..shells)
        .filter(|&k| count[k] > 0 && sup[k] > 0.0 && sup_r[k] >= window.0 && sup_r[k] <= window.1)
        .map(|k| (sup_r[k].ln(), sup[k].ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!(
            "{} nonempty shells in fit window [{}, {}]",
            pts.len(),
            window.0,
            window.1
        )));
    }
    let (slope, _, rms) = least_squares(&pts);
    Ok(DecayProfile {
        shell_radii,
        sup_radii: sup_r,
        shell_sup: sup,
        shell_mean: mean,
        shell_count: count,
        fitted_exponent: -slope,
        fit_window: window,
        fit_residual: rms,
        fit_points: pts.len(),
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, rms residual)`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let b = my - a * mx;
    let rms = (pts.iter().map(|p| (p.1 - a * p.0 - b).powi(2)).sum::<f64>() / m).sqrt();
    (a, b, rms)
}
