//! Decay of the Riesz-type convolution
//! `F(x) = int_{R^n} |x - y|^-alpha (1 + |y|)^-beta dy`,
//! which behaves like `|x|^-gamma` with `gamma = min(alpha, alpha + beta - n)`
//! for `beta != n`, and like `log|x| |x|^-alpha` for `beta = n`.

use rayon::prelude::*;

use crate::error::{param, Result};
use crate::field::least_squares;
use crate::kernel::unit_ball_volume;
use crate::quadrature::{integrate, Tolerance};

pub const DEFAULT_EVAL_RADII: [f64; 4] = [10.0, 30.0, 100.0, 300.0];
pub const DEFAULT_SLOPE_BAND: f64 = 0.15;
pub const MIN_LOG_R_SQUARED: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaParams {
    n: usize,
    alpha: f64,
    beta: f64,
    eval_radii: Vec<f64>,
}

impl LemmaParams {
    /// Requires `n >= 3`, `0 <= alpha < n`, `alpha + beta > n` and positive,
    /// increasing radii.
    pub fn new(n: usize, alpha: f64, beta: f64, eval_radii: Vec<f64>) -> Result<Self> {
        if n < 3 {
            return Err(param("n", format!("n >= 3 required, got {n}")));
        }
        if !(alpha >= 0.0 && alpha < n as f64) {
            return Err(param(
                "alpha",
                format!("must lie in [0, n) = [0, {n}), got {alpha}"),
            ));
        }
        if !(beta.is_finite() && alpha + beta > n as f64) {
            return Err(param(
                "beta",
                format!("alpha + beta must exceed n = {n}, got {}", alpha + beta),
            ));
        }
        if eval_radii.is_empty() || eval_radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(param("eval_radii", "radii must be positive and finite"));
        }
        if eval_radii.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(param("eval_radii", "radii must be strictly increasing"));
        }
        Ok(Self {
            n,
            alpha,
            beta,
            eval_radii,
        })
    }

    pub fn with_default_radii(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(n, alpha, beta, DEFAULT_EVAL_RADII.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eval_radii(&self) -> &[f64] {
        &self.eval_radii
    }

    pub fn gamma(&self) -> f64 {
        self.alpha.min(self.alpha + self.beta - self.n as f64)
    }

    pub fn is_log_case(&self) -> bool {
        self.beta == self.n as f64
    }
}

/// Six `(alpha, beta)` pairs with `|beta - n| >= 1`, covering both branches
/// of `gamma`.
pub fn default_grid(n: usize) -> Vec<(f64, f64)> {
    let n = n as f64;
    vec![
        (1.0, n + 1.0),
        (2.0, n + 1.5),
        (n - 1.0, n + 2.0),
        (n - 0.5, n - 1.0),
        (n - 1.0, n - 1.5),
        (0.5 * n, n + 3.0),
    ]
}

/// The `beta = n` pairs checked for the logarithmic correction.
pub fn default_log_grid(n: usize) -> Vec<(f64, f64)> {
    vec![(1.0, n as f64), (2.0, n as f64)]
}

/// Subdivision budget and tolerance of the nested quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureBudget {
    pub relative: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureBudget {
    fn default() -> Self {
        Self {
            relative: 1e-9,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureBudget {
    /// Half the tolerance and twice the subdivisions.
    pub fn doubled(self) -> Self {
        Self {
            relative: 0.5 * self.relative,
            max_subdivisions: 2 * self.max_subdivisions,
        }
    }
}

/// Power making an endpoint singularity `t^(e - 1)` at least linear after
/// `t = s^m`.
fn smoothing_power(e: f64) -> i32 {
    (2.0 / e).ceil().clamp(1.0, 64.0) as i32
}

/// `F` at `|x| = r` with the default budget.
pub fn riesz_convolution(params: &LemmaParams, r: f64) -> Result<f64> {
    riesz_convolution_with(params, r, QuadratureBudget::default())
}

/// `F` at `|x| = r`. With `rho = |y|` and `u = 1 - cos(angle(x, y))`,
/// `|x - y|^2 = (r - rho)^2 + 2 r rho u`; the angular integral is taken in
/// `u = a (e^s - 1)`, `a = (r - rho)^2 / (2 r rho)`, and the radial one over
/// `[0, r]`, `[r, 2r]`, `[2r, inf)` with power substitutions at `rho = r`
/// and `rho = inf`.
pub fn riesz_convolution_with(
    params: &LemmaParams,
    r: f64,
    budget: QuadratureBudget,
) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(param("r", format!("must be positive, got {r}")));
    }
    let n = params.n as f64;
    let (alpha, beta) = (params.alpha, params.beta);
    let sphere = (n - 1.0) * unit_ball_volume(params.n - 1);
    let outer = Tolerance {
        relative: budget.relative,
        absolute: 0.0,
        max_subdivisions: budget.max_subdivisions,
    };
    let inner = Tolerance {
        relative: 0.1 * budget.relative,
        ..outer
    };
    let half = 0.5 * (n - 3.0);

    // int_0^2 (a + u)^-alpha/2 (u (2 - u))^((n-3)/2) du, divided by a^-alpha/2
    let angular = |a: f64| -> Result<f64> {
        let top = (2.0 / a).ln_1p();
        let e = integrate(
            |s| {
                let u = a * s.exp_m1();
                let w = (u * (2.0 - u)).max(0.0).powf(half);
                a * (s * (1.0 - 0.5 * alpha)).exp() * w
            },
            0.0,
            top,
            inner,
        )?;
        Ok(e.value)
    };
    // rho^(n-1) (1 + rho)^-beta |r - rho|^-alpha times `ln_jac`, times the angular factor
    let radial = |rho: f64, ln_jac: f64| -> Result<f64> {
        if !(rho > 0.0) || rho == r || !rho.is_finite() {
            return Ok(0.0);
        }
        let ln_w =
            (n - 1.0) * rho.ln() - beta * rho.ln_1p() - alpha * (r - rho).abs().ln() + ln_jac;
        let w = ln_w.exp();
        if w == 0.0 {
            return Ok(0.0);
        }
        let a = (r - rho).powi(2) / (2.0 * r * rho);
        Ok(w * angular(a)?)
    };

    let mut failure = None;
    let mut guarded = |v: Result<f64>| match v {
        Ok(x) => x,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let m1 = smoothing_power(n - alpha);
    let m2 = smoothing_power(alpha + beta - n);
    let ln_r = r.ln();
    let mut total = 0.0;
    for side in [-1.0, 1.0] {
        let e = integrate(
            |s| {
                let t = s.powi(m1);
                let ln_jac = (m1 as f64).ln() + ln_r + (m1 - 1) as f64 * s.ln();
                guarded(radial(r * (1.0 + side * t), ln_jac))
            },
            0.0,
            1.0,
            outer,
        )?;
        total += e.value;
    }
    let far = integrate(
        |s| {
            let ln_tau = m2 as f64 * s.ln();
            let rho = 2.0 * r * (-ln_tau).exp();
            let ln_jac =
                (2.0 * r).ln() - 2.0 * ln_tau + (m2 as f64).ln() + (m2 - 1) as f64 * s.ln();
            guarded(radial(rho, ln_jac))
        },
        0.0,
        1.0,
        outer,
    )?;
    total += far.value;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(sphere * total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCheck {
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_expected: f64,
    /// Slope of `log F` against `log(1 + r)`, or for the log case of
    /// `F (1 + r)^alpha` against `log(2 + r)`.
    pub slope_fitted: f64,
    pub r_squared: f64,
    pub log_flag: bool,
    pub values: Vec<(f64, f64)>,
    pub pass: bool,
}

fn fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let (slope, _, rms) = least_squares(pts);
    let m = pts.len() as f64;
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let total: f64 = pts.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let r2 = if total > 0.0 {
        1.0 - rms * rms * m / total
    } else {
        1.0
    };
    (slope, r2)
}

/// Evaluates `F` on the radii and fits the decay. Passes when the slope is
/// within `slope_band` of `-gamma`, or in the log case when the trend is
/// positive with `R^2 > 0.99`.
pub fn verify_decay(params: &LemmaParams) -> Result<DecayCheck> {
    verify_decay_with(params, DEFAULT_SLOPE_BAND, QuadratureBudget::default())
}

pub fn verify_decay_with(
    params: &LemmaParams,
    slope_band: f64,
    budget: QuadratureBudget,
) -> Result<DecayCheck> {
    if params.eval_radii.len() < 2 {
        return Err(param(
            "eval_radii",
            "at least two radii are needed for a fit",
        ));
    }
    let values = params
        .eval_radii
        .par_iter()
        .map(|&r| riesz_convolution_with(params, r, budget).map(|f| (r, f)))
        .collect::<Result<Vec<_>>>()?;
    let log_flag = params.is_log_case();
    let gamma = params.gamma();
    let (slope, r2, pass) = if log_flag {
        let pts: Vec<(f64, f64)> = values
            .iter()
            .map(|&(r, f)| ((2.0 + r).ln(), f * (1.0 + r).powf(params.alpha)))
            .collect();
        let (slope, r2) = fit(&pts);
        (slope, r2, slope > 0.0 && r2 > MIN_LOG_R_SQUARED)
    } else {
        let pts: Vec<(f64, f64)> = values.iter().map(|&(r, f)| (r.ln_1p(), f.ln())).collect();
        let (slope, r2) = fit(&pts);
        (slope, r2, (slope + gamma).abs() <= slope_band)
    };
    Ok(DecayCheck {
        n: params.n,
        alpha: params.alpha,
        beta: params.beta,
        gamma_expected: gamma,
        slope_fitted: slope,
        r_squared: r2,
        log_flag,
        values,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hypotheses_are_enforced() {
        assert!(LemmaParams::with_default_radii(3, 3.0, 4.0).is_err());
        assert!(LemmaParams::with_default_radii(3, 1.0, 2.0).is_err());
        assert!(LemmaParams::with_default_radii(2, 1.0, 4.0).is_err());
        assert!(LemmaParams::new(3, 1.0, 4.0, vec![10.0, 5.0]).is_err());
        let p = LemmaParams::with_default_radii(5, 2.0, 6.0).unwrap();
        assert_eq!(p.gamma(), 2.0);
        assert_eq!(
            LemmaParams::with_default_radii(5, 3.0, 4.0)
                .unwrap()
                .gamma(),
            2.0
        );
    }

    #[test]
    fn alpha_zero_is_the_radial_mass() {
        let p = LemmaParams::with_default_radii(3, 0.0, 4.0).unwrap();
        for r in [0.5, 3.0, 40.0] {
            let f = riesz_convolution(&p, r).unwrap();
            assert!(
                (f - 4.0 * PI / 3.0).abs() < 1e-6 * 4.0 * PI / 3.0,
                "{r} {f}"
            );
        }
    }

    #[test]
    fn default_grid_keeps_hypotheses() {
        for n in [3, 4, 5, 7] {
            for (a, b) in default_grid(n) {
                assert!((b - n as f64).abs() >= 1.0);
                assert!(LemmaParams::with_default_radii(n, a, b).is_ok());
            }
        }
    }
}
