//! Damped Picard iteration of `F(t, v) = U * (t f - (v . grad) v)`, continued
//! in `t` along a schedule ending at 1.

use crate::convolve::{apply_nonlinearity, ConvolutionPlan};
use crate::diagnostics::{
    blended_gradient, bundle_with_gradient, DiagnosticsBundle, DiagnosticsParams,
};
use crate::error::{param, Result};
use crate::field::{cd1_norm, GridSpec, ScalarField, TensorField, VectorField};

/// Damping below this value ends the solve as not converged.
pub const MIN_DAMPING: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub homotopy_schedule: Vec<f64>,
    /// Initial relaxation factor in `(0, 1]`.
    pub damping: f64,
    pub residual_tol: f64,
    pub max_iters_per_stage: usize,
    /// A stage is restarted with halved damping when its residual exceeds
    /// this factor times the smallest residual seen in the attempt.
    pub divergence_guard: f64,
    /// Diagnostics computed on the final fields; `None` skips them.
    pub diagnostics: Option<DiagnosticsParams>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            homotopy_schedule: vec![0.25, 0.5, 0.75, 1.0],
            damping: 1.0,
            residual_tol: 1e-8,
            max_iters_per_stage: 200,
            divergence_guard: 10.0,
            diagnostics: Some(DiagnosticsParams::default()),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.homotopy_schedule;
        if s.is_empty() || s.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(param(
                "homotopy_schedule",
                format!("must be strictly increasing, got {s:?}"),
            ));
        }
        if !(s[0] >= 0.0) || s[s.len() - 1] != 1.0 {
            return Err(param(
                "homotopy_schedule",
                format!("must lie in [0, 1] and end at 1, got {s:?}"),
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(param(
                "damping",
                format!("must lie in (0, 1], got {}", self.damping),
            ));
        }
        if !(self.residual_tol > 0.0) {
            return Err(param(
                "residual_tol",
                format!("must be positive, got {}", self.residual_tol),
            ));
        }
        if self.max_iters_per_stage == 0 {
            return Err(param("max_iters_per_stage", "must be positive"));
        }
        if !(self.divergence_guard > 1.0) {
            return Err(param(
                "divergence_guard",
                format!("must exceed 1, got {}", self.divergence_guard),
            ));
        }
        if let Some(d) = &self.diagnostics {
            d.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub t: f64,
    /// Map evaluations in the accepted attempt.
    pub iterations: usize,
    /// Damping of the accepted (or last) attempt.
    pub damping: f64,
    pub attempts: usize,
    /// Residuals of the accepted (or last) attempt.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// `||v||_{L^2}` at the end of the stage.
    pub velocity_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Converged,
    /// Damping fell below [`MIN_DAMPING`]; fields are the last iterate.
    NotConverged {
        stage: usize,
        t: f64,
        last_residual: f64,
    },
}

/// Box and fit parameters the results depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub half_width: f64,
    pub points: usize,
    /// Absolute radial fit window of the decay profiles, if computed.
    pub fit_window: Option<(f64, f64)>,
    /// Diameter of `supp f`, from the cell centres.
    pub support_diameter: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub grid: GridSpec,
    pub stages: Vec<StageReport>,
    pub outcome: Outcome,
    /// `||U * f||_{L^2}`, the residual normalisation floor.
    pub stokes_norm: f64,
    pub u: VectorField,
    pub p: ScalarField,
    pub grad_u: TensorField,
    pub cd1_norm: f64,
    pub bundle: Option<DiagnosticsBundle>,
    pub truncation: Truncation,
    pub warnings: Vec<String>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.outcome == Outcome::Converged
    }
}

fn velocity_map(
    plan: &ConvolutionPlan,
    t: f64,
    f: &VectorField,
    v: &VectorField,
) -> Result<VectorField> {
    let g = f.combine(t, &apply_nonlinearity(v), -1.0)?;
    plan.velocity(&plan.source_spectrum(&g)?)
}

/// `F(t, v)` and its pressure.
pub fn picard_step(
    plan: &ConvolutionPlan,
    t: f64,
    f: &VectorField,
    v: &VectorField,
) -> Result<(VectorField, ScalarField)> {
    plan.grid().ensure_same(&f.grid)?;
    plan.grid().ensure_same(&v.grid)?;
    let g = f.combine(t, &apply_nonlinearity(v), -1.0)?;
    let s = plan.source_spectrum(&g)?;
    Ok((plan.velocity(&s)?, plan.pressure(&s)?))
}

fn support_diameter(f: &VectorField) -> f64 {
    let grid = f.grid;
    let n = grid.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut x = vec![0.0; n];
    for idx in 0..grid.len() {
        if f.components.iter().any(|c| c[idx] != 0.0) {
            grid.point(idx, &mut x);
            for a in 0..n {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
    }
    if lo[0] > hi[0] {
        return 0.0;
    }
    lo.iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
}

fn relative(diff: f64, v: f64, floor: f64) -> f64 {
    let den = v.max(floor);
    if diff == 0.0 {
        0.0
    } else {
        diff / den
    }
}

/// Runs the continuation and returns the `t = 1` fixed point with its report.
/// Failure to converge is reported in [`SolveReport::outcome`], not as an error.
pub fn solve(
    plan: &ConvolutionPlan,
    f: &VectorField,
    config: &SolverConfig,
) -> Result<SolveReport> {
    config.validate()?;
    let grid = *plan.grid();
    grid.ensure_same(&f.grid)?;
    if !plan.has_pressure() {
        return Err(param("plan", "solve needs a plan with pressure tables"));
    }
    let mut warnings = Vec::new();
    let diameter = support_diameter(f);
    if diameter > 0.5 * grid.half_width() {
        warnings.push(format!(
            "force support diameter {diameter:.3} exceeds L/2 = {:.3}",
            0.5 * grid.half_width()
        ));
    }
    let stokes_norm = plan.velocity(&plan.source_spectrum(f)?)?.l2();

    let mut v = VectorField::zeros(grid);
    let mut stages = Vec::with_capacity(config.homotopy_schedule.len());
    let mut outcome = Outcome::Converged;
    'stages: for (stage, &t) in config.homotopy_schedule.iter().enumerate() {
        let start = v.clone();
        let mut omega = config.damping;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let mut w = start.clone();
            let mut residuals = Vec::new();
            let mut best = f64::INFINITY;
            let mut converged = false;
            for _ in 0..config.max_iters_per_stage {
                let fw = velocity_map(plan, t, f, &w)?;
                let diff = fw.combine(1.0, &w, -1.0)?.l2();
                let res = relative(diff, w.l2(), stokes_norm);
                residuals.push(res);
                if !res.is_finite() || res > config.divergence_guard * best {
                    break;
                }
                best = best.min(res);
                if res <= config.residual_tol {
                    converged = true;
                    break;
                }
                w = w.combine(1.0 - omega, &fw, omega)?;
            }
            if converged {
                stages.push(StageReport {
                    t,
                    iterations: residuals.len(),
                    damping: omega,
                    attempts,
                    residuals,
                    converged: true,
                    velocity_l2: w.l2(),
                });
                v = w;
                break;
            }
            omega *= 0.5;
            if omega < MIN_DAMPING {
                let last = residuals.last().copied().unwrap_or(f64::NAN);
                stages.push(StageReport {
                    t,
                    iterations: residuals.len(),
                    damping: omega * 2.0,
                    attempts,
                    residuals,
                    converged: false,
                    velocity_l2: w.l2(),
                });
                outcome = Outcome::NotConverged {
                    stage,
                    t,
                    last_residual: last,
                };
                v = w;
                break 'stages;
            }
        }
    }

    // one more full map gives a consistent (u, p)
    let t_final = match outcome {
        Outcome::Converged => 1.0,
        Outcome::NotConverged { t, .. } => t,
    };
    let (u, p) = picard_step(plan, t_final, f, &v)?;
    let f_final = f.scaled(t_final);
    let grad_u = blended_gradient(plan, &u, &f_final)?;
    let cd1 = cd1_norm(&u, &grad_u)?;
    let bundle = match (&config.diagnostics, &outcome) {
        (Some(params), Outcome::Converged) => {
            Some(bundle_with_gradient(plan, &u, &p, f, &grad_u, params)?)
        }
        _ => None,
    };
    let fit_window = config.diagnostics.as_ref().map(|d| {
        let l = grid.half_width();
        (d.fit_window.0 * l, d.fit_window.1 * l)
    });
    Ok(SolveReport {
        grid,
        stages,
        outcome,
        stokes_norm,
        u,
        p,
        grad_u,
        cd1_norm: cd1,
        bundle,
        truncation: Truncation {
            half_width: grid.half_width(),
            points: grid.points(),
            fit_window,
            support_diameter: diameter,
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.homotopy_schedule = vec![0.5, 0.25, 1.0];
        assert!(c.validate().is_err());
        c.homotopy_schedule = vec![0.5, 0.9];
        assert!(c.validate().is_err());
        c = SolverConfig {
            damping: 0.0,
            ..SolverConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_force_converges_immediately() {
        let g = GridSpec::new(3, 8, 4.0).unwrap();
        let plan = ConvolutionPlan::new(g).unwrap();
        let r = solve(&plan, &VectorField::zeros(g), &SolverConfig::default()).unwrap();
        assert!(r.converged());
        assert!(r.stages.iter().all(|s| s.iterations == 1));
        assert!(r.u.is_zero());
        let b = r.bundle.unwrap();
        assert_eq!(b.energy_gap, 0.0);
        assert_eq!(b.u_decay.fitted_exponent, 0.0);
    }
}
