use nsrn_core::convolve::stokes_solve;
use nsrn_core::forcing::gaussian_bump;
use nsrn_core::solver::{picard_step, Outcome};
use nsrn_core::{solve, ConvolutionPlan, GridSpec, SolverConfig, VectorField};

fn setup() -> (ConvolutionPlan, VectorField) {
    let g = GridSpec::new(3, 32, 8.0).unwrap();
    let f = gaussian_bump(g, 1e-2, 1.0, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
    (ConvolutionPlan::new(g).unwrap(), f)
}

fn quiet() -> SolverConfig {
    SolverConfig {
        diagnostics: None,
        ..SolverConfig::default()
    }
}

#[test]
fn zero_iterate_gives_the_stokes_solution() {
    let (plan, f) = setup();
    let zero = VectorField::zeros(f.grid);
    let (u, p) = picard_step(&plan, 1.0, &f, &zero).unwrap();
    let (us, ps) = stokes_solve(&plan, &f).unwrap();
    assert_eq!(u, us);
    assert_eq!(p, ps);
    let (u0, p0) = picard_step(&plan, 0.0, &f, &zero).unwrap();
    assert!(u0.is_zero() && p0.data.iter().all(|v| *v == 0.0));
}

#[test]
fn converged_field_is_a_fixed_point() {
    let (plan, f) = setup();
    let config = quiet();
    let r = solve(&plan, &f, &config).unwrap();
    assert_eq!(r.outcome, Outcome::Converged);
    let (again, _) = picard_step(&plan, 1.0, &f, &r.u).unwrap();
    let rel = again.combine(1.0, &r.u, -1.0).unwrap().l2() / r.u.l2();
    assert!(rel <= config.residual_tol, "{rel}");
}

#[test]
fn homotopy_is_monotone_and_nearly_linear() {
    let (plan, f) = setup();
    let r = solve(&plan, &f, &quiet()).unwrap();
    let norms: Vec<f64> = r.stages.iter().map(|s| s.velocity_l2).collect();
    assert!(norms.windows(2).all(|w| w[1] >= w[0]), "{norms:?}");
    for t in [0.25, 0.5, 0.75] {
        let rt = solve(&plan, &f.scaled(t), &quiet()).unwrap();
        let dev = rt.u.combine(1.0, &r.u, -t).unwrap().l2() / (t * r.u.l2());
        assert!(dev < 0.1, "{t}: {dev}");
    }
}

#[test]
fn solve_is_deterministic() {
    let (plan, f) = setup();
    let a = solve(&plan, &f, &SolverConfig::default()).unwrap();
    let b = solve(&plan, &f, &SolverConfig::default()).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.p, b.p);
    assert_eq!(a.bundle, b.bundle);
    assert_eq!(a.stages, b.stages);
}

#[test]
fn large_data_reports_non_convergence() {
    let (plan, f) = setup();
    let config = SolverConfig {
        max_iters_per_stage: 2,
        residual_tol: 1e-14,
        ..quiet()
    };
    let r = solve(&plan, &f.scaled(100.0), &config).unwrap();
    assert!(matches!(r.outcome, Outcome::NotConverged { stage: 0, .. }));
    assert!(r.bundle.is_none());
    assert!(r.stages[0].attempts > 1);
}
