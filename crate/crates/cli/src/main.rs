//! `nsrn`: batch front end for the stationary Navier-Stokes solver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! failure (non-convergence, failed checks, quadrature failure).

mod checks;
mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsrn_core::diagnostics::{full_bundle, DiagnosticsBundle, DiagnosticsParams};
use nsrn_core::field::{read_nsf1, write_nsf1, RawField};
use nsrn_core::lemma::{
    default_grid, default_log_grid, verify_decay, DecayCheck, LemmaParams, DEFAULT_EVAL_RADII,
};
use nsrn_core::solver::Outcome;
use nsrn_core::{solve, ConvolutionPlan, Error, SolveReport};
use serde::Deserialize;

use config::{plan_options, RunConfig, SolverSection};

#[derive(Parser)]
#[command(
    name = "nsrn",
    version,
    about = "Stationary Navier-Stokes on R^n: solve, diagnose, verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the homotopy solve described by a TOML config.
    Solve {
        config: PathBuf,
        /// Output directory, overriding `output.directory`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute diagnostics from stored NSF1 fields.
    Diagnose {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        f: PathBuf,
        /// Run config whose `[diagnostics]` and `[solver]` plan settings are used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Check kernel invariants at seeded random points.
    KernelCheck {
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check decay exponents of the Riesz-type convolution.
    LemmaCheck {
        /// TOML file with `[[case]]` tables (n, alpha, beta, optional radii).
        #[arg(long, conflicts_with_all = ["n", "alpha", "beta"])]
        params: Option<PathBuf>,
        /// Single case; requires --alpha and --beta.
        #[arg(long, requires_all = ["alpha", "beta"])]
        n: Option<usize>,
        #[arg(long, requires = "n")]
        alpha: Option<f64>,
        #[arg(long, requires = "n")]
        beta: Option<f64>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Numerical(String),
}

type Run = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn numerical(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(e.to_string())
}

fn core_failure(e: Error) -> Failure {
    match e {
        Error::Quadrature { .. }
        | Error::Fit(_)
        | Error::Singular
        | Error::TooCloseToOrigin { .. } => numerical(e),
        other => usage(other),
    }
}

fn configure_threads() -> Run {
    let Ok(raw) = std::env::var("NS_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        usage(format!(
            "NS_THREADS must be a non-negative integer, got {raw:?}"
        ))
    })?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| usage(format!("NS_THREADS: {e}")))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn write_field(path: &Path, field: RawField) -> Run {
    let mut w = create(path)?;
    write_nsf1(&mut w, &field).map_err(usage)?;
    w.flush()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_field(path: &Path) -> Result<RawField, Failure> {
    let file =
        File::open(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    read_nsf1(BufReader::new(file)).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, Failure> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_err(e: csv::Error) -> Failure {
    usage(format!("csv: {e}"))
}

fn write_diagnostics(path: &Path, bundle: &DiagnosticsBundle) -> Run {
    let mut w = csv_writer(path)?;
    w.write_record(["name", "value", "params"])
        .map_err(csv_err)?;
    for (name, value, params) in bundle.rows() {
        w.write_record([name, value.to_string(), params])
            .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write_report(path: &Path, cfg: &RunConfig, plan: &ConvolutionPlan, r: &SolveReport) -> Run {
    let mut rows: Vec<(&str, String, String)> = Vec::new();
    for (k, v) in cfg.flattened() {
        rows.push(("config", k, v));
    }
    rows.push((
        "plan",
        "footprint_bytes".into(),
        plan.footprint_bytes().to_string(),
    ));
    rows.push((
        "plan",
        "gradient_stored".into(),
        plan.stores_gradient().to_string(),
    ));
    rows.push(("plan", "origin_rule".into(), plan.singular_cell_rule()));
    let t = &r.truncation;
    rows.push(("truncation", "half_width".into(), t.half_width.to_string()));
    rows.push(("truncation", "points".into(), t.points.to_string()));
    if let Some((a, b)) = t.fit_window {
        rows.push(("truncation", "fit_window".into(), format!("{a} {b}")));
    }
    rows.push((
        "truncation",
        "support_diameter".into(),
        t.support_diameter.to_string(),
    ));
    for (k, s) in r.stages.iter().enumerate() {
        let last = s.residuals.last().copied().unwrap_or(f64::NAN);
        for (name, value) in [
            ("t", s.t.to_string()),
            ("iterations", s.iterations.to_string()),
            ("attempts", s.attempts.to_string()),
            ("damping", s.damping.to_string()),
            ("final_residual", last.to_string()),
            ("converged", s.converged.to_string()),
            ("velocity_l2", s.velocity_l2.to_string()),
        ] {
            rows.push(("stage", format!("{k}.{name}"), value));
        }
    }
    match &r.outcome {
        Outcome::Converged => rows.push(("outcome", "status".into(), "converged".into())),
        Outcome::NotConverged {
            stage,
            t,
            last_residual,
        } => {
            rows.push(("outcome", "status".into(), "not_converged".into()));
            rows.push(("outcome", "stage".into(), stage.to_string()));
            rows.push(("outcome", "t".into(), t.to_string()));
            rows.push(("outcome", "last_residual".into(), last_residual.to_string()));
        }
    }
    rows.push(("solution", "stokes_norm".into(), r.stokes_norm.to_string()));
    rows.push(("solution", "velocity_l2".into(), r.u.l2().to_string()));
    rows.push(("solution", "cd1_norm".into(), r.cd1_norm.to_string()));
    for (k, w) in r.warnings.iter().enumerate() {
        rows.push(("warning", k.to_string(), w.clone()));
    }
    let mut w = csv_writer(path)?;
    w.write_record(["kind", "name", "value"]).map_err(csv_err)?;
    for (kind, name, value) in rows {
        w.write_record([kind, &name, &value]).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn build_plan(
    grid: nsrn_core::GridSpec,
    solver: &SolverSection,
) -> Result<ConvolutionPlan, Failure> {
    ConvolutionPlan::build(grid, plan_options(solver)).map_err(|e| match e {
        Error::MemoryBudget { .. } => usage(format!(
            "{e}; raise `solver.memory_budget_mib` or use gradient_tables = \"on_demand\""
        )),
        other => core_failure(other),
    })
}

fn cmd_solve(config: &Path, out: Option<PathBuf>) -> Run {
    let cfg = RunConfig::load(config).map_err(usage)?;
    let grid = cfg.grid_spec().map_err(usage)?;
    let f = cfg.force_field().map_err(usage)?;
    let plan = build_plan(grid, &cfg.solver)?;
    let report = solve(&plan, &f, &cfg.solver_config()).map_err(core_failure)?;
    let dir = out.unwrap_or_else(|| cfg.output.directory.clone());
    std::fs::create_dir_all(&dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))?;
    write_field(&dir.join("u.nsf1"), RawField::from(&report.u))?;
    write_field(&dir.join("p.nsf1"), RawField::from(&report.p))?;
    write_field(&dir.join("f.nsf1"), RawField::from(&f))?;
    write_report(&dir.join("report.csv"), &cfg, &plan, &report)?;
    if let Some(b) = &report.bundle {
        write_diagnostics(&dir.join("diagnostics.csv"), b)?;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    match report.outcome {
        Outcome::Converged => {
            println!(
                "converged: {} stages, {} map evaluations; output in {}",
                report.stages.len(),
                report.stages.iter().map(|s| s.iterations).sum::<usize>(),
                dir.display()
            );
            Ok(())
        }
        Outcome::NotConverged { stage, t, last_residual } => Err(numerical(format!(
            "not converged at stage {stage} (t = {t}), last residual {last_residual:e}; last iterate written to {}",
            dir.display()
        ))),
    }
}

fn cmd_diagnose(u: &Path, p: &Path, f: &Path, config: Option<PathBuf>, out: &Path) -> Run {
    let (params, solver) = match config {
        Some(c) => {
            let cfg = RunConfig::load(&c).map_err(usage)?;
            (cfg.diagnostics.params(), cfg.solver)
        }
        None => (DiagnosticsParams::default(), SolverSection::default()),
    };
    let (ru, rp, rf) = (read_field(u)?, read_field(p)?, read_field(f)?);
    for (name, other) in [("p", &rp), ("f", &rf)] {
        ru.grid
            .ensure_same(&other.grid)
            .map_err(|e| usage(format!("u and {name}: {e}")))?;
    }
    let uv = ru
        .into_vector()
        .map_err(|e| usage(format!("{}: {e}", u.display())))?;
    let ps = rp
        .into_scalar()
        .map_err(|e| usage(format!("{}: {e}", p.display())))?;
    let fv = rf
        .into_vector()
        .map_err(|e| usage(format!("{}: {e}", f.display())))?;
    let plan = build_plan(uv.grid, &solver)?;
    let bundle = full_bundle(&plan, &uv, &ps, &fv, &params).map_err(core_failure)?;
    std::fs::create_dir_all(out)
        .map_err(|e| usage(format!("cannot create {}: {e}", out.display())))?;
    write_diagnostics(&out.join("diagnostics.csv"), &bundle)
}

fn cmd_kernel_check(n: usize, samples: usize, seed: u64) -> Run {
    if n < 3 {
        return Err(usage(format!("n ≥ 3 required, got n = {n}")));
    }
    if samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let rows = checks::kernel_suite(n, samples, seed).map_err(core_failure)?;
    println!("kernel-check n={n} samples={samples} seed={seed}");
    println!("{:<22} {:>14} {:<20} result", "check", "worst", "bound");
    for r in &rows {
        println!(
            "{:<22} {:>14.6e} {:<20} {}",
            r.name,
            r.worst,
            r.bound,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(numerical(format!("{failed} kernel check(s) failed")));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LemmaFile {
    case: Vec<LemmaCase>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LemmaCase {
    n: usize,
    alpha: f64,
    beta: f64,
    radii: Option<Vec<f64>>,
}

fn lemma_cases(
    params: Option<PathBuf>,
    n: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
) -> Result<Vec<LemmaParams>, Failure> {
    let raw: Vec<LemmaCase> = if let Some(path) = params {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let file: LemmaFile =
            toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        file.case
    } else if let (Some(n), Some(alpha), Some(beta)) = (n, alpha, beta) {
        vec![LemmaCase {
            n,
            alpha,
            beta,
            radii: None,
        }]
    } else {
        [3, 5]
            .into_iter()
            .flat_map(|n| {
                default_grid(n)
                    .into_iter()
                    .chain(default_log_grid(n))
                    .map(move |(alpha, beta)| LemmaCase {
                        n,
                        alpha,
                        beta,
                        radii: None,
                    })
            })
            .collect()
    };
    raw.into_iter()
        .enumerate()
        .map(|(k, c)| {
            let radii = c.radii.unwrap_or_else(|| DEFAULT_EVAL_RADII.to_vec());
            LemmaParams::new(c.n, c.alpha, c.beta, radii).map_err(|e| {
                usage(format!(
                    "case {k} (n={}, alpha={}, beta={}): {e}",
                    c.n, c.alpha, c.beta
                ))
            })
        })
        .collect()
}

fn cmd_lemma_check(
    params: Option<PathBuf>,
    n: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    out: Option<PathBuf>,
) -> Run {
    let cases = lemma_cases(params, n, alpha, beta)?;
    let results: Vec<DecayCheck> = cases
        .iter()
        .map(verify_decay)
        .collect::<nsrn_core::Result<_>>()
        .map_err(numerical)?;
    let sink: Box<dyn Write> = match &out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "n",
        "alpha",
        "beta",
        "gamma_expected",
        "slope_fitted",
        "log_flag",
        "pass",
    ])
    .map_err(csv_err)?;
    for c in &results {
        w.write_record([
            c.n.to_string(),
            c.alpha.to_string(),
            c.beta.to_string(),
            c.gamma_expected.to_string(),
            c.slope_fitted.to_string(),
            c.log_flag.to_string(),
            c.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| usage(format!("lemma-check output: {e}")))?;
    let failed = results.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(numerical(format!(
            "{failed} of {} decay checks failed",
            results.len()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, out),
        Command::Diagnose {
            u,
            p,
            f,
            config,
            out,
        } => cmd_diagnose(&u, &p, &f, config, &out),
        Command::KernelCheck { n, samples, seed } => cmd_kernel_check(n, samples, seed),
        Command::LemmaCheck {
            params,
            n,
            alpha,
            beta,
            out,
        } => cmd_lemma_check(params, n, alpha, beta, out),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
