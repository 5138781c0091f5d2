//! Run configuration: TOML with sections `grid`, `force`, `solver`,
//! `diagnostics` and `output`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nsrn_core::convolve::{GradientTables, PlanOptions, SingularCell};
use nsrn_core::diagnostics::DiagnosticsParams;
use nsrn_core::field::{read_nsf1, MAX_DIM, MIN_DIM};
use nsrn_core::{forcing, Error, GridSpec, SolverConfig, VectorField};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    #[serde(default)]
    pub force: ForceSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub points: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    #[default]
    Zero,
    GaussianBump,
    Ring,
    Dipole,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    #[serde(default)]
    pub family: Family,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    Auto,
    Stored,
    OnDemand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginRule {
    LatticeCorrected,
    CellAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub homotopy_schedule: Vec<f64>,
    pub damping: f64,
    pub residual_tol: f64,
    pub max_iters_per_stage: usize,
    pub divergence_guard: f64,
    pub memory_budget_mib: usize,
    pub gradient_tables: GradientMode,
    pub origin_rule: OriginRule,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            homotopy_schedule: s.homotopy_schedule,
            damping: s.damping,
            residual_tol: s.residual_tol,
            max_iters_per_stage: s.max_iters_per_stage,
            divergence_guard: s.divergence_guard,
            memory_budget_mib: nsrn_core::convolve::DEFAULT_MEMORY_BUDGET >> 20,
            gradient_tables: GradientMode::Auto,
            origin_rule: OriginRule::LatticeCorrected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsSection {
    pub enabled: bool,
    pub shells: usize,
    pub fit_window: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_exponent: Option<f64>,
    pub vorticity_stride: usize,
    pub vorticity_min_radius: f64,
    pub tail_fractions: Vec<f64>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        let d = DiagnosticsParams::default();
        Self {
            enabled: true,
            shells: d.shells,
            fit_window: [d.fit_window.0, d.fit_window.1],
            theta_exponent: d.theta_exponent,
            vorticity_stride: d.vorticity_stride,
            vorticity_min_radius: d.vorticity_min_radius,
            tail_fractions: d.tail_fractions,
        }
    }
}

impl DiagnosticsSection {
    pub fn params(&self) -> DiagnosticsParams {
        DiagnosticsParams {
            shells: self.shells,
            fit_window: (self.fit_window[0], self.fit_window[1]),
            theta_exponent: self.theta_exponent,
            vorticity_stride: self.vorticity_stride,
            vorticity_min_radius: self.vorticity_min_radius,
            tail_fractions: self.tail_fractions.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
        }
    }
}

/// A configuration problem, always naming the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn key_error(key: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("`{key}`: {reason}"))
}

fn core_error(section: &str, e: Error) -> ConfigError {
    match e {
        Error::Parameter { name, reason } => key_error(&format!("{section}.{name}"), reason),
        other => ConfigError(format!("[{section}]: {other}")),
    }
}

impl RunConfig {
    /// Parses and validates a configuration file. Relative paths inside it
    /// are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(p) = &cfg.force.path {
            if p.is_relative() {
                cfg.force.path = Some(base.join(p));
            }
        }
        if cfg.output.directory.is_relative() {
            cfg.output.directory = base.join(&cfg.output.directory);
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError(e.to_string().trim_end().into()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Fills family-dependent defaults and checks every key.
    fn resolve(&mut self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if !(MIN_DIM..=MAX_DIM).contains(&g.n) {
            return Err(key_error(
                "grid.n",
                format!("must lie in {MIN_DIM}..={MAX_DIM}, got {}", g.n),
            ));
        }
        if g.points < 2 || g.points % 2 != 0 {
            return Err(key_error(
                "grid.points",
                format!("must be even and >= 2, got {}", g.points),
            ));
        }
        if !(g.half_width > 0.0 && g.half_width.is_finite()) {
            return Err(key_error(
                "grid.half_width",
                format!("must be positive, got {}", g.half_width),
            ));
        }
        self.grid_spec()?;
        self.resolve_force()?;
        self.diagnostics
            .params()
            .validate()
            .map_err(|e| core_error("diagnostics", e))?;
        SolverConfig {
            diagnostics: None,
            ..self.solver_config()
        }
        .validate()
        .map_err(|e| core_error("solver", e))?;
        if self.solver.memory_budget_mib == 0 {
            return Err(key_error("solver.memory_budget_mib", "must be positive"));
        }
        Ok(())
    }

    fn resolve_force(&mut self) -> Result<(), ConfigError> {
        let n = self.grid.n;
        let f = &mut self.force;
        let allowed: &[&str] = match f.family {
            Family::Zero => &[],
            Family::GaussianBump => &["amplitude", "width", "center", "direction"],
            Family::Ring => &["amplitude", "width", "radius"],
            Family::Dipole => &["amplitude", "width", "separation", "axis", "direction"],
            Family::File => &["path"],
        };
        let present = [
            ("amplitude", f.amplitude.is_some()),
            ("width", f.width.is_some()),
            ("center", f.center.is_some()),
            ("direction", f.direction.is_some()),
            ("radius", f.radius.is_some()),
            ("separation", f.separation.is_some()),
            ("axis", f.axis.is_some()),
            ("path", f.path.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(key_error(
                    &format!("force.{key}"),
                    format!("not used by family {:?}", f.family),
                ));
            }
        }
        let e1 = {
            let mut v = vec![0.0; n];
            v[0] = 1.0;
            v
        };
        let mut last = vec![0.0; n];
        last[n - 1] = 1.0;
        if f.family == Family::File {
            if f.path.is_none() {
                return Err(key_error("force.path", "required for family file"));
            }
            return Ok(());
        }
        if f.family == Family::Zero {
            return Ok(());
        }
        let amplitude = *f.amplitude.get_or_insert(1e-2);
        let width = *f.width.get_or_insert(1.0);
        if !amplitude.is_finite() {
            return Err(key_error("force.amplitude", "must be finite"));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(key_error(
                "force.width",
                format!("must be positive, got {width}"),
            ));
        }
        match f.family {
            Family::GaussianBump => {
                f.center.get_or_insert_with(|| vec![0.0; n]);
                f.direction.get_or_insert_with(|| e1.clone());
            }
            Family::Ring => {
                let r = *f.radius.get_or_insert(2.0 * width);
                if !(r > 0.0) {
                    return Err(key_error(
                        "force.radius",
                        format!("must be positive, got {r}"),
                    ));
                }
            }
            Family::Dipole => {
                f.separation.get_or_insert(2.0 * width);
                f.axis.get_or_insert(last);
                f.direction.get_or_insert(e1);
            }
            Family::Zero | Family::File => {}
        }
        for (key, v) in [
            ("center", &f.center),
            ("direction", &f.direction),
            ("axis", &f.axis),
        ] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(key_error(
                        &format!("force.{key}"),
                        format!("needs {n} entries, got {}", v.len()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.grid.n, self.grid.points, self.grid.half_width)
            .map_err(|e| ConfigError(format!("[grid]: {e}")))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            homotopy_schedule: s.homotopy_schedule.clone(),
            damping: s.damping,
            residual_tol: s.residual_tol,
            max_iters_per_stage: s.max_iters_per_stage,
            divergence_guard: s.divergence_guard,
            diagnostics: self.diagnostics.enabled.then(|| self.diagnostics.params()),
        }
    }

    /// Samples the force on the grid, or loads it for family `file`.
    pub fn force_field(&self) -> Result<VectorField, ConfigError> {
        let grid = self.grid_spec()?;
        let f = &self.force;
        let amp = f.amplitude.unwrap_or(0.0);
        let width = f.width.unwrap_or(1.0);
        let built = match f.family {
            Family::Zero => Ok(VectorField::zeros(grid)),
            Family::GaussianBump => forcing::gaussian_bump(
                grid,
                amp,
                width,
                f.center.as_deref().unwrap_or_default(),
                f.direction.as_deref().unwrap_or_default(),
            ),
            Family::Ring => forcing::ring(grid, amp, width, f.radius.unwrap_or_default()),
            Family::Dipole => forcing::dipole(
                grid,
                amp,
                width,
                f.separation.unwrap_or_default(),
                f.axis.as_deref().unwrap_or_default(),
                f.direction.as_deref().unwrap_or_default(),
            ),
            Family::File => {
                let path = f.path.as_deref().unwrap_or(Path::new(""));
                let raw = std::fs::File::open(path)
                    .map_err(Error::from)
                    .and_then(|file| read_nsf1(std::io::BufReader::new(file)))
                    .map_err(|e| key_error("force.path", format!("{}: {e}", path.display())))?;
                if raw.grid != grid {
                    return Err(key_error(
                        "force.path",
                        format!(
                            "field grid {} does not match [grid] {}",
                            raw.grid.describe(),
                            grid.describe()
                        ),
                    ));
                }
                raw.into_vector()
            }
        };
        built.map_err(|e| core_error("force", e))
    }

    /// The resolved configuration as `section.key` / value pairs.
    pub fn flattened(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config serializes to TOML");
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        out
    }
}

pub fn plan_options(s: &SolverSection) -> PlanOptions {
    PlanOptions {
        pressure: true,
        gradient: match s.gradient_tables {
            GradientMode::Auto => GradientTables::Auto,
            GradientMode::Stored => GradientTables::Stored,
            GradientMode::OnDemand => GradientTables::OnDemand,
        },
        memory_budget: s.memory_budget_mib << 20,
        singular_cell: match s.origin_rule {
            OriginRule::LatticeCorrected => SingularCell::LatticeCorrected,
            OriginRule::CellAverage => SingularCell::CellAverage,
        },
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
