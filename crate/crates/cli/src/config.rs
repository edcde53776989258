//! Run configuration: `key = value` files merged with command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use spinboson::analytic::weak_coupling_params;
use spinboson::measure::DEFAULT_EPS_SIGMA;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Exact,
    Tcl2,
    Analytic,
}

impl Solver {
    pub const ALL: [Solver; 3] = [Solver::Exact, Solver::Tcl2, Solver::Analytic];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Exact => "exact",
            Solver::Tcl2 => "tcl2",
            Solver::Analytic => "analytic",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn solver_names() -> String {
    Solver::ALL.map(Solver::name).join(", ")
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| format!("unknown solver '{s}', expected one of: {}", solver_names()))
    }
}

/// Keys accepted in configuration files.
pub const VALID_KEYS: &[&str] = &[
    "solver",
    "alpha",
    "omega_c",
    "delta",
    "t_max",
    "dt",
    "n_modes",
    "omega_max",
    "n_exc",
    "krylov_dim",
    "eps_sigma",
    "out",
    "alphas",
    "omega_cs",
];

/// Fields that only the exact solver reads.
const EXACT_ONLY: &[&str] = &["n_modes", "omega_max", "n_exc", "krylov_dim"];

/// Partially specified configuration, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub solver: Option<Solver>,
    pub alpha: Option<f64>,
    pub omega_c: Option<f64>,
    pub delta: Option<f64>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub n_modes: Option<usize>,
    pub omega_max: Option<f64>,
    pub n_exc: Option<usize>,
    pub krylov_dim: Option<usize>,
    pub eps_sigma: Option<f64>,
    pub out: Option<PathBuf>,
    pub alphas: Option<Vec<f64>>,
    pub omega_cs: Option<Vec<f64>>,
}

fn parse_number<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("value '{value}' for '{key}' is not a valid number"))
}

/// Comma-separated list of numbers.
pub fn parse_list(key: &str, value: &str) -> std::result::Result<Vec<f64>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_number(key, v)).collect()
}

impl ConfigValues {
    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "solver" => self.solver = Some(value.parse()?),
            "alpha" => self.alpha = Some(parse_number(key, value)?),
            "omega_c" => self.omega_c = Some(parse_number(key, value)?),
            "delta" => self.delta = Some(parse_number(key, value)?),
            "t_max" => self.t_max = Some(parse_number(key, value)?),
            "dt" => self.dt = Some(parse_number(key, value)?),
            "n_modes" => self.n_modes = Some(parse_number(key, value)?),
            "omega_max" => self.omega_max = Some(parse_number(key, value)?),
            "n_exc" => self.n_exc = Some(parse_number(key, value)?),
            "krylov_dim" => self.krylov_dim = Some(parse_number(key, value)?),
            "eps_sigma" => self.eps_sigma = Some(parse_number(key, value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "alphas" => self.alphas = Some(parse_list(key, value)?),
            "omega_cs" => self.omega_cs = Some(parse_list(key, value)?),
            _ => {
                return Err(format!("unknown key '{key}', valid keys are: {}", VALID_KEYS.join(", ")))
            }
        }
        Ok(())
    }

    /// Parses configuration text; `origin` only labels error messages.
    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let mut values = ConfigValues::default();
        for (index, raw) in text.lines().enumerate() {
            let line_error = |message: String| CliError::ConfigLine {
                path: origin.to_path_buf(),
                line: index + 1,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| line_error(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(line_error(format!("expected 'key = value', got '{line}'")));
            }
            values.set(key, value).map_err(line_error)?;
        }
        Ok(values)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse_str(&text, path)
    }

    /// Fields set in `over` replace the ones in `self`.
    pub fn overridden_by(self, over: ConfigValues) -> Self {
        ConfigValues {
            solver: over.solver.or(self.solver),
            alpha: over.alpha.or(self.alpha),
            omega_c: over.omega_c.or(self.omega_c),
            delta: over.delta.or(self.delta),
            t_max: over.t_max.or(self.t_max),
            dt: over.dt.or(self.dt),
            n_modes: over.n_modes.or(self.n_modes),
            omega_max: over.omega_max.or(self.omega_max),
            n_exc: over.n_exc.or(self.n_exc),
            krylov_dim: over.krylov_dim.or(self.krylov_dim),
            eps_sigma: over.eps_sigma.or(self.eps_sigma),
            out: over.out.or(self.out),
            alphas: over.alphas.or(self.alphas),
            omega_cs: over.omega_cs.or(self.omega_cs),
        }
    }

    fn exact_only_fields_set(&self) -> Vec<&'static str> {
        let set = [
            self.n_modes.is_some(),
            self.omega_max.is_some(),
            self.n_exc.is_some(),
            self.krylov_dim.is_some(),
        ];
        EXACT_ONLY.iter().zip(set).filter(|(_, s)| *s).map(|(k, _)| *k).collect()
    }
}

/// Loads the optional file and applies the flag values on top.
pub fn merge_sources(file: Option<&Path>, flags: ConfigValues) -> Result<ConfigValues> {
    let base = match file {
        Some(path) => ConfigValues::from_file(path)?,
        None => ConfigValues::default(),
    };
    Ok(base.overridden_by(flags))
}

/// Fully resolved settings for a single run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: Solver,
    pub alpha: f64,
    pub omega_c: f64,
    pub delta: f64,
    pub t_max: f64,
    pub dt: f64,
    pub n_modes: usize,
    pub omega_max: f64,
    pub n_exc: usize,
    pub krylov_dim: usize,
    pub eps_sigma: f64,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub const DEFAULT_DELTA: f64 = 1.0;
    pub const DEFAULT_EXACT_T_MAX: f64 = 15.0;
    pub const DEFAULT_TCL2_T_MAX: f64 = 30.0;
    /// The analytic horizon defaults to this many decay times `1/γ`.
    pub const ANALYTIC_DECAY_TIMES: f64 = 60.0;
    pub const DEFAULT_EXACT_DT: f64 = 0.02;
    pub const DEFAULT_TCL2_DT: f64 = 1e-3;
    pub const DEFAULT_ANALYTIC_DT: f64 = 0.01;
    /// Exact-solver cutoff frequency in units of `ωc`.
    pub const DEFAULT_OMEGA_MAX_FACTOR: f64 = 2.0;
    pub const DEFAULT_N_EXC: usize = 3;
    pub const DEFAULT_KRYLOV_DIM: usize = 40;
    /// Default mode counts keep the bath recurrence time `2π/Δω` this far past `t_max`.
    pub const RECURRENCE_MARGIN: f64 = 1.05;

    /// Fills defaults and validates; the second value holds warnings for the user.
    pub fn resolve(values: &ConfigValues) -> Result<(Self, Vec<String>)> {
        let solver = values.solver.ok_or_else(|| {
            CliError::Config(format!("no solver given, expected one of: {}", solver_names()))
        })?;
        let alpha = values.alpha.ok_or_else(|| CliError::Config("alpha is required".into()))?;
        let omega_c = values.omega_c.ok_or_else(|| CliError::Config("omega_c is required".into()))?;
        let delta = values.delta.unwrap_or(Self::DEFAULT_DELTA);
        let mut warnings = Vec::new();

        require(alpha >= 0.0 && alpha.is_finite(), "alpha", alpha, ">= 0")?;
        require(omega_c > 0.0 && omega_c.is_finite(), "omega_c", omega_c, "> 0")?;
        require(delta > 0.0 && delta.is_finite(), "delta", delta, "> 0")?;

        if solver != Solver::Exact {
            for key in values.exact_only_fields_set() {
                warnings.push(format!("'{key}' only applies to the exact solver and is ignored"));
            }
        }

        let t_max = match (values.t_max, solver) {
            (Some(t), _) => t,
            (None, Solver::Exact) => Self::DEFAULT_EXACT_T_MAX,
            (None, Solver::Tcl2) => Self::DEFAULT_TCL2_T_MAX,
            (None, Solver::Analytic) => {
                let p = weak_coupling_params(alpha, omega_c, delta)?;
                if !(p.gamma > 0.0) {
                    return Err(CliError::Config(
                        "the analytic solver needs t_max when the damping rate vanishes".into(),
                    ));
                }
                Self::ANALYTIC_DECAY_TIMES / p.gamma
            }
        };
        let dt = values.dt.unwrap_or(match solver {
            Solver::Exact => Self::DEFAULT_EXACT_DT,
            Solver::Tcl2 => Self::DEFAULT_TCL2_DT,
            Solver::Analytic => Self::DEFAULT_ANALYTIC_DT,
        });
        require(t_max > 0.0 && t_max.is_finite(), "t_max", t_max, "> 0")?;
        require(dt > 0.0 && dt <= t_max, "dt", dt, "in (0, t_max]")?;

        let omega_max = values.omega_max.unwrap_or(Self::DEFAULT_OMEGA_MAX_FACTOR * omega_c);
        require(omega_max > 0.0 && omega_max.is_finite(), "omega_max", omega_max, "> 0")?;
        let n_modes = values.n_modes.unwrap_or_else(|| {
            (Self::RECURRENCE_MARGIN * t_max * omega_max / std::f64::consts::TAU).ceil() as usize
        });
        if n_modes == 0 {
            return Err(CliError::Config("n_modes must be >= 1".into()));
        }
        let n_exc = values.n_exc.unwrap_or(Self::DEFAULT_N_EXC);
        let krylov_dim = values.krylov_dim.unwrap_or(Self::DEFAULT_KRYLOV_DIM);
        if krylov_dim < 2 {
            return Err(CliError::Config(format!("krylov_dim must be >= 2, got {krylov_dim}")));
        }
        let eps_sigma = values.eps_sigma.unwrap_or(DEFAULT_EPS_SIGMA);
        require(eps_sigma >= 0.0 && eps_sigma.is_finite(), "eps_sigma", eps_sigma, ">= 0")?;

        if solver == Solver::Exact {
            let recurrence = std::f64::consts::TAU * n_modes as f64 / omega_max;
            if recurrence < t_max {
                warnings.push(format!(
                    "bath recurrence time {recurrence:.3} is shorter than t_max = {t_max}; \
                     increase n_modes or lower omega_max"
                ));
            }
        }

        let cfg = RunConfig {
            solver,
            alpha,
            omega_c,
            delta,
            t_max,
            dt,
            n_modes,
            omega_max,
            n_exc,
            krylov_dim,
            eps_sigma,
            out: values.out.clone(),
        };
        Ok((cfg, warnings))
    }
}

fn require(ok: bool, key: &str, value: f64, rule: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{key} must be {rule}, got {value}")))
    }
}

/// File and flags merged, then resolved.
pub fn parse_config(file: Option<&Path>, flags: ConfigValues) -> Result<(RunConfig, Vec<String>)> {
    RunConfig::resolve(&merge_sources(file, flags)?)
}

/// Grid of `(ωc, α)` points sharing every other setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub omega_cs: Vec<f64>,
    pub solver: Solver,
    /// Settings applied to every point; `alpha` and `omega_c` are replaced per point.
    pub base: ConfigValues,
}

impl SweepSpec {
    pub fn from_values(values: ConfigValues) -> Result<Self> {
        let solver = values.solver.ok_or_else(|| {
            CliError::Config(format!("no solver given, expected one of: {}", solver_names()))
        })?;
        let alphas = values.alphas.clone().unwrap_or_default();
        let omega_cs = match (&values.omega_cs, values.omega_c) {
            (Some(list), _) => list.clone(),
            (None, Some(w)) => vec![w],
            (None, None) => Vec::new(),
        };
        if alphas.is_empty() {
            return Err(CliError::Config("the sweep needs a non-empty list of alphas".into()));
        }
        if omega_cs.is_empty() {
            return Err(CliError::Config("the sweep needs a non-empty list of omega_cs".into()));
        }
        Ok(SweepSpec { alphas, omega_cs, solver, base: values })
    }

    /// Points in row-major order: `ωc` outer, `α` inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.omega_cs
            .iter()
            .flat_map(|&w| self.alphas.iter().map(move |&a| (w, a)))
            .collect()
    }

    pub fn point_values(&self, omega_c: f64, alpha: f64) -> ConfigValues {
        ConfigValues {
            solver: Some(self.solver),
            alpha: Some(alpha),
            omega_c: Some(omega_c),
            ..self.base.clone()
        }
    }
}
