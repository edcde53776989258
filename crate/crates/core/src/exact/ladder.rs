//! Convergence ladders: successive refinements of bath size, excitation cap
//! and output step, compared on `⟨σz⟩`.

use super::basis::FockTruncation;
use super::hamiltonian::{SpinBosonHamiltonian, DEFAULT_MAX_JOINT_DIM};
use super::propagate::{propagate_with, trajectory_meta, PropagatorConfig};
use crate::error::{Error, Result};
use crate::measure::BlochTrajectory;
use crate::model::{ModelConfig, OhmicSpectralDensity};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderRung {
    pub n_modes: usize,
    pub n_exc: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderSpec {
    pub delta: f64,
    pub spectral_density: OhmicSpectralDensity,
    pub omega_max: f64,
    pub t_max: f64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    /// Threshold on `max_t |⟨σz⟩_i − ⟨σz⟩_{i+1}|`.
    pub tol: f64,
    pub rungs: Vec<LadderRung>,
    /// Keep climbing after convergence so every rung is reported.
    pub run_all: bool,
    pub max_joint_dim: usize,
}

impl LadderSpec {
    pub const DEFAULT_TOL: f64 = 5e-3;

    pub fn new(delta: f64, spectral_density: OhmicSpectralDensity, omega_max: f64, t_max: f64, rungs: Vec<LadderRung>) -> Self {
        Self {
            delta,
            spectral_density,
            omega_max,
            t_max,
            krylov_dim: PropagatorConfig::DEFAULT_KRYLOV_DIM,
            krylov_tol: PropagatorConfig::DEFAULT_KRYLOV_TOL,
            tol: Self::DEFAULT_TOL,
            rungs,
            run_all: false,
            max_joint_dim: DEFAULT_MAX_JOINT_DIM,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LadderReport {
    /// One trajectory per rung that was run, in ladder order.
    pub trajectories: Vec<BlochTrajectory>,
    /// `deviations[i]` compares rung `i` with rung `i + 1`.
    pub deviations: Vec<f64>,
    pub converged: bool,
    /// Rung whose trajectory is returned as the result.
    pub selected: usize,
}

impl LadderReport {
    pub fn best(&self) -> &BlochTrajectory {
        &self.trajectories[self.selected]
    }
}

/// Runs the ladder until two consecutive rungs agree on `⟨σz⟩` within `tol`.
///
/// The finer rung of the first agreeing pair is selected. An exhausted ladder
/// returns its last rung flagged unconverged; an infinite `tol` accepts the
/// first rung.
pub fn convergence_scan(spec: &LadderSpec) -> Result<LadderReport> {
    if spec.rungs.is_empty() {
        return Err(Error::Config("convergence ladder has no rungs".into()));
    }
    let mut report = LadderReport { trajectories: Vec::new(), deviations: Vec::new(), converged: false, selected: 0 };
    let mut found: Option<usize> = None;
    for (i, rung) in spec.rungs.iter().enumerate() {
        report.trajectories.push(run_rung(spec, rung)?);
        if i == 0 && spec.tol.is_infinite() {
            found = Some(0);
        }
        if i > 0 {
            let dev = max_sz_deviation(&report.trajectories[i - 1], &report.trajectories[i]);
            report.deviations.push(dev);
            if found.is_none() && dev < spec.tol {
                found = Some(i);
            }
        }
        if found.is_some() && !spec.run_all {
            break;
        }
    }
    report.converged = found.is_some();
    report.selected = found.unwrap_or(report.trajectories.len() - 1);
    Ok(report)
}

fn run_rung(spec: &LadderSpec, rung: &LadderRung) -> Result<BlochTrajectory> {
    let sd = spec.spectral_density;
    let cfg = ModelConfig::ohmic(spec.delta, sd.alpha, sd.omega_c, rung.n_modes, spec.omega_max)?;
    let trunc = FockTruncation::global(rung.n_exc);
    let pcfg = PropagatorConfig { dt: rung.dt, t_max: spec.t_max, krylov_dim: spec.krylov_dim, krylov_tol: spec.krylov_tol }
        .validated()?;
    let h = SpinBosonHamiltonian::new(&cfg, trunc, spec.max_joint_dim)?;
    Ok(propagate_with(&h, &pcfg, true, trajectory_meta(&cfg, &trunc, &pcfg))?.trajectory)
}

/// `max |⟨σz⟩_a − ⟨σz⟩_b|` over the grid of `a`, with `b` linearly interpolated.
pub fn max_sz_deviation(a: &BlochTrajectory, b: &BlochTrajectory) -> f64 {
    let db = b.dt();
    let mut worst: f64 = 0.0;
    for (t, za) in a.t.iter().zip(&a.sz) {
        let x = t / db;
        let i = (x.floor() as usize).min(b.len().saturating_sub(2));
        if i + 1 >= b.len() {
            break;
        }
        let f = (x - i as f64).clamp(0.0, 1.0);
        if x > (b.len() - 1) as f64 + 1e-9 {
            break;
        }
        let zb = b.sz[i] * (1.0 - f) + b.sz[i + 1] * f;
        worst = worst.max((za - zb).abs());
    }
    worst
}
