//! The four subcommands as library functions; `main` only adds argument parsing and output.

use spinboson::analytic::{
    nonmarkovianity_alpha_zero, resummed_nonmarkovianity, sigma_z_analytic, sigma_z_derivative_analytic,
    weak_coupling_params,
};
use spinboson::exact::{propagate, FockTruncation, PropagatorConfig};
use spinboson::measure::{
    nonmarkovianity, trace_distance_sigma_z, BlochTrajectory, NonMarkovianityReport, TailModel,
    TraceDistanceSeries, TrajectoryMeta,
};
use spinboson::tcl2::tcl2_propagate;
use spinboson::ModelConfig;

use rayon::prelude::*;

use crate::config::{RunConfig, Solver, SweepSpec};
use crate::csv_io::{format_float, SweepRow, SweepValues};
use crate::error::{CliError, Result};

/// Coupling used to evaluate the resummed measure next to the `α → 0` formula.
pub const LIMIT_PROBE_ALPHA: f64 = 1e-4;

/// `↑` trajectory from the configured solver.
pub fn simulate(cfg: &RunConfig) -> Result<BlochTrajectory> {
    match cfg.solver {
        Solver::Analytic => simulate_analytic(cfg),
        Solver::Tcl2 => Ok(tcl2_propagate(cfg.delta, cfg.alpha, cfg.omega_c, [0.0, 0.0, 1.0], cfg.dt, cfg.t_max)?),
        Solver::Exact => {
            let model = ModelConfig::ohmic(cfg.delta, cfg.alpha, cfg.omega_c, cfg.n_modes, cfg.omega_max)?;
            let trunc = FockTruncation::global(cfg.n_exc);
            let pcfg = PropagatorConfig {
                krylov_dim: cfg.krylov_dim,
                ..PropagatorConfig::new(cfg.dt, cfg.t_max)?
            }
            .validated()?;
            Ok(propagate(&model, &trunc, &pcfg, true)?)
        }
    }
}

/// Closed-form trajectory: `sz` from the weak-coupling solution, `sy` from the
/// unbiased-model identity `⟨σy⟩ = ∂t⟨σz⟩ / 2Δ`, and `sx = 0`.
fn simulate_analytic(cfg: &RunConfig) -> Result<BlochTrajectory> {
    let p = weak_coupling_params(cfg.alpha, cfg.omega_c, cfg.delta)?;
    let n = (cfg.t_max / cfg.dt).round() as usize + 1;
    let meta = TrajectoryMeta::new("analytic")
        .with("alpha", cfg.alpha)
        .with("omega_c", cfg.omega_c)
        .with("delta", cfg.delta)
        .with("delta_tilde", p.delta_tilde)
        .with("gamma", p.gamma)
        .with("dt", cfg.dt)
        .with("t_max", cfg.t_max);
    let mut traj = BlochTrajectory::zeros(cfg.dt, n, meta);
    for k in 0..n {
        let t = traj.t[k];
        let sy = sigma_z_derivative_analytic(t, &p) / (2.0 * cfg.delta);
        traj.set(k, [0.0, sy, sigma_z_analytic(t, &p)]);
    }
    Ok(traj)
}

/// Tail model recorded in the metadata of analytic trajectories.
pub fn tail_from_meta(meta: &TrajectoryMeta) -> Option<TailModel> {
    let gamma = meta.get("gamma")?.parse().ok()?;
    let frequency = meta.get("delta_tilde")?.parse().ok()?;
    Some(TailModel { gamma, frequency })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub distance: TraceDistanceSeries,
    pub report: NonMarkovianityReport,
}

/// Trace distance of the `↑`/`↓` pair and the backflow measure from the `↑` trajectory.
pub fn measure(traj: &BlochTrajectory, delta: f64, eps: f64, tail: Option<TailModel>) -> Result<Measurement> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(CliError::Config(format!("eps must be >= 0, got {eps}")));
    }
    if let Some(m) = tail {
        if !(m.gamma >= 0.0 && m.frequency > 0.0) {
            return Err(CliError::Config(format!(
                "tail model needs gamma >= 0 and frequency > 0, got {} and {}",
                m.gamma, m.frequency
            )));
        }
    }
    let distance = trace_distance_sigma_z(traj, delta)?.series;
    let report = nonmarkovianity(&distance, eps, tail);
    Ok(Measurement { distance, report })
}

/// JSON summary of a measurement.
pub fn format_summary(report: &NonMarkovianityReport) -> String {
    let intervals: Vec<String> = report
        .intervals
        .iter()
        .map(|i| {
            format!(
                "    {{\"t_start\": {}, \"t_end\": {}, \"gain\": {}}}",
                format_float(i.t_start),
                format_float(i.t_end),
                format_float(i.gain)
            )
        })
        .collect();
    let list = if intervals.is_empty() {
        "[]".to_string()
    } else {
        format!("[\n{}\n  ]", intervals.join(",\n"))
    };
    format!(
        "{{\n  \"n_value\": {},\n  \"n_intervals\": {},\n  \"intervals\": {},\n  \"horizon\": {},\n  \"tail_estimate\": {},\n  \"converged\": {}\n}}\n",
        format_float(report.n_value),
        report.intervals.len(),
        list,
        format_float(report.horizon),
        format_float(report.tail_estimate),
        report.converged
    )
}

fn sweep_point(spec: &SweepSpec, omega_c: f64, alpha: f64) -> Result<SweepValues> {
    let (cfg, _) = RunConfig::resolve(&spec.point_values(omega_c, alpha))?;
    let traj = simulate(&cfg)?;
    let tail = tail_from_meta(&traj.meta);
    let report = measure(&traj, cfg.delta, cfg.eps_sigma, tail)?.report;
    Ok(SweepValues {
        n_value: report.n_value,
        n_intervals: report.intervals.len(),
        horizon: report.horizon,
        converged: report.converged,
    })
}

/// Runs every grid point on up to `jobs` threads; rows keep the enumeration order
/// and a failing point only marks its own row.
pub fn sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))?;
    let points = spec.points();
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|&(omega_c, alpha)| SweepRow {
                alpha,
                omega_c,
                solver: spec.solver.name().to_string(),
                outcome: sweep_point(spec, omega_c, alpha).map_err(|e| e.to_string()),
            })
            .collect()
    });
    Ok(rows)
}

/// Metadata block for a sweep table.
pub fn sweep_meta(spec: &SweepSpec) -> TrajectoryMeta {
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    TrajectoryMeta::new(spec.solver.name())
        .with("alphas", list(&spec.alphas))
        .with("omega_cs", list(&spec.omega_cs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitReport {
    /// Closed-form `α → 0` limit of the measure.
    pub alpha_zero: f64,
    /// Resummed measure at [`LIMIT_PROBE_ALPHA`].
    pub resummed_probe: f64,
    pub relative_difference: f64,
}

pub fn limit(omega_c: f64, delta: f64) -> Result<LimitReport> {
    if !(omega_c > 0.0 && omega_c.is_finite() && delta > 0.0 && delta.is_finite()) {
        return Err(CliError::Config(format!(
            "need omega_c > 0 and delta > 0, got {omega_c} and {delta}"
        )));
    }
    let alpha_zero = nonmarkovianity_alpha_zero(omega_c, delta);
    let p = weak_coupling_params(LIMIT_PROBE_ALPHA, omega_c, delta)?;
    let resummed_probe = resummed_nonmarkovianity(&p)?.value;
    let relative_difference = (resummed_probe - alpha_zero).abs() / alpha_zero.abs();
    Ok(LimitReport { alpha_zero, resummed_probe, relative_difference })
}

pub fn format_limit(report: &LimitReport) -> String {
    format!(
        "alpha_zero_limit = {}\nresummed_at_alpha_1e-4 = {}\nrelative_difference = {}\n",
        format_float(report.alpha_zero),
        format_float(report.resummed_probe),
        format_float(report.relative_difference)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigValues;

    fn run_config(solver: Solver, alpha: f64, omega_c: f64) -> RunConfig {
        let values = ConfigValues {
            solver: Some(solver),
            alpha: Some(alpha),
            omega_c: Some(omega_c),
            ..Default::default()
        };
        RunConfig::resolve(&values).unwrap().0
    }

    #[test]
    fn analytic_trajectory_starts_up_and_carries_tail() {
        let traj = simulate(&run_config(Solver::Analytic, 0.1, 20.0)).unwrap();
        assert_eq!(traj.sz[0], 1.0);
        assert!(traj.sx.iter().all(|&x| x == 0.0));
        let tail = tail_from_meta(&traj.meta).unwrap();
        let p = weak_coupling_params(0.1, 20.0, 1.0).unwrap();
        assert_eq!(tail.gamma, p.gamma);
        assert_eq!(tail.frequency, p.delta_tilde);
    }

    #[test]
    fn analytic_round_trip_matches_resummation() {
        let traj = simulate(&run_config(Solver::Analytic, 0.1, 20.0)).unwrap();
        let m = measure(&traj, 1.0, 1e-10, tail_from_meta(&traj.meta)).unwrap();
        let p = weak_coupling_params(0.1, 20.0, 1.0).unwrap();
        let exact = resummed_nonmarkovianity(&p).unwrap().value;
        assert!((m.report.n_value - exact).abs() < 1e-4, "{} vs {exact}", m.report.n_value);
        assert!(m.report.converged);
    }

    #[test]
    fn monotone_input_has_no_backflow() {
        let meta = TrajectoryMeta::new("synthetic");
        let t: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let sz = t.iter().map(|x| (-x).exp()).collect();
        let sy = t.iter().map(|x| -(-x).exp() / 2.0).collect();
        let traj = BlochTrajectory::new(t, vec![0.0; 200], sy, sz, meta).unwrap();
        let m = measure(&traj, 1.0, 1e-10, None).unwrap();
        assert_eq!(m.report.n_value, 0.0);
        assert!(m.report.intervals.is_empty());
    }

    #[test]
    fn summary_is_json_like() {
        let traj = simulate(&run_config(Solver::Analytic, 0.3, 20.0)).unwrap();
        let m = measure(&traj, 1.0, 1e-10, None).unwrap();
        let s = format_summary(&m.report);
        for key in ["\"n_value\"", "\"n_intervals\"", "\"intervals\"", "\"horizon\"", "\"tail_estimate\"", "\"converged\""] {
            assert!(s.contains(key), "{s}");
        }
        assert!(s.starts_with('{') && s.trim_end().ends_with('}'));
    }

    #[test]
    fn limit_values() {
        let r = limit(40.0, 1.0).unwrap();
        assert!(r.alpha_zero > 0.0);
        assert!(limit(0.0, 1.0).is_err());
        assert_eq!(format_limit(&limit(40.0, 1.0).unwrap()), format_limit(&limit(80.0, 2.0).unwrap()));
        // sign-change root of the limit formula, located with 50-digit arithmetic
        assert!(limit(36.87370832725461, 1.0).unwrap().alpha_zero.abs() < 1e-3);
    }

    #[test]
    fn sweep_rows_keep_order_and_record_failures() {
        let values = ConfigValues {
            solver: Some(Solver::Analytic),
            alphas: Some(vec![0.1, 0.7, 0.3]),
            omega_cs: Some(vec![10.0, 20.0]),
            ..Default::default()
        };
        let spec = SweepSpec::from_values(values).unwrap();
        let rows = sweep(&spec, 3).unwrap();
        let order: Vec<(f64, f64)> = rows.iter().map(|r| (r.omega_c, r.alpha)).collect();
        assert_eq!(order, spec.points());
        assert!(rows[1].outcome.is_err());
        assert!(rows[0].outcome.is_ok() && rows[2].outcome.is_ok());
        assert_eq!(rows, sweep(&spec, 1).unwrap());
    }
}
