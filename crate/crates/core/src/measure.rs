//! Trace-distance measurement layer: mirror map, trace-distance series,
//! backflow intervals and the cumulative non-Markovianity `N`.
//!
//! `N` is evaluated for the fixed pair of σz eigenstates `|↑⟩`, `|↓⟩` as initial
//! spin states, so it is a lower bound to the measure maximized over all pairs.

use crate::error::{Error, Result};

/// Threshold on `σ(t)` below which a grid point does not count as backflow.
pub const DEFAULT_EPS_SIGMA: f64 = 1e-10;

/// `converged` in a [`NonMarkovianityReport`] requires a tail estimate below this.
pub const TAIL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryMeta {
    pub solver: String,
    /// Free-form `(key, value)` pairs describing the run.
    pub params: Vec<(String, String)>,
    pub mirrored: bool,
}

impl TrajectoryMeta {
    pub fn new(solver: impl Into<String>) -> Self {
        Self { solver: solver.into(), params: Vec::new(), mirrored: false }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Bloch vector `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochTrajectory {
    pub t: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl BlochTrajectory {
    pub fn new(
        t: Vec<f64>,
        sx: Vec<f64>,
        sy: Vec<f64>,
        sz: Vec<f64>,
        meta: TrajectoryMeta,
    ) -> Result<Self> {
        let n = t.len();
        if sx.len() != n || sy.len() != n || sz.len() != n {
            return Err(Error::Shape(format!(
                "trajectory columns have lengths t={n}, sx={}, sy={}, sz={}",
                sx.len(),
                sy.len(),
                sz.len()
            )));
        }
        uniform_step(&t)?;
        Ok(Self { t, sx, sy, sz, meta })
    }

    /// Uniform grid `t_k = k·dt`, `k = 0..n`, filled with zeros.
    pub fn zeros(dt: f64, n: usize, meta: TrajectoryMeta) -> Self {
        Self {
            t: (0..n).map(|k| k as f64 * dt).collect(),
            sx: vec![0.0; n],
            sy: vec![0.0; n],
            sz: vec![0.0; n],
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        if self.t.len() < 2 {
            0.0
        } else {
            self.t[1] - self.t[0]
        }
    }

    pub fn bloch(&self, k: usize) -> [f64; 3] {
        [self.sx[k], self.sy[k], self.sz[k]]
    }

    pub fn set(&mut self, k: usize, bloch: [f64; 3]) {
        self.sx[k] = bloch[0];
        self.sy[k] = bloch[1];
        self.sz[k] = bloch[2];
    }

    /// Largest Bloch-vector length along the trajectory.
    pub fn max_bloch_length(&self) -> f64 {
        (0..self.len())
            .map(|k| self.bloch(k).iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Checks that `t` is uniform to 1e-12 relative and returns the step.
pub fn uniform_step(t: &[f64]) -> Result<f64> {
    if t.len() < 2 {
        return Ok(0.0);
    }
    let n = t.len() - 1;
    let step = (t[n] - t[0]) / n as f64;
    if !(step > 0.0) {
        return Err(Error::Shape("time grid must be strictly increasing".into()));
    }
    let scale = t[n].abs().max(t[0].abs()).max(step);
    for (k, &tk) in t.iter().enumerate() {
        let expected = t[0] + k as f64 * step;
        if (tk - expected).abs() > 1e-12 * scale.max(1.0) + 1e-9 * step {
            return Err(Error::Shape(format!("time grid not uniform at index {k}")));
        }
    }
    Ok(step)
}

/// Central differences on a uniform grid, second-order one-sided at the ends.
pub fn central_difference(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h = (t[n - 1] - t[0]) / (n - 1) as f64;
    let mut d = vec![0.0; n];
    if n == 2 {
        let s = (y[1] - y[0]) / h;
        return vec![s, s];
    }
    d[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h);
    d[n - 1] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h);
    for k in 1..n - 1 {
        d[k] = (y[k + 1] - y[k - 1]) / (2.0 * h);
    }
    d
}

/// Applies the σx conjugation relating the ↑ and ↓ dynamics:
/// `(sx, sy, sz) → (sx, −sy, −sz)`.
pub fn mirror_bloch(traj: &BlochTrajectory) -> BlochTrajectory {
    let mut out = traj.clone();
    out.sy.iter_mut().for_each(|v| *v = -*v);
    out.sz.iter_mut().for_each(|v| *v = -*v);
    out.meta.mirrored = !traj.meta.mirrored;
    out
}

/// Sampled trace distance `D(t)` with its derivative `σ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceDistanceSeries {
    pub t: Vec<f64>,
    pub d: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl TraceDistanceSeries {
    /// Builds the series from samples of `D`, differentiating numerically.
    pub fn from_samples(t: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if t.len() != d.len() {
            return Err(Error::Shape(format!("{} times but {} distances", t.len(), d.len())));
        }
        uniform_step(&t)?;
        let sigma = central_difference(&t, &d);
        Ok(Self { t, d, sigma })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// `D(t) = ½ |a(t) − b(t)|` for two Bloch trajectories on the same grid.
pub fn trace_distance_pair(a: &BlochTrajectory, b: &BlochTrajectory) -> Result<TraceDistanceSeries> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("trajectories have {} and {} samples", a.len(), b.len())));
    }
    let step = uniform_step(&a.t)?;
    for (ta, tb) in a.t.iter().zip(&b.t) {
        if (ta - tb).abs() > 1e-9 * step.max(1e-300) {
            return Err(Error::Shape("trajectories are sampled on different grids".into()));
        }
    }
    let d = (0..a.len())
        .map(|k| {
            let dx = a.sx[k] - b.sx[k];
            let dy = a.sy[k] - b.sy[k];
            let dz = a.sz[k] - b.sz[k];
            0.5 * (dx * dx + dy * dy + dz * dz).sqrt()
        })
        .collect();
    TraceDistanceSeries::from_samples(a.t.clone(), d)
}

/// Both single-trajectory forms of the trace distance for the antipodal σz pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaZDistance {
    /// `D = sqrt(⟨σz⟩² + ⟨σy⟩²)`.
    pub series: TraceDistanceSeries,
    /// `D = sqrt(⟨σz⟩² + [∂t⟨σz⟩ / 2Δ]²)` with a numerical derivative.
    pub from_derivative: Vec<f64>,
    /// Largest pointwise difference between the two forms.
    pub max_deviation: f64,
}

/// Trace distance of the `↑`/`↓` pair from the `↑` trajectory alone, valid for
/// the unbiased model where `⟨σy⟩ = ∂t⟨σz⟩ / 2Δ`.
pub fn trace_distance_sigma_z(traj_up: &BlochTrajectory, delta: f64) -> Result<SigmaZDistance> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    let dz = central_difference(&traj_up.t, &traj_up.sz);
    let from_sy: Vec<f64> = traj_up
        .sz
        .iter()
        .zip(&traj_up.sy)
        .map(|(z, y)| (z * z + y * y).sqrt())
        .collect();
    let from_derivative: Vec<f64> = traj_up
        .sz
        .iter()
        .zip(&dz)
        .map(|(z, d)| (z * z + (d / (2.0 * delta)).powi(2)).sqrt())
        .collect();
    let max_deviation = from_sy
        .iter()
        .zip(&from_derivative)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(SigmaZDistance {
        series: TraceDistanceSeries::from_samples(traj_up.t.clone(), from_sy)?,
        from_derivative,
        max_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackflowInterval {
    pub t_start: f64,
    pub t_end: f64,
    /// `D(t_end) − D(t_start)`.
    pub gain: f64,
}

/// Maximal runs of grid points with `σ > eps`.
///
/// Runs separated by a single sub-threshold point are merged, runs shorter
/// than two points are dropped, and the end points are placed at the linearly
/// interpolated zero crossings of `σ`.
pub fn detect_intervals(s: &TraceDistanceSeries, eps: f64) -> Vec<BackflowInterval> {
    let n = s.len();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < n {
        if s.sigma[k] > eps {
            let start = k;
            while k + 1 < n && s.sigma[k + 1] > eps {
                k += 1;
            }
            match runs.last_mut() {
                Some(last) if start == last.1 + 2 => last.1 = k,
                _ => runs.push((start, k)),
            }
        }
        k += 1;
    }

    runs.into_iter()
        .filter(|(a, b)| b > a)
        .map(|(a, b)| {
            let (t_start, d_start) = if a == 0 {
                (s.t[0], s.d[0])
            } else {
                zero_crossing(s, a - 1, a)
            };
            let (t_end, d_end) = if b == n - 1 {
                (s.t[n - 1], s.d[n - 1])
            } else {
                zero_crossing(s, b, b + 1)
            };
            BackflowInterval { t_start, t_end, gain: (d_end - d_start).max(0.0) }
        })
        .collect()
}

/// Zero of the linear interpolant of `σ` on `[t_i, t_j]`, with `D` there from
/// integrating that interpolant.
fn zero_crossing(s: &TraceDistanceSeries, i: usize, j: usize) -> (f64, f64) {
    let (si, sj) = (s.sigma[i], s.sigma[j]);
    let h = s.t[j] - s.t[i];
    let frac = if si == sj { 0.0 } else { (si / (si - sj)).clamp(0.0, 1.0) };
    let dt = frac * h;
    (s.t[i] + dt, s.d[i] + 0.5 * si * dt)
}

/// Geometric decay model for the backflow beyond the horizon: successive
/// periods of length `π/frequency` scale by `exp(−π·gamma/frequency)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailModel {
    pub gamma: f64,
    pub frequency: f64,
}

impl TailModel {
    pub fn period_ratio(&self) -> f64 {
        (-std::f64::consts::PI * self.gamma / self.frequency).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonMarkovianityReport {
    /// Sum of the interval gains up to the horizon.
    pub n_value: f64,
    pub intervals: Vec<BackflowInterval>,
    pub horizon: f64,
    /// Estimate of the backflow beyond the horizon.
    pub tail_estimate: f64,
    pub converged: bool,
}

/// `N = Σ [D(t_end) − D(t_start)]` over the detected backflow intervals.
pub fn nonmarkovianity(
    s: &TraceDistanceSeries,
    eps: f64,
    tail_model: Option<TailModel>,
) -> NonMarkovianityReport {
    let intervals = detect_intervals(s, eps);
    let n_value = intervals.iter().map(|i| i.gain).sum();
    let horizon = s.t.last().copied().unwrap_or(0.0);
    let tail_estimate = match tail_model {
        Some(model) => {
            let q = model.period_ratio();
            intervals.last().map_or(0.0, |last| last.gain * q / (1.0 - q))
        }
        None => s.d.last().copied().unwrap_or(0.0),
    };
    NonMarkovianityReport {
        n_value,
        intervals,
        horizon,
        tail_estimate,
        converged: tail_estimate < TAIL_TOLERANCE,
    }
}
