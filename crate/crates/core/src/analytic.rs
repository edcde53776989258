//! Weak-coupling, scaling-limit closed forms.
//!
//! `⟨σz⟩(t) = e^{−γt}[cos(Δ̃t) + (γ/Δ̃) sin(Δ̃t)]` with the renormalized frequency
//! `Δ̃ = [Γ(1−2α) cos(πα)]^{1/(2(1−α))} (2Δ/ωc)^{α/(1−α)} 2Δ` and the damping
//! `γ = (π/2) α Δ̃ e^{−Δ̃/ωc}`. The trace distance of the σz eigenstate pair follows
//! from `D² = ⟨σz⟩² + (∂t⟨σz⟩/2Δ)²`:
//!
//! ```text
//! D(t) = e^{−γt} sqrt( (1+η)/2 + β sin(2Δ̃t) + (1−η)/2 cos(2Δ̃t) ),
//! β = γ/Δ̃,   η = β² + (Δ̃/2Δ)² (1+β²)².
//! ```
//!
//! `D(t + π/Δ̃) = e^{−πγ/Δ̃} D(t)`, so the backflow of every period is a scaled
//! copy of the first one and `N` is a geometric series.

use std::f64::consts::PI;

use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};

/// The Euler–Mascheroni constant.
pub const EULER_MASCHERONI: f64 = 0.577_215_664_901_532_9;

/// Scan resolution over the first period when bracketing the backflow interval.
const SCAN_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakCouplingParams {
    pub alpha: f64,
    pub omega_c: f64,
    pub delta: f64,
    /// Renormalized oscillation frequency of `⟨σz⟩`.
    pub delta_tilde: f64,
    /// Damping rate.
    pub gamma: f64,
    /// `γ/Δ̃`.
    pub beta: f64,
    pub eta: f64,
}

impl WeakCouplingParams {
    pub fn period(&self) -> f64 {
        PI / self.delta_tilde
    }

    /// Factor `e^{−πγ/Δ̃}` between consecutive periods.
    pub fn period_ratio(&self) -> f64 {
        (-PI * self.gamma / self.delta_tilde).exp()
    }
}

pub fn weak_coupling_params(alpha: f64, omega_c: f64, delta: f64) -> Result<WeakCouplingParams> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::Domain(format!(
            "weak-coupling forms need 0 <= alpha < 0.5 (Γ(1−2α) has a pole at alpha = 0.5), got {alpha}"
        )));
    }
    if !(omega_c > 0.0 && omega_c.is_finite()) {
        return Err(Error::Domain(format!("omega_c must be > 0, got {omega_c}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("delta must be > 0, got {delta}")));
    }
    let prefactor = (gamma_fn(1.0 - 2.0 * alpha) * (PI * alpha).cos()).powf(1.0 / (2.0 * (1.0 - alpha)));
    let delta_tilde = prefactor * (2.0 * delta / omega_c).powf(alpha / (1.0 - alpha)) * 2.0 * delta;
    let gamma = 0.5 * PI * alpha * delta_tilde * (-delta_tilde / omega_c).exp();
    let beta = gamma / delta_tilde;
    let ratio = delta_tilde / (2.0 * delta);
    let eta = beta * beta + ratio * ratio * (1.0 + beta * beta).powi(2);
    Ok(WeakCouplingParams { alpha, omega_c, delta, delta_tilde, gamma, beta, eta })
}

pub fn sigma_z_analytic(t: f64, p: &WeakCouplingParams) -> f64 {
    let x = p.delta_tilde * t;
    (-p.gamma * t).exp() * (x.cos() + p.beta * x.sin())
}

/// `∂t⟨σz⟩ = −Δ̃(1+β²) e^{−γt} sin(Δ̃t)`.
pub fn sigma_z_derivative_analytic(t: f64, p: &WeakCouplingParams) -> f64 {
    -p.delta_tilde * (1.0 + p.beta * p.beta) * (-p.gamma * t).exp() * (p.delta_tilde * t).sin()
}

fn radicand(t: f64, p: &WeakCouplingParams) -> f64 {
    let x = 2.0 * p.delta_tilde * t;
    0.5 * (1.0 + p.eta) + p.beta * x.sin() + 0.5 * (1.0 - p.eta) * x.cos()
}

pub fn trace_distance_analytic(t: f64, p: &WeakCouplingParams) -> Result<f64> {
    let r = radicand(t, p);
    if r < -1e-12 {
        return Err(Error::Domain(format!(
            "negative radicand {r:e} at t = {t}: inconsistent weak-coupling parameters"
        )));
    }
    Ok((-p.gamma * t).exp() * r.max(0.0).sqrt())
}

/// Analytic `σ(t) = ∂t D(t)`.
pub fn trace_distance_derivative_analytic(t: f64, p: &WeakCouplingParams) -> f64 {
    let r = radicand(t, p).max(0.0);
    if r == 0.0 {
        return 0.0;
    }
    let x = 2.0 * p.delta_tilde * t;
    let dr = 2.0 * p.delta_tilde * (p.beta * x.cos() - 0.5 * (1.0 - p.eta) * x.sin());
    (-p.gamma * t).exp() * (-p.gamma * r + 0.5 * dr) / r.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResummedNonMarkovianity {
    pub value: f64,
    /// Start of the backflow interval in the first period (empty if equal to `t_max`).
    pub t_min: f64,
    pub t_max: f64,
    /// `D(t_max) − D(t_min)`.
    pub first_period_gain: f64,
}

/// Backflow interval `[t_min, t_max]` inside the first period `[0, π/Δ̃]`,
/// bracketed on a uniform scan of `σ` and refined by bisection.
/// `None` when `σ` never becomes positive.
pub fn first_period_interval(p: &WeakCouplingParams) -> Result<Option<(f64, f64)>> {
    let period = p.period();
    let h = period / SCAN_POINTS as f64;
    let grid = |i: usize| if i == SCAN_POINTS { period } else { i as f64 * h };
    // the period end points are stationary; their sign is rounding noise
    let positive = |i: usize| {
        i != 0 && i != SCAN_POINTS && trace_distance_derivative_analytic(grid(i), p) > 0.0
    };
    let mut runs = Vec::new();
    let mut i = 1;
    while i < SCAN_POINTS {
        if positive(i) {
            let start = i;
            while i + 1 < SCAN_POINTS && positive(i + 1) {
                i += 1;
            }
            runs.push((start, i));
        }
        i += 1;
    }
    match runs.as_slice() {
        [] => Ok(None),
        [(a, b)] => {
            let t_min = bisect_sign_change(p, grid(a - 1), grid(*a), false);
            let t_max = bisect_sign_change(p, grid(*b), grid(b + 1), true);
            Ok(Some((t_min, t_max)))
        }
        _ => Err(Error::Numerical(format!(
            "found {} backflow intervals in the first period; the resummation assumes one",
            runs.len()
        ))),
    }
}

/// Bisects `[lo, hi]` for the boundary of `{σ > 0}`; `lo_positive` says on
/// which side the positive region lies.
fn bisect_sign_change(p: &WeakCouplingParams, mut lo: f64, mut hi: f64, lo_positive: bool) -> f64 {
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let pos = trace_distance_derivative_analytic(mid, p) > 0.0;
        if pos == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `N = [D(t_max) − D(t_min)] / (1 − e^{−πγ/Δ̃})`.
pub fn resummed_nonmarkovianity(p: &WeakCouplingParams) -> Result<ResummedNonMarkovianity> {
    if !(p.alpha > 0.0) {
        return Err(Error::Domain("resummation needs alpha > 0 (no decay at alpha = 0)".into()));
    }
    match first_period_interval(p)? {
        None => Ok(ResummedNonMarkovianity { value: 0.0, t_min: 0.0, t_max: 0.0, first_period_gain: 0.0 }),
        Some((t_min, t_max)) => {
            let gain = trace_distance_analytic(t_max, p)? - trace_distance_analytic(t_min, p)?;
            Ok(ResummedNonMarkovianity {
                value: gain / (1.0 - p.period_ratio()),
                t_min,
                t_max,
                first_period_gain: gain,
            })
        }
    }
}

/// Partial sum over the first `n_periods` periods, each period's gain evaluated
/// directly from `D` on the shifted interval.
pub fn partitioned_nonmarkovianity(p: &WeakCouplingParams, n_periods: usize) -> Result<f64> {
    if n_periods == 0 {
        return Err(Error::Domain("need at least one period".into()));
    }
    let Some((t_min, t_max)) = first_period_interval(p)? else {
        return Ok(0.0);
    };
    let period = p.period();
    let mut total = 0.0;
    for n in 0..n_periods {
        let shift = n as f64 * period;
        total += trace_distance_analytic(t_max + shift, p)? - trace_distance_analytic(t_min + shift, p)?;
    }
    Ok(total)
}

/// Leading-order `α → 0` limit of `N`:
/// `−(2/π²) e^{2Δ/ωc} [ln(2Δ/ωc) + γ_E + (π²/4) e^{−2Δ/ωc}]`, returned as is
/// (negative for `ωc` below roughly 36 Δ).
pub fn nonmarkovianity_alpha_zero(omega_c: f64, delta: f64) -> f64 {
    let x = 2.0 * delta / omega_c;
    -(2.0 / (PI * PI)) * x.exp() * (x.ln() + EULER_MASCHERONI + 0.25 * PI * PI * (-x).exp())
}

/// `α → 0` limit of [`resummed_nonmarkovianity`] keeping the full first-period
/// gain: `(r − atan r)/π` with `r = |ln(2Δ/ωc) + γ_E| / ((π/2) e^{−2Δ/ωc})`.
///
/// Replacing `atan r` by `π/2` gives [`nonmarkovianity_alpha_zero`].
pub fn resummed_alpha_zero_limit(omega_c: f64, delta: f64) -> f64 {
    let x = 2.0 * delta / omega_c;
    let r = (x.ln() + EULER_MASCHERONI).abs() / (0.5 * PI * (-x).exp());
    (r - r.atan()) / PI
}
