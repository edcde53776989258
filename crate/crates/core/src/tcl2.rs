//! Second-order time-convolutionless master equation for σz coupling at zero
//! temperature.
//!
//! With the memory kernel `B(t) = ∫0^t C(τ) σz(−τ) dτ`,
//! `σz(−τ) = cos(2Δτ)σz − sin(2Δτ)σy`, the generator
//!
//! ```text
//! ρ' = −i[Δσx, ρ] − [σz, B(t)ρ] − [ρB(t)†, σz]
//! ```
//!
//! becomes, on the Bloch vector `(x, y, z)`,
//!
//! ```text
//! x' = −4Γc x + 4Λs
//! y' = −2Δz − 4Γc y − 4Γs z
//! z' =  2Δy
//! ```
//!
//! with `Γc = ∫ Re C cos`, `Γs = ∫ Re C sin`, `Λs = ∫ Im C sin`. The identity
//! component of `ρ` is never touched, so the trace is preserved by construction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::measure::{BlochTrajectory, TrajectoryMeta};

/// Absolute tolerance of the coefficient quadrature per panel.
const QUAD_TOL: f64 = 1e-12;
/// Panels larger than this are split before integrating.
const MAX_PANEL: f64 = 0.05;

/// Zero-temperature bath correlation `C(t) = (α/2) ωc² / (1 + iωc t)²`.
pub fn bath_correlation(t: f64, alpha: f64, omega_c: f64) -> Complex64 {
    let denom = Complex64::new(1.0, omega_c * t);
    Complex64::new(0.5 * alpha * omega_c * omega_c, 0.0) / (denom * denom)
}

/// Time-dependent TCL2 rates at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tcl2Coefficients {
    pub t: f64,
    /// `∫0^t Re C(τ) cos(2Δτ) dτ`
    pub gamma_cos: f64,
    /// `∫0^t Re C(τ) sin(2Δτ) dτ`
    pub gamma_sin: f64,
    /// `∫0^t Im C(τ) cos(2Δτ) dτ`
    pub lambda_cos: f64,
    /// `∫0^t Im C(τ) sin(2Δτ) dτ`
    pub lambda_sin: f64,
}

/// Integrates the four rates over `[a, b]`.
fn panel(a: f64, b: f64, delta: f64, alpha: f64, omega_c: f64) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    if b <= a || alpha == 0.0 {
        return Ok(out);
    }
    let pieces = ((b - a) / MAX_PANEL).ceil().max(1.0) as usize;
    let h = (b - a) / pieces as f64;
    for p in 0..pieces {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == pieces { b } else { lo + h };
        let parts: [fn(Complex64, f64) -> f64; 4] = [
            |c, w| c.re * w.cos(),
            |c, w| c.re * w.sin(),
            |c, w| c.im * w.cos(),
            |c, w| c.im * w.sin(),
        ];
        for (slot, f) in out.iter_mut().zip(parts) {
            let r = quadrature::integrate(|tau| f(bath_correlation(tau, alpha, omega_c), 2.0 * delta * tau), lo, hi, QUAD_TOL);
            if !(r.integral.is_finite() && r.error_estimate <= 1e-9) {
                return Err(Error::Numerical(format!(
                    "TCL2 rate quadrature did not converge on [{lo}, {hi}] (error estimate {:e})",
                    r.error_estimate
                )));
            }
            *slot += r.integral;
        }
    }
    Ok(out)
}

pub fn tcl2_coefficients(t: f64, delta: f64, alpha: f64, omega_c: f64) -> Result<Tcl2Coefficients> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let mut acc = CoefficientAccumulator::new(delta, alpha, omega_c);
    acc.advance_to(t)
}

/// Rates advanced panel by panel along an increasing sequence of times.
#[derive(Debug, Clone)]
pub struct CoefficientAccumulator {
    delta: f64,
    alpha: f64,
    omega_c: f64,
    current: Tcl2Coefficients,
}

impl CoefficientAccumulator {
    pub fn new(delta: f64, alpha: f64, omega_c: f64) -> Self {
        Self { delta, alpha, omega_c, current: Tcl2Coefficients::default() }
    }

    pub fn current(&self) -> Tcl2Coefficients {
        self.current
    }

    pub fn advance_to(&mut self, t: f64) -> Result<Tcl2Coefficients> {
        if t < self.current.t {
            return Err(Error::Domain(format!("cannot move rates back from {} to {t}", self.current.t)));
        }
        let [gc, gs, lc, ls] = panel(self.current.t, t, self.delta, self.alpha, self.omega_c)?;
        let c = &mut self.current;
        c.t = t;
        c.gamma_cos += gc;
        c.gamma_sin += gs;
        c.lambda_cos += lc;
        c.lambda_sin += ls;
        Ok(*c)
    }
}

fn bloch_rhs(delta: f64, c: &Tcl2Coefficients, v: [f64; 3]) -> [f64; 3] {
    let [x, y, z] = v;
    [
        -4.0 * c.gamma_cos * x + 4.0 * c.lambda_sin,
        -2.0 * delta * z - 4.0 * c.gamma_cos * y - 4.0 * c.gamma_sin * z,
        2.0 * delta * y,
    ]
}

/// Fixed-step RK4 integration of the TCL2 Bloch equations from `bloch0`.
///
/// The state is never clamped: at strong coupling the Bloch vector may leave
/// the unit ball.
pub fn tcl2_propagate(
    delta: f64,
    alpha: f64,
    omega_c: f64,
    bloch0: [f64; 3],
    dt: f64,
    t_max: f64,
) -> Result<BlochTrajectory> {
    if !(dt > 0.0 && t_max >= dt && t_max.is_finite()) {
        return Err(Error::Config(format!("need 0 < dt <= t_max, got dt = {dt}, t_max = {t_max}")));
    }
    if !(alpha >= 0.0 && omega_c > 0.0 && delta > 0.0) {
        return Err(Error::Domain(format!(
            "need alpha >= 0, omega_c > 0, delta > 0, got {alpha}, {omega_c}, {delta}"
        )));
    }
    let len = bloch0.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len > 1.0 + 1e-12 {
        return Err(Error::Domain(format!("initial Bloch vector has length {len} > 1")));
    }
    let n = (t_max / dt).round() as usize + 1;
    let meta = TrajectoryMeta::new("tcl2")
        .with("alpha", alpha)
        .with("omega_c", omega_c)
        .with("delta", delta)
        .with("dt", dt)
        .with("t_max", t_max);
    let mut traj = BlochTrajectory::zeros(dt, n, meta);
    traj.set(0, bloch0);

    let mut rates = CoefficientAccumulator::new(delta, alpha, omega_c);
    let mut c0 = rates.current();
    let mut v = bloch0;
    for k in 1..n {
        let t0 = traj.t[k - 1];
        let c_half = rates.advance_to(t0 + 0.5 * dt)?;
        let c1 = rates.advance_to(traj.t[k])?;
        let k1 = bloch_rhs(delta, &c0, v);
        let k2 = bloch_rhs(delta, &c_half, add(v, k1, 0.5 * dt));
        let k3 = bloch_rhs(delta, &c_half, add(v, k2, 0.5 * dt));
        let k4 = bloch_rhs(delta, &c1, add(v, k3, dt));
        for i in 0..3 {
            v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite TCL2 state at t = {}", traj.t[k])));
        }
        traj.set(k, v);
        c0 = c1;
    }
    Ok(traj)
}

fn add(v: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [v[0] + h * k[0], v[1] + h * k[1], v[2] + h * k[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ohmic_j, OhmicSpectralDensity};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn correlation_at_origin_matches_spectral_integral() {
        assert_relative_eq!(bath_correlation(0.0, 0.1, 20.0).re, 20.0, epsilon = 1e-14);
        assert_eq!(bath_correlation(0.0, 0.1, 20.0).im, 0.0);
        // (1/π) ∫ J(ω) dω
        let sd = OhmicSpectralDensity::new(0.1, 20.0).unwrap();
        let q = quadrature::integrate(|w| ohmic_j(w, &sd).unwrap() / PI, 0.0, 2000.0, 1e-10);
        assert_relative_eq!(q.integral, 20.0, epsilon = 1e-8);
        // and at finite time, real and imaginary parts
        let t = 0.07;
        let re = quadrature::integrate(|w| ohmic_j(w, &sd).unwrap() * (w * t).cos() / PI, 0.0, 2000.0, 1e-10);
        let im = quadrature::integrate(|w| -ohmic_j(w, &sd).unwrap() * (w * t).sin() / PI, 0.0, 2000.0, 1e-10);
        let c = bath_correlation(t, 0.1, 20.0);
        assert!((c.re - re.integral).abs() < 1e-6 && (c.im - im.integral).abs() < 1e-6);
    }

    #[test]
    fn real_part_changes_sign_at_inverse_cutoff() {
        let wc = 20.0;
        assert!(bath_correlation(0.99 / wc, 0.1, wc).re > 0.0);
        assert!(bath_correlation(1.01 / wc, 0.1, wc).re < 0.0);
        assert!(bath_correlation(1.0 / wc, 0.1, wc).re.abs() < 1e-12);
        assert_eq!(bath_correlation(3.0, 0.0, wc), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn rates_vanish_at_origin_and_scale_with_alpha() {
        assert_eq!(tcl2_coefficients(0.0, 1.0, 0.1, 20.0).unwrap(), Tcl2Coefficients::default());
        let a = tcl2_coefficients(1.3, 1.0, 0.1, 20.0).unwrap();
        let b = tcl2_coefficients(1.3, 1.0, 0.2, 20.0).unwrap();
        assert_relative_eq!(b.gamma_cos, 2.0 * a.gamma_cos, max_relative = 1e-10);
        assert_relative_eq!(b.gamma_sin, 2.0 * a.gamma_sin, max_relative = 1e-10);
        assert_relative_eq!(b.lambda_cos, 2.0 * a.lambda_cos, max_relative = 1e-10);
        assert_relative_eq!(b.lambda_sin, 2.0 * a.lambda_sin, max_relative = 1e-10);
        assert!(tcl2_coefficients(-1.0, 1.0, 0.1, 20.0).is_err());
    }

    #[test]
    fn decay_rate_reaches_golden_rule_limit() {
        // J(2Δ)/2 = (π/4) α 2Δ e^{−2Δ/ωc}
        let c = tcl2_coefficients(400.0, 1.0, 0.1, 20.0).unwrap();
        let golden = 0.25 * PI * 0.1 * 2.0 * (-0.1f64).exp();
        assert_relative_eq!(golden, 0.142_131_529_259_746_36, max_relative = 1e-12);
        assert!((c.gamma_cos - golden).abs() < 1e-3, "{}", c.gamma_cos);
    }

    #[test]
    fn incremental_and_direct_rates_agree() {
        let mut acc = CoefficientAccumulator::new(1.0, 0.3, 20.0);
        for k in 1..=50 {
            acc.advance_to(0.1 * k as f64).unwrap();
        }
        let direct = tcl2_coefficients(5.0, 1.0, 0.3, 20.0).unwrap();
        let inc = acc.current();
        assert!((inc.gamma_cos - direct.gamma_cos).abs() < 1e-9);
        assert!((inc.gamma_sin - direct.gamma_sin).abs() < 1e-9);
        assert!((inc.lambda_cos - direct.lambda_cos).abs() < 1e-9);
        assert!((inc.lambda_sin - direct.lambda_sin).abs() < 1e-9);
        assert!(acc.advance_to(1.0).is_err());
    }

    #[test]
    fn free_spin() {
        let traj = tcl2_propagate(1.0, 0.0, 20.0, [0.0, 0.0, 1.0], 1e-3, 10.0).unwrap();
        for k in 0..traj.len() {
            let t = traj.t[k];
            assert!((traj.sz[k] - (2.0 * t).cos()).abs() < 1e-9);
            assert!((traj.sy[k] + (2.0 * t).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(tcl2_propagate(1.0, 0.1, 20.0, [0.0, 0.0, 1.1], 1e-3, 1.0).is_err());
        assert!(tcl2_propagate(1.0, 0.1, 20.0, [0.0, 0.0, 1.0], 0.0, 1.0).is_err());
    }

    type M2 = [[Complex64; 2]; 2];

    fn mul(a: &M2, b: &M2) -> M2 {
        let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    r[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        r
    }

    fn lin(terms: &[(Complex64, &M2)]) -> M2 {
        let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (c, m) in terms {
            for i in 0..2 {
                for j in 0..2 {
                    r[i][j] += c * m[i][j];
                }
            }
        }
        r
    }

    fn dagger(a: &M2) -> M2 {
        [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
    }

    /// Generator applied to the 2×2 density matrix with dense commutators.
    fn generator(delta: f64, c: &Tcl2Coefficients, rho: &M2) -> M2 {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let z = Complex64::new(0.0, 0.0);
        let sx: M2 = [[z, one], [one, z]];
        let sy: M2 = [[z, -i], [i, z]];
        let sz: M2 = [[one, z], [z, -one]];
        let kernel = lin(&[
            (Complex64::new(c.gamma_cos, c.lambda_cos), &sz),
            (-Complex64::new(c.gamma_sin, c.lambda_sin), &sy),
        ]);
        let kd = dagger(&kernel);
        let h = lin(&[(Complex64::new(delta, 0.0), &sx)]);
        let comm = |a: &M2, b: &M2| lin(&[(one, &mul(a, b)), (-one, &mul(b, a))]);
        let unitary = comm(&h, rho);
        let d1 = comm(&sz, &mul(&kernel, rho));
        let d2 = comm(&mul(rho, &kd), &sz);
        lin(&[(-i, &unitary), (-one, &d1), (-one, &d2)])
    }

    #[test]
    fn bloch_equations_match_operator_level_generator() {
        let (delta, alpha, wc, dt, t_max) = (1.0, 0.2, 20.0, 1e-3, 20.0);
        let bloch0 = [0.3, -0.4, 0.6];
        let traj = tcl2_propagate(delta, alpha, wc, bloch0, dt, t_max).unwrap();

        let half = Complex64::new(0.5, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut rho: M2 = [
            [half * (1.0 + bloch0[2]), half * Complex64::new(bloch0[0], -bloch0[1])],
            [half * Complex64::new(bloch0[0], bloch0[1]), half * (1.0 - bloch0[2])],
        ];
        let mut rates = CoefficientAccumulator::new(delta, alpha, wc);
        let mut c0 = rates.current();
        let mut worst: f64 = 0.0;
        for k in 1..traj.len() {
            let t0 = (k - 1) as f64 * dt;
            let ch = rates.advance_to(t0 + 0.5 * dt).unwrap();
            let c1 = rates.advance_to(k as f64 * dt).unwrap();
            let k1 = generator(delta, &c0, &rho);
            let k2 = generator(delta, &ch, &lin(&[(Complex64::new(1.0, 0.0), &rho), (Complex64::new(0.5 * dt, 0.0), &k1)]));
            let k3 = generator(delta, &ch, &lin(&[(Complex64::new(1.0, 0.0), &rho), (Complex64::new(0.5 * dt, 0.0), &k2)]));
            let k4 = generator(delta, &c1, &lin(&[(Complex64::new(1.0, 0.0), &rho), (Complex64::new(dt, 0.0), &k3)]));
            let w = Complex64::new(dt / 6.0, 0.0);
            let two = Complex64::new(2.0, 0.0);
            rho = lin(&[(Complex64::new(1.0, 0.0), &rho), (w, &k1), (w * two, &k2), (w * two, &k3), (w, &k4)]);
            c0 = c1;
            let x = 2.0 * rho[1][0].re;
            let y = 2.0 * rho[1][0].im;
            let z = (rho[0][0] - rho[1][1]).re;
            let b = traj.bloch(k);
            worst = worst.max((x - b[0]).abs()).max((y - b[1]).abs()).max((z - b[2]).abs());
            // trace and Hermiticity
            assert!(((rho[0][0] + rho[1][1]) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
            assert!((rho[0][1] - rho[1][0].conj()).norm() < 1e-12);
            let _ = i;
        }
        assert!(worst < 1e-6, "max deviation {worst:e}");
    }

    #[test]
    fn strong_coupling_leaves_the_bloch_ball() {
        let traj = tcl2_propagate(1.0, 0.3, 20.0, [0.0, 0.0, 1.0], 1e-3, 15.0).unwrap();
        let max_sz = traj.sz.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max_sz > 1.0, "max sz = {max_sz}");
        // the reconstructed ρ then has a negative eigenvalue (1 − |a|)/2
        assert!(traj.max_bloch_length() > 1.0);
    }
}
