use num_complex::Complex64;

use super::basis::{FockBasis, FockTruncation};
use super::hamiltonian::{LinearOperator, SpinBosonHamiltonian, DEFAULT_MAX_JOINT_DIM};
use super::krylov::{norm, LanczosBasis};
use crate::error::{Error, Result};
use crate::measure::{BlochTrajectory, TrajectoryMeta};
use crate::model::ModelConfig;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    /// Output spacing of the trajectory.
    pub dt: f64,
    pub t_max: f64,
    pub krylov_dim: usize,
    /// Local error tolerance of one Krylov step.
    pub krylov_tol: f64,
}

impl PropagatorConfig {
    pub const DEFAULT_KRYLOV_DIM: usize = 20;
    pub const DEFAULT_KRYLOV_TOL: f64 = 1e-10;

    pub fn new(dt: f64, t_max: f64) -> Result<Self> {
        Self { dt, t_max, krylov_dim: Self::DEFAULT_KRYLOV_DIM, krylov_tol: Self::DEFAULT_KRYLOV_TOL }
            .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt && self.t_max.is_finite()) {
            return Err(Error::Config(format!("t_max must be >= dt, got {}", self.t_max)));
        }
        if self.krylov_dim < 2 {
            return Err(Error::Config(format!("krylov_dim must be >= 2, got {}", self.krylov_dim)));
        }
        if !(self.krylov_tol > 0.0) {
            return Err(Error::Config(format!("krylov_tol must be > 0, got {}", self.krylov_tol)));
        }
        Ok(self)
    }

    /// Number of output samples `t_k = k·dt`, `k = 0..=round(t_max/dt)`.
    pub fn n_samples(&self) -> usize {
        (self.t_max / self.dt).round() as usize + 1
    }
}

/// Joint spin ⊗ bath wavefunction, `[↑ block | ↓ block]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub amplitudes: Vec<Complex64>,
    pub n_bath: usize,
}

impl JointState {
    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of the reduced spin state.
    pub fn bloch(&self) -> [f64; 3] {
        bloch_of(&self.amplitudes, self.n_bath)
    }
}

fn bloch_of(psi: &[Complex64], n_bath: usize) -> [f64; 3] {
    let (up, down) = psi.split_at(n_bath);
    let mut overlap = ZERO;
    let mut sz = 0.0;
    for (u, d) in up.iter().zip(down) {
        overlap += u.conj() * d;
        sz += u.norm_sqr() - d.norm_sqr();
    }
    [2.0 * overlap.re, 2.0 * overlap.im, sz]
}

/// Spin `↑` or `↓` times the bath vacuum.
pub fn initial_state(spin_up: bool, basis: &FockBasis) -> JointState {
    let n_bath = basis.len();
    let mut amplitudes = vec![ZERO; 2 * n_bath];
    let offset = if spin_up { 0 } else { n_bath };
    amplitudes[offset + basis.vacuum_index()] = Complex64::new(1.0, 0.0);
    JointState { amplitudes, n_bath }
}

/// Trajectory plus unitarity diagnostics of one propagation.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub trajectory: BlochTrajectory,
    /// Largest `|‖ψ‖ − 1|` seen at step boundaries.
    pub max_norm_error: f64,
    /// Largest `|⟨H⟩(t) − ⟨H⟩(0)|` seen at step boundaries.
    pub max_energy_drift: f64,
    pub krylov_steps: usize,
}

/// Propagates the spin from `↑` (or `↓`) with the bath in its vacuum.
pub fn propagate(
    cfg: &ModelConfig,
    trunc: &FockTruncation,
    pcfg: &PropagatorConfig,
    spin_up: bool,
) -> Result<BlochTrajectory> {
    let h = SpinBosonHamiltonian::new(cfg, *trunc, DEFAULT_MAX_JOINT_DIM)?;
    let meta = trajectory_meta(cfg, trunc, pcfg);
    Ok(propagate_with(&h, pcfg, spin_up, meta)?.trajectory)
}

pub fn trajectory_meta(cfg: &ModelConfig, trunc: &FockTruncation, pcfg: &PropagatorConfig) -> TrajectoryMeta {
    TrajectoryMeta::new("exact")
        .with("alpha", cfg.bath.source.alpha)
        .with("omega_c", cfg.bath.source.omega_c)
        .with("delta", cfg.delta)
        .with("n_modes", cfg.bath.len())
        .with("omega_max", cfg.bath.omega_max)
        .with("n_exc", trunc.max_excitations)
        .with("dt", pcfg.dt)
        .with("t_max", pcfg.t_max)
        .with("krylov_dim", pcfg.krylov_dim)
}

/// Propagation with a prebuilt Hamiltonian.
///
/// Each Krylov subspace is stretched over as many output times as its error
/// estimate allows; observables at those times come straight from the subspace.
pub fn propagate_with(
    h: &SpinBosonHamiltonian,
    pcfg: &PropagatorConfig,
    spin_up: bool,
    meta: TrajectoryMeta,
) -> Result<Propagation> {
    let pcfg = pcfg.validated()?;
    let n_out = pcfg.n_samples();
    let mut traj = BlochTrajectory::zeros(pcfg.dt, n_out, meta);
    let state = initial_state(spin_up, h.basis());
    let n_bath = state.n_bath;
    let mut psi = state.amplitudes;
    traj.set(0, bloch_of(&psi, n_bath));

    let t_end = traj.t[n_out - 1];
    let mut lanczos = LanczosBasis::new(pcfg.krylov_dim);
    let mut t_now = 0.0;
    let mut next = 1;
    let mut energy0 = None;
    let mut max_norm_error: f64 = 0.0;
    let mut max_energy_drift: f64 = 0.0;
    let mut steps = 0;

    while next < n_out {
        lanczos.build(h, &psi, pcfg.krylov_dim)?;
        let energy = lanczos.expectation();
        let e0 = *energy0.get_or_insert(energy);
        max_energy_drift = max_energy_drift.max((energy - e0).abs());
        max_norm_error = max_norm_error.max((norm(&psi) - 1.0).abs());

        let remaining = t_end - t_now;
        let step = lanczos.admissible_step(remaining, pcfg.krylov_tol)?;
        let t_step = if step >= remaining { t_end } else { t_now + step };

        let mut covered = next;
        while covered < n_out && traj.t[covered] <= t_step + 1e-12 * t_end.max(1.0) {
            covered += 1;
        }
        let taus: Vec<f64> = (next..covered).map(|k| traj.t[k] - t_now).collect();
        let observed = advance_in_subspace(&lanczos, &taus, t_step - t_now, n_bath, &mut psi);
        for (k, b) in (next..covered).zip(observed) {
            traj.set(k, b);
        }
        next = covered;
        if psi.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical(format!("non-finite amplitudes at t = {t_step}")));
        }
        t_now = t_step;
        steps += 1;
    }
    max_norm_error = max_norm_error.max((norm(&psi) - 1.0).abs());
    if max_norm_error > 1e-6 {
        return Err(Error::Numerical(format!("norm drifted by {max_norm_error:e}")));
    }
    Ok(Propagation { trajectory: traj, max_norm_error, max_energy_drift, krylov_steps: steps })
}

/// Bath configurations per cache block when sweeping the Krylov vectors.
const BLOCK: usize = 256;

/// Bloch vectors of `exp(−iHτ)ψ` at each of `taus`, then `ψ ← exp(−iH·final_tau)ψ`,
/// all within the current Krylov subspace and in one blocked sweep over its vectors.
///
/// With `ψ(τ) = Σj cj(τ) vj`, the observables are either read off the rebuilt
/// blocks of `ψ(τ)` (`k` multiply-adds per entry and time) or from the spin-block
/// overlaps `⟨σz⟩ = c†(Guu − Gdd)c`, `ψ↑†ψ↓ = c†Gud c` (about `k²` per entry
/// for all times together), whichever is cheaper.
fn advance_in_subspace(
    lanczos: &LanczosBasis,
    taus: &[f64],
    final_tau: f64,
    n_bath: usize,
    psi: &mut [Complex64],
) -> Vec<[f64; 3]> {
    let k = lanczos.size();
    let vs = lanczos.vectors();
    let coeffs: Vec<Vec<Complex64>> = taus.iter().map(|&tau| lanczos.coefficients(tau)).collect();
    let final_c = lanczos.coefficients(final_tau);
    let use_overlaps = 4 * taus.len() > 3 * k;

    let mut overlap = vec![ZERO; taus.len()];
    let mut sz = vec![0.0; taus.len()];
    let mut z = vec![ZERO; k * k];
    let mut g_ud = vec![ZERO; k * k];
    let mut bu = [ZERO; BLOCK];
    let mut bd = [ZERO; BLOCK];
    for lo in (0..n_bath).step_by(BLOCK) {
        let hi = (lo + BLOCK).min(n_bath);
        let len = hi - lo;
        if use_overlaps {
            for i in 0..k {
                let (ui, di) = (&vs[i][lo..hi], &vs[i][n_bath + lo..n_bath + hi]);
                for j in 0..k {
                    let (uj, dj) = (&vs[j][lo..hi], &vs[j][n_bath + lo..n_bath + hi]);
                    g_ud[i * k + j] += block_dot(ui, dj);
                    if j >= i {
                        z[i * k + j] += block_dot(ui, uj) - block_dot(di, dj);
                    }
                }
            }
        } else {
            for (m, c) in coeffs.iter().enumerate() {
                rebuild_block(c, vs, lo, hi, n_bath, &mut bu[..len], &mut bd[..len]);
                let mut o = ZERO;
                let mut s = 0.0;
                for (u, d) in bu[..len].iter().zip(&bd[..len]) {
                    o += u.conj() * d;
                    s += u.norm_sqr() - d.norm_sqr();
                }
                overlap[m] += o;
                sz[m] += s;
            }
        }
        rebuild_block(&final_c, vs, lo, hi, n_bath, &mut bu[..len], &mut bd[..len]);
        psi[lo..hi].copy_from_slice(&bu[..len]);
        psi[n_bath + lo..n_bath + hi].copy_from_slice(&bd[..len]);
    }

    if use_overlaps {
        for i in 0..k {
            for j in 0..i {
                z[i * k + j] = z[j * k + i].conj();
            }
        }
        for (m, c) in coeffs.iter().enumerate() {
            for i in 0..k {
                let mut zc = ZERO;
                let mut gc = ZERO;
                for j in 0..k {
                    zc += z[i * k + j] * c[j];
                    gc += g_ud[i * k + j] * c[j];
                }
                sz[m] += (c[i].conj() * zc).re;
                overlap[m] += c[i].conj() * gc;
            }
        }
    }
    overlap.iter().zip(&sz).map(|(o, &s)| [2.0 * o.re, 2.0 * o.im, s]).collect()
}

fn block_dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

fn rebuild_block(
    c: &[Complex64],
    vs: &[Vec<Complex64>],
    lo: usize,
    hi: usize,
    n_bath: usize,
    bu: &mut [Complex64],
    bd: &mut [Complex64],
) {
    bu.fill(ZERO);
    bd.fill(ZERO);
    for (cj, v) in c.iter().zip(vs) {
        for (o, x) in bu.iter_mut().zip(&v[lo..hi]) {
            *o += cj * x;
        }
        for (o, x) in bd.iter_mut().zip(&v[n_bath + lo..n_bath + hi]) {
            *o += cj * x;
        }
    }
}

/// `⟨ψ|H|ψ⟩`.
pub fn energy_expectation(h: &SpinBosonHamiltonian, state: &JointState) -> f64 {
    let mut y = vec![ZERO; state.amplitudes.len()];
    h.apply(&state.amplitudes, &mut y);
    state.amplitudes.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
}
