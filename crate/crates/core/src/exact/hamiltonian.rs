use num_complex::Complex64;

use super::basis::{FockBasis, FockTruncation};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// Default cap on the joint (spin × bath) dimension.
pub const DEFAULT_MAX_JOINT_DIM: usize = 24_000_000;

/// A Hermitian operator applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y = A x`; `y` is overwritten.
    fn apply(&self, x: &[Complex64], y: &mut [Complex64]);
}

#[derive(Debug, Clone, Copy)]
struct Coupling {
    upper: u32,
    lower: u32,
    amp: f64,
}

/// Matrix-free action of
/// `H = Δσx + Σn ωn(an†an + 1/2) + σz Σn (cn/√(2ωn))(an + an†)`
/// restricted to the truncated sector.
///
/// Joint amplitudes are laid out as `[spin ↑ block | spin ↓ block]`, each block
/// indexed by the bath configuration of [`FockBasis`].
#[derive(Debug, Clone)]
pub struct SpinBosonHamiltonian {
    delta: f64,
    basis: FockBasis,
    diagonal: Vec<f64>,
    couplings: Vec<Coupling>,
}

impl SpinBosonHamiltonian {
    pub fn new(cfg: &ModelConfig, trunc: FockTruncation, max_joint_dim: usize) -> Result<Self> {
        let modes = &cfg.bath.modes;
        let basis = FockBasis::new(modes.len(), trunc, max_joint_dim / 2).map_err(|e| match e {
            Error::Resource { dim, .. } => Error::Resource { dim: 2 * dim, limit: max_joint_dim },
            other => other,
        })?;

        let zero_point: f64 = modes.iter().map(|m| 0.5 * m.omega).sum();
        let mut diagonal = vec![zero_point; basis.len()];
        for (i, d) in diagonal.iter_mut().enumerate() {
            *d += basis.modes_of(i).iter().map(|&m| modes[m].omega).sum::<f64>();
        }

        let ladder: Vec<f64> = modes.iter().map(|m| m.ladder_coupling()).collect();
        let couplings = basis
            .removals()
            .iter()
            .map(|r| Coupling {
                upper: r.upper,
                lower: r.lower,
                amp: ladder[r.mode as usize] * (r.occupation as f64).sqrt(),
            })
            .collect();

        Ok(Self { delta: cfg.delta, basis, diagonal, couplings })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bath_dim(&self) -> usize {
        self.basis.len()
    }

    /// Dense real matrix of the truncated Hamiltonian (row-major); only for small instances.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            x[j] = Complex64::new(1.0, 0.0);
            self.apply(&x, &mut y);
            cols.push(y.iter().map(|z| z.re).collect::<Vec<_>>());
            x[j] = Complex64::new(0.0, 0.0);
        }
        (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
    }
}

impl LinearOperator for SpinBosonHamiltonian {
    fn dim(&self) -> usize {
        2 * self.basis.len()
    }

    fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        let nb = self.basis.len();
        let (xu, xd) = x.split_at(nb);
        let (yu, yd) = y.split_at_mut(nb);
        for i in 0..nb {
            let d = self.diagonal[i];
            yu[i] = xu[i] * d + xd[i] * self.delta;
            yd[i] = xd[i] * d + xu[i] * self.delta;
        }
        for c in &self.couplings {
            let (j, i) = (c.upper as usize, c.lower as usize);
            yu[j] += xu[i] * c.amp;
            yu[i] += xu[j] * c.amp;
            yd[j] -= xd[i] * c.amp;
            yd[i] -= xd[j] * c.amp;
        }
    }
}

/// Builds the matrix-free Hamiltonian with the default dimension cap.
pub fn build_hamiltonian_action(
    cfg: &ModelConfig,
    trunc: &FockTruncation,
) -> Result<SpinBosonHamiltonian> {
    SpinBosonHamiltonian::new(cfg, *trunc, DEFAULT_MAX_JOINT_DIM)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BathMode, DiscretizedBath, OhmicSpectralDensity};

    fn one_mode(delta: f64, omega: f64, c: f64) -> ModelConfig {
        let bath = DiscretizedBath {
            modes: vec![BathMode { omega, c }],
            source: OhmicSpectralDensity::new(0.1, 1.0).unwrap(),
            omega_max: 2.0 * omega,
        };
        ModelConfig::new(delta, bath).unwrap()
    }

    #[test]
    fn single_mode_matches_hand_built_rabi_matrix() {
        let (delta, omega, c) = (0.7, 1.3, 0.9);
        let h = SpinBosonHamiltonian::new(
            &one_mode(delta, omega, c),
            FockTruncation::new(2, Some(2)).unwrap(),
            100,
        )
        .unwrap();
        assert_eq!(h.dim(), 6);
        let dense = h.to_dense();

        // hand-built: basis |s, n⟩ with s = ↑,↓ and n = 0,1,2, index = 3s + n
        let g = c / (2.0 * omega).sqrt();
        let mut expected = vec![vec![0.0; 6]; 6];
        for s in 0..2 {
            let sz = if s == 0 { 1.0 } else { -1.0 };
            for n in 0..3 {
                let i = 3 * s + n;
                expected[i][i] = omega * (n as f64 + 0.5);
                expected[i][3 * (1 - s) + n] = delta;
                if n < 2 {
                    let amp = sz * g * ((n + 1) as f64).sqrt();
                    expected[i][i + 1] = amp;
                    expected[i + 1][i] = amp;
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                assert!((dense[i][j] - expected[i][j]).abs() < 1e-14, "({i},{j})");
            }
        }
    }

    #[test]
    fn dense_form_is_symmetric() {
        let cfg = ModelConfig::ohmic(1.0, 0.3, 5.0, 4, 20.0).unwrap();
        let h = build_hamiltonian_action(&cfg, &FockTruncation::global(3)).unwrap();
        let dense = h.to_dense();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                assert!((dense[i][j] - dense[j][i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_coupling_leaves_spin_block() {
        let cfg = ModelConfig::ohmic(1.0, 0.0, 5.0, 3, 20.0).unwrap();
        let h = build_hamiltonian_action(&cfg, &FockTruncation::global(2)).unwrap();
        let dense = h.to_dense();
        let nb = h.bath_dim();
        for i in 0..h.dim() {
            for j in 0..h.dim() {
                let same_bath = i % nb == j % nb;
                if !same_bath {
                    assert_eq!(dense[i][j], 0.0);
                } else if i != j {
                    assert_eq!(dense[i][j], 1.0);
                }
            }
        }
    }

    #[test]
    fn oversized_basis_is_rejected() {
        let cfg = ModelConfig::ohmic(1.0, 0.1, 20.0, 300, 120.0).unwrap();
        let err = SpinBosonHamiltonian::new(&cfg, FockTruncation::global(4), 1_000_000).unwrap_err();
        assert!(matches!(err, Error::Resource { limit: 1_000_000, .. }));
    }
}
