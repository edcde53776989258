//! Spin-boson model ingredients: the Ohmic spectral density and its
//! equidistant discretization into a finite set of bath modes.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Ohmic spectral density with exponential cutoff,
/// `J(ω) = (π/2) α ω exp(−ω/ωc)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicSpectralDensity {
    pub alpha: f64,
    pub omega_c: f64,
}

impl OhmicSpectralDensity {
    pub fn new(alpha: f64, omega_c: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("coupling alpha must be >= 0, got {alpha}")));
        }
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::Domain(format!("omega_c must be > 0, got {omega_c}")));
        }
        Ok(Self { alpha, omega_c })
    }

    /// Evaluates `J(ω)`.
    pub fn j(&self, omega: f64) -> Result<f64> {
        ohmic_j(omega, self)
    }

    /// Discretization cutoff used when none is given explicitly.
    pub fn default_omega_max(&self) -> f64 {
        6.0 * self.omega_c
    }
}

pub fn ohmic_j(omega: f64, sd: &OhmicSpectralDensity) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!(
            "spectral density needs omega >= 0, got {omega}"
        )));
    }
    Ok(0.5 * PI * sd.alpha * omega * (-omega / sd.omega_c).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathMode {
    pub omega: f64,
    /// Mass-weighted coupling coefficient `cn`.
    pub c: f64,
}

impl BathMode {
    /// Coefficient of `(an + an†)` in the ladder-operator form, `cn / sqrt(2ωn)`.
    pub fn ladder_coupling(&self) -> f64 {
        self.c / (2.0 * self.omega).sqrt()
    }
}

/// A finite bath standing in for the continuum.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedBath {
    pub modes: Vec<BathMode>,
    pub source: OhmicSpectralDensity,
    pub omega_max: f64,
}

impl DiscretizedBath {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.omega_max / self.modes.len() as f64
    }

    /// Time at which the discrete bath correlation function first revives.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }

    /// Returns the bath with every coupling multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| BathMode { omega: m.omega, c: m.c * factor })
            .collect();
        Self { modes, ..self.clone() }
    }
}

/// Midpoint discretization on `n_modes` equidistant frequencies in `(0, omega_max)`.
///
/// `ωn = (n − 1/2) Δω` and `cn² = (2/π) J(ωn) ωn Δω`, so that
/// `Σn (π/2)(cn²/ωn) f(ωn)` is the midpoint rule for `∫ J(ω) f(ω) dω`.
pub fn discretize_bath(
    sd: &OhmicSpectralDensity,
    n_modes: usize,
    omega_max: f64,
) -> Result<DiscretizedBath> {
    if n_modes == 0 {
        return Err(Error::Config("bath needs at least one mode".into()));
    }
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Error::Config(format!("omega_max must be > 0, got {omega_max}")));
    }
    let d_omega = omega_max / n_modes as f64;
    let modes = (0..n_modes)
        .map(|n| {
            let omega = (n as f64 + 0.5) * d_omega;
            let j = ohmic_j(omega, sd)?;
            Ok(BathMode { omega, c: (2.0 / PI * j * omega * d_omega).sqrt() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscretizedBath { modes, source: *sd, omega_max })
}

/// `Σn cn²/ωn²`; tends to `α ωc (1 − exp(−ω_max/ωc))` in the continuum limit.
pub fn reorganization_sum(bath: &DiscretizedBath) -> f64 {
    bath.modes.iter().map(|m| (m.c / m.omega).powi(2)).sum()
}

/// Spin tunneling `Δ` together with the bath it couples to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub delta: f64,
    pub bath: DiscretizedBath,
}

impl ModelConfig {
    pub fn new(delta: f64, bath: DiscretizedBath) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be >= 0, got {delta}")));
        }
        Ok(Self { delta, bath })
    }

    /// Ohmic model discretized with `n_modes` modes up to `omega_max`.
    pub fn ohmic(
        delta: f64,
        alpha: f64,
        omega_c: f64,
        n_modes: usize,
        omega_max: f64,
    ) -> Result<Self> {
        let sd = OhmicSpectralDensity::new(alpha, omega_c)?;
        Self::new(delta, discretize_bath(&sd, n_modes, omega_max)?)
    }
}
