//! Lanczos approximation of `exp(−iHτ) ψ` for Hermitian `H`.
//!
//! The Krylov basis does not depend on `τ`, so one basis serves every time in
//! `[0, h]`: the propagator picks the largest `h` whose a-posteriori error
//! estimate stays below the tolerance and evaluates intermediate times from the
//! same subspace.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::hamiltonian::LinearOperator;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

const LANES: usize = 4;

/// `Σ f(i)` over `0..n` with independent partial sums per lane, so reductions
/// are not serialized on one accumulator.
#[inline(always)]
fn lane_sum<const K: usize, F: FnMut(usize) -> [Complex64; K]>(n: usize, mut f: F) -> [Complex64; K] {
    let mut acc = [[ZERO; K]; LANES];
    let full = n / LANES * LANES;
    let mut i = 0;
    while i < full {
        for (l, lane) in acc.iter_mut().enumerate() {
            let v = f(i + l);
            for (a, x) in lane.iter_mut().zip(v) {
                *a += x;
            }
        }
        i += LANES;
    }
    let mut total = [ZERO; K];
    for lane in &acc {
        for (t, x) in total.iter_mut().zip(lane) {
            *t += x;
        }
    }
    for j in full..n {
        for (t, x) in total.iter_mut().zip(f(j)) {
            *t += x;
        }
    }
    total
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    lane_sum(n, |i| [a[i].conj() * b[i]])[0]
}

pub(crate) fn norm(a: &[Complex64]) -> f64 {
    lane_sum(a.len(), |i| [Complex64::new(a[i].norm_sqr(), 0.0)])[0].re.sqrt()
}

/// `w -= ca·a + cb·b`; returns `(a†w, b†w, ‖w‖²)` of the updated `w`.
fn subtract_and_project(
    w: &mut [Complex64],
    a: &[Complex64],
    ca: Complex64,
    b: Option<(&[Complex64], Complex64)>,
) -> (Complex64, Complex64, f64) {
    let n = w.len();
    let a = &a[..n];
    let [pa, pb, nn] = match b {
        Some((b, cb)) => {
            let b = &b[..n];
            lane_sum(n, |i| {
                let x = w[i] - (ca * a[i] + cb * b[i]);
                w[i] = x;
                [a[i].conj() * x, b[i].conj() * x, Complex64::new(x.norm_sqr(), 0.0)]
            })
        }
        None => lane_sum(n, |i| {
            let x = w[i] - ca * a[i];
            w[i] = x;
            [a[i].conj() * x, ZERO, Complex64::new(x.norm_sqr(), 0.0)]
        }),
    };
    (pa, pb, nn.re)
}

/// Orthonormal Lanczos basis with the projected tridiagonal matrix in
/// diagonalized form.
#[derive(Debug, Clone)]
pub struct LanczosBasis {
    vectors: Vec<Vec<Complex64>>,
    size: usize,
    start_norm: f64,
    /// Residual norm `β_k` coupling the subspace to the rest of the space.
    residual: f64,
    eigenvalues: Vec<f64>,
    /// First row of the eigenvector matrix of the tridiagonal projection, i.e. `Qᵀe₁`.
    first_row: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl LanczosBasis {
    pub fn new(max_dim: usize) -> Self {
        Self {
            vectors: Vec::with_capacity(max_dim),
            size: 0,
            start_norm: 0.0,
            residual: 0.0,
            eigenvalues: Vec::new(),
            first_row: Vec::new(),
            eigenvectors: DMatrix::zeros(0, 0),
        }
    }

    /// Runs at most `max_dim` Lanczos iterations from `start`. Storage of
    /// earlier builds is reused.
    pub fn build<A: LinearOperator + ?Sized>(
        &mut self,
        op: &A,
        start: &[Complex64],
        max_dim: usize,
    ) -> Result<()> {
        let n = op.dim();
        if start.len() != n {
            return Err(Error::Shape(format!("vector of length {} for operator of dimension {n}", start.len())));
        }
        let max_dim = max_dim.min(n).max(1);
        let start_norm = norm(start);
        if !start_norm.is_finite() {
            return Err(Error::Numerical("non-finite amplitudes in Krylov start vector".into()));
        }
        self.start_norm = start_norm;
        self.size = 0;
        self.residual = 0.0;
        if start_norm == 0.0 {
            self.set_projection(&[], &[]);
            return Ok(());
        }

        let mut alpha = Vec::with_capacity(max_dim);
        let mut beta: Vec<f64> = Vec::with_capacity(max_dim);
        self.ensure_vectors(max_dim, n);
        for (v, s) in self.vectors[0].iter_mut().zip(start) {
            *v = s / start_norm;
        }
        let mut w = vec![ZERO; n];
        for j in 0..max_dim {
            op.apply(&self.vectors[j], &mut w);
            let (done, rest) = self.vectors.split_at_mut(j + 1);
            let vj = done[j].as_slice();
            let prev = if j > 0 { Some(done[j - 1].as_slice()) } else { None };
            let a0 = dot(vj, &w).re;
            let beta_prev = if j > 0 { beta[j - 1] } else { 0.0 };
            // three-term recurrence; the projections that rounding leaves behind
            // are removed while forming the next vector
            let (mut pj, mut pp, nn) =
                subtract_and_project(&mut w, vj, Complex64::new(a0, 0.0), prev.map(|v| (v, Complex64::new(beta_prev, 0.0))));
            let mut b2 = nn - pj.norm_sqr() - pp.norm_sqr();
            let a = a0 + pj.re;
            if b2 <= 1e-8 * nn {
                // heavy cancellation: subtract explicitly and measure again
                b2 = subtract_and_project(&mut w, vj, pj, prev.map(|v| (v, pp))).2;
                pj = ZERO;
                pp = ZERO;
            }
            let b = b2.max(0.0).sqrt();
            alpha.push(a);
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::Numerical("non-finite value during Lanczos iteration".into()));
            }
            self.size = j + 1;
            let scale = alpha.iter().map(|x| x.abs()).fold(1.0, f64::max);
            if b <= 1e-14 * scale {
                // invariant subspace: the projection is exact
                self.residual = 0.0;
                break;
            }
            self.residual = b;
            if j + 1 == max_dim {
                break;
            }
            beta.push(b);
            let inv = 1.0 / b;
            let next = &mut rest[0];
            match prev {
                Some(pv) => {
                    for ((v, wk), (x, y)) in next.iter_mut().zip(&w).zip(vj.iter().zip(pv)) {
                        *v = (wk - pj * x - pp * y) * inv;
                    }
                }
                None => {
                    for ((v, wk), x) in next.iter_mut().zip(&w).zip(vj) {
                        *v = (wk - pj * x) * inv;
                    }
                }
            }
        }
        self.set_projection(&alpha, &beta[..self.size - 1]);
        Ok(())
    }

    fn ensure_vectors(&mut self, count: usize, n: usize) {
        while self.vectors.len() < count {
            self.vectors.push(vec![ZERO; n]);
        }
        for v in self.vectors.iter_mut().take(count) {
            if v.len() != n {
                v.clear();
                v.resize(n, ZERO);
            }
        }
    }

    fn set_projection(&mut self, alpha: &[f64], beta: &[f64]) {
        let k = alpha.len();
        if k == 0 {
            self.eigenvalues.clear();
            self.first_row.clear();
            self.eigenvectors = DMatrix::zeros(0, 0);
            return;
        }
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        self.eigenvalues = eig.eigenvalues.iter().copied().collect();
        self.first_row = (0..k).map(|l| eig.eigenvectors[(0, l)]).collect();
        self.eigenvectors = eig.eigenvectors;
    }

    /// Number of basis vectors in use.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors[..self.size]
    }

    pub fn is_invariant(&self) -> bool {
        self.residual == 0.0
    }

    /// `⟨ψ|H|ψ⟩` of the start vector, read off the projection.
    pub fn expectation(&self) -> f64 {
        let s2 = self.start_norm * self.start_norm;
        self.eigenvalues.iter().zip(&self.first_row).map(|(l, q)| l * q * q).sum::<f64>() * s2
    }

    /// Coefficients `c(τ)` with `exp(−iHτ) ψ ≈ Σi ci(τ) vi`.
    pub fn coefficients(&self, tau: f64) -> Vec<Complex64> {
        let k = self.size;
        let phases: Vec<Complex64> = self
            .eigenvalues
            .iter()
            .zip(&self.first_row)
            .map(|(&lam, &q0)| Complex64::from_polar(self.start_norm * q0, -lam * tau))
            .collect();
        (0..k)
            .map(|i| {
                (0..k).fold(ZERO, |acc, l| acc + phases[l] * self.eigenvectors[(i, l)])
            })
            .collect()
    }

    /// A-posteriori estimate `β_k |c_k(τ)|` of the error of the approximation at `τ`.
    pub fn error_estimate(&self, tau: f64) -> f64 {
        if self.size == 0 || self.residual == 0.0 {
            return 0.0;
        }
        self.residual * self.coefficients(tau)[self.size - 1].norm()
    }

    /// Writes `Σi ci vi` into `out`.
    pub fn combine(&self, coeffs: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        for (c, v) in coeffs.iter().zip(self.vectors()) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += c * x;
            }
        }
    }

    /// Largest `h ≤ h_max` whose error estimate is below `tol`, found by
    /// halving and a short bisection.
    pub fn admissible_step(&self, h_max: f64, tol: f64) -> Result<f64> {
        if self.error_estimate(h_max) <= tol {
            return Ok(h_max);
        }
        let mut hi = h_max;
        let mut lo = 0.5 * h_max;
        let mut halvings = 0;
        while self.error_estimate(lo) > tol {
            hi = lo;
            lo *= 0.5;
            halvings += 1;
            if halvings > 200 || lo == 0.0 {
                return Err(Error::Numerical(format!(
                    "Krylov step could not reach tolerance {tol:e}"
                )));
            }
        }
        for _ in 0..8 {
            let mid = 0.5 * (lo + hi);
            if self.error_estimate(mid) <= tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// Approximates `exp(−iH·dt) ψ` with an `m`-dimensional Lanczos subspace,
/// subdividing `dt` until every substep meets the local tolerance `tol`.
pub fn krylov_step<A: LinearOperator + ?Sized>(
    op: &A,
    psi: &[Complex64],
    dt: f64,
    m: usize,
    tol: f64,
) -> Result<Vec<Complex64>> {
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("time step must be >= 0, got {dt}")));
    }
    let mut state = psi.to_vec();
    if dt == 0.0 {
        return Ok(state);
    }
    let mut basis = LanczosBasis::new(m);
    let mut elapsed = 0.0;
    while elapsed < dt {
        basis.build(op, &state, m)?;
        let remaining = dt - elapsed;
        let h = basis.admissible_step(remaining, tol)?;
        let c = basis.coefficients(h);
        basis.combine(&c, &mut state);
        if state.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical("non-finite amplitudes after Krylov step".into()));
        }
        elapsed = if h >= remaining { dt } else { elapsed + h };
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(Vec<Vec<f64>>);

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
            for (i, row) in self.0.iter().enumerate() {
                y[i] = row.iter().zip(x).fold(ZERO, |acc, (a, b)| acc + b * *a);
            }
        }
    }

    fn dense_expm_apply(h: &[Vec<f64>], psi: &[Complex64], t: f64) -> Vec<Complex64> {
        let n = h.len();
        let m = DMatrix::from_fn(n, n, |i, j| h[i][j]);
        let eig = SymmetricEigen::new(m);
        let q = &eig.eigenvectors;
        (0..n)
            .map(|i| {
                (0..n).fold(ZERO, |acc, l| {
                    let proj = (0..n).fold(ZERO, |a, j| a + psi[j] * q[(j, l)]);
                    acc + q[(i, l)] * proj * Complex64::from_polar(1.0, -eig.eigenvalues[l] * t)
                })
            })
            .collect()
    }

    fn random_symmetric(n: usize, seed: u64) -> Vec<Vec<f64>> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0) * if i == j { 5.0 } else { 1.0 };
                h[i][j] = v;
                h[j][i] = v;
            }
        }
        h
    }

    #[test]
    fn zero_step_is_identity() {
        let h = Dense(random_symmetric(5, 1));
        let psi: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0)).collect();
        assert_eq!(krylov_step(&h, &psi, 0.0, 4, 1e-10).unwrap(), psi);
    }

    #[test]
    fn matches_dense_exponential() {
        let h = random_symmetric(40, 7);
        let mut psi = vec![ZERO; 40];
        psi[3] = Complex64::new(0.6, 0.0);
        psi[11] = Complex64::new(0.0, 0.8);
        let got = krylov_step(&Dense(h.clone()), &psi, 1.7, 12, 1e-12).unwrap();
        let want = dense_expm_apply(&h, &psi, 1.7);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-9, "{g} vs {w}");
        }
        assert!((norm(&got) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn free_spin_precession() {
        let delta = 1.3;
        let h = Dense(vec![vec![0.0, delta], vec![delta, 0.0]]);
        let psi = vec![Complex64::new(1.0, 0.0), ZERO];
        for dt in [0.01, 0.4, 3.0] {
            let out = krylov_step(&h, &psi, dt, 20, 1e-12).unwrap();
            let sz = out[0].norm_sqr() - out[1].norm_sqr();
            assert!((sz - (2.0 * delta * dt).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_subspace_is_detected() {
        let h = Dense(vec![vec![1.0, 0.5, 0.0], vec![0.5, -1.0, 0.0], vec![0.0, 0.0, 3.0]]);
        let mut basis = LanczosBasis::new(3);
        basis.build(&h, &[Complex64::new(1.0, 0.0), ZERO, ZERO], 3).unwrap();
        assert_eq!(basis.size(), 2);
        assert!(basis.is_invariant());
        assert_eq!(basis.error_estimate(100.0), 0.0);
    }

    #[test]
    fn error_estimate_grows_with_time() {
        let h = Dense(random_symmetric(60, 3));
        let mut psi = vec![ZERO; 60];
        psi[0] = Complex64::new(1.0, 0.0);
        let mut basis = LanczosBasis::new(8);
        basis.build(&h, &psi, 8).unwrap();
        let h_ok = basis.admissible_step(10.0, 1e-10).unwrap();
        assert!(h_ok < 10.0);
        assert!(basis.error_estimate(h_ok) <= 1e-10);
        assert!(basis.error_estimate(4.0 * h_ok) > 1e-10);
    }

    #[test]
    fn rejects_non_finite_start() {
        let h = Dense(random_symmetric(4, 2));
        let psi = vec![Complex64::new(f64::NAN, 0.0), ZERO, ZERO, ZERO];
        assert!(matches!(krylov_step(&h, &psi, 0.1, 4, 1e-10), Err(Error::Numerical(_))));
    }
}
