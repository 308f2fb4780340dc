//! Truncated symmetric Fock space over a finite mode basis.
//!
//! Each mode `m` carries its own ladder pair `b_m = sqrt(eps) a_m` with
//! `[b_m, b_m*] = eps` on every occupation level below the truncation. The
//! continuum operators are recovered through Riemann cells:
//! `a_eps(f) = sum_m conj(f(k_m)) sqrt(c_m) b_m` and `a_eps(k_m) = b_m / sqrt(c_m)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the dense tensor dimension.
pub const DEFAULT_BUDGET: usize = 1 << 22;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub k: [f64; 3],
    pub cell: f64,
    pub polarization: Option<u8>,
}

impl Mode {
    pub fn k_norm(&self) -> f64 {
        norm3(&self.k)
    }
}

pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Finite discretization of the one-excitation space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeBasis {
    modes: Vec<Mode>,
    dim: usize,
}

impl ModeBasis {
    pub fn new(modes: Vec<Mode>, dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in 1..=3")));
        }
        for (i, m) in modes.iter().enumerate() {
            if !(m.cell > 0.0 && m.cell.is_finite()) {
                return Err(Error::InvalidParameter(format!("mode {i}: cell measure {} not positive", m.cell)));
            }
            if let Some(p) = m.polarization {
                if !(p == 1 || p == 2) {
                    return Err(Error::InvalidParameter(format!("mode {i}: polarization {p}")));
                }
            }
            if m.k.iter().skip(dim).any(|&c| c != 0.0) {
                return Err(Error::InvalidParameter(format!("mode {i}: k has components beyond dimension {dim}")));
            }
        }
        let mut seen = std::collections::HashMap::with_capacity(modes.len());
        for (i, m) in modes.iter().enumerate() {
            // -0.0 and 0.0 are the same wavevector
            let key = (m.k.map(|c| (c + 0.0).to_bits()), m.polarization);
            if let Some(j) = seen.insert(key, i) {
                return Err(Error::InvalidParameter(format!("modes {j} and {i} share k and polarization")));
            }
        }
        Ok(Self { modes, dim })
    }

    /// Midpoint cells of a uniform grid on `[-half_width, half_width]^dim`.
    ///
    /// A cell centred at the origin (odd `n_per_axis`) is dropped so that
    /// massless dispersions stay finite. With `polarized`, every k-point is
    /// duplicated for polarizations 1 and 2.
    pub fn uniform(dim: usize, n_per_axis: usize, half_width: f64, polarized: bool) -> Result<Self> {
        if n_per_axis == 0 || !(half_width > 0.0) {
            return Err(Error::InvalidParameter("empty uniform grid".into()));
        }
        let h = 2.0 * half_width / n_per_axis as f64;
        let cell = h.powi(dim as i32);
        let coord = |i: usize| -half_width + (i as f64 + 0.5) * h;
        let mut modes = Vec::new();
        for idx in MultiIndex::new(&vec![n_per_axis; dim]) {
            let mut k = [0.0; 3];
            for (a, &i) in idx.iter().enumerate() {
                k[a] = coord(i);
            }
            if norm3(&k) < 1e-12 * half_width {
                continue;
            }
            push_polarized(&mut modes, k, cell, polarized);
        }
        Self::new(modes, dim)
    }

    /// Reciprocal lattice `2 pi n / box_len` with `0 < max|n_a| <= max_index`.
    ///
    /// Plane waves on this lattice are periodic on the particle box, so spectral
    /// derivatives of fields built from these modes are exact.
    pub fn lattice(dim: usize, box_len: f64, max_index: i64, polarized: bool) -> Result<Self> {
        if max_index < 1 || !(box_len > 0.0) {
            return Err(Error::InvalidParameter("empty lattice".into()));
        }
        let dk = 2.0 * std::f64::consts::PI / box_len;
        let cell = dk.powi(dim as i32);
        let side = (2 * max_index + 1) as usize;
        let mut modes = Vec::new();
        for idx in MultiIndex::new(&vec![side; dim]) {
            let mut k = [0.0; 3];
            let mut zero = true;
            for (a, &i) in idx.iter().enumerate() {
                let n = i as i64 - max_index;
                zero &= n == 0;
                k[a] = n as f64 * dk;
            }
            if zero {
                continue;
            }
            push_polarized(&mut modes, k, cell, polarized);
        }
        Self::new(modes, dim)
    }

    /// Keep only modes with `|k| <= radius`.
    pub fn restrict_to_ball(self, radius: f64) -> Result<Self> {
        let dim = self.dim;
        let modes = self.modes.into_iter().filter(|m| m.k_norm() <= radius).collect();
        Self::new(modes, dim)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_polarized(&self) -> bool {
        self.modes.iter().any(|m| m.polarization.is_some())
    }

    pub fn cells(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.cell).collect()
    }

    pub fn total_measure(&self) -> f64 {
        self.modes.iter().map(|m| m.cell).sum()
    }

    /// Largest `|k|` on the grid.
    pub fn k_max(&self) -> f64 {
        self.modes.iter().map(Mode::k_norm).fold(0.0, f64::max)
    }

    /// Grid inner product `sum_m c_m conj(f_m) g_m`.
    pub fn inner(&self, f: &[C64], g: &[C64]) -> C64 {
        self.modes.iter().zip(f.iter().zip(g)).map(|(m, (a, b))| m.cell * a.conj() * b).sum()
    }

    pub fn norm_sq(&self, f: &[C64]) -> f64 {
        self.modes.iter().zip(f).map(|(m, a)| m.cell * a.norm_sqr()).sum()
    }

    /// Sample a function of `(k, polarization)` on the basis.
    pub fn sample<F: Fn(&[f64; 3], Option<u8>) -> C64>(&self, f: F) -> Vec<C64> {
        self.modes.iter().map(|m| f(&m.k, m.polarization)).collect()
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.len() {
            return Err(Error::Shape(format!("{what}: length {len}, basis has {} modes", self.len())));
        }
        Ok(())
    }
}

fn push_polarized(modes: &mut Vec<Mode>, k: [f64; 3], cell: f64, polarized: bool) {
    if polarized {
        for p in [1, 2] {
            modes.push(Mode { k, cell, polarization: Some(p) });
        }
    } else {
        modes.push(Mode { k, cell, polarization: None });
    }
}

/// Field dispersion relation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dispersion {
    Massless,
    Massive { mass: f64 },
}

impl Dispersion {
    pub fn omega(&self, k: &[f64; 3]) -> f64 {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        match *self {
            Dispersion::Massless => k2.sqrt(),
            Dispersion::Massive { mass } => (k2 + mass * mass).sqrt(),
        }
    }

    pub fn power(&self, k: &[f64; 3], alpha: f64) -> f64 {
        self.omega(k).powf(alpha)
    }

    pub fn sample(&self, basis: &ModeBasis) -> Vec<f64> {
        basis.modes().iter().map(|m| self.omega(&m.k)).collect()
    }

    /// Grid proxy for linear growth: `min omega(k)/|k|` over the outer half of
    /// the grid, together with `min omega` over the whole grid.
    pub fn growth_check(&self, basis: &ModeBasis) -> (f64, f64) {
        let kmax = basis.k_max();
        let mut ratio = f64::INFINITY;
        let mut min_omega = f64::INFINITY;
        for m in basis.modes() {
            let w = self.omega(&m.k);
            min_omega = min_omega.min(w);
            let kn = m.k_norm();
            if kn >= 0.5 * kmax && kn > 0.0 {
                ratio = ratio.min(w / kn);
            }
        }
        (ratio, min_omega)
    }
}

/// Per-mode occupation cutoffs and the semiclassical parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockTruncation {
    per_mode_max: Vec<usize>,
    epsilon: f64,
}

impl FockTruncation {
    pub fn new(per_mode_max: Vec<usize>, epsilon: f64) -> Result<Self> {
        Self::with_budget(per_mode_max, epsilon, DEFAULT_BUDGET)
    }

    pub fn with_budget(per_mode_max: Vec<usize>, epsilon: f64, budget: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon {epsilon} not in (0,1)")));
        }
        let mut dim: usize = 1;
        for &n in &per_mode_max {
            dim = dim.checked_mul(n + 1).ok_or(Error::BudgetExceeded { dim: usize::MAX, budget })?;
        }
        if dim > budget {
            return Err(Error::BudgetExceeded { dim, budget });
        }
        Ok(Self { per_mode_max, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn per_mode_max(&self) -> &[usize] {
        &self.per_mode_max
    }

    pub fn n_modes(&self) -> usize {
        self.per_mode_max.len()
    }

    pub fn dimension(&self) -> usize {
        self.per_mode_max.iter().map(|n| n + 1).product()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.per_mode_max.len()];
        for m in (0..self.per_mode_max.len().saturating_sub(1)).rev() {
            s[m] = s[m + 1] * (self.per_mode_max[m + 1] + 1);
        }
        s
    }
}

/// Smallest `n` with `P(N > n) <= tol` for `N ~ Poisson(lambda)`.
pub fn poisson_cutoff(lambda: f64, tol: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    // pmf recursion in log space stays finite for large lambda
    let mut log_p = -lambda;
    let mut cdf = log_p.exp();
    let mut n = 0usize;
    while 1.0 - cdf > tol {
        n += 1;
        log_p += lambda.ln() - (n as f64).ln();
        cdf += log_p.exp();
        if n > 100_000 {
            break;
        }
        // past the mode, bound the remaining tail by a geometric series
        if n as f64 > lambda {
            let r = lambda / (n as f64 + 1.0);
            let tail = log_p.exp() * r / (1.0 - r);
            if tail <= tol {
                break;
            }
        }
    }
    n
}

/// Dense coefficient tensor indexed by per-mode occupation numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    coeffs: Vec<C64>,
    truncation: FockTruncation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Symbol of a second-quantized one-body operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DGammaSymbol {
    One,
    Omega,
    OmegaSq,
}

impl FockState {
    /// Normalized state; fails if the norm deviates from 1 by more than 1e-12.
    pub fn new(coeffs: Vec<C64>, truncation: FockTruncation) -> Result<Self> {
        let s = Self::unnormalized(coeffs, truncation)?;
        let n = s.norm_sq();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("state norm^2 {n} is not 1")));
        }
        Ok(s)
    }

    pub fn unnormalized(coeffs: Vec<C64>, truncation: FockTruncation) -> Result<Self> {
        if coeffs.len() != truncation.dimension() {
            return Err(Error::Shape(format!(
                "coefficient length {} vs truncation dimension {}",
                coeffs.len(),
                truncation.dimension()
            )));
        }
        Ok(Self { coeffs, truncation })
    }

    pub fn vacuum(truncation: FockTruncation) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); truncation.dimension()];
        coeffs[0] = C64::new(1.0, 0.0);
        Self { coeffs, truncation }
    }

    /// Tensor product of single-mode coefficient vectors.
    pub fn product(factors: &[Vec<C64>], epsilon: f64) -> Result<Self> {
        let maxes = factors.iter().map(|f| f.len().saturating_sub(1)).collect();
        let truncation = FockTruncation::new(maxes, epsilon)?;
        let mut coeffs = vec![C64::new(1.0, 0.0)];
        for f in factors {
            let mut next = Vec::with_capacity(coeffs.len() * f.len());
            for c in &coeffs {
                for x in f {
                    next.push(c * x);
                }
            }
            coeffs = next;
        }
        Ok(Self { coeffs, truncation })
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn truncation(&self) -> &FockTruncation {
        &self.truncation
    }

    pub fn epsilon(&self) -> f64 {
        self.truncation.epsilon
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &FockState) -> C64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scaled(mut self, s: C64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
        self
    }

    pub fn normalized(self) -> Self {
        let n = self.norm_sq().sqrt();
        self.scaled(C64::new(1.0 / n, 0.0))
    }

    pub fn add_assign_scaled(&mut self, other: &FockState, s: C64) -> Result<()> {
        if other.truncation.per_mode_max != self.truncation.per_mode_max {
            return Err(Error::Shape("truncations differ".into()));
        }
        self.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += s * b);
        Ok(())
    }

    /// Occupation numbers of a flat index.
    pub fn occupations(&self, flat: usize) -> Vec<usize> {
        let strides = self.truncation.strides();
        strides
            .iter()
            .zip(&self.truncation.per_mode_max)
            .map(|(s, n)| (flat / s) % (n + 1))
            .collect()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.truncation.n_modes() {
            return Err(Error::InvalidMode { index: mode, len: self.truncation.n_modes() });
        }
        Ok(())
    }

    /// Apply `b_mode` or `b_mode*` (scaled by `sqrt(eps)`); creation out of the
    /// top level truncates to zero. The result is not normalized.
    pub fn ladder_apply(&self, mode: usize, kind: Ladder) -> Result<FockState> {
        self.check_mode(mode)?;
        let strides = self.truncation.strides();
        let stride = strides[mode];
        let nmax = self.truncation.per_mode_max[mode];
        let se = self.truncation.epsilon.sqrt();
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        for (flat, c) in self.coeffs.iter().enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            let n = (flat / stride) % (nmax + 1);
            match kind {
                Ladder::Annihilate if n > 0 => out[flat - stride] += c * (se * (n as f64).sqrt()),
                Ladder::Create if n < nmax => out[flat + stride] += c * (se * ((n + 1) as f64).sqrt()),
                _ => {}
            }
        }
        Ok(FockState { coeffs: out, truncation: self.truncation.clone() })
    }

    /// Contract the `mode` axis with a square matrix acting on occupation levels.
    pub fn apply_mode_matrix(&self, mode: usize, mat: &DMatrix<C64>) -> Result<FockState> {
        self.check_mode(mode)?;
        let nmax = self.truncation.per_mode_max[mode];
        if mat.nrows() != nmax + 1 || mat.ncols() != nmax + 1 {
            return Err(Error::Shape(format!("mode matrix {}x{} for {} levels", mat.nrows(), mat.ncols(), nmax + 1)));
        }
        let stride = self.truncation.strides()[mode];
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len()];
        let block = stride * (nmax + 1);
        for base in (0..self.coeffs.len()).step_by(block) {
            for inner in 0..stride {
                let off = base + inner;
                for i in 0..=nmax {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..=nmax {
                        acc += mat[(i, j)] * self.coeffs[off + j * stride];
                    }
                    out[off + i * stride] = acc;
                }
            }
        }
        Ok(FockState { coeffs: out, truncation: self.truncation.clone() })
    }

    /// Smeared field operator `a_eps(f)` or `a_eps*(f)` on the basis grid.
    pub fn apply_field(&self, basis: &ModeBasis, f: &[C64], kind: Ladder) -> Result<FockState> {
        basis.check_len(f.len(), "field profile")?;
        if basis.len() != self.truncation.n_modes() {
            return Err(Error::Shape("basis and truncation mode counts differ".into()));
        }
        let mut out = FockState { coeffs: vec![C64::new(0.0, 0.0); self.coeffs.len()], truncation: self.truncation.clone() };
        for (m, mode) in basis.modes().iter().enumerate() {
            let w = match kind {
                Ladder::Annihilate => f[m].conj(),
                Ladder::Create => f[m],
            } * mode.cell.sqrt();
            if w.norm_sqr() == 0.0 {
                continue;
            }
            let t = self.ladder_apply(m, kind)?;
            out.add_assign_scaled(&t, w)?;
        }
        Ok(out)
    }

    /// `<n_m>` for every mode (number operator of the standard ladder pair).
    pub fn mean_occupations(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.truncation.n_modes()];
        for (flat, c) in self.coeffs.iter().enumerate() {
            let p = c.norm_sqr();
            if p == 0.0 {
                continue;
            }
            for (m, n) in self.occupations(flat).into_iter().enumerate() {
                occ[m] += p * n as f64;
            }
        }
        occ
    }

    /// `<Psi, dGamma_eps(symbol) Psi>`.
    pub fn dgamma_expectation(&self, basis: &ModeBasis, dispersion: &Dispersion, symbol: DGammaSymbol) -> Result<f64> {
        let weights = dgamma_weights(basis, dispersion, symbol, self.truncation.n_modes())?;
        let eps = self.truncation.epsilon;
        Ok(eps * self.mean_occupations().iter().zip(&weights).map(|(n, w)| n * w).sum::<f64>())
    }

    /// `<Psi, dGamma^(2)_eps(omega x omega) Psi> = <dGamma(omega)^2> - eps <dGamma(omega^2)>`.
    pub fn dgamma2_expectation(&self, basis: &ModeBasis, dispersion: &Dispersion) -> Result<f64> {
        let w = dgamma_weights(basis, dispersion, DGammaSymbol::Omega, self.truncation.n_modes())?;
        let eps = self.truncation.epsilon;
        let mut sq = 0.0;
        for (flat, c) in self.coeffs.iter().enumerate() {
            let p = c.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let e: f64 = self.occupations(flat).iter().zip(&w).map(|(&n, w)| n as f64 * w).sum::<f64>() * eps;
            sq += p * e * e;
        }
        Ok(sq - eps * self.dgamma_expectation(basis, dispersion, DGammaSymbol::OmegaSq)?)
    }

    /// Weight lost above the truncation, when the coefficients were produced by
    /// truncating an exactly normalized state.
    pub fn tail(&self) -> f64 {
        (1.0 - self.norm_sq()).max(0.0)
    }
}

fn dgamma_weights(basis: &ModeBasis, dispersion: &Dispersion, symbol: DGammaSymbol, n_modes: usize) -> Result<Vec<f64>> {
    basis.check_len(n_modes, "truncation")?;
    Ok(basis
        .modes()
        .iter()
        .map(|m| match symbol {
            DGammaSymbol::One => 1.0,
            DGammaSymbol::Omega => dispersion.omega(&m.k),
            DGammaSymbol::OmegaSq => dispersion.omega(&m.k).powi(2),
        })
        .collect())
}

/// Truncated single-mode ladder matrix (levels `0..=n_max`), scaled by `sqrt(eps)`.
pub fn ladder_matrix(n_max: usize, epsilon: f64, kind: Ladder) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n_max + 1, n_max + 1);
    let se = epsilon.sqrt();
    for n in 1..=n_max {
        let v = se * (n as f64).sqrt();
        match kind {
            Ladder::Annihilate => m[(n - 1, n)] = v,
            Ladder::Create => m[(n, n - 1)] = v,
        }
    }
    m
}

/// `exp(i H)` for Hermitian `H`, through its eigendecomposition (exactly unitary
/// up to rounding).
pub fn exp_i_hermitian(h: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let n = h.nrows();
    let mut out = DMatrix::zeros(n, n);
    let v = &eig.eigenvectors;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let ph = C64::from_polar(1.0, lam);
        for i in 0..n {
            let vi = v[(i, k)] * ph;
            if vi.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += vi * v[(j, k)].conj();
            }
        }
    }
    out
}

/// Single-mode Weyl matrix `exp(i(beta b* + conj(beta) b))` on `levels` levels.
pub fn weyl_mode_matrix(beta: C64, epsilon: f64, levels: usize) -> DMatrix<C64> {
    let n_max = levels - 1;
    let a = ladder_matrix(n_max, epsilon, Ladder::Annihilate);
    let mut h = DMatrix::<C64>::zeros(levels, levels);
    for i in 0..levels {
        for j in 0..levels {
            // beta b* + conj(beta) b, with b* = a^T
            h[(i, j)] = beta * a[(j, i)] + beta.conj() * a[(i, j)];
        }
    }
    exp_i_hermitian(&h)
}

/// Row-major iteration over all multi-indices of a box.
pub(crate) struct MultiIndex {
    dims: Vec<usize>,
    cur: Vec<usize>,
    done: bool,
}

impl MultiIndex {
    pub(crate) fn new(dims: &[usize]) -> Self {
        let done = dims.iter().any(|&d| d == 0);
        Self { dims: dims.to_vec(), cur: vec![0; dims.len()], done }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let mut a = self.dims.len();
        loop {
            if a == 0 {
                self.done = true;
                break;
            }
            a -= 1;
            self.cur[a] += 1;
            if self.cur[a] < self.dims[a] {
                break;
            }
            self.cur[a] = 0;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn commutator_is_eps_identity_below_top() {
        let eps = 0.1;
        let a = ladder_matrix(8, eps, Ladder::Annihilate);
        let ad = ladder_matrix(8, eps, Ladder::Create);
        let c = &a * &ad - &ad * &a;
        for i in 0..9 {
            for j in 0..9 {
                let want = if i != j {
                    0.0
                } else if i < 8 {
                    eps
                } else {
                    -0.8
                };
                assert_abs_diff_eq!(c[(i, j)], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn annihilate_vacuum_is_zero() {
        let t = FockTruncation::new(vec![3, 2], 0.2).unwrap();
        let v = FockState::vacuum(t);
        let out = v.ladder_apply(1, Ladder::Annihilate).unwrap();
        assert!(out.coefficients().iter().all(|c| c.norm_sqr() == 0.0));
    }

    #[test]
    fn invalid_mode_is_rejected() {
        let t = FockTruncation::new(vec![3], 0.2).unwrap();
        let v = FockState::vacuum(t);
        assert_eq!(v.ladder_apply(1, Ladder::Create), Err(Error::InvalidMode { index: 1, len: 1 }));
    }

    #[test]
    fn one_excitation_number_expectation() {
        // a_eps*(1_cell) a_eps(1_cell) on |1> gives eps * cell
        let basis = ModeBasis::new(vec![Mode { k: [1.0, 0.0, 0.0], cell: 0.3, polarization: None }], 1).unwrap();
        let t = FockTruncation::new(vec![1], 0.25).unwrap();
        let one = FockState::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)], t).unwrap();
        let ind = vec![C64::new(1.0, 0.0)];
        let a1 = one.apply_field(&basis, &ind, Ladder::Annihilate).unwrap();
        assert_abs_diff_eq!(a1.norm_sq(), 0.25 * 0.3, epsilon = 1e-14);
    }

    #[test]
    fn dgamma_vanishes_on_vacuum() {
        let basis = ModeBasis::uniform(1, 4, 2.0, false).unwrap();
        let t = FockTruncation::new(vec![2; 4], 0.3).unwrap();
        let v = FockState::vacuum(t);
        for s in [DGammaSymbol::One, DGammaSymbol::Omega, DGammaSymbol::OmegaSq] {
            assert_eq!(v.dgamma_expectation(&basis, &Dispersion::Massless, s).unwrap(), 0.0);
        }
        assert_eq!(v.dgamma2_expectation(&basis, &Dispersion::Massless).unwrap(), 0.0);
    }

    #[test]
    fn weyl_matrix_is_unitary() {
        let u = weyl_mode_matrix(C64::new(0.7, -0.4), 0.25, 33);
        let d = u.adjoint() * &u - DMatrix::<C64>::identity(33, 33);
        assert!(d.iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn weyl_vacuum_matches_normal_ordering() {
        // <0| exp(i(beta b* + conj(beta) b)) |0> = exp(-eps |beta|^2 / 2)
        let eps = 0.25;
        let beta = C64::new(0.6, 0.3);
        let u = weyl_mode_matrix(beta, eps, 33);
        assert_abs_diff_eq!(u[(0, 0)].re, (-eps * beta.norm_sqr() / 2.0).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(u[(0, 0)].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_cutoff_bounds_tail() {
        for &lam in &[0.5, 4.0, 20.0] {
            let n = poisson_cutoff(lam, 1e-10);
            let mut p = (-lam as f64).exp();
            let mut cdf = p;
            for k in 1..=n {
                p *= lam / k as f64;
                cdf += p;
            }
            assert!(1.0 - cdf <= 1e-10 + 1e-15, "lambda {lam}: n {n}");
            assert!(n > 0);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let err = FockTruncation::with_budget(vec![9, 9, 9], 0.5, 500).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { dim: 1000, budget: 500 });
    }

    #[test]
    fn massless_grid_excludes_origin() {
        let b = ModeBasis::uniform(3, 5, 1.0, false).unwrap();
        assert_eq!(b.len(), 124);
        assert!(b.modes().iter().all(|m| m.k_norm() > 0.0));
        let l = ModeBasis::lattice(2, 2.0 * std::f64::consts::PI, 1, true).unwrap();
        assert_eq!(l.len(), 16);
    }
}
