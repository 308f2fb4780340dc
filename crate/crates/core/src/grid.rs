//! Uniform particle-space grids.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::freq_index;
use crate::lorentz::PeriodicBox;

/// Largest number of unknowns (points times spinor components) accepted.
pub const GRID_BUDGET: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// `n^dim` points on a box of side `len` centred at the origin. Periodic grids
/// use `x_i = (i - n/2) h` with `h = len/n`; Dirichlet grids hold the interior
/// points `x_i = -len/2 + (i+1) h` with `h = len/(n+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleGrid {
    pub dim: usize,
    pub n: usize,
    pub len: f64,
    pub boundary: Boundary,
    pub spinor_dim: usize,
}

impl ParticleGrid {
    pub fn new(dim: usize, n: usize, len: f64, boundary: Boundary, spinor_dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim}")));
        }
        if n < 2 || !(len > 0.0 && len.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid with n = {n}, len = {len}")));
        }
        if !(spinor_dim == 1 || spinor_dim == 2) {
            return Err(Error::InvalidParameter(format!("spinor dimension {spinor_dim}")));
        }
        let total = n.checked_pow(dim as u32).and_then(|t| t.checked_mul(spinor_dim));
        match total {
            Some(t) if t <= GRID_BUDGET => Ok(Self { dim, n, len, boundary, spinor_dim }),
            _ => Err(Error::BudgetExceeded { dim: total.unwrap_or(usize::MAX), budget: GRID_BUDGET }),
        }
    }

    pub fn periodic(dim: usize, n: usize, len: f64) -> Result<Self> {
        Self::new(dim, n, len, Boundary::Periodic, 1)
    }

    pub fn with_spinor(mut self, spinor_dim: usize) -> Result<Self> {
        self.spinor_dim = spinor_dim;
        Self::new(self.dim, self.n, self.len, self.boundary, spinor_dim)
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.len / self.n as f64,
            Boundary::Dirichlet => self.len / (self.n + 1) as f64,
        }
    }

    /// Number of spatial points.
    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Number of unknowns including spinor components.
    pub fn unknowns(&self) -> usize {
        self.size() * self.spinor_dim
    }

    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.n; self.dim]
    }

    pub fn index(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0; 3];
        let mut rem = flat;
        for d in (0..self.dim).rev() {
            idx[d] = rem % self.n;
            rem /= self.n;
        }
        idx
    }

    pub fn flat(&self, idx: &[usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, d| acc * self.n + idx[d])
    }

    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.index(flat);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for d in 0..self.dim {
            x[d] = match self.boundary {
                Boundary::Periodic => (idx[d] as f64 - (self.n / 2) as f64) * h,
                Boundary::Dirichlet => -self.len / 2.0 + (idx[d] + 1) as f64 * h,
            };
        }
        x
    }

    pub fn points(&self) -> Vec<[f64; 3]> {
        (0..self.size()).map(|i| self.point(i)).collect()
    }

    /// FFT wavevector of bin `flat` (periodic grids).
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.index(flat);
        let mut k = [0.0; 3];
        for d in 0..self.dim {
            k[d] = 2.0 * PI * freq_index(idx[d], self.n) as f64 / self.len;
        }
        k
    }

    /// True when bin `flat` sits on a Nyquist frequency along some axis.
    pub fn is_nyquist(&self, flat: usize) -> bool {
        let idx = self.index(flat);
        self.n % 2 == 0 && (0..self.dim).any(|d| idx[d] == self.n / 2)
    }

    /// True when bin `flat` sits on the Nyquist frequency of axis `d`.
    pub fn is_nyquist_axis(&self, flat: usize, d: usize) -> bool {
        self.n % 2 == 0 && self.index(flat)[d] == self.n / 2
    }

    pub fn periodic_box(&self) -> Option<PeriodicBox> {
        (self.boundary == Boundary::Periodic).then_some(PeriodicBox { dim: self.dim, n: self.n, len: self.len })
    }

    /// Largest wavenumber resolved by the grid along one axis.
    pub fn k_nyquist(&self) -> f64 {
        PI / self.spacing()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_points_match_box() {
        let g = ParticleGrid::periodic(2, 6, 3.0).unwrap();
        let b = g.periodic_box().unwrap();
        for i in 0..g.size() {
            assert_eq!(g.point(i), b.point(i));
            assert_eq!(g.wavevector(i), b.wavevector(i));
        }
        assert_eq!(g.flat(&g.index(17)), 17);
    }

    #[test]
    fn dirichlet_points_are_interior() {
        let g = ParticleGrid::new(1, 9, 2.0, Boundary::Dirichlet, 1).unwrap();
        assert!((g.point(0)[0] + 0.8).abs() < 1e-15);
        assert!((g.point(8)[0] - 0.8).abs() < 1e-15);
        assert!(g.periodic_box().is_none());
    }

    #[test]
    fn budget() {
        assert!(ParticleGrid::periodic(3, 96, 1.0).unwrap().with_spinor(2).is_err());
        assert!(ParticleGrid::periodic(4, 4, 1.0).is_err());
    }
}
