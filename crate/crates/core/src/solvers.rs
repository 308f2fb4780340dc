//! Krylov eigensolvers, preconditioned conjugate gradients and power
//! iteration for Hermitian operators given by their action.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

pub trait HermitianOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    /// Diagonal used by Jacobi preconditioning, when cheaply available.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Dense Hermitian matrix as an operator.
pub struct DenseOperator(pub DMatrix<C64>);

impl HermitianOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.0.nrows();
        (0..n).map(|i| (0..n).map(|j| self.0[(i, j)] * x[j]).sum()).collect()
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some((0..self.0.nrows()).map(|i| self.0[(i, i)].re).collect())
    }
}

/// `op + shift`.
pub struct Shifted<'a, O: HermitianOperator + ?Sized> {
    pub op: &'a O,
    pub shift: f64,
}

impl<O: HermitianOperator + ?Sized> HermitianOperator for Shifted<'_, O> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.op.apply(x);
        y.iter_mut().zip(x).for_each(|(a, b)| *a += b * self.shift);
        y
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        self.op.diagonal().map(|d| d.into_iter().map(|v| v + self.shift).collect())
    }
}

/// Operator given by a closure.
pub struct FnOperator<F: Fn(&[C64]) -> Vec<C64> + Sync> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[C64]) -> Vec<C64> + Sync> HermitianOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        (self.f)(x)
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn project_out(w: &mut [C64], basis: &[Vec<C64>]) {
    for v in basis {
        let c = inner(v, w);
        axpy(w, -c, v);
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenpair {
    pub value: f64,
    #[serde(skip)]
    pub vector: Vec<C64>,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_krylov: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_krylov: 600, seed: 0x5eed }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum End {
    Lowest,
    Highest,
}

/// One Lanczos run with full reorthogonalization on the complement of
/// `locked`, returning the converged extreme Ritz pair.
fn lanczos_extreme<O: HermitianOperator + ?Sized>(
    op: &O,
    locked: &[Vec<C64>],
    end: End,
    opts: &LanczosOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Eigenpair> {
    let n = op.dim();
    let free = n - locked.len();
    let mut v0 = random_unit(n, rng);
    project_out(&mut v0, locked);
    project_out(&mut v0, locked);
    let nv = norm(&v0);
    v0.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<C64>> = vec![v0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let limit = opts.max_krylov.min(free);
    let mut best: Option<Eigenpair> = None;
    for j in 0..limit {
        let mut w = op.apply(&basis[j]);
        project_out(&mut w, locked);
        let a = inner(&basis[j], &w).re;
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        project_out(&mut w, &basis);
        project_out(&mut w, &basis);
        project_out(&mut w, locked);
        let b = norm(&w);
        let m = alpha.len();
        let exhausted = b <= 1e-13 * a.abs().max(1.0) || m == limit;
        if exhausted || m % 8 == 0 || m < 8 {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let idx = (0..m)
                .min_by(|&x, &y| {
                    let (ex, ey) = (eig.eigenvalues[x], eig.eigenvalues[y]);
                    match end {
                        End::Lowest => ex.total_cmp(&ey),
                        End::Highest => ey.total_cmp(&ex),
                    }
                })
                .unwrap();
            let theta = eig.eigenvalues[idx];
            let est = b * eig.eigenvectors[(m - 1, idx)].abs();
            if est <= opts.tol * 0.1 || exhausted {
                let mut u = vec![ZERO; n];
                for (i, v) in basis.iter().enumerate() {
                    axpy(&mut u, C64::new(eig.eigenvectors[(i, idx)], 0.0), v);
                }
                project_out(&mut u, locked);
                let nu = norm(&u);
                u.iter_mut().for_each(|x| *x /= nu);
                let mut r = op.apply(&u);
                project_out(&mut r, locked);
                axpy(&mut r, C64::new(-theta, 0.0), &u);
                let res = norm(&r);
                let pair = Eigenpair { value: theta, vector: u, residual: res };
                if res <= opts.tol {
                    return Ok(pair);
                }
                best = Some(pair);
                if exhausted {
                    break;
                }
            }
        }
        beta.push(b);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    let res = best.map_or(f64::NAN, |p| p.residual);
    Err(Error::NoConvergence(format!("Lanczos residual {res:.3e} above {:.1e}", opts.tol)))
}

/// The `count` lowest eigenpairs, located one at a time with locking so that
/// degenerate eigenvalues are returned with their multiplicity.
pub fn lowest_eigenpairs<O: HermitianOperator + ?Sized>(op: &O, count: usize, opts: &LanczosOptions) -> Result<Vec<Eigenpair>> {
    if count > op.dim() {
        return Err(Error::InvalidParameter(format!("{count} eigenpairs of a {}-dimensional operator", op.dim())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pairs: Vec<Eigenpair> = Vec::with_capacity(count);
    let mut locked: Vec<Vec<C64>> = Vec::with_capacity(count);
    for _ in 0..count {
        let p = lanczos_extreme(op, &locked, End::Lowest, opts, &mut rng)?;
        locked.push(p.vector.clone());
        pairs.push(p);
    }
    // residuals against the full operator
    for p in pairs.iter_mut() {
        let mut r = op.apply(&p.vector);
        axpy(&mut r, C64::new(-p.value, 0.0), &p.vector);
        p.residual = norm(&r);
    }
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pairs)
}

/// Largest eigenvalue of a Hermitian operator.
pub fn largest_eigenvalue<O: HermitianOperator + ?Sized>(op: &O, opts: &LanczosOptions) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    Ok(lanczos_extreme(op, &[], End::Highest, opts, &mut rng)?.value)
}

/// Smallest eigenvalue of a Hermitian operator.
pub fn smallest_eigenvalue<O: HermitianOperator + ?Sized>(op: &O, opts: &LanczosOptions) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    Ok(lanczos_extreme(op, &[], End::Lowest, opts, &mut rng)?.value)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgResult {
    pub solution: Vec<C64>,
    pub iterations: usize,
    /// `||A x - b|| / ||b||`.
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for a Hermitian positive
/// definite operator.
pub fn conjugate_gradient<O: HermitianOperator + ?Sized>(op: &O, rhs: &[C64], opts: &CgOptions) -> Result<CgResult> {
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::Shape(format!("rhs of length {} for a {n}-dimensional operator", rhs.len())));
    }
    let bn = norm(rhs);
    if bn == 0.0 {
        return Ok(CgResult { solution: vec![ZERO; n], iterations: 0, relative_residual: 0.0 });
    }
    let prec: Vec<f64> = match op.diagonal() {
        Some(d) if d.iter().all(|v| *v > 0.0) => d.iter().map(|v| 1.0 / v).collect(),
        _ => vec![1.0; n],
    };
    let mut x = vec![ZERO; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<C64> = r.iter().zip(&prec).map(|(a, p)| a * p).collect();
    let mut p = z.clone();
    let mut rz = inner(&r, &z).re;
    for it in 1..=opts.max_iter {
        let ap = op.apply(&p);
        let pap = inner(&p, &ap).re;
        if !(pap > 0.0) {
            return Err(Error::NegativeForm(pap));
        }
        let a = rz / pap;
        axpy(&mut x, C64::new(a, 0.0), &p);
        axpy(&mut r, C64::new(-a, 0.0), &ap);
        if norm(&r) <= opts.tol * bn {
            // confirm with the true residual
            let mut tr = op.apply(&x);
            tr.iter_mut().zip(rhs).for_each(|(t, b)| *t = b - *t);
            let rel = norm(&tr) / bn;
            if rel <= opts.tol {
                return Ok(CgResult { solution: x, iterations: it, relative_residual: rel });
            }
            r = tr;
        }
        z = r.iter().zip(&prec).map(|(a, p)| a * p).collect();
        let rz_new = inner(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        p = z.iter().zip(&p).map(|(zi, pi)| zi + pi * beta).collect();
    }
    Err(Error::NoConvergence(format!("CG did not reach {:.1e} in {} iterations", opts.tol, opts.max_iter)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    /// Estimate of the operator norm.
    pub norm: f64,
    /// Rayleigh quotient `|<v, A v>|` of the final iterate.
    pub rayleigh: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration for the norm of a Hermitian operator, stopped after
/// `max_iter` steps or when successive estimates agree to `rel_tol`.
pub fn power_iteration<O: HermitianOperator + ?Sized>(op: &O, max_iter: usize, rel_tol: f64, seed: u64) -> Result<PowerEstimate> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_unit(n, &mut rng);
    let mut est = 0.0;
    for it in 1..=max_iter {
        let w = op.apply(&v);
        let nw = norm(&w);
        if nw == 0.0 {
            return Ok(PowerEstimate { norm: 0.0, rayleigh: 0.0, iterations: it, converged: true });
        }
        let rayleigh = inner(&v, &w).norm();
        let done = (nw - est).abs() <= rel_tol * nw;
        est = nw;
        v = w.into_iter().map(|x| x / nw).collect();
        if done {
            return Ok(PowerEstimate { norm: est, rayleigh, iterations: it, converged: true });
        }
    }
    let w = op.apply(&v);
    Ok(PowerEstimate { norm: norm(&w), rayleigh: inner(&v, &w).norm(), iterations: max_iter, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn lanczos_matches_dense_eigen() {
        let h = random_hermitian(60, 3);
        let dense = SymmetricEigen::new(h.clone());
        let mut vals: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        let pairs = lowest_eigenpairs(&DenseOperator(h.clone()), 5, &LanczosOptions::default()).unwrap();
        for (p, v) in pairs.iter().zip(&vals) {
            assert!((p.value - v).abs() < 1e-9, "{} vs {}", p.value, v);
            assert!(p.residual <= 1e-8);
        }
        let top = largest_eigenvalue(&DenseOperator(h), &LanczosOptions::default()).unwrap();
        assert!((top - vals[59]).abs() < 1e-9);
    }

    #[test]
    fn degenerate_eigenvalues_keep_multiplicity() {
        let d = [1.0, 1.0, 1.0, 2.0, 5.0, 5.0, 7.0, 9.0];
        let op = DenseOperator(DMatrix::from_fn(8, 8, |i, j| if i == j { C64::new(d[i], 0.0) } else { ZERO }));
        let pairs = lowest_eigenpairs(&op, 6, &LanczosOptions::default()).unwrap();
        let got: Vec<f64> = pairs.iter().map(|p| (p.value * 1e9).round() / 1e9).collect();
        assert_eq!(got, vec![1.0, 1.0, 1.0, 2.0, 5.0, 5.0]);
    }

    #[test]
    fn resolvent_of_diagonal() {
        let d: Vec<f64> = (0..30).map(|i| 0.5 + i as f64).collect();
        let op = DenseOperator(DMatrix::from_fn(30, 30, |i, j| if i == j { C64::new(d[i], 0.0) } else { ZERO }));
        let lam = 0.7;
        let rhs: Vec<C64> = (0..30).map(|i| C64::new(1.0, i as f64 * 0.1)).collect();
        let sol = conjugate_gradient(&Shifted { op: &op, shift: lam }, &rhs, &CgOptions::default()).unwrap();
        for i in 0..30 {
            assert!((sol.solution[i] - rhs[i] / (d[i] + lam)).norm() < 1e-12);
        }
    }

    #[test]
    fn cg_solves_random_spd() {
        let h = random_hermitian(40, 9);
        let op = DenseOperator(h);
        let low = smallest_eigenvalue(&op, &LanczosOptions::default()).unwrap();
        let shifted = Shifted { op: &op, shift: -low + 1.0 };
        let rhs: Vec<C64> = (0..40).map(|i| C64::new((i as f64).sin(), 0.3)).collect();
        let sol = conjugate_gradient(&shifted, &rhs, &CgOptions::default()).unwrap();
        let back = shifted.apply(&sol.solution);
        let err: f64 = norm(&back.iter().zip(&rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err <= 1e-9 * norm(&rhs));
    }

    #[test]
    fn power_iteration_finds_norm() {
        let d = [0.2, -3.0, 1.0, 2.5];
        let op = DenseOperator(DMatrix::from_fn(4, 4, |i, j| if i == j { C64::new(d[i], 0.0) } else { ZERO }));
        let est = power_iteration(&op, 500, 1e-12, 1).unwrap();
        assert!(est.converged);
        assert!((est.norm - 3.0).abs() < 1e-9);
        assert!((est.rayleigh - 3.0).abs() < 1e-6);
    }
}
