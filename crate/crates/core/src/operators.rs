//! Discretized Schrödinger and Pauli quadratic forms on particle grids.
//!
//! Forms are stored matrix-free: a kinetic part diagonalized by the FFT
//! (periodic) or the discrete sine transform (Dirichlet), plus tagged
//! potential parts. Dense and triplet exports are produced by applying the
//! operator to unit vectors.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::fftn;
use crate::grid::{Boundary, ParticleGrid};
use crate::potentials::{curl_of, EffectivePotential, PotentialKind};
use crate::solvers::{
    conjugate_gradient, inner, largest_eigenvalue, lowest_eigenpairs, smallest_eigenvalue, CgOptions, CgResult, Eigenpair,
    FnOperator, HermitianOperator, LanczosOptions, Shifted,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Version tag written into eigenpair reports and triplet exports.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KineticKind {
    /// Exact symbol `|k|^2` (periodic) or `(pi m / L)^2` in the sine basis (Dirichlet).
    Spectral,
    /// Second-order three-point stencil.
    Stencil,
}

/// Spectral calculus of the grid Laplacian `-Δ_h`.
#[derive(Clone, Debug)]
pub struct KineticCalculus {
    grid: ParticleGrid,
    kind: KineticKind,
    symbol: Vec<f64>,
    sine: Option<Vec<f64>>,
}

impl KineticCalculus {
    pub fn new(grid: &ParticleGrid, kind: KineticKind) -> Self {
        let n = grid.n;
        let h = grid.spacing();
        let axis: Vec<f64> = (0..n)
            .map(|i| match (grid.boundary, kind) {
                (Boundary::Periodic, KineticKind::Spectral) => {
                    let k = 2.0 * PI * crate::fft::freq_index(i, n) as f64 / grid.len;
                    k * k
                }
                (Boundary::Periodic, KineticKind::Stencil) => {
                    let k = 2.0 * PI * crate::fft::freq_index(i, n) as f64 / grid.len;
                    (2.0 - 2.0 * (k * h).cos()) / (h * h)
                }
                (Boundary::Dirichlet, KineticKind::Spectral) => {
                    let k = PI * (i + 1) as f64 / ((n + 1) as f64 * h);
                    k * k
                }
                (Boundary::Dirichlet, KineticKind::Stencil) => {
                    (2.0 - 2.0 * (PI * (i + 1) as f64 / (n + 1) as f64).cos()) / (h * h)
                }
            })
            .collect();
        let symbol = (0..grid.size())
            .map(|flat| {
                let idx = grid.index(flat);
                (0..grid.dim).map(|d| axis[idx[d]]).sum()
            })
            .collect();
        let sine = (grid.boundary == Boundary::Dirichlet).then(|| {
            let s = (2.0 / (n + 1) as f64).sqrt();
            let mut m = vec![0.0; n * n];
            for j in 0..n {
                for k in 0..n {
                    m[j * n + k] = s * (PI * ((j + 1) * (k + 1)) as f64 / (n + 1) as f64).sin();
                }
            }
            m
        });
        Self { grid: *grid, kind, symbol, sine }
    }

    pub fn kind(&self) -> KineticKind {
        self.kind
    }

    /// Eigenvalues of `-Δ_h` in transform order.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Replace the scalar grid function `data` by `f(-Δ_h) data`.
    pub fn apply_fn<F: Fn(f64) -> f64>(&self, data: &mut [C64], f: F) {
        let shape = self.grid.shape();
        match &self.sine {
            None => {
                fftn(data, &shape, false);
                let scale = 1.0 / data.len() as f64;
                data.iter_mut().zip(&self.symbol).for_each(|(v, s)| *v *= f(*s) * scale);
                fftn(data, &shape, true);
            }
            Some(m) => {
                transform_axes(data, &shape, m);
                data.iter_mut().zip(&self.symbol).for_each(|(v, s)| *v *= f(*s));
                transform_axes(data, &shape, m);
            }
        }
    }

    /// Diagonal entry of `-Δ_h` in the grid basis (mean value where it varies).
    pub fn diagonal(&self) -> f64 {
        match self.grid.boundary {
            Boundary::Periodic => self.symbol.iter().sum::<f64>() / self.symbol.len() as f64,
            Boundary::Dirichlet => match self.kind {
                KineticKind::Stencil => 2.0 * self.grid.dim as f64 / self.grid.spacing().powi(2),
                // mean eigenvalue; only used for preconditioning
                KineticKind::Spectral => self.symbol.iter().sum::<f64>() / self.symbol.len() as f64,
            },
        }
    }

    /// `P_d f = -i ∂_d f` for every axis of the grid.
    fn momentum(&self, f: &[C64]) -> [Vec<C64>; 3] {
        let g = &self.grid;
        let n = g.size();
        let mut out = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
        match g.boundary {
            Boundary::Periodic => {
                let shape = g.shape();
                let mut spec = f.to_vec();
                fftn(&mut spec, &shape, false);
                let h = g.spacing();
                for d in 0..g.dim {
                    let mut s: Vec<C64> = (0..n)
                        .map(|i| {
                            let k = g.wavevector(i)[d];
                            let sym = match self.kind {
                                KineticKind::Spectral if g.is_nyquist_axis(i, d) => 0.0,
                                KineticKind::Spectral => k,
                                KineticKind::Stencil => (k * h).sin() / h,
                            };
                            spec[i] * (sym / n as f64)
                        })
                        .collect();
                    fftn(&mut s, &shape, true);
                    out[d] = s;
                }
            }
            Boundary::Dirichlet => {
                let h2 = 2.0 * g.spacing();
                for d in 0..g.dim {
                    for flat in 0..n {
                        let idx = g.index(flat);
                        let mut up = ZERO;
                        let mut down = ZERO;
                        if idx[d] + 1 < g.n {
                            let mut j = idx;
                            j[d] += 1;
                            up = f[g.flat(&j)];
                        }
                        if idx[d] > 0 {
                            let mut j = idx;
                            j[d] -= 1;
                            down = f[g.flat(&j)];
                        }
                        out[d][flat] = -I * (up - down) / h2;
                    }
                }
            }
        }
        out
    }
}

fn transform_axes(data: &mut [C64], shape: &[usize], m: &[f64]) {
    let total = data.len();
    let mut stride = total;
    for &n in shape {
        stride /= n;
        let block = n * stride;
        let mut line = vec![ZERO; n];
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, v) in line.iter_mut().enumerate() {
                    *v = (0..n).map(|k| data[base + k * stride] * m[j * n + k]).sum();
                }
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// External potential `U = U_+ - U_-` with both parts nonnegative.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalPotential {
    plus: Vec<f64>,
    minus: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UPreset {
    Zero,
    /// `strength |x|^2`.
    Harmonic { strength: f64 },
    /// `-charge / sqrt(|x|^2 + softening^2)`.
    CoulombRegularized { charge: f64, softening: f64 },
    /// Values on the grid points in flat order.
    CustomTable { values: Vec<f64> },
}

impl ExternalPotential {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("external potential value {v}")));
        }
        Ok(Self { plus: values.iter().map(|v| v.max(0.0)).collect(), minus: values.iter().map(|v| (-v).max(0.0)).collect() })
    }

    pub fn zero(grid: &ParticleGrid) -> Self {
        Self { plus: vec![0.0; grid.size()], minus: vec![0.0; grid.size()] }
    }

    pub fn from_preset(preset: &UPreset, grid: &ParticleGrid) -> Result<Self> {
        let pts = grid.points();
        let r2 = |x: &[f64; 3]| x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        match preset {
            UPreset::Zero => Ok(Self::zero(grid)),
            UPreset::Harmonic { strength } => {
                if *strength < 0.0 {
                    return Err(Error::InvalidParameter(format!("harmonic strength {strength}")));
                }
                Self::from_values(&pts.iter().map(|x| strength * r2(x)).collect::<Vec<_>>())
            }
            UPreset::CoulombRegularized { charge, softening } => {
                if *softening <= 0.0 {
                    return Err(Error::InvalidParameter(format!("softening {softening}")));
                }
                Self::from_values(&pts.iter().map(|x| -charge / (r2(x) + softening * softening).sqrt()).collect::<Vec<_>>())
            }
            UPreset::CustomTable { values } => {
                if values.len() != grid.size() {
                    return Err(Error::Shape(format!("table of {} values for {} grid points", values.len(), grid.size())));
                }
                Self::from_values(values)
            }
        }
    }

    pub fn plus(&self) -> &[f64] {
        &self.plus
    }

    pub fn minus(&self) -> &[f64] {
        &self.minus
    }

    pub fn values(&self) -> Vec<f64> {
        self.plus.iter().zip(&self.minus).map(|(p, m)| p - m).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartTag {
    UPlus,
    UMinus,
    V,
    ACrossTerms,
    W,
    SigmaB,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauliRoute {
    /// `-(σ·P)(σ·A) - (σ·A)(σ·P)` with explicit Pauli matrices.
    PauliProduct,
    /// `-(P·A + A·P) - σ·B`.
    Split,
}

#[derive(Clone, Debug)]
enum PartData {
    /// Multiplication by a real function, on every spinor component.
    Scalar(Vec<f64>),
    Cross { a: [Vec<f64>; 3], route: PauliRoute },
    /// Multiplication by `σ·B`.
    Sigma([Vec<f64>; 3]),
}

#[derive(Clone, Debug)]
pub struct FormPart {
    pub tag: PartTag,
    data: PartData,
}

impl FormPart {
    /// Sign with which the part enters the form.
    fn sign(&self) -> f64 {
        match self.tag {
            PartTag::UMinus | PartTag::ACrossTerms | PartTag::SigmaB => -1.0,
            _ => 1.0,
        }
    }
}

/// Hermitian form `kinetic + sum of parts` on grid functions with
/// `spinor_dim` components, stored component-major.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    grid: ParticleGrid,
    calculus: KineticCalculus,
    parts: Vec<FormPart>,
}

impl QuadraticForm {
    pub fn free(grid: &ParticleGrid, kinetic: KineticKind) -> Self {
        Self { grid: *grid, calculus: KineticCalculus::new(grid, kinetic), parts: Vec::new() }
    }

    pub fn grid(&self) -> &ParticleGrid {
        &self.grid
    }

    pub fn calculus(&self) -> &KineticCalculus {
        &self.calculus
    }

    pub fn parts(&self) -> &[FormPart] {
        &self.parts
    }

    pub fn tags(&self) -> Vec<PartTag> {
        self.parts.iter().map(|p| p.tag).collect()
    }

    /// Add a multiplication part (`U_plus`, `U_minus`, `V` or `W`).
    pub fn with_scalar(mut self, tag: PartTag, values: Vec<f64>) -> Result<Self> {
        if !matches!(tag, PartTag::UPlus | PartTag::UMinus | PartTag::V | PartTag::W) {
            return Err(Error::InvalidParameter(format!("{tag:?} is not a scalar part")));
        }
        check_field(&values, &self.grid)?;
        if matches!(tag, PartTag::UPlus | PartTag::UMinus) && values.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter(format!("{tag:?} must be nonnegative")));
        }
        self.parts.push(FormPart { tag, data: PartData::Scalar(values) });
        Ok(self)
    }

    fn with_external(self, u: &ExternalPotential) -> Result<Self> {
        let mut f = self;
        if u.plus.iter().any(|v| *v != 0.0) {
            f = f.with_scalar(PartTag::UPlus, u.plus.clone())?;
        }
        if u.minus.iter().any(|v| *v != 0.0) {
            f = f.with_scalar(PartTag::UMinus, u.minus.clone())?;
        }
        Ok(f)
    }

    /// Values of a multiplication part, with the sign it enters the form.
    pub fn scalar_part(&self, tag: PartTag) -> Option<Vec<f64>> {
        self.parts.iter().find(|p| p.tag == tag).and_then(|p| match &p.data {
            PartData::Scalar(v) => Some(v.iter().map(|x| x * p.sign()).collect()),
            _ => None,
        })
    }

    fn sd(&self) -> usize {
        self.grid.spinor_dim
    }

    pub fn dim(&self) -> usize {
        self.grid.unknowns()
    }

    pub fn apply_kinetic(&self, x: &[C64]) -> Vec<C64> {
        let n = self.grid.size();
        let mut y = x.to_vec();
        for s in 0..self.sd() {
            self.calculus.apply_fn(&mut y[s * n..(s + 1) * n], |l| l);
        }
        y
    }

    /// Action of a single part (with its sign).
    pub fn apply_part(&self, part: &FormPart, x: &[C64]) -> Vec<C64> {
        let n = self.grid.size();
        let sign = part.sign();
        match &part.data {
            PartData::Scalar(v) => x.iter().enumerate().map(|(i, xi)| xi * (sign * v[i % n])).collect(),
            PartData::Sigma(b) => {
                let mut y = sigma_dot(b, x, n);
                y.iter_mut().for_each(|v| *v *= sign);
                y
            }
            PartData::Cross { a, route } => {
                let mut y = match route {
                    PauliRoute::PauliProduct => {
                        let mut left = self.sigma_p(&sigma_dot(a, x, n));
                        let right = sigma_dot(a, &self.sigma_p(x), n);
                        left.iter_mut().zip(&right).for_each(|(l, r)| *l += r);
                        left
                    }
                    PauliRoute::Split => {
                        let mut y = vec![ZERO; x.len()];
                        for s in 0..self.sd() {
                            let comp = &x[s * n..(s + 1) * n];
                            let p = self.calculus.momentum(comp);
                            for d in 0..3 {
                                let ax: Vec<C64> = comp.iter().zip(&a[d]).map(|(c, ad)| c * ad).collect();
                                let pa = if d < self.grid.dim { self.calculus.momentum(&ax)[d].clone() } else { vec![ZERO; n] };
                                for i in 0..n {
                                    y[s * n + i] += pa[i] + a[d][i] * p[d][i];
                                }
                            }
                        }
                        y
                    }
                };
                y.iter_mut().for_each(|v| *v *= sign);
                y
            }
        }
    }

    /// `(σ·P) x` on a two-component spinor.
    fn sigma_p(&self, x: &[C64]) -> Vec<C64> {
        let n = self.grid.size();
        let pu = self.calculus.momentum(&x[..n]);
        let pd = self.calculus.momentum(&x[n..]);
        let mut y = vec![ZERO; 2 * n];
        for i in 0..n {
            y[i] = pu[2][i] + pd[0][i] - I * pd[1][i];
            y[n + i] = pu[0][i] + I * pu[1][i] - pd[2][i];
        }
        y
    }

    /// Sesquilinear form `<phi, H psi>` in the grid `L^2` inner product.
    pub fn sesquilinear(&self, phi: &[C64], psi: &[C64]) -> C64 {
        inner(phi, &self.apply(psi)) * self.grid.cell()
    }

    /// `Q[psi] = <psi, H psi>`.
    pub fn form_value(&self, psi: &[C64]) -> f64 {
        self.sesquilinear(psi, psi).re
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let n = self.dim();
        let column = |j: usize| {
            let mut e = vec![ZERO; n];
            e[j] = C64::new(1.0, 0.0);
            self.apply(&e)
        };
        #[cfg(feature = "parallel")]
        let cols: Vec<Vec<C64>> = {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(column).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let cols: Vec<Vec<C64>> = (0..n).map(column).collect();
        DMatrix::from_fn(n, n, |i, j| cols[j][i])
    }

    /// `max |H_ij - conj(H_ji)|` of the dense matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        let m = self.to_dense();
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Sparse triplet text export: two header lines, then `row col re im`
    /// for every entry with modulus above `drop_tol`.
    pub fn write_triplets<W: Write>(&self, mut w: W, drop_tol: f64) -> std::io::Result<usize> {
        let m = self.to_dense();
        let n = m.nrows();
        let entries: Vec<(usize, usize, C64)> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (i, j, m[(i, j)])).filter(|e| e.2.norm() > drop_tol).collect();
        writeln!(w, "# qclimit-triplets schema_version={SCHEMA_VERSION}")?;
        writeln!(w, "{n} {n} {}", entries.len())?;
        for (i, j, v) in &entries {
            writeln!(w, "{i} {j} {:e} {:e}", v.re, v.im)?;
        }
        Ok(entries.len())
    }
}

impl HermitianOperator for QuadraticForm {
    fn dim(&self) -> usize {
        self.grid.unknowns()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.apply_kinetic(x);
        for p in &self.parts {
            let z = self.apply_part(p, x);
            y.iter_mut().zip(&z).for_each(|(a, b)| *a += b);
        }
        y
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let n = self.grid.size();
        let mut d = vec![self.calculus.diagonal(); self.dim()];
        for p in &self.parts {
            match &p.data {
                PartData::Scalar(v) => d.iter_mut().enumerate().for_each(|(i, di)| *di += p.sign() * v[i % n]),
                PartData::Sigma(b) if self.sd() == 2 => {
                    for i in 0..n {
                        d[i] += p.sign() * b[2][i];
                        d[n + i] -= p.sign() * b[2][i];
                    }
                }
                _ => {}
            }
        }
        Some(d)
    }
}

fn sigma_dot(v: &[Vec<f64>; 3], x: &[C64], n: usize) -> Vec<C64> {
    let mut y = vec![ZERO; 2 * n];
    for i in 0..n {
        let (u, d) = (x[i], x[n + i]);
        let (vx, vy, vz) = (v[0][i], v[1][i], v[2][i]);
        y[i] = u * vz + d * C64::new(vx, -vy);
        y[n + i] = u * C64::new(vx, vy) - d * vz;
    }
    y
}

fn check_field(values: &[f64], grid: &ParticleGrid) -> Result<()> {
    if values.len() != grid.size() {
        return Err(Error::Shape(format!("{} values for {} grid points", values.len(), grid.size())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite field value".into()));
    }
    Ok(())
}

fn check_potential(p: &EffectivePotential, grid: &ParticleGrid, kind: PotentialKind) -> Result<()> {
    if p.kind != kind {
        return Err(Error::InvalidParameter(format!("expected {kind:?}, got {:?}", p.kind)));
    }
    if p.grid.dim != grid.dim || p.grid.n != grid.n || p.grid.len != grid.len || p.grid.boundary != grid.boundary {
        return Err(Error::Shape("potential sampled on a different grid".into()));
    }
    let scale = p.max_abs().max(1.0);
    let imag = p.fourier_imag_residual();
    if imag > 1e-10 * scale {
        return Err(Error::NonReal(imag));
    }
    for c in &p.components {
        check_field(c, grid)?;
    }
    Ok(())
}

/// `-Δ + U + V` on a scalar grid.
pub fn assemble_nelson(
    grid: &ParticleGrid,
    kinetic: KineticKind,
    u: &ExternalPotential,
    v: Option<&EffectivePotential>,
) -> Result<QuadraticForm> {
    if grid.spinor_dim != 1 {
        return Err(Error::InvalidParameter("the Nelson form acts on scalar grid functions".into()));
    }
    check_field(&u.plus, grid)?;
    let mut form = QuadraticForm::free(grid, kinetic).with_external(u)?;
    if let Some(v) = v {
        check_potential(v, grid, PotentialKind::ScalarV)?;
        form = form.with_scalar(PartTag::V, v.components[0].clone())?;
    }
    Ok(form)
}

/// Inputs of the Pauli form. `b` is optional: the split route uses the
/// curl of `a` when it is absent and checks consistency when present.
#[derive(Clone, Copy, Debug, Default)]
pub struct PauliFields<'a> {
    pub a: Option<&'a EffectivePotential>,
    pub w: Option<&'a EffectivePotential>,
    pub b: Option<&'a EffectivePotential>,
}

/// Default tolerance, relative to `max(1, max|B|)`, for the curl consistency check.
pub const CURL_TOL: f64 = 1e-8;

/// `P^2 - (σ·P)(σ·A) - (σ·A)(σ·P) + W + U` on a two-component grid.
pub fn assemble_pauli(
    grid: &ParticleGrid,
    kinetic: KineticKind,
    u: &ExternalPotential,
    fields: PauliFields<'_>,
    route: PauliRoute,
    curl_tol: f64,
) -> Result<QuadraticForm> {
    if grid.spinor_dim != 2 {
        return Err(Error::InvalidParameter("the Pauli form needs spinor_dim = 2".into()));
    }
    check_field(&u.plus, grid)?;
    let mut form = QuadraticForm::free(grid, kinetic).with_external(u)?;
    if let Some(w) = fields.w {
        check_potential(w, grid, PotentialKind::ScalarW)?;
        form = form.with_scalar(PartTag::W, w.components[0].clone())?;
    }
    if let Some(b) = fields.b {
        check_potential(b, grid, PotentialKind::VectorB)?;
    }
    if let Some(a) = fields.a {
        check_potential(a, grid, PotentialKind::VectorA)?;
        let comps = [a.components[0].clone(), a.components[1].clone(), a.components[2].clone()];
        form.parts.push(FormPart { tag: PartTag::ACrossTerms, data: PartData::Cross { a: comps, route } });
        let curl = curl_of(a)?;
        let b = match fields.b {
            Some(b) => {
                let mismatch = b.max_abs_diff(&curl)?;
                if mismatch > curl_tol * b.max_abs().max(1.0) {
                    return Err(Error::CurlMismatch(mismatch));
                }
                b.clone()
            }
            None => curl,
        };
        if route == PauliRoute::Split {
            let comps = [b.components[0].clone(), b.components[1].clone(), b.components[2].clone()];
            form.parts.push(FormPart { tag: PartTag::SigmaB, data: PartData::Sigma(comps) });
        }
    }
    Ok(form)
}

/// Witness `(a, b)` of `<ψ,|V|ψ> <= a <ψ,-Δψ> + b ||ψ||^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlmnBound {
    pub a: f64,
    pub b: f64,
    /// `(b, a(b))` for every scanned ladder value.
    pub ladder: Vec<(f64, f64)>,
}

/// The scanned `b` values `1, 2, 4, ..., 2^10`.
pub fn klmn_ladder() -> Vec<f64> {
    (0..=10).map(|k| (1u32 << k) as f64).collect()
}

/// `a(b)`: largest eigenvalue of `(-Δ+b)^{-1/2} |V| (-Δ+b)^{-1/2}`.
pub fn klmn_a(part: &[f64], calculus: &KineticCalculus, b: f64, opts: &LanczosOptions) -> Result<f64> {
    let absv: Vec<f64> = part.iter().map(|v| v.abs()).collect();
    if absv.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let op = FnOperator {
        dim: part.len(),
        f: |x: &[C64]| {
            let mut y = x.to_vec();
            calculus.apply_fn(&mut y, |l| (l + b).powf(-0.5));
            y.iter_mut().zip(&absv).for_each(|(v, a)| *v *= a);
            calculus.apply_fn(&mut y, |l| (l + b).powf(-0.5));
            y
        },
    };
    Ok(largest_eigenvalue(&op, opts)?.max(0.0))
}

/// Scan the ladder and return the admissible pair minimizing `a + b/2^10`.
pub fn klmn_bound(part: &[f64], grid: &ParticleGrid, kinetic: KineticKind) -> Result<KlmnBound> {
    check_field(part, grid)?;
    let ladder = klmn_ladder();
    let scale = *ladder.last().unwrap();
    if part.iter().all(|v| *v == 0.0) {
        return Ok(KlmnBound { a: 0.0, b: 0.0, ladder: ladder.iter().map(|b| (*b, 0.0)).collect() });
    }
    let calc = KineticCalculus::new(&ParticleGrid { spinor_dim: 1, ..*grid }, kinetic);
    let opts = LanczosOptions { tol: 1e-9, ..Default::default() };
    let scanned: Vec<(f64, f64)> = ladder.iter().map(|&b| klmn_a(part, &calc, b, &opts).map(|a| (b, a))).collect::<Result<_>>()?;
    let best = scanned.iter().filter(|(_, a)| *a < 1.0).min_by(|x, y| (x.1 + x.0 / scale).total_cmp(&(y.1 + y.0 / scale)));
    match best {
        Some(&(b, a)) => Ok(KlmnBound { a, b, ladder: scanned }),
        None => Err(Error::NoKlmnPair { best_a: scanned.iter().map(|x| x.1).fold(f64::INFINITY, f64::min) }),
    }
}

/// Check a candidate pair: `max spec(|V| - a(-Δ) - b) <= tol`.
pub fn klmn_admissible(part: &[f64], grid: &ParticleGrid, kinetic: KineticKind, a: f64, b: f64, tol: f64) -> Result<bool> {
    check_field(part, grid)?;
    let calc = KineticCalculus::new(&ParticleGrid { spinor_dim: 1, ..*grid }, kinetic);
    let op = FnOperator {
        dim: part.len(),
        f: |x: &[C64]| {
            let mut k = x.to_vec();
            calc.apply_fn(&mut k, |l| l);
            x.iter().zip(&k).zip(part).map(|((xi, ki), v)| xi * (v.abs() - b) - ki * a).collect()
        },
    };
    Ok(largest_eigenvalue(&op, &LanczosOptions::default())? <= tol)
}

/// Operator sandwiched between fractional kinetic powers.
#[derive(Clone, Copy, Debug)]
pub enum SandwichPart<'a> {
    Identity,
    Scalar(&'a [f64]),
    /// Vector multiplication `ψ -> (A_j ψ)_j`.
    VectorA([&'a [f64]; 3]),
    /// `σ·B` on two-component spinors.
    SigmaB([&'a [f64]; 3]),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FractionalCalculus {
    /// `(-Δ + λ0)^{-s}`.
    Shifted { lambda0: f64 },
    /// `|P|^{-s}` with the zero mode excluded.
    AbsP,
}

impl FractionalCalculus {
    fn power(&self, l: f64, s: f64) -> f64 {
        match self {
            Self::Shifted { lambda0 } => (l + lambda0).powf(-s),
            Self::AbsP if l <= 1e-12 => 0.0,
            Self::AbsP => l.powf(-s / 2.0),
        }
    }
}

/// Norm of `F_left · Part · F_right` through the largest eigenvalue of
/// `T^* T` (Krylov-accelerated power iteration).
pub fn fractional_sandwich_norm(
    part: SandwichPart<'_>,
    grid: &ParticleGrid,
    kinetic: KineticKind,
    s_left: f64,
    s_right: f64,
    calc: FractionalCalculus,
    opts: &LanczosOptions,
) -> Result<f64> {
    if let FractionalCalculus::Shifted { lambda0 } = calc {
        if !(lambda0 > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda0 = {lambda0} must be positive")));
        }
    }
    let scalar_grid = ParticleGrid { spinor_dim: 1, ..*grid };
    let kc = KineticCalculus::new(&scalar_grid, kinetic);
    let n = grid.size();
    let pw = |x: &mut [C64], s: f64| kc.apply_fn(x, |l| calc.power(l, s));
    let pw2 = |x: &mut [C64], s: f64| kc.apply_fn(x, |l| calc.power(l, s).powi(2));
    let mul = |x: &[C64], v: &[f64]| -> Vec<C64> { x.iter().zip(v).map(|(a, b)| a * b).collect() };
    match part {
        SandwichPart::Identity => {
            let op = FnOperator {
                dim: n,
                f: |x: &[C64]| {
                    let mut y = x.to_vec();
                    pw(&mut y, s_left + s_right);
                    y
                },
            };
            let a = largest_eigenvalue(&op, opts)?;
            let b = smallest_eigenvalue(&op, opts)?;
            Ok(a.abs().max(b.abs()))
        }
        SandwichPart::Scalar(v) => {
            check_field(v, grid)?;
            let op = FnOperator {
                dim: n,
                f: |x: &[C64]| {
                    let mut y = x.to_vec();
                    pw(&mut y, s_right);
                    let mut z = mul(&y, v);
                    pw2(&mut z, s_left);
                    let mut y = mul(&z, v);
                    pw(&mut y, s_right);
                    y
                },
            };
            Ok(largest_eigenvalue(&op, opts)?.max(0.0).sqrt())
        }
        SandwichPart::VectorA(a) => {
            for c in a {
                check_field(c, grid)?;
            }
            let op = FnOperator {
                dim: n,
                f: |x: &[C64]| {
                    let mut y = x.to_vec();
                    pw(&mut y, s_right);
                    let mut acc = vec![ZERO; n];
                    for c in a {
                        let mut z = mul(&y, c);
                        pw2(&mut z, s_left);
                        acc.iter_mut().zip(mul(&z, c)).for_each(|(s, t)| *s += t);
                    }
                    pw(&mut acc, s_right);
                    acc
                },
            };
            Ok(largest_eigenvalue(&op, opts)?.max(0.0).sqrt())
        }
        SandwichPart::SigmaB(b) => {
            for c in b {
                check_field(c, grid)?;
            }
            let bv = [b[0].to_vec(), b[1].to_vec(), b[2].to_vec()];
            let both = |x: &mut [C64], s: f64, sq: bool| {
                for comp in x.chunks_mut(n) {
                    if sq {
                        pw2(comp, s)
                    } else {
                        pw(comp, s)
                    }
                }
            };
            let op = FnOperator {
                dim: 2 * n,
                f: |x: &[C64]| {
                    let mut y = x.to_vec();
                    both(&mut y, s_right, false);
                    let mut z = sigma_dot(&bv, &y, n);
                    both(&mut z, s_left, true);
                    let mut y = sigma_dot(&bv, &z, n);
                    both(&mut y, s_right, false);
                    y
                },
            };
            Ok(largest_eigenvalue(&op, opts)?.max(0.0).sqrt())
        }
    }
}

/// Eigenpairs with their residuals, for JSON reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub schema_version: u32,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl EigenReport {
    pub fn new(pairs: &[Eigenpair]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            eigenvalues: pairs.iter().map(|p| p.value).collect(),
            residuals: pairs.iter().map(|p| p.residual).collect(),
        }
    }
}

pub fn form_eigenpairs(form: &QuadraticForm, count: usize) -> Result<Vec<Eigenpair>> {
    lowest_eigenpairs(form, count, &LanczosOptions::default())
}

/// Admissible shift `max(-m, λ0) + 1`.
pub fn admissible_lambda(lower: f64, lambda0: f64) -> f64 {
    (-lower).max(lambda0) + 1.0
}

/// Resolvent `(H + λ)^{-1}` with the admissibility of `λ` checked once
/// against the smallest Ritz value.
pub struct Resolvent<'a> {
    form: &'a QuadraticForm,
    lambda: f64,
    lower: f64,
    opts: CgOptions,
}

/// Required gap between `λ` and `-m`.
pub const SHIFT_MARGIN: f64 = 1e-6;

impl<'a> Resolvent<'a> {
    pub fn new(form: &'a QuadraticForm, lambda: f64) -> Result<Self> {
        let lower = smallest_eigenvalue(form, &LanczosOptions::default())?;
        Self::with_lower_bound(form, lambda, lower)
    }

    /// Use a previously computed lower bound estimate `m`.
    pub fn with_lower_bound(form: &'a QuadraticForm, lambda: f64, lower: f64) -> Result<Self> {
        if lambda + lower <= SHIFT_MARGIN {
            return Err(Error::IndefiniteShift { shift: lambda, lower });
        }
        Ok(Self { form, lambda, lower, opts: CgOptions::default() })
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn solve(&self, rhs: &[C64]) -> Result<CgResult> {
        conjugate_gradient(&Shifted { op: self.form, shift: self.lambda }, rhs, &self.opts)
    }

    pub fn apply(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        Ok(self.solve(rhs)?.solution)
    }
}

pub fn resolvent_apply(form: &QuadraticForm, lambda: f64, rhs: &[C64]) -> Result<Vec<C64>> {
    Resolvent::new(form, lambda)?.apply(rhs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationReport {
    /// `max_φ Re Q[φ, 2ψ - φ]` over the probes and `ψ` itself.
    pub max: f64,
    pub q_psi: f64,
    /// `Q[ψ] - max`.
    pub gap: f64,
    pub values: Vec<f64>,
}

/// Evaluate `Re Q[φ, 2ψ - φ]` with `Q[φ,χ] = <φ, H χ>` over `ψ` and the probes.
pub fn polarization_sup<O: HermitianOperator + ?Sized>(op: &O, psi: &[C64], probes: &[Vec<C64>], tol: f64) -> Result<PolarizationReport> {
    let hpsi = op.apply(psi);
    let q_psi = inner(psi, &hpsi).re;
    let mut lowest = q_psi;
    let mut values = Vec::with_capacity(probes.len() + 1);
    for phi in std::iter::once(psi).chain(probes.iter().map(|p| p.as_slice())) {
        if phi.len() != psi.len() {
            return Err(Error::Shape("probe length differs from psi".into()));
        }
        let qpp = inner(phi, &op.apply(phi)).re;
        lowest = lowest.min(qpp);
        values.push(2.0 * inner(phi, &hpsi).re - qpp);
    }
    if lowest < -tol {
        return Err(Error::NegativeForm(lowest));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PolarizationReport { max, q_psi, gap: q_psi - max, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::DenseOperator;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
        (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn free_periodic_ground_state_is_constant() {
        let g = ParticleGrid::periodic(2, 8, 2.0 * PI).unwrap();
        let f = assemble_nelson(&g, KineticKind::Spectral, &ExternalPotential::zero(&g), None).unwrap();
        let pairs = form_eigenpairs(&f, 5).unwrap();
        assert!(pairs[0].value.abs() < 1e-9);
        let v = &pairs[0].vector;
        for x in v {
            assert!((x.norm() - v[0].norm()).abs() < 1e-7);
        }
        // (2π n / L)^2 with L = 2π: 0, then 1 four times
        for p in &pairs[1..5] {
            assert!((p.value - 1.0).abs() < 1e-8, "{}", p.value);
        }
    }

    #[test]
    fn stencil_and_sine_symbols_match_matrices() {
        for (b, k) in [
            (Boundary::Periodic, KineticKind::Stencil),
            (Boundary::Dirichlet, KineticKind::Stencil),
        ] {
            let g = ParticleGrid::new(1, 7, 3.0, b, 1).unwrap();
            let f = QuadraticForm::free(&g, k);
            let m = f.to_dense();
            let h2 = g.spacing().powi(2);
            for i in 0..7 {
                for j in 0..7 {
                    let d = (i as i64 - j as i64).rem_euclid(7);
                    let expect = if i == j {
                        2.0 / h2
                    } else if (i as i64 - j as i64).abs() == 1 || (b == Boundary::Periodic && (d == 1 || d == 6)) {
                        -1.0 / h2
                    } else {
                        0.0
                    };
                    assert!((m[(i, j)] - expect).norm() < 1e-10, "{b:?} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn non_real_potential_rejected() {
        let g = ParticleGrid::periodic(1, 8, 4.0).unwrap();
        let v = EffectivePotential {
            kind: PotentialKind::ScalarV,
            grid: g,
            components: vec![vec![0.0; 8]],
            fourier: crate::potentials::PlaneWaveSum { k: vec![[1.0, 0.0, 0.0]], coeff: vec![vec![C64::new(0.0, 1.0)]] },
            provenance: crate::potentials::Provenance::Measure,
        };
        assert!(matches!(assemble_nelson(&g, KineticKind::Spectral, &ExternalPotential::zero(&g), Some(&v)), Err(Error::NonReal(_))));
    }

    #[test]
    fn external_split() {
        let u = ExternalPotential::from_values(&[1.0, -2.0, 0.0]).unwrap();
        assert_eq!(u.plus(), &[1.0, 0.0, 0.0]);
        assert_eq!(u.minus(), &[0.0, 2.0, 0.0]);
        assert_eq!(u.values(), vec![1.0, -2.0, 0.0]);
    }

    #[test]
    fn klmn_trivial_cases() {
        let g = ParticleGrid::periodic(1, 16, 5.0).unwrap();
        let z = klmn_bound(&vec![0.0; 16], &g, KineticKind::Spectral).unwrap();
        assert_eq!((z.a, z.b), (0.0, 0.0));
        let v: Vec<f64> = (0..16).map(|i| 0.7 * (i as f64).sin()).collect();
        let c = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(klmn_admissible(&v, &g, KineticKind::Spectral, 0.0, c, 1e-12).unwrap());
        let kb = klmn_bound(&v, &g, KineticKind::Spectral).unwrap();
        assert!(kb.a < 1.0);
        assert!(klmn_admissible(&v, &g, KineticKind::Spectral, kb.a * (1.0 + 1e-6), kb.b, 1e-9).unwrap());
    }

    #[test]
    fn identity_sandwich_is_max_symbol_power() {
        let g = ParticleGrid::periodic(1, 16, 4.0).unwrap();
        let v = fractional_sandwich_norm(
            SandwichPart::Identity,
            &g,
            KineticKind::Spectral,
            0.25,
            0.5,
            FractionalCalculus::Shifted { lambda0: 0.5 },
            &LanczosOptions::default(),
        )
        .unwrap();
        assert!((v - 0.5f64.powf(-0.75)).abs() < 1e-9);
    }

    #[test]
    fn scalar_sandwich_matches_dense() {
        let g = ParticleGrid::periodic(1, 12, 3.0).unwrap();
        let v: Vec<f64> = (0..12).map(|i| (0.4 * i as f64).cos() + 0.2).collect();
        let kc = KineticCalculus::new(&g, KineticKind::Spectral);
        let cols: Vec<Vec<C64>> = (0..12)
            .map(|j| {
                let mut e = vec![ZERO; 12];
                e[j] = C64::new(1.0, 0.0);
                kc.apply_fn(&mut e, |l| (l + 1.0).powf(-0.3));
                let mut z: Vec<C64> = e.iter().zip(&v).map(|(a, b)| a * b).collect();
                kc.apply_fn(&mut z, |l| (l + 1.0).powf(-0.2));
                z
            })
            .collect();
        let m = DMatrix::from_fn(12, 12, |i, j| cols[j][i]);
        let sv = m.singular_values()[0];
        let got = fractional_sandwich_norm(
            SandwichPart::Scalar(&v),
            &g,
            KineticKind::Spectral,
            0.2,
            0.3,
            FractionalCalculus::Shifted { lambda0: 1.0 },
            &LanczosOptions::default(),
        )
        .unwrap();
        assert!((got - sv).abs() < 1e-8, "{got} vs {sv}");
    }

    #[test]
    fn diagonal_resolvent_componentwise() {
        let g = ParticleGrid::periodic(1, 16, 6.0).unwrap();
        let mut f = QuadraticForm::free(&g, KineticKind::Spectral);
        f.calculus = KineticCalculus::new(&g, KineticKind::Spectral);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rhs = rand_vec(16, &mut rng);
        let lam = 0.8;
        let sol = resolvent_apply(&f, lam, &rhs).unwrap();
        // diagonal in Fourier space
        let mut spec = rhs.clone();
        f.calculus.apply_fn(&mut spec, |l| 1.0 / (l + lam));
        for (a, b) in sol.iter().zip(&spec) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn indefinite_shift_rejected() {
        let g = ParticleGrid::periodic(1, 16, 6.0).unwrap();
        let f = QuadraticForm::free(&g, KineticKind::Spectral).with_scalar(PartTag::UMinus, vec![2.0; 16]).unwrap();
        assert!(matches!(Resolvent::new(&f, 1.5), Err(Error::IndefiniteShift { .. })));
        assert!(Resolvent::new(&f, admissible_lambda(-2.0, 0.0)).is_ok());
    }

    #[test]
    fn polarization_gap_zero_at_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(10, 10, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let h = DenseOperator(&a * a.adjoint());
            let psi = rand_vec(10, &mut rng);
            let probes: Vec<Vec<C64>> = (0..8).map(|_| rand_vec(10, &mut rng)).collect();
            let rep = polarization_sup(&h, &psi, &probes, 1e-12).unwrap();
            assert_eq!(rep.gap, 0.0);
            assert!(rep.values.iter().all(|v| *v <= rep.q_psi));
        }
        let zero = DenseOperator(DMatrix::zeros(4, 4));
        let rep = polarization_sup(&zero, &[C64::new(1.0, 0.0); 4], &[vec![C64::new(0.0, 2.0); 4]], 0.0).unwrap();
        assert!(rep.values.iter().all(|v| *v == 0.0));
        let neg = DenseOperator(DMatrix::from_diagonal_element(3, 3, C64::new(-1.0, 0.0)));
        assert!(matches!(polarization_sup(&neg, &[C64::new(1.0, 0.0); 3], &[], 0.0), Err(Error::NegativeForm(_))));
    }

    #[test]
    fn triplet_export_round_trip() {
        let g = ParticleGrid::new(1, 5, 2.0, Boundary::Dirichlet, 1).unwrap();
        let f = QuadraticForm::free(&g, KineticKind::Stencil).with_scalar(PartTag::UPlus, vec![1.0; 5]).unwrap();
        let mut buf = Vec::new();
        let nnz = f.write_triplets(&mut buf, 1e-12).unwrap();
        assert_eq!(nnz, 13);
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().contains("schema_version=1"));
        assert_eq!(lines.next().unwrap(), "5 5 13");
        let m = f.to_dense();
        for l in lines {
            let t: Vec<&str> = l.split(' ').collect();
            let (i, j): (usize, usize) = (t[0].parse().unwrap(), t[1].parse().unwrap());
            assert_eq!(m[(i, j)].re, t[2].parse::<f64>().unwrap());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn klmn_a_nonincreasing(seed in 0u64..1000) {
            let g = ParticleGrid::periodic(1, 16, 6.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..16).map(|_| rng.random_range(-5.0..5.0)).collect();
            let calc = KineticCalculus::new(&g, KineticKind::Spectral);
            let opts = LanczosOptions { tol: 1e-10, ..Default::default() };
            let a: Vec<f64> = klmn_ladder().iter().map(|&b| klmn_a(&v, &calc, b, &opts).unwrap()).collect();
            for w in a.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
        }

        #[test]
        fn forms_are_hermitian(seed in 0u64..1000) {
            let g = ParticleGrid::periodic(1, 10, 4.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f = QuadraticForm::free(&g, KineticKind::Spectral).with_scalar(PartTag::V, v).unwrap();
            prop_assert!(f.hermiticity_defect() <= 1e-12);
        }
    }
}
