//! Effective potentials of the scalar (Nelson) and vector (Pauli-Fierz)
//! couplings, from field states or from Wigner measures, in pointwise and
//! plane-wave representations.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::family::{FieldStateFamily, Moments, WignerMeasure};
use crate::fft::fftn;
use crate::fock::{norm3, Dispersion, ModeBasis};
use crate::grid::{Boundary, ParticleGrid};
use crate::lorentz::{quasinorm, LorentzIndex, SampledFunction};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Ultraviolet coupling function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChiPreset {
    One,
    Sharp { cutoff: f64 },
    /// `1 / (1 + exp((|k| - cutoff)/width))`.
    Smooth { cutoff: f64, width: f64 },
    /// `chi = omega`; violates the integrability assumption by design.
    EqualsOmega,
}

impl ChiPreset {
    pub fn eval(&self, k: &[f64; 3], dispersion: &Dispersion) -> f64 {
        let kn = norm3(k);
        match *self {
            ChiPreset::One => 1.0,
            ChiPreset::Sharp { cutoff } => {
                if kn <= cutoff {
                    1.0
                } else {
                    0.0
                }
            }
            ChiPreset::Smooth { cutoff, width } => 1.0 / (1.0 + ((kn - cutoff) / width).exp()),
            ChiPreset::EqualsOmega => dispersion.omega(k),
        }
    }

    pub fn cutoff(&self) -> Option<f64> {
        match *self {
            ChiPreset::Sharp { cutoff } | ChiPreset::Smooth { cutoff, .. } => Some(cutoff),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    NelsonScalar,
    PfVector,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub chi: ChiPreset,
    pub dispersion: Dispersion,
    pub kind: CouplingKind,
}

impl CouplingSpec {
    pub fn nelson(chi: ChiPreset, dispersion: Dispersion) -> Self {
        Self { chi, dispersion, kind: CouplingKind::NelsonScalar }
    }

    pub fn pauli_fierz(chi: ChiPreset, dispersion: Dispersion) -> Self {
        Self { chi, dispersion, kind: CouplingKind::PfVector }
    }

    fn require(&self, kind: CouplingKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::CouplingGrade(format!("{:?} coupling used where {:?} is required", self.kind, kind)));
        }
        Ok(())
    }

    /// Per-component mode weights: `chi omega^{-1/2}` (scalar) or
    /// `chi omega^{-1/2} e_lambda` (vector, three components).
    pub fn mode_weights(&self, basis: &ModeBasis) -> Result<Vec<Vec<f64>>> {
        let scal: Vec<f64> =
            basis.modes().iter().map(|m| self.chi.eval(&m.k, &self.dispersion) / self.dispersion.omega(&m.k).sqrt()).collect();
        match self.kind {
            CouplingKind::NelsonScalar => Ok(vec![scal]),
            CouplingKind::PfVector => {
                let frame = PolarizationFrame;
                let mut out = vec![vec![0.0; basis.len()]; 3];
                for (m, mode) in basis.modes().iter().enumerate() {
                    let Some(lam) = mode.polarization else {
                        return Err(Error::CouplingGrade("vector coupling needs a polarized basis".into()));
                    };
                    let e = frame.vector(&mode.k, lam)?;
                    for j in 0..3 {
                        out[j][m] = scal[m] * e[j];
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Transverse polarization frame `e1 = k x z / |k x z|`, `e2 = k x e1 / |k x e1|`,
/// falling back to `(x, y)` near the z axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PolarizationFrame;

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = norm3(&v);
    v.map(|x| x / n)
}

impl PolarizationFrame {
    pub fn vectors(&self, k: &[f64; 3]) -> Result<([f64; 3], [f64; 3])> {
        let kn = norm3(k);
        if kn == 0.0 {
            return Err(Error::InvalidParameter("polarization frame at k = 0".into()));
        }
        let kz = cross(k, &[0.0, 0.0, 1.0]);
        if norm3(&kz) < 1e-9 * kn {
            return Ok(([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]));
        }
        let e1 = normalize(kz);
        let e2 = normalize(cross(k, &e1));
        Ok((e1, e2))
    }

    /// `e_lambda(k)` for `lambda` in {1, 2}.
    pub fn vector(&self, k: &[f64; 3], lambda: u8) -> Result<[f64; 3]> {
        let (e1, e2) = self.vectors(k)?;
        match lambda {
            1 => Ok(e1),
            2 => Ok(e2),
            _ => Err(Error::InvalidParameter(format!("polarization index {lambda}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    ScalarV,
    VectorA,
    ScalarW,
    VectorB,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case")]
pub enum Provenance {
    State { epsilon: f64 },
    Measure,
}

/// `f(x) = sum_t coeff[j][t] exp(i k_t . x)` per component.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneWaveSum {
    pub k: Vec<[f64; 3]>,
    pub coeff: Vec<Vec<C64>>,
}

impl PlaneWaveSum {
    pub fn components(&self) -> usize {
        self.coeff.len()
    }

    pub fn eval(&self, comp: usize, x: &[f64; 3]) -> C64 {
        self.k.iter().zip(&self.coeff[comp]).map(|(k, c)| c * C64::from_polar(1.0, dot(k, x))).sum()
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Grid-sampled real potential with its plane-wave representation.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectivePotential {
    pub kind: PotentialKind,
    pub grid: ParticleGrid,
    /// One sample vector per component (1 for scalars, 3 for vectors).
    pub components: Vec<Vec<f64>>,
    pub fourier: PlaneWaveSum,
    pub provenance: Provenance,
}

/// Metadata written next to binary potential exports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialMetadata {
    pub schema_version: u32,
    pub kind: PotentialKind,
    pub grid: ParticleGrid,
    pub coupling: CouplingSpec,
    pub provenance: Provenance,
    pub components: usize,
    pub points: usize,
    pub layout: String,
}

impl EffectivePotential {
    pub fn max_abs(&self) -> f64 {
        self.components.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &EffectivePotential) -> Result<f64> {
        if self.components.len() != other.components.len() || self.grid != other.grid {
            return Err(Error::Shape("potentials on different grids or of different rank".into()));
        }
        Ok(self
            .components
            .iter()
            .zip(&other.components)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max))
    }

    /// Largest imaginary part of the plane-wave representation on the grid.
    pub fn fourier_imag_residual(&self) -> f64 {
        let pts = self.grid.points();
        (0..self.fourier.components())
            .flat_map(|j| pts.iter().map(move |x| (j, x)))
            .map(|(j, x)| self.fourier.eval(j, x).im.abs())
            .fold(0.0, f64::max)
    }

    /// Largest difference between the sampled values and the plane-wave sum.
    pub fn representation_residual(&self) -> f64 {
        let pts = self.grid.points();
        let mut r: f64 = 0.0;
        for (j, comp) in self.components.iter().enumerate() {
            for (x, v) in pts.iter().zip(comp) {
                r = r.max((self.fourier.eval(j, x).re - v).abs());
            }
        }
        r
    }

    /// `int V_j conj(psi) phi dx` from the grid samples.
    pub fn pairing_pointwise(&self, comp: usize, psi: &[C64], phi: &[C64]) -> Result<C64> {
        self.check_pair(comp, psi, phi)?;
        let h = self.grid.cell();
        Ok(self.components[comp].iter().zip(psi.iter().zip(phi)).map(|(v, (a, b))| a.conj() * b * (*v * h)).sum())
    }

    /// Same pairing through the plane-wave representation: every term needs
    /// `sum_x h^d e^{ik.x} conj(psi) phi`, read from one FFT when `k` lies on
    /// the grid's reciprocal lattice and summed directly otherwise.
    pub fn pairing_fourier(&self, comp: usize, psi: &[C64], phi: &[C64]) -> Result<C64> {
        self.check_pair(comp, psi, phi)?;
        let grid = &self.grid;
        let h = grid.cell();
        let g: Vec<C64> = psi.iter().zip(phi).map(|(a, b)| a.conj() * b).collect();
        let spectrum = if grid.boundary == Boundary::Periodic {
            let mut s = g.clone();
            fftn(&mut s, &grid.shape(), true);
            Some(s)
        } else {
            None
        };
        let x0 = grid.point(0);
        let pts = grid.points();
        let mut total = ZERO;
        for (k, c) in self.fourier.k.iter().zip(&self.fourier.coeff[comp]) {
            let lattice = spectrum.as_ref().and_then(|s| {
                let mut idx = [0usize; 3];
                for d in 0..grid.dim {
                    let n = k[d] * grid.len / (2.0 * std::f64::consts::PI);
                    let r = n.round();
                    if (n - r).abs() > 1e-9 {
                        return None;
                    }
                    idx[d] = (r as i64).rem_euclid(grid.n as i64) as usize;
                }
                Some(s[grid.flat(&idx)] * C64::from_polar(1.0, dot(k, &x0)))
            });
            let term = match lattice {
                Some(v) => v,
                None => pts.iter().zip(&g).map(|(x, gv)| gv * C64::from_polar(1.0, dot(k, x))).sum(),
            };
            total += c * term * h;
        }
        Ok(total)
    }

    fn check_pair(&self, comp: usize, psi: &[C64], phi: &[C64]) -> Result<()> {
        if comp >= self.components.len() {
            return Err(Error::InvalidParameter(format!("component {comp}")));
        }
        if psi.len() != self.grid.size() || phi.len() != self.grid.size() {
            return Err(Error::Shape("test functions do not match the grid".into()));
        }
        Ok(())
    }

    /// Little-endian `f64` samples, component-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for comp in &self.components {
            for v in comp {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn metadata(&self, coupling: &CouplingSpec) -> PotentialMetadata {
        PotentialMetadata {
            schema_version: 1,
            kind: self.kind,
            grid: self.grid,
            coupling: *coupling,
            provenance: self.provenance,
            components: self.components.len(),
            points: self.grid.size(),
            layout: "f64 little-endian, component-major, row-major points".into(),
        }
    }
}

/// First moment carried by a measure: `sum_i w_i z_i`.
fn measure_mean(measure: &WignerMeasure) -> Vec<C64> {
    let n = measure.atoms()[0].z.len();
    let mut m = vec![ZERO; n];
    for a in measure.atoms() {
        for (acc, z) in m.iter_mut().zip(&a.z) {
            *acc += z * a.weight;
        }
    }
    m
}

/// Degree-2 moments of a measure, `sum_i w_i z_i z_i^T` and `sum_i w_i conj(z_i) z_i^T`.
fn measure_moments(measure: &WignerMeasure) -> Moments {
    let n = measure.atoms()[0].z.len();
    let mut mom = Moments::zeros(n);
    mom.first = measure_mean(measure);
    for a in measure.atoms() {
        for i in 0..n {
            for j in 0..n {
                mom.pair[(i, j)] += a.z[i] * a.z[j] * a.weight;
                mom.normal[(i, j)] += a.z[i].conj() * a.z[j] * a.weight;
            }
        }
    }
    mom
}

/// `2 Re sum_m c_m wt_j[m] e^{-ik.x} m_m` per component, or its analytic curl.
fn linear_potential(
    basis: &ModeBasis,
    weights: &[Vec<f64>],
    first: &[C64],
    grid: &ParticleGrid,
    kind: PotentialKind,
    provenance: Provenance,
) -> Result<EffectivePotential> {
    basis.check_len(first.len(), "first moment")?;
    let ncomp = weights.len();
    let cells = basis.cells();
    // per-mode complex vector amplitude (before the plane wave)
    let amp: Vec<Vec<C64>> = match kind {
        PotentialKind::VectorB => {
            let mut out = vec![vec![ZERO; basis.len()]; 3];
            for (m, mode) in basis.modes().iter().enumerate() {
                let w = [weights[0][m], weights[1][m], weights[2][m]];
                let kx = cross(&mode.k, &w);
                for j in 0..3 {
                    out[j][m] = C64::new(0.0, -1.0) * kx[j] * cells[m] * first[m];
                }
            }
            out
        }
        _ => (0..ncomp).map(|j| (0..basis.len()).map(|m| cells[m] * weights[j][m] * first[m]).collect()).collect(),
    };
    let pts = grid.points();
    let components: Vec<Vec<f64>> = amp
        .iter()
        .map(|a| {
            pts.iter()
                .map(|x| {
                    2.0 * basis
                        .modes()
                        .iter()
                        .zip(a)
                        .map(|(mode, c)| (c * C64::from_polar(1.0, -dot(&mode.k, x))).re)
                        .sum::<f64>()
                })
                .collect()
        })
        .collect();
    let mut k = Vec::with_capacity(2 * basis.len());
    for mode in basis.modes() {
        k.push(mode.k.map(|v| -v));
        k.push(mode.k);
    }
    let coeff = amp.iter().map(|a| a.iter().flat_map(|c| [*c, c.conj()]).collect()).collect();
    Ok(EffectivePotential { kind, grid: *grid, components, fourier: PlaneWaveSum { k, coeff }, provenance })
}

/// Decomposition of the Wick-ordered square of the vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct WParts {
    pub total: EffectivePotential,
    /// `sum_j <a(w_x^j) a(w_x^j)>`.
    pub aa: Vec<C64>,
    /// Complex conjugate of `aa`.
    pub a_star_a_star: Vec<C64>,
    /// `sum_j ||a(w_x^j) Psi||^2`.
    pub a_star_a: Vec<f64>,
}

fn quadratic_potential(
    basis: &ModeBasis,
    weights: &[Vec<f64>],
    mom: &Moments,
    grid: &ParticleGrid,
    provenance: Provenance,
) -> Result<WParts> {
    let n = basis.len();
    if mom.pair.nrows() != n || mom.normal.nrows() != n {
        return Err(Error::Shape("second moments do not match the basis".into()));
    }
    let cells = basis.cells();
    let pts = grid.points();
    let mut aa = Vec::with_capacity(pts.len());
    let mut ada = Vec::with_capacity(pts.len());
    for x in &pts {
        let mut s_aa = ZERO;
        let mut s_ada = ZERO;
        for wt in weights {
            // u_m = c_m conj(w_x(m))
            let u: Vec<C64> = basis
                .modes()
                .iter()
                .enumerate()
                .map(|(m, mode)| C64::from_polar(cells[m] * wt[m], -dot(&mode.k, x)))
                .collect();
            for a in 0..n {
                if u[a] == ZERO {
                    continue;
                }
                let mut ra = ZERO;
                let mut rn = ZERO;
                for b in 0..n {
                    ra += mom.pair[(a, b)] * u[b];
                    rn += mom.normal[(a, b)] * u[b];
                }
                s_aa += u[a] * ra;
                s_ada += u[a].conj() * rn;
            }
        }
        aa.push(s_aa);
        ada.push(s_ada.re);
    }
    let total: Vec<f64> = aa.iter().zip(&ada).map(|(a, d)| 2.0 * a.re + 2.0 * d).collect();
    // plane waves: aa terms at -(k_a + k_b), conjugates at +(k_a + k_b), normal terms at k_a - k_b
    let mut k = Vec::with_capacity(3 * n * n);
    let mut coeff = Vec::with_capacity(3 * n * n);
    for a in 0..n {
        for b in 0..n {
            let ww: f64 = weights.iter().map(|wt| wt[a] * wt[b]).sum::<f64>() * cells[a] * cells[b];
            if ww == 0.0 {
                continue;
            }
            let (ka, kb) = (basis.modes()[a].k, basis.modes()[b].k);
            let p = mom.pair[(a, b)] * ww;
            k.push([0, 1, 2].map(|i| -(ka[i] + kb[i])));
            coeff.push(p);
            k.push([0, 1, 2].map(|i| ka[i] + kb[i]));
            coeff.push(p.conj());
            k.push([0, 1, 2].map(|i| ka[i] - kb[i]));
            coeff.push(mom.normal[(a, b)] * ww * 2.0);
        }
    }
    Ok(WParts {
        total: EffectivePotential {
            kind: PotentialKind::ScalarW,
            grid: *grid,
            components: vec![total],
            fourier: PlaneWaveSum { k, coeff: vec![coeff] },
            provenance,
        },
        a_star_a_star: aa.iter().map(|c| c.conj()).collect(),
        aa,
        a_star_a: ada,
    })
}

fn state_first(family: &FieldStateFamily, epsilon: f64) -> Result<Vec<C64>> {
    Ok(family.moments(epsilon)?.first)
}

/// `V_eps(x) = 2 Re sum_m c_m chi omega^{-1/2} e^{-ik.x} <a_eps(k_m)>`.
pub fn v_eps(
    family: &FieldStateFamily,
    epsilon: f64,
    coupling: &CouplingSpec,
    grid: &ParticleGrid,
) -> Result<EffectivePotential> {
    coupling.require(CouplingKind::NelsonScalar)?;
    let w = coupling.mode_weights(family.basis())?;
    let first = state_first(family, epsilon)?;
    linear_potential(family.basis(), &w, &first, grid, PotentialKind::ScalarV, Provenance::State { epsilon })
}

/// `V_mu(x) = sum_i w_i 2 Re <chi omega^{-1/2} e^{ik.x}, z_i>`.
pub fn v_mu(
    measure: &WignerMeasure,
    basis: &ModeBasis,
    coupling: &CouplingSpec,
    grid: &ParticleGrid,
) -> Result<EffectivePotential> {
    coupling.require(CouplingKind::NelsonScalar)?;
    let w = coupling.mode_weights(basis)?;
    linear_potential(basis, &w, &measure_mean(measure), grid, PotentialKind::ScalarV, Provenance::Measure)
}

pub fn a_eps(
    family: &FieldStateFamily,
    epsilon: f64,
    coupling: &CouplingSpec,
    grid: &ParticleGrid,
) -> Result<EffectivePotential> {
    coupling.require(CouplingKind::PfVector)?;
    let w = coupling.mode_weights(family.basis())?;
    let first = state_first(family, epsilon)?;
    linear_potential(family.basis(), &w, &first, grid, PotentialKind::VectorA, Provenance::State { epsilon })
}

pub fn a_mu(
    measure: &WignerMeasure,
    basis: &ModeBasis,
    coupling: &CouplingSpec,
    grid: &ParticleGrid,
) -> Result<EffectivePotential> {
    coupling.require(CouplingKind::PfVector)?;
    let w = coupling.mode_weights(basis)?;
    linear_potential(basis, &w, &measure_mean(measure), grid, PotentialKind::VectorA, Provenance::Measure)
}

/// Magnetic field of the state, the analytic curl of `A_eps`.
pub fn b_eps(
    family: &FieldStateFamily,
    epsilon: f64,
    coupling: &CouplingSpec,
    grid: &ParticleGrid,
) -> Result<EffectivePotential> {
    coupling.require(CouplingKind::PfVector)?;
    let w = coupling.mode_weights(family.basis())?;
    let first = state_first(family, epsilon)?;
    linear_potential(family.basis(), &w, &first, grid, PotentialKind::VectorB, Provenance::State { epsilon })
}

pub fn b_mu(
    measure: &WignerMeasure,
    basis: &ModeBasis,
    coupling: &CouplingSpec,
    grid: &ParticleGrid,
) -> Result<EffectivePotential> {
    coupling.require(CouplingKind::PfVector)?;
    let w = coupling.mode_weights(basis)?;
    linear_potential(basis, &w, &measure_mean(measure), grid, PotentialKind::VectorB, Provenance::Measure)
}

/// `W_eps = W_{a*a*} + W_{aa} + 2 W_{a*a}` from the state's second moments.
pub fn w_eps(family: &FieldStateFamily, epsilon: f64, coupling: &CouplingSpec, grid: &ParticleGrid) -> Result<WParts> {
    coupling.require(CouplingKind::PfVector)?;
    let w = coupling.mode_weights(family.basis())?;
    let mom = family.moments(epsilon)?;
    quadratic_potential(family.basis(), &w, &mom, grid, Provenance::State { epsilon })
}

/// `W_mu(x) = sum_i w_i sum_j (2 Re <w_x^j, z_i>)^2`.
pub fn w_mu(
    measure: &WignerMeasure,
    basis: &ModeBasis,
    coupling: &CouplingSpec,
    grid: &ParticleGrid,
) -> Result<EffectivePotential> {
    coupling.require(CouplingKind::PfVector)?;
    let w = coupling.mode_weights(basis)?;
    Ok(quadratic_potential(basis, &w, &measure_moments(measure), grid, Provenance::Measure)?.total)
}

/// Curl of a vector potential: spectral on periodic grids, second-order
/// differences (one-sided at the walls) on Dirichlet grids.
pub fn curl_of(a: &EffectivePotential) -> Result<EffectivePotential> {
    if a.components.len() != 3 {
        return Err(Error::Shape("curl needs a three-component field".into()));
    }
    let grid = a.grid;
    let deriv: Vec<[Vec<f64>; 3]> = match grid.boundary {
        Boundary::Periodic => a.components.iter().map(|c| spectral_gradient(&grid, c)).collect(),
        Boundary::Dirichlet => a.components.iter().map(|c| fd_gradient(&grid, c)).collect(),
    };
    // deriv[j][i] = d_i A_j
    let n = grid.size();
    let b: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let (p, q) = ((c + 1) % 3, (c + 2) % 3);
            (0..n).map(|x| deriv[q][p][x] - deriv[p][q][x]).collect()
        })
        .collect();
    // plane waves: d/dx e^{ik.x} = ik e^{ik.x}
    let mut coeff = vec![Vec::with_capacity(a.fourier.k.len()); 3];
    for (t, k) in a.fourier.k.iter().enumerate() {
        let v = [a.fourier.coeff[0][t], a.fourier.coeff[1][t], a.fourier.coeff[2][t]];
        for c in 0..3 {
            let (p, q) = ((c + 1) % 3, (c + 2) % 3);
            coeff[c].push(C64::new(0.0, 1.0) * (v[q] * k[p] - v[p] * k[q]));
        }
    }
    Ok(EffectivePotential {
        kind: PotentialKind::VectorB,
        grid,
        components: b,
        fourier: PlaneWaveSum { k: a.fourier.k.clone(), coeff },
        provenance: a.provenance,
    })
}

/// Spectral divergence of a vector field on a periodic grid.
pub fn spectral_divergence(f: &EffectivePotential) -> Result<Vec<f64>> {
    if f.grid.boundary != Boundary::Periodic || f.components.len() != 3 {
        return Err(Error::Shape("spectral divergence needs a periodic three-component field".into()));
    }
    let mut div = vec![0.0; f.grid.size()];
    for (j, c) in f.components.iter().enumerate() {
        let g = spectral_gradient(&f.grid, c);
        div.iter_mut().zip(&g[j]).for_each(|(d, v)| *d += v);
    }
    Ok(div)
}

fn spectral_gradient(grid: &ParticleGrid, f: &[f64]) -> [Vec<f64>; 3] {
    let n = grid.size();
    let mut spec: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
    fftn(&mut spec, &grid.shape(), false);
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for d in 0..grid.dim {
        let mut s: Vec<C64> = (0..n)
            .map(|i| if grid.is_nyquist(i) { ZERO } else { spec[i] * C64::new(0.0, grid.wavevector(i)[d]) })
            .collect();
        fftn(&mut s, &grid.shape(), true);
        out[d] = s.iter().map(|v| v.re / n as f64).collect();
    }
    out
}

fn fd_gradient(grid: &ParticleGrid, f: &[f64]) -> [Vec<f64>; 3] {
    let n = grid.size();
    let h = grid.spacing();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for d in 0..grid.dim {
        for flat in 0..n {
            let idx = grid.index(flat);
            let at = |o: i64| {
                let mut j = idx;
                j[d] = (idx[d] as i64 + o) as usize;
                f[grid.flat(&j)]
            };
            out[d][flat] = if idx[d] == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if idx[d] == grid.n - 1 {
                (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
            } else {
                (at(1) - at(-1)) / (2.0 * h)
            };
        }
    }
    out
}

/// Vacuum gap between the field square and its Wick-ordered form:
/// `eps sum_{modes} c chi^2/omega`, i.e. twice the sum over wavevectors on a
/// polarized basis.
pub fn wick_constant(coupling: &CouplingSpec, basis: &ModeBasis, epsilon: f64) -> Result<f64> {
    coupling.require(CouplingKind::PfVector)?;
    Ok(epsilon
        * basis
            .modes()
            .iter()
            .map(|m| m.cell * coupling.chi.eval(&m.k, &coupling.dispersion).powi(2) / coupling.dispersion.omega(&m.k))
            .sum::<f64>())
}

/// Outcome of a constructive assumption check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub functional: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Largest admitted growth of a grid functional when the k-extent doubles.
pub const GROWTH_THRESHOLD: f64 = 1.25;

/// Linear growth of the dispersion on the grid: `min omega/|k|` over the
/// outer half, and positivity of `omega`.
pub fn check_a_omega(dispersion: &Dispersion, basis: &ModeBasis) -> AssumptionCheck {
    let (ratio, min_omega) = dispersion.growth_check(basis);
    AssumptionCheck {
        name: "A_omega".into(),
        functional: "min omega(k)/|k| on the outer half-grid".into(),
        value: ratio,
        threshold: 0.0,
        passed: ratio > 0.0 && min_omega > 0.0 && ratio.is_finite(),
    }
}

fn restricted(basis: &ModeBasis, radius: f64) -> Result<ModeBasis> {
    basis.clone().restrict_to_ball(radius)
}

/// Radius of the largest ball inscribed in a box-shaped basis.
fn inscribed_radius(basis: &ModeBasis) -> f64 {
    basis.k_max() / (basis.dim() as f64).sqrt()
}

/// Weak `L^{3,inf}` norm of `chi/omega` must not grow when the k-extent doubles
/// (balls inscribed in the grid).
pub fn check_a_chi(coupling: &CouplingSpec, basis: &ModeBasis) -> Result<AssumptionCheck> {
    let r = inscribed_radius(basis);
    let weak = |b: &ModeBasis| -> Result<f64> {
        let v: Vec<f64> = b.modes().iter().map(|m| coupling.chi.eval(&m.k, &coupling.dispersion) / coupling.dispersion.omega(&m.k)).collect();
        let f = SampledFunction::from_real(&v, b.cells(), b.dim())?;
        Ok(quasinorm(&f, LorentzIndex::weak(3.0)?))
    };
    let inner = weak(&restricted(basis, r / 2.0)?)?;
    let outer = weak(&restricted(basis, r)?)?;
    let ratio = if inner > 0.0 { outer / inner } else { 1.0 };
    Ok(AssumptionCheck {
        name: "A_chi".into(),
        functional: "||chi/omega||_{L^{3,inf}} growth ratio, extent R vs R/2".into(),
        value: ratio,
        threshold: GROWTH_THRESHOLD,
        passed: ratio.is_finite() && ratio <= GROWTH_THRESHOLD,
    })
}

/// `sup |k| chi/omega` must not grow when the k-extent doubles.
pub fn check_a_chi_prime(coupling: &CouplingSpec, basis: &ModeBasis) -> Result<AssumptionCheck> {
    let r = inscribed_radius(basis);
    let sup = |b: &ModeBasis| -> f64 {
        b.modes()
            .iter()
            .map(|m| m.k_norm() * coupling.chi.eval(&m.k, &coupling.dispersion) / coupling.dispersion.omega(&m.k))
            .fold(0.0, f64::max)
    };
    let inner = sup(&restricted(basis, r / 2.0)?);
    let outer = sup(&restricted(basis, r)?);
    let ratio = if inner > 0.0 { outer / inner } else { 1.0 };
    Ok(AssumptionCheck {
        name: "A'_chi".into(),
        functional: "sup |k| chi/omega growth ratio, extent R vs R/2".into(),
        value: ratio,
        threshold: GROWTH_THRESHOLD,
        passed: ratio.is_finite() && ratio <= GROWTH_THRESHOLD,
    })
}
