//! Constructed catalog of quasi-classical field-state families with known
//! Wigner limits, their moments, and characteristic functionals.
//!
//! Every family is available through two independent backends: closed-form
//! moment formulas, and an explicit truncated Fock tensor whose moments are
//! obtained by contraction.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    exp_i_hermitian, ladder_matrix, poisson_cutoff, weyl_mode_matrix, Dispersion, FockState, FockTruncation, Ladder,
    ModeBasis, DEFAULT_BUDGET,
};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Moments of degree <= 2 in continuum units:
/// `first[m] = <a_eps(k_m)>`, `pair[(m,n)] = <a_eps(k_m) a_eps(k_n)>`,
/// `normal[(m,n)] = <a_eps*(k_m) a_eps(k_n)>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub first: Vec<C64>,
    pub pair: DMatrix<C64>,
    pub normal: DMatrix<C64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Self { first: vec![ZERO; n], pair: DMatrix::zeros(n, n), normal: DMatrix::zeros(n, n) }
    }

    /// Brute-force contraction of a Fock tensor.
    pub fn from_state(state: &FockState, basis: &ModeBasis) -> Result<Self> {
        let n = basis.len();
        basis.check_len(state.truncation().n_modes(), "state")?;
        let cells = basis.cells();
        let lowered: Vec<FockState> =
            (0..n).map(|m| state.ladder_apply(m, Ladder::Annihilate)).collect::<Result<_>>()?;
        let mut mom = Self::zeros(n);
        for m in 0..n {
            mom.first[m] = state.inner(&lowered[m]) / cells[m].sqrt();
            for k in 0..n {
                let s = (cells[m] * cells[k]).sqrt();
                mom.normal[(m, k)] = lowered[m].inner(&lowered[k]) / s;
                let bb = lowered[k].ladder_apply(m, Ladder::Annihilate)?;
                mom.pair[(m, k)] = state.inner(&bb) / s;
            }
        }
        Ok(mom)
    }

    pub fn max_abs_diff(&self, other: &Moments) -> f64 {
        let a = self.first.iter().zip(&other.first).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let b = (&self.pair - &other.pair).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let c = (&self.normal - &other.normal).iter().map(|c| c.norm()).fold(0.0, f64::max);
        a.max(b).max(c)
    }
}

/// Finitely-atomic probability measure on the one-excitation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerMeasure {
    atoms: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub z: Vec<C64>,
    pub weight: f64,
}

impl WignerMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if atoms.iter().any(|a| !(a.weight > 0.0)) {
            return Err(Error::InvalidParameter("atom weights must be positive".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("atom weights sum to {total}")));
        }
        let len = atoms[0].z.len();
        if atoms.iter().any(|a| a.z.len() != len || a.z.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidParameter("atoms must share a finite grid profile".into()));
        }
        Ok(Self { atoms })
    }

    pub fn dirac(z: Vec<C64>) -> Result<Self> {
        Self::new(vec![Atom { z, weight: 1.0 }])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `mu^(eta) = sum_i w_i exp(2i Re<eta, z_i>)`.
    pub fn characteristic(&self, basis: &ModeBasis, eta: &[C64]) -> C64 {
        self.atoms.iter().map(|a| a.weight * C64::from_polar(1.0, 2.0 * basis.inner(eta, &a.z).re)).sum()
    }

    /// `int ||omega^{1/2} z||^2 dmu`.
    pub fn energy(&self, basis: &ModeBasis, dispersion: &Dispersion) -> f64 {
        let w = dispersion.sample(basis);
        self.atoms
            .iter()
            .map(|a| a.weight * basis.modes().iter().zip(&a.z).zip(&w).map(|((m, z), w)| m.cell * w * z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Classical cylindrical symbol `prod_i <z, g_i> prod_j <g_j, z>` integrated
    /// against the measure.
    pub fn symbol_integral(&self, basis: &ModeBasis, creators: &[Vec<C64>], annihilators: &[Vec<C64>]) -> C64 {
        self.atoms
            .iter()
            .map(|a| {
                let mut s = C64::new(a.weight, 0.0);
                for g in creators {
                    s *= basis.inner(&a.z, g);
                }
                for g in annihilators {
                    s *= basis.inner(g, &a.z);
                }
                s
            })
            .sum()
    }
}

/// Uniform-energy class of a family: how many ladder operators a Wick
/// monomial may carry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyClass {
    Nelson,
    PauliFierz,
}

impl EnergyClass {
    pub fn max_degree(self) -> usize {
        match self {
            EnergyClass::Nelson => 1,
            EnergyClass::PauliFierz => 2,
        }
    }
}

/// Catalog entry with grid-sampled parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyKind {
    Vacuum,
    Coherent { z0: Vec<C64> },
    /// Displaced one-excitation superposition with O(eps) moment corrections.
    ExcitedCoherent { z0: Vec<C64>, g: Vec<C64> },
    /// Displaced product of single-mode squeezed vacua (squeezing `r` per mode).
    GaussianSqueezed { z0: Vec<C64>, r: f64 },
    /// Normalized superposition of two coherent states.
    TwoBranch { z1: Vec<C64>, z2: Vec<C64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Backend {
    ClosedForm,
    FockExact { tail_tol: f64, budget: usize },
}

impl Backend {
    pub fn fock_default() -> Self {
        Backend::FockExact { tail_tol: 1e-10, budget: DEFAULT_BUDGET }
    }
}

/// Field energy functionals of a state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyMoments {
    pub dgamma_omega: f64,
    pub dgamma_omega_sq: f64,
    pub dgamma2: f64,
}

impl EnergyMoments {
    /// `<1 + dGamma(omega)>`, the Nelson-grade uniform bound.
    pub fn nelson_bound(&self) -> f64 {
        1.0 + self.dgamma_omega
    }

    /// `<1 + dGamma(omega) + dGamma^(2)(omega x omega)>`.
    pub fn pf_bound(&self) -> f64 {
        1.0 + self.dgamma_omega + self.dgamma2
    }
}

/// An eps-indexed family of field states.
#[derive(Clone, Debug)]
pub struct FieldStateFamily {
    basis: ModeBasis,
    dispersion: Dispersion,
    kind: FamilyKind,
    declared_limit: Option<WignerMeasure>,
    backend: Backend,
}

/// Build a catalog family on a basis, validating admissibility.
pub fn build_family(kind: FamilyKind, basis: &ModeBasis, dispersion: Dispersion) -> Result<FieldStateFamily> {
    let n = basis.len();
    let omega = dispersion.sample(basis);
    let check = |z: &[C64], what: &str| -> Result<()> {
        basis.check_len(z.len(), what)?;
        let e: f64 = basis.modes().iter().zip(z).zip(&omega).map(|((m, z), w)| m.cell * w * z.norm_sqr()).sum();
        if !e.is_finite() || z.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("{what} is not normalizable in the omega-weighted norm")));
        }
        Ok(())
    };
    let limit = match &kind {
        FamilyKind::Vacuum => WignerMeasure::dirac(vec![ZERO; n])?,
        FamilyKind::Coherent { z0 } => {
            check(z0, "z0")?;
            WignerMeasure::dirac(z0.clone())?
        }
        FamilyKind::ExcitedCoherent { z0, g } => {
            check(z0, "z0")?;
            check(g, "g")?;
            WignerMeasure::dirac(z0.clone())?
        }
        FamilyKind::GaussianSqueezed { z0, r } => {
            check(z0, "z0")?;
            if !r.is_finite() {
                return Err(Error::InvalidParameter("squeezing must be finite".into()));
            }
            WignerMeasure::dirac(z0.clone())?
        }
        FamilyKind::TwoBranch { z1, z2 } => {
            check(z1, "z1")?;
            check(z2, "z2")?;
            if z1 == z2 {
                return Err(Error::InvalidParameter("two-branch family needs distinct branches".into()));
            }
            WignerMeasure::new(vec![Atom { z: z1.clone(), weight: 0.5 }, Atom { z: z2.clone(), weight: 0.5 }])?
        }
    };
    Ok(FieldStateFamily {
        basis: basis.clone(),
        dispersion,
        kind,
        declared_limit: Some(limit),
        backend: Backend::ClosedForm,
    })
}

impl FieldStateFamily {
    pub fn with_backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn basis(&self) -> &ModeBasis {
        &self.basis
    }

    pub fn dispersion(&self) -> Dispersion {
        self.dispersion
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn declared_limit(&self) -> Option<&WignerMeasure> {
        self.declared_limit.as_ref()
    }

    fn cells(&self) -> Vec<f64> {
        self.basis.cells()
    }

    /// Moments of degree <= 2 at `epsilon`, from the active backend.
    pub fn moments(&self, epsilon: f64) -> Result<Moments> {
        check_eps(epsilon)?;
        match self.backend {
            Backend::ClosedForm => Ok(self.closed_form_moments(epsilon)),
            Backend::FockExact { .. } => Moments::from_state(&self.fock_state(epsilon)?, &self.basis),
        }
    }

    fn closed_form_moments(&self, eps: f64) -> Moments {
        let n = self.basis.len();
        let cells = self.cells();
        let outer = |a: &[C64], b: &[C64], conj_a: bool| {
            DMatrix::from_fn(n, n, |i, j| if conj_a { a[i].conj() * b[j] } else { a[i] * b[j] })
        };
        match &self.kind {
            FamilyKind::Vacuum => Moments::zeros(n),
            FamilyKind::Coherent { z0 } => {
                Moments { first: z0.clone(), pair: outer(z0, z0, false), normal: outer(z0, z0, true) }
            }
            FamilyKind::ExcitedCoherent { z0, g } => {
                let nn = 1.0 + eps * self.basis.norm_sq(g);
                let f = eps / nn;
                let first = z0.iter().zip(g).map(|(z, g)| z + g * f).collect();
                let pair = DMatrix::from_fn(n, n, |i, j| z0[i] * z0[j] + (z0[i] * g[j] + z0[j] * g[i]) * f);
                let normal = DMatrix::from_fn(n, n, |i, j| {
                    z0[i].conj() * z0[j] + (z0[i].conj() * g[j] + g[i].conj() * z0[j]) * f + g[i].conj() * g[j] * (eps * f)
                });
                Moments { first, pair, normal }
            }
            FamilyKind::GaussianSqueezed { z0, r } => {
                let (sh, ch) = (r.sinh(), r.cosh());
                let mut pair = outer(z0, z0, false);
                let mut normal = outer(z0, z0, true);
                for m in 0..n {
                    pair[(m, m)] -= eps * sh * ch / cells[m];
                    normal[(m, m)] += eps * sh * sh / cells[m];
                }
                Moments { first: z0.clone(), pair, normal }
            }
            FamilyKind::TwoBranch { z1, z2 } => {
                let o = self.branch_overlap(z1, z2, eps);
                let nrm = 2.0 + 2.0 * o.re;
                let first = z1.iter().zip(z2).map(|(a, b)| (a + b + b * o + a * o.conj()) / nrm).collect();
                let pair = DMatrix::from_fn(n, n, |i, j| {
                    (z1[i] * z1[j] + z2[i] * z2[j] + z2[i] * z2[j] * o + z1[i] * z1[j] * o.conj()) / nrm
                });
                let normal = DMatrix::from_fn(n, n, |i, j| {
                    (z1[i].conj() * z1[j] + z2[i].conj() * z2[j] + z1[i].conj() * z2[j] * o + z2[i].conj() * z1[j] * o.conj())
                        / nrm
                });
                Moments { first, pair, normal }
            }
        }
    }

    /// `<A|B>` for the coherent branches of a two-branch family.
    fn branch_overlap(&self, z1: &[C64], z2: &[C64], eps: f64) -> C64 {
        let e = self.basis.norm_sq(z1) + self.basis.norm_sq(z2) - 2.0 * self.basis.inner(z1, z2);
        (-e / (2.0 * eps)).exp()
    }

    /// Explicit truncated Fock tensor at `epsilon`. Per-mode cutoffs follow a
    /// Poisson tail bound; the realized tail is measured and must not exceed
    /// the backend tolerance.
    pub fn fock_state(&self, epsilon: f64) -> Result<FockState> {
        check_eps(epsilon)?;
        let (tail_tol, budget) = match self.backend {
            Backend::FockExact { tail_tol, budget } => (tail_tol, budget),
            Backend::ClosedForm => (1e-10, DEFAULT_BUDGET),
        };
        let n = self.basis.len();
        let cells = self.cells();
        let amp = |z: &[C64]| -> Vec<C64> { z.iter().zip(&cells).map(|(z, c)| z * (c / epsilon).sqrt()).collect() };
        let per_tol = tail_tol / (4.0 * n.max(1) as f64);
        let (state, exact_norm_sq) = match &self.kind {
            FamilyKind::Vacuum => {
                let t = FockTruncation::with_budget(vec![0; n], epsilon, budget)?;
                (FockState::vacuum(t), 1.0)
            }
            FamilyKind::Coherent { z0 } => {
                let alpha = amp(z0);
                let factors: Vec<Vec<C64>> =
                    alpha.iter().map(|a| coherent_vector(*a, poisson_cutoff(a.norm_sqr(), per_tol))).collect();
                check_budget(&factors, budget)?;
                (FockState::product(&factors, epsilon)?, 1.0)
            }
            FamilyKind::ExcitedCoherent { z0, g } => {
                let alpha = amp(z0);
                let s: Vec<C64> = g.iter().zip(&cells).map(|(g, c)| g * (epsilon * c).sqrt()).collect();
                let nn = 1.0 + s.iter().map(|x| x.norm_sqr()).sum::<f64>();
                let factors: Vec<Vec<C64>> =
                    alpha.iter().map(|a| coherent_vector(*a, poisson_cutoff(a.norm_sqr(), per_tol) + 2)).collect();
                check_budget(&factors, budget)?;
                let base = FockState::product(&factors, epsilon)?;
                let shift: C64 = s.iter().zip(&alpha).map(|(s, a)| s * a.conj()).sum();
                let mut psi = base.clone().scaled(C64::new(1.0, 0.0) - shift);
                for m in 0..n {
                    if s[m].norm_sqr() == 0.0 {
                        continue;
                    }
                    // a_m* |alpha> in standard units is b_m*/sqrt(eps)
                    let raised = base.ladder_apply(m, Ladder::Create)?;
                    psi.add_assign_scaled(&raised, s[m] / epsilon.sqrt())?;
                }
                (psi.scaled(C64::new(1.0 / nn.sqrt(), 0.0)), 1.0)
            }
            FamilyKind::GaussianSqueezed { z0, r } => {
                let alpha = amp(z0);
                let mut factors = Vec::with_capacity(n);
                for a in &alpha {
                    let lam = a.norm_sqr() + r.sinh().powi(2);
                    let levels = 2 * poisson_cutoff(lam, 1e-16) + (20.0 * r.abs() * (1.0 + lam.sqrt())).ceil() as usize + 40;
                    let mut v = squeezed_vector(*a, *r, levels);
                    // smallest cut whose discarded mass is within the per-mode tolerance
                    let mut tail = 0.0;
                    let mut cut = v.len();
                    while cut > 1 && tail + v[cut - 1].norm_sqr() <= per_tol {
                        tail += v[cut - 1].norm_sqr();
                        cut -= 1;
                    }
                    v.truncate(cut);
                    factors.push(v);
                }
                check_budget(&factors, budget)?;
                (FockState::product(&factors, epsilon)?, 1.0)
            }
            FamilyKind::TwoBranch { z1, z2 } => {
                let (a1, a2) = (amp(z1), amp(z2));
                let cut: Vec<usize> = a1
                    .iter()
                    .zip(&a2)
                    .map(|(x, y)| poisson_cutoff(x.norm_sqr().max(y.norm_sqr()), per_tol))
                    .collect();
                let f1: Vec<Vec<C64>> = a1.iter().zip(&cut).map(|(a, &c)| coherent_vector(*a, c)).collect();
                let f2: Vec<Vec<C64>> = a2.iter().zip(&cut).map(|(a, &c)| coherent_vector(*a, c)).collect();
                check_budget(&f1, budget)?;
                let mut psi = FockState::product(&f1, epsilon)?;
                psi.add_assign_scaled(&FockState::product(&f2, epsilon)?, C64::new(1.0, 0.0))?;
                let o = self.branch_overlap(z1, z2, epsilon);
                (psi, 2.0 + 2.0 * o.re)
            }
        };
        let tail = (1.0 - state.norm_sq() / exact_norm_sq).max(0.0);
        if tail > tail_tol {
            return Err(Error::TruncationTail { tail, tol: tail_tol });
        }
        Ok(state.normalized())
    }

    /// `<Psi_eps, W_eps(eta) Psi_eps>` with `W_eps(eta) = exp(i(a*(eta) + a(eta)))`.
    pub fn weyl_expectation(&self, eta: &[C64], epsilon: f64) -> Result<C64> {
        check_eps(epsilon)?;
        self.basis.check_len(eta.len(), "eta")?;
        if eta.iter().all(|e| e.norm_sqr() == 0.0) {
            return Ok(C64::new(1.0, 0.0));
        }
        match self.backend {
            Backend::ClosedForm => Ok(self.closed_form_weyl(eta, epsilon)),
            Backend::FockExact { .. } => {
                let psi = self.fock_state(epsilon)?;
                weyl_on_state(&psi, &self.basis, eta)
            }
        }
    }

    fn closed_form_weyl(&self, eta: &[C64], eps: f64) -> C64 {
        let cells = self.cells();
        let b = &self.basis;
        // gamma_m: displacement amplitude of W_eps(eta) in standard units
        let gamma: Vec<C64> = eta.iter().zip(&cells).map(|(e, c)| C64::new(0.0, 1.0) * e * (eps * c).sqrt()).collect();
        let gauss = (-eps * b.norm_sq(eta) / 2.0).exp();
        let phase = |z: &[C64]| C64::from_polar(1.0, 2.0 * b.inner(eta, z).re);
        match &self.kind {
            FamilyKind::Vacuum => C64::new(gauss, 0.0),
            FamilyKind::Coherent { z0 } => phase(z0) * gauss,
            FamilyKind::ExcitedCoherent { z0, g } => {
                let nn = 1.0 + eps * b.norm_sq(g);
                let s = C64::new(0.0, eps) * b.inner(g, eta);
                phase(z0) * gauss / nn * (C64::new(1.0 + eps * b.norm_sq(g), 0.0) + s - s.conj() - s.norm_sqr())
            }
            FamilyKind::GaussianSqueezed { z0, r } => {
                let (sh, ch) = (r.sinh(), r.cosh());
                let e: f64 = gamma.iter().map(|g| (g * ch + g.conj() * sh).norm_sqr()).sum();
                phase(z0) * (-e / 2.0).exp()
            }
            FamilyKind::TwoBranch { z1, z2 } => {
                let a1: Vec<C64> = z1.iter().zip(&cells).map(|(z, c)| z * (c / eps).sqrt()).collect();
                let a2: Vec<C64> = z2.iter().zip(&cells).map(|(z, c)| z * (c / eps).sqrt()).collect();
                let el = |x: &[C64], y: &[C64]| coherent_weyl_element(x, y, &gamma);
                let o = self.branch_overlap(z1, z2, eps);
                (el(&a1, &a1) + el(&a2, &a2) + el(&a1, &a2) + el(&a2, &a1)) / (2.0 + 2.0 * o.re)
            }
        }
    }

    /// Field energy functionals at `epsilon` from the active backend.
    pub fn energy(&self, epsilon: f64) -> Result<EnergyMoments> {
        check_eps(epsilon)?;
        match self.backend {
            Backend::FockExact { .. } => {
                let psi = self.fock_state(epsilon)?;
                use crate::fock::DGammaSymbol::*;
                Ok(EnergyMoments {
                    dgamma_omega: psi.dgamma_expectation(&self.basis, &self.dispersion, Omega)?,
                    dgamma_omega_sq: psi.dgamma_expectation(&self.basis, &self.dispersion, OmegaSq)?,
                    dgamma2: psi.dgamma2_expectation(&self.basis, &self.dispersion)?,
                })
            }
            Backend::ClosedForm => Ok(self.closed_form_energy(epsilon)),
        }
    }

    fn closed_form_energy(&self, eps: f64) -> EnergyMoments {
        let cells = self.cells();
        let w = self.dispersion.sample(&self.basis);
        let mom = self.closed_form_moments(eps);
        let n = self.basis.len();
        let dg = |pw: i32| (0..n).map(|m| w[m].powi(pw) * cells[m] * mom.normal[(m, m)].re).sum::<f64>();
        let dgamma_omega = dg(1);
        let dgamma_omega_sq = dg(2);
        // weighted pairing sum_m omega_m c_m conj(x_m) y_m
        let ew = |x: &[C64], y: &[C64]| -> C64 { (0..n).map(|m| w[m] * cells[m] * x[m].conj() * y[m]).sum() };
        let dgamma2 = match &self.kind {
            FamilyKind::Vacuum => 0.0,
            FamilyKind::Coherent { z0 } => ew(z0, z0).re.powi(2),
            FamilyKind::ExcitedCoherent { z0, g } => {
                let nn = 1.0 + eps * self.basis.norm_sq(g);
                let e = ew(z0, z0).re;
                let l = ew(z0, g) * (eps / nn);
                let t = ew(g, g).re * eps * eps / nn;
                let x = ew(g, z0).norm_sqr() * eps * eps / nn;
                e * e + 4.0 * e * l.re + 2.0 * x + 2.0 * e * t
            }
            FamilyKind::GaussianSqueezed { z0, r } => {
                // Gaussian Wick expansion with diagonal centred moments (b units)
                let e = ew(z0, z0).re;
                let (sh, ch) = (r.sinh(), r.cosh());
                let (mc, nc) = (-eps * sh * ch, eps * sh * sh);
                let mut s = e * e;
                let mut sum_wn = 0.0;
                for m in 0..n {
                    let b = z0[m] * cells[m].sqrt();
                    let w2 = w[m] * w[m];
                    s += 2.0 * w2 * mc * (b.conj() * b.conj()).re;
                    s += 2.0 * w2 * nc * b.norm_sqr();
                    s += w2 * (mc * mc + nc * nc);
                    sum_wn += w[m] * nc;
                }
                s + 2.0 * e * sum_wn + sum_wn * sum_wn
            }
            FamilyKind::TwoBranch { z1, z2 } => {
                let o = self.branch_overlap(z1, z2, eps);
                let (e11, e22, e12, e21) = (ew(z1, z1), ew(z2, z2), ew(z1, z2), ew(z2, z1));
                ((e11 * e11 + e22 * e22 + e12 * e12 * o + e21 * e21 * o.conj()) / (2.0 + 2.0 * o.re)).re
            }
        };
        EnergyMoments { dgamma_omega, dgamma_omega_sq, dgamma2 }
    }

    /// Expectation of the normal-ordered monomial
    /// `prod a_eps*(g_i) prod a_eps(g_j)`; total degree is capped by the
    /// energy class of the family.
    pub fn wick_monomial_expectation(
        &self,
        creators: &[Vec<C64>],
        annihilators: &[Vec<C64>],
        epsilon: f64,
        class: EnergyClass,
    ) -> Result<C64> {
        let degree = creators.len() + annihilators.len();
        if degree > class.max_degree() {
            return Err(Error::DegreeTooHigh { degree, bound: class.max_degree() });
        }
        for g in creators.iter().chain(annihilators) {
            self.basis.check_len(g.len(), "monomial profile")?;
        }
        if degree == 0 {
            return Ok(C64::new(1.0, 0.0));
        }
        let mom = self.moments(epsilon)?;
        let c = self.cells();
        let n = self.basis.len();
        let bil = |mat: &DMatrix<C64>, u: &[C64], v: &[C64]| -> C64 {
            let mut s = ZERO;
            for i in 0..n {
                for j in 0..n {
                    s += c[i] * c[j] * u[i] * v[j] * mat[(i, j)];
                }
            }
            s
        };
        let conj = |g: &[C64]| -> Vec<C64> { g.iter().map(|x| x.conj()).collect() };
        Ok(match (creators, annihilators) {
            ([g], []) => (0..n).map(|m| c[m] * g[m] * mom.first[m].conj()).sum(),
            ([], [g]) => (0..n).map(|m| c[m] * g[m].conj() * mom.first[m]).sum(),
            ([g1, g2], []) => bil(&mom.pair, &conj(g2), &conj(g1)).conj(),
            ([], [g1, g2]) => bil(&mom.pair, &conj(g1), &conj(g2)),
            ([g1], [g2]) => bil(&mom.normal, g1, &conj(g2)),
            _ => unreachable!("degree checked above"),
        })
    }
}

/// `<Psi, prod_m W_m Psi>` with each single-mode Weyl factor exponentiated on a
/// padded level space and restricted to the state's levels.
pub fn weyl_on_state(psi: &FockState, basis: &ModeBasis, eta: &[C64]) -> Result<C64> {
    basis.check_len(eta.len(), "eta")?;
    basis.check_len(psi.truncation().n_modes(), "state")?;
    let eps = psi.epsilon();
    let mut phi = psi.clone();
    for (m, mode) in basis.modes().iter().enumerate() {
        let beta = eta[m] * mode.cell.sqrt();
        if beta.norm_sqr() == 0.0 {
            continue;
        }
        let n_max = psi.truncation().per_mode_max()[m];
        let spread = eps * beta.norm_sqr();
        let pad = 40 + n_max / 2 + (8.0 * (spread + (spread * n_max as f64).sqrt())).ceil() as usize;
        let u = weyl_mode_matrix(beta, eps, n_max + 1 + pad);
        let block = u.view((0, 0), (n_max + 1, n_max + 1)).into_owned();
        phi = phi.apply_mode_matrix(m, &block)?;
    }
    Ok(psi.inner(&phi))
}

/// `<x| D(gamma) |y>` for multi-mode coherent states in standard units.
fn coherent_weyl_element(x: &[C64], y: &[C64], gamma: &[C64]) -> C64 {
    let mut log = ZERO;
    for ((x, y), g) in x.iter().zip(y).zip(gamma) {
        let d = g + y;
        log += (g * y.conj() - g.conj() * y) / 2.0;
        log += -x.norm_sqr() / 2.0 - d.norm_sqr() / 2.0 + x.conj() * d;
    }
    log.exp()
}

/// Truncated coherent-state coefficients `e^{-|a|^2/2} a^n / sqrt(n!)`.
pub fn coherent_vector(alpha: C64, n_max: usize) -> Vec<C64> {
    let mut v = Vec::with_capacity(n_max + 1);
    let mut c = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    v.push(c);
    for n in 1..=n_max {
        c = c * alpha / (n as f64).sqrt();
        v.push(c);
    }
    v
}

/// Truncated `D(alpha) S(r) |0>` with `S(r) = exp(r (a^2 - a*^2) / 2)`, built on a
/// padded level space.
pub fn squeezed_vector(alpha: C64, r: f64, n_max: usize) -> Vec<C64> {
    let pad = n_max + 40;
    let levels = pad + 1;
    let mut sq = vec![ZERO; levels];
    let t = -r.tanh();
    let mut c = 1.0 / r.cosh().sqrt();
    for n in 0..=pad / 2 {
        sq[2 * n] = C64::new(c, 0.0);
        // ratio of successive terms sqrt((2n+2)!)/(2^{n+1}(n+1)!) / (sqrt((2n)!)/(2^n n!))
        c *= t * (((2 * n + 1) * (2 * n + 2)) as f64).sqrt() / (2.0 * (n + 1) as f64);
    }
    let a = ladder_matrix(pad, 1.0, Ladder::Annihilate);
    // D(alpha) = exp(i X), X = -i (alpha a* - conj(alpha) a)
    let x = DMatrix::<C64>::from_fn(levels, levels, |i, j| {
        C64::new(0.0, -1.0) * (alpha * a[(j, i)] - alpha.conj() * a[(i, j)])
    });
    let d = exp_i_hermitian(&x);
    let full = d * nalgebra::DVector::from_vec(sq);
    full.iter().take(n_max + 1).copied().collect()
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {eps} not in (0,1)")));
    }
    Ok(())
}

fn check_budget(factors: &[Vec<C64>], budget: usize) -> Result<()> {
    let mut dim: usize = 1;
    for f in factors {
        dim = dim.saturating_mul(f.len());
    }
    if dim > budget {
        return Err(Error::BudgetExceeded { dim, budget });
    }
    Ok(())
}

/// Gaussian profile `amplitude * exp(-|k - center|^2 / (2 width^2))`, optionally
/// restricted to one polarization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianProfile {
    pub amplitude: [f64; 2],
    pub center: [f64; 3],
    pub width: f64,
    #[serde(default)]
    pub polarization: Option<u8>,
}

impl GaussianProfile {
    pub fn sample(terms: &[GaussianProfile], basis: &ModeBasis) -> Vec<C64> {
        basis.sample(|k, pol| {
            terms
                .iter()
                .filter(|t| t.polarization.is_none() || t.polarization == pol)
                .map(|t| {
                    let d2: f64 = (0..3).map(|a| (k[a] - t.center[a]).powi(2)).sum();
                    C64::new(t.amplitude[0], t.amplitude[1]) * (-d2 / (2.0 * t.width * t.width)).exp()
                })
                .sum()
        })
    }
}

/// Serializable family descriptor (profiles, not raw tensors).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilySpec {
    Vacuum,
    Coherent { z0: Vec<GaussianProfile> },
    ExcitedCoherent { z0: Vec<GaussianProfile>, g: Vec<GaussianProfile> },
    GaussianSqueezed { z0: Vec<GaussianProfile>, r: f64 },
    TwoBranch { z1: Vec<GaussianProfile>, z2: Vec<GaussianProfile> },
}

impl FamilySpec {
    pub fn sample(&self, basis: &ModeBasis) -> FamilyKind {
        let s = |p: &[GaussianProfile]| GaussianProfile::sample(p, basis);
        match self {
            FamilySpec::Vacuum => FamilyKind::Vacuum,
            FamilySpec::Coherent { z0 } => FamilyKind::Coherent { z0: s(z0) },
            FamilySpec::ExcitedCoherent { z0, g } => FamilyKind::ExcitedCoherent { z0: s(z0), g: s(g) },
            FamilySpec::GaussianSqueezed { z0, r } => FamilyKind::GaussianSqueezed { z0: s(z0), r: *r },
            FamilySpec::TwoBranch { z1, z2 } => FamilyKind::TwoBranch { z1: s(z1), z2: s(z2) },
        }
    }

    pub fn build(&self, basis: &ModeBasis, dispersion: Dispersion) -> Result<FieldStateFamily> {
        build_family(self.sample(basis), basis, dispersion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Mode;

    fn two_modes() -> ModeBasis {
        ModeBasis::new(
            vec![
                Mode { k: [0.7, 0.0, 0.0], cell: 0.5, polarization: None },
                Mode { k: [-1.3, 0.0, 0.0], cell: 0.8, polarization: None },
            ],
            1,
        )
        .unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn catalog() -> Vec<FamilyKind> {
        let z0 = vec![c(0.9, 0.3), c(-0.4, 0.5)];
        vec![
            FamilyKind::Vacuum,
            FamilyKind::Coherent { z0: z0.clone() },
            FamilyKind::ExcitedCoherent { z0: z0.clone(), g: vec![c(0.5, -0.2), c(0.3, 0.7)] },
            FamilyKind::GaussianSqueezed { z0: z0.clone(), r: 0.3 },
            FamilyKind::TwoBranch { z1: z0, z2: vec![c(-0.2, 0.1), c(0.6, 0.0)] },
        ]
    }

    #[test]
    fn backends_agree_on_moments_weyl_and_energy() {
        let basis = two_modes();
        let eta = vec![c(0.4, -0.3), c(0.2, 0.5)];
        for kind in catalog() {
            let fam = build_family(kind.clone(), &basis, Dispersion::Massless).unwrap();
            let fock = fam.clone().with_backend(Backend::fock_default());
            for eps in [0.4, 0.25] {
                let fm = fock.moments(eps).unwrap_or_else(|e| panic!("{kind:?}: {e}"));
                let d = fam.moments(eps).unwrap().max_abs_diff(&fm);
                assert!(d < 1e-8, "{kind:?} eps {eps}: moment diff {d}");
                let w1 = fam.weyl_expectation(&eta, eps).unwrap();
                let w2 = fock.weyl_expectation(&eta, eps).unwrap();
                assert!((w1 - w2).norm() < 1e-8, "{kind:?}: weyl {w1} vs {w2}");
                let e1 = fam.energy(eps).unwrap();
                let e2 = fock.energy(eps).unwrap();
                assert!((e1.dgamma_omega - e2.dgamma_omega).abs() < 1e-8, "{kind:?}: {e1:?} {e2:?}");
                assert!((e1.dgamma_omega_sq - e2.dgamma_omega_sq).abs() < 1e-8, "{kind:?}: {e1:?} {e2:?}");
                assert!((e1.dgamma2 - e2.dgamma2).abs() < 1e-7, "{kind:?}: {e1:?} {e2:?}");
            }
        }
    }

    #[test]
    fn weyl_at_zero_is_one() {
        let basis = two_modes();
        let zero = vec![C64::new(0.0, 0.0); 2];
        for kind in catalog() {
            let fam = build_family(kind, &basis, Dispersion::Massless).unwrap();
            assert_eq!(fam.weyl_expectation(&zero, 0.3).unwrap(), C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn vacuum_declares_dirac_at_zero() {
        let fam = build_family(FamilyKind::Vacuum, &two_modes(), Dispersion::Massless).unwrap();
        let lim = fam.declared_limit().unwrap();
        assert_eq!(lim.atoms().len(), 1);
        assert!(lim.atoms()[0].z.iter().all(|z| z.norm() == 0.0));
        assert_eq!(fam.moments(0.1).unwrap(), Moments::zeros(2));
    }

    #[test]
    fn coherent_first_moment_is_eps_independent() {
        let basis = two_modes();
        let z0 = vec![c(0.9, 0.3), c(-0.4, 0.5)];
        let fam = build_family(FamilyKind::Coherent { z0: z0.clone() }, &basis, Dispersion::Massless)
            .unwrap()
            .with_backend(Backend::fock_default());
        for eps in [0.5, 0.25, 0.125] {
            let m = fam.moments(eps).unwrap();
            for (a, b) in m.first.iter().zip(&z0) {
                assert!((a - b).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn monomial_degree_bound_is_enforced() {
        let basis = two_modes();
        let fam = build_family(catalog()[2].clone(), &basis, Dispersion::Massless).unwrap();
        let g = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let err = fam.wick_monomial_expectation(&[g.clone()], &[g.clone()], 0.2, EnergyClass::Nelson).unwrap_err();
        assert_eq!(err, Error::DegreeTooHigh { degree: 2, bound: 1 });
        assert_eq!(fam.wick_monomial_expectation(&[], &[], 0.2, EnergyClass::Nelson).unwrap(), C64::new(1.0, 0.0));
        let lim = fam.declared_limit().unwrap();
        assert_eq!(lim.symbol_integral(&basis, &[], &[]), C64::new(1.0, 0.0));
    }

    #[test]
    fn coherent_monomials_match_symbol() {
        let basis = two_modes();
        let z0 = vec![c(0.9, 0.3), c(-0.4, 0.5)];
        let fam = build_family(FamilyKind::Coherent { z0 }, &basis, Dispersion::Massless).unwrap();
        let lim = fam.declared_limit().unwrap().clone();
        let g1 = vec![c(0.3, 0.1), c(-0.7, 0.2)];
        let g2 = vec![c(0.1, -0.5), c(0.4, 0.4)];
        let cases: Vec<(Vec<Vec<C64>>, Vec<Vec<C64>>)> = vec![
            (vec![g1.clone()], vec![]),
            (vec![], vec![g1.clone()]),
            (vec![g1.clone(), g2.clone()], vec![]),
            (vec![], vec![g1.clone(), g2.clone()]),
            (vec![g1.clone()], vec![g2.clone()]),
        ];
        for (cr, an) in cases {
            let q = fam.wick_monomial_expectation(&cr, &an, 0.3, EnergyClass::PauliFierz).unwrap();
            let cl = lim.symbol_integral(&basis, &cr, &an);
            assert!((q - cl).norm() < 1e-12, "{q} vs {cl}");
        }
    }

    #[test]
    fn inadmissible_profile_is_rejected() {
        let basis = two_modes();
        let bad = vec![c(f64::NAN, 0.0), c(0.0, 0.0)];
        assert!(build_family(FamilyKind::Coherent { z0: bad }, &basis, Dispersion::Massless).is_err());
        assert!(build_family(FamilyKind::Coherent { z0: vec![c(1.0, 0.0)] }, &basis, Dispersion::Massless).is_err());
    }

    #[test]
    fn truncation_tail_is_a_hard_error() {
        let basis = two_modes();
        let fam = build_family(FamilyKind::Coherent { z0: vec![c(3.0, 0.0), c(3.0, 0.0)] }, &basis, Dispersion::Massless)
            .unwrap()
            .with_backend(Backend::FockExact { tail_tol: 1e-10, budget: 100 });
        assert!(matches!(fam.fock_state(0.01), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn squeezed_vector_is_normalized() {
        let v = squeezed_vector(C64::new(1.0, 0.5), 0.4, 60);
        let n: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }
}
