//! Lorentz quasi-norms of sampled functions by exact layer-cake evaluation,
//! homogeneous Sobolev norms, and ratio checks for the Hölder, Young and
//! Fourier-product inequalities.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft::{fftn, freq_index};

/// Complex samples with their cell measures. A row-major `shape` is attached
/// when the samples come from a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    values: Vec<C64>,
    cells: Vec<f64>,
    dim: usize,
    shape: Option<Vec<usize>>,
}

impl SampledFunction {
    pub fn new(values: Vec<C64>, cells: Vec<f64>, dim: usize) -> Result<Self> {
        if values.len() != cells.len() {
            return Err(Error::Shape(format!("{} values vs {} cells", values.len(), cells.len())));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim}")));
        }
        if cells.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidParameter("cell measures must be positive and finite".into()));
        }
        if values.iter().any(|v| v.re.is_nan() || v.im.is_nan()) {
            return Err(Error::InvalidParameter("samples contain NaN".into()));
        }
        Ok(Self { values, cells, dim, shape: None })
    }

    pub fn from_real(values: &[f64], cells: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(values.iter().map(|&v| C64::new(v, 0.0)).collect(), cells, dim)
    }

    /// Samples on a uniform grid with `n` points per axis and spacing `h`.
    pub fn on_grid(values: Vec<C64>, dim: usize, n: usize, h: f64) -> Result<Self> {
        let len = n.pow(dim as u32);
        if values.len() != len {
            return Err(Error::Shape(format!("{} values for a {n}^{dim} grid", values.len())));
        }
        let mut f = Self::new(values, vec![h.powi(dim as i32); len], dim)?;
        f.shape = Some(vec![n; dim]);
        Ok(f)
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> Option<&[usize]> {
        self.shape.as_deref()
    }

    pub fn total_measure(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut f = self.clone();
        f.values.iter_mut().for_each(|v| *v *= c);
        f
    }

    /// Pointwise product on a shared sampling.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.cells != other.cells || self.dim != other.dim {
            return Err(Error::Shape("product of functions on different samplings".into()));
        }
        let mut f = self.clone();
        f.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a *= b);
        Ok(f)
    }

    /// Plain discrete `L^p` norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        self.values.iter().zip(&self.cells).map(|(v, c)| c * v.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    }

    /// Decreasing levels of `|f|` with cumulative measures of the level sets.
    /// Tied samples are merged so each level appears once.
    fn levels(&self) -> Vec<(f64, f64, usize)> {
        let mut pairs: Vec<(f64, f64)> =
            self.values.iter().zip(&self.cells).map(|(v, c)| (v.norm(), *c)).filter(|(v, _)| *v > 0.0).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut out: Vec<(f64, f64, usize)> = Vec::with_capacity(pairs.len());
        let (mut cum, mut count) = (0.0, 0usize);
        for (v, c) in pairs {
            cum += c;
            count += 1;
            match out.last_mut() {
                Some(last) if last.0 == v => {
                    last.1 = cum;
                    last.2 = count;
                }
                _ => out.push((v, cum, count)),
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzIndex {
    p: f64,
    q: f64,
}

impl LorentzIndex {
    /// `q = f64::INFINITY` selects the weak space.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::LorentzIndex(format!("p = {p} must be finite")));
        }
        if !(p >= 1.0) {
            return Err(Error::LorentzIndex(format!("p = {p} < 1")));
        }
        if !(q >= 1.0) {
            return Err(Error::LorentzIndex(format!("q = {q} < 1")));
        }
        Ok(Self { p, q })
    }

    pub fn weak(p: f64) -> Result<Self> {
        Self::new(p, f64::INFINITY)
    }

    pub fn lebesgue(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    fn inv_q(&self) -> f64 {
        if self.q.is_infinite() {
            0.0
        } else {
            1.0 / self.q
        }
    }
}

/// Normalization of the quasi-norm. `General` carries `p^{1/q}` (equal to 1 at
/// `q = inf`); `WeakP` multiplies the weak quasi-norm by `p` and coincides
/// with `General` for finite `q`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefactor {
    #[default]
    General,
    WeakP,
}

/// Quasi-norm with the default prefactor.
pub fn quasinorm(f: &SampledFunction, idx: LorentzIndex) -> f64 {
    quasinorm_with(f, idx, Prefactor::General)
}

pub fn quasinorm_with(f: &SampledFunction, idx: LorentzIndex, prefactor: Prefactor) -> f64 {
    quasinorm_resolved(f, idx, prefactor, 0)
}

/// Quasi-norm where, for `q = inf`, the supremum only runs over level sets
/// containing at least `min_cells` samples. Level sets below that size are not
/// resolved by the sampling of a singular function; finite `q` ignores the
/// floor.
pub fn quasinorm_resolved(f: &SampledFunction, idx: LorentzIndex, prefactor: Prefactor, min_cells: usize) -> f64 {
    let lv = f.levels();
    let (p, q) = (idx.p, idx.q);
    if q.is_infinite() {
        let sup = lv.iter().filter(|l| l.2 >= min_cells).map(|&(v, m, _)| v * m.powf(1.0 / p)).fold(0.0, f64::max);
        return match prefactor {
            Prefactor::General => sup,
            Prefactor::WeakP => p * sup,
        };
    }
    // the distribution function equals M_j on (v_{j+1}, v_j]
    let mut s = 0.0;
    for (j, &(v, m, _)) in lv.iter().enumerate() {
        let next = lv.get(j + 1).map_or(0.0, |l| l.0);
        s += m.powf(q / p) * (v.powf(q) - next.powf(q)) / q;
    }
    (p * s).powf(1.0 / q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

impl RatioReport {
    fn new(numerator: f64, denominator: f64) -> Result<Self> {
        if !(denominator > 0.0) || !denominator.is_finite() {
            return Err(Error::DegenerateDenominator);
        }
        Ok(Self { numerator, denominator, ratio: numerator / denominator })
    }
}

fn check_sum(lhs: f64, a: f64, b: f64, what: &str) -> Result<()> {
    if (lhs - a - b).abs() > 1e-12 {
        return Err(Error::LorentzIndex(format!("{what}: {lhs} != {a} + {b}")));
    }
    Ok(())
}

/// `||f1 f2||_{p,q} / (||f1||_{p1,q1} ||f2||_{p2,q2})` with
/// `1/p = 1/p1 + 1/p2`, `1/q = 1/q1 + 1/q2`.
pub fn holder_check(
    f1: &SampledFunction,
    f2: &SampledFunction,
    out: LorentzIndex,
    i1: LorentzIndex,
    i2: LorentzIndex,
) -> Result<RatioReport> {
    check_sum(1.0 / out.p, 1.0 / i1.p, 1.0 / i2.p, "Hölder p")?;
    check_sum(out.inv_q(), i1.inv_q(), i2.inv_q(), "Hölder q")?;
    let prod = f1.product(f2)?;
    RatioReport::new(quasinorm(&prod, out), quasinorm(f1, i1) * quasinorm(f2, i2))
}

/// Linear (zero-padded) convolution of two functions sampled on the same
/// uniform grid, returned on the `2n-1`-point sum grid.
pub fn convolve(f1: &SampledFunction, f2: &SampledFunction) -> Result<SampledFunction> {
    let (Some(s1), Some(s2)) = (f1.shape(), f2.shape()) else {
        return Err(Error::Shape("convolution needs uniform-grid samples".into()));
    };
    if s1 != s2 || f1.cells[0] != f2.cells[0] {
        return Err(Error::Shape("convolution of functions on different grids".into()));
    }
    let dim = f1.dim;
    let n = s1[0];
    let m = 2 * n;
    let big = vec![m; dim];
    let total = m.pow(dim as u32);
    let embed = |f: &SampledFunction| {
        let mut out = vec![C64::new(0.0, 0.0); total];
        for (flat, v) in f.values.iter().enumerate() {
            // row-major digits of `flat` in base n, re-encoded in base m
            let mut rem = flat;
            let mut digits = vec![0; dim];
            for d in (0..dim).rev() {
                digits[d] = rem % n;
                rem /= n;
            }
            let idx = digits.iter().fold(0, |acc, &d| acc * m + d);
            out[idx] = *v;
        }
        out
    };
    let mut a = embed(f1);
    let mut b = embed(f2);
    fftn(&mut a, &big, false);
    fftn(&mut b, &big, false);
    let h_d = f1.cells[0];
    a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
    fftn(&mut a, &big, true);
    let scale = h_d / total as f64;
    let keep = m - 1;
    let mut vals = Vec::with_capacity(keep.pow(dim as u32));
    for (flat, v) in a.iter().enumerate() {
        let mut rem = flat;
        let mut inside = true;
        for _ in 0..dim {
            if rem % m >= keep {
                inside = false;
            }
            rem /= m;
        }
        if inside {
            vals.push(v * scale);
        }
    }
    let h = h_d.powf(1.0 / dim as f64);
    SampledFunction::on_grid(vals, dim, keep, h)
}

/// `||f1 * f2||_{p,q} / (||f1||_{p1,q1} ||f2||_{p2,q2})` with
/// `1 + 1/p = 1/p1 + 1/p2`, `1/q = 1/q1 + 1/q2`, `1 < p, p1, p2 < inf`.
pub fn young_check(
    f1: &SampledFunction,
    f2: &SampledFunction,
    out: LorentzIndex,
    i1: LorentzIndex,
    i2: LorentzIndex,
) -> Result<RatioReport> {
    for p in [out.p, i1.p, i2.p] {
        if p <= 1.0 {
            return Err(Error::LorentzIndex(format!("Young needs p > 1, got {p}")));
        }
    }
    check_sum(1.0 + 1.0 / out.p, 1.0 / i1.p, 1.0 / i2.p, "Young p")?;
    check_sum(out.inv_q(), i1.inv_q(), i2.inv_q(), "Young q")?;
    let conv = convolve(f1, f2)?;
    RatioReport::new(quasinorm(&conv, out), quasinorm(f1, i1) * quasinorm(f2, i2))
}

/// Periodic box `[-L/2, L/2)^d` with `n` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicBox {
    pub dim: usize,
    pub n: usize,
    pub len: f64,
}

impl PeriodicBox {
    pub fn spacing(&self) -> f64 {
        self.len / self.n as f64
    }

    pub fn size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn point(&self, flat: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rem = flat;
        for d in (0..self.dim).rev() {
            x[d] = (((rem % self.n) as f64) - (self.n / 2) as f64) * self.spacing();
            rem /= self.n;
        }
        x
    }

    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let mut k = [0.0; 3];
        let mut rem = flat;
        for d in (0..self.dim).rev() {
            k[d] = 2.0 * PI * freq_index(rem % self.n, self.n) as f64 / self.len;
            rem /= self.n;
        }
        k
    }

    pub fn sample<F: Fn(&[f64; 3]) -> C64>(&self, f: F) -> Vec<C64> {
        (0..self.size()).map(|i| f(&self.point(i))).collect()
    }

    /// Continuum Fourier transform `(2pi)^{-d/2} int e^{-ikx} psi dx` up to a
    /// unimodular phase per frequency, on the FFT frequency layout.
    pub fn fourier_abs_layout(&self, psi: &[C64]) -> Vec<C64> {
        let mut d = psi.to_vec();
        fftn(&mut d, &vec![self.n; self.dim], false);
        let s = self.spacing().powi(self.dim as i32) / (2.0 * PI).powf(self.dim as f64 / 2.0);
        d.iter_mut().for_each(|v| *v *= s);
        d
    }

    pub fn k_cell(&self) -> f64 {
        (2.0 * PI / self.len).powi(self.dim as i32)
    }
}

/// Homogeneous Sobolev norm `|| |k|^alpha F psi ||_2` on the periodic box. For
/// `alpha > 0` the zero mode is excluded.
pub fn homogeneous_sobolev_norm(bx: &PeriodicBox, psi: &[C64], alpha: f64) -> Result<f64> {
    if psi.len() != bx.size() {
        return Err(Error::Shape(format!("{} samples on a box of {}", psi.len(), bx.size())));
    }
    let fpsi = bx.fourier_abs_layout(psi);
    let mut s = 0.0;
    for (i, v) in fpsi.iter().enumerate() {
        let k = crate::fock::norm3(&bx.wavevector(i));
        let w = if alpha == 0.0 {
            1.0
        } else if k == 0.0 {
            0.0
        } else {
            k.powf(2.0 * alpha)
        };
        s += w * v.norm_sqr();
    }
    Ok((s * bx.k_cell()).sqrt())
}

/// `||F(psi1 psi2)||_{p,q} / (||psi1||_{H^a1} ||psi2||_{H^a2})` with
/// `(a1 + a2)/d = 1/p`.
pub fn sobolev_fourier_product_ratio(
    bx: &PeriodicBox,
    psi1: &[C64],
    psi2: &[C64],
    alpha1: f64,
    alpha2: f64,
    q: f64,
) -> Result<RatioReport> {
    if !(alpha1 >= 0.0 && alpha2 >= 0.0) {
        return Err(Error::LorentzIndex("Sobolev exponents must be nonnegative".into()));
    }
    let inv_p = (alpha1 + alpha2) / bx.dim as f64;
    if !(inv_p > 0.0 && inv_p <= 1.0) {
        return Err(Error::LorentzIndex(format!("1/p = {inv_p} outside (0,1]")));
    }
    let idx = LorentzIndex::new(1.0 / inv_p, q)?;
    if psi1.len() != bx.size() || psi2.len() != bx.size() {
        return Err(Error::Shape("samples do not match the box".into()));
    }
    let prod: Vec<C64> = psi1.iter().zip(psi2).map(|(a, b)| a * b).collect();
    let fp = bx.fourier_abs_layout(&prod);
    let lhs = quasinorm(&SampledFunction::new(fp, vec![bx.k_cell(); bx.size()], bx.dim)?, idx);
    let rhs = homogeneous_sobolev_norm(bx, psi1, alpha1)? * homogeneous_sobolev_norm(bx, psi2, alpha2)?;
    RatioReport::new(lhs, rhs)
}

/// Sum of Gaussian bumps `a exp(-|x-c|^2/(2w^2))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub terms: Vec<(C64, [f64; 3], f64)>,
}

impl GaussianMixture {
    pub fn eval(&self, x: &[f64; 3]) -> C64 {
        self.terms
            .iter()
            .map(|(a, c, w)| {
                let d2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
                a * (-d2 / (2.0 * w * w)).exp()
            })
            .sum()
    }
}

/// Seeded corpus of 1-3 term mixtures in `dim` dimensions with widths in
/// `[0.8, 1.6]` and centers within `[-1.5, 1.5]`.
pub fn gaussian_mixture_corpus(seed: u64, count: usize, dim: usize) -> Vec<GaussianMixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let terms = rng.random_range(1..=3);
            GaussianMixture {
                terms: (0..terms)
                    .map(|_| {
                        let a = C64::new(rng.random_range(0.3..1.5), rng.random_range(-0.5..0.5));
                        let mut c = [0.0; 3];
                        for x in c.iter_mut().take(dim) {
                            *x = rng.random_range(-1.5..1.5);
                        }
                        (a, c, rng.random_range(0.8..1.6))
                    })
                    .collect(),
            }
        })
        .collect()
}

/// Corpus run specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub count: usize,
    /// Points per axis for each refinement.
    pub sizes: Vec<usize>,
    /// Box side length.
    pub box_len: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self { seed: 7, count: 6, sizes: vec![16, 24, 32], box_len: 12.0 }
    }
}

/// One CSV row of a corpus ratio run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub corpus_id: String,
    pub lemma_id: String,
    pub grid_size: usize,
    pub ratio_max: f64,
    pub ratio_p95: f64,
}

impl SuiteRow {
    pub const CSV_HEADER: &'static str = "corpus_id,lemma_id,grid_size,ratio_max,ratio_p95";

    pub fn csv(&self) -> String {
        format!("{},{},{},{:.12e},{:.12e}", self.corpus_id, self.lemma_id, self.grid_size, self.ratio_max, self.ratio_p95)
    }
}

fn summarize(corpus_id: &str, lemma: &str, n: usize, mut r: Vec<f64>) -> SuiteRow {
    r.sort_by(f64::total_cmp);
    let max = r.last().copied().unwrap_or(0.0);
    let p95 = if r.is_empty() { 0.0 } else { r[((r.len() - 1) as f64 * 0.95).round() as usize] };
    SuiteRow { corpus_id: corpus_id.into(), lemma_id: lemma.into(), grid_size: n, ratio_max: max, ratio_p95: p95 }
}

/// Lemma identifiers of the standard suite.
pub const SUITE_LEMMAS: [&str; 12] = [
    "holder_2.2_3.inf_6.2",
    "holder_3.2_6.2_6.inf",
    "young_3.1_1.5.inf_1.5.1",
    "embedding_6_q2_qinf",
    "embedding_3_q2_qinf",
    "embedding_3_q1_q2",
    "fourier_product_0_0.5_q2",
    "fourier_product_0_1_q2",
    "fourier_product_0.5_0.5_q2",
    "fourier_product_0.75_0.75_q2",
    "fourier_product_0.5_0.5_qinf",
    "fourier_product_0_0.5_qinf",
];

/// Runs every standard lemma over the corpus at each refinement, in d = 3.
pub fn run_suite(spec: &CorpusSpec) -> Result<Vec<SuiteRow>> {
    let corpus = gaussian_mixture_corpus(spec.seed, spec.count, 3);
    let corpus_id = format!("gm3d_seed{}_n{}", spec.seed, spec.count);
    let mut rows = Vec::new();
    let ix = |p: f64, q: f64| LorentzIndex::new(p, q);
    let inf = f64::INFINITY;
    for &n in &spec.sizes {
        let bx = PeriodicBox { dim: 3, n, len: spec.box_len };
        let h = bx.spacing();
        let sampled: Vec<Vec<C64>> = corpus.iter().map(|g| bx.sample(|x| g.eval(x))).collect();
        let funcs: Vec<SampledFunction> =
            sampled.iter().map(|v| SampledFunction::on_grid(v.clone(), 3, n, h)).collect::<Result<_>>()?;
        let pairs: Vec<(usize, usize)> = (0..funcs.len()).map(|i| (i, (i + 1) % funcs.len())).collect();
        let mut per_lemma: Vec<Vec<f64>> = vec![Vec::new(); SUITE_LEMMAS.len()];
        for &(i, j) in &pairs {
            let (f, g) = (&funcs[i], &funcs[j]);
            per_lemma[0].push(holder_check(f, g, ix(2.0, 2.0)?, ix(3.0, inf)?, ix(6.0, 2.0)?)?.ratio);
            per_lemma[1].push(holder_check(f, g, ix(3.0, 2.0)?, ix(6.0, 2.0)?, ix(6.0, inf)?)?.ratio);
            per_lemma[2].push(young_check(f, g, ix(3.0, 1.0)?, ix(1.5, inf)?, ix(1.5, 1.0)?)?.ratio);
            per_lemma[6].push(sobolev_fourier_product_ratio(&bx, &sampled[i], &sampled[j], 0.0, 0.5, 2.0)?.ratio);
            per_lemma[7].push(sobolev_fourier_product_ratio(&bx, &sampled[i], &sampled[j], 0.0, 1.0, 2.0)?.ratio);
            per_lemma[8].push(sobolev_fourier_product_ratio(&bx, &sampled[i], &sampled[j], 0.5, 0.5, 2.0)?.ratio);
            per_lemma[9].push(sobolev_fourier_product_ratio(&bx, &sampled[i], &sampled[j], 0.75, 0.75, 2.0)?.ratio);
            per_lemma[10].push(sobolev_fourier_product_ratio(&bx, &sampled[i], &sampled[j], 0.5, 0.5, inf)?.ratio);
            per_lemma[11].push(sobolev_fourier_product_ratio(&bx, &sampled[i], &sampled[j], 0.0, 0.5, inf)?.ratio);
        }
        for f in &funcs {
            per_lemma[3].push(quasinorm(f, ix(6.0, inf)?) / quasinorm(f, ix(6.0, 2.0)?));
            per_lemma[4].push(quasinorm(f, ix(3.0, inf)?) / quasinorm(f, ix(3.0, 2.0)?));
            per_lemma[5].push(quasinorm(f, ix(3.0, 2.0)?) / quasinorm(f, ix(3.0, 1.0)?));
        }
        for (lemma, r) in SUITE_LEMMAS.iter().zip(per_lemma) {
            rows.push(summarize(&corpus_id, lemma, n, r));
        }
    }
    Ok(rows)
}

/// Cell-centered `n^3` grid on `[-1,1]^3` restricted to the unit ball, sampling `1/|k|`.
pub fn inverse_k_on_ball(n: usize) -> Result<SampledFunction> {
    let h = 2.0 / n as f64;
    let mut vals = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let k = [i, j, l].map(|a| (a as f64 + 0.5 - n as f64 / 2.0) * h);
                let r = crate::fock::norm3(&k);
                if r <= 1.0 {
                    vals.push(C64::new(1.0 / r, 0.0));
                }
            }
        }
    }
    let len = vals.len();
    SampledFunction::new(vals, vec![h.powi(3); len], 3)
}

/// Smallest level set admitted in weak-norm suprema of singular samples.
pub const WEAK_NORM_MIN_CELLS: usize = 512;

/// Weak `L^{3,inf}` norm of `1/|k|` on the `n^3` ball grid with the prefactor-`p`
/// convention and resolution floor.
pub fn inverse_k_weak_norm(n: usize) -> Result<f64> {
    let f = inverse_k_on_ball(n)?;
    Ok(quasinorm_resolved(&f, LorentzIndex::weak(3.0)?, Prefactor::WeakP, WEAK_NORM_MIN_CELLS))
}

/// Closed-form value `3^{2/3} (4 pi)^{1/3}` of the weak norm above.
pub fn inverse_k_weak_norm_exact() -> f64 {
    3f64.powf(2.0 / 3.0) * (4.0 * PI).powf(1.0 / 3.0)
}
