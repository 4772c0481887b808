//! Linear symplectic maps of ℝ^{2l}, their factorization into dilations,
//! lower shears and the Fourier transform, and the quantized actions on profiles.
//!
//! Words are stored in application order: `gens[0]` acts first, so the matrix
//! of a word is M(gens[last])···M(gens[0]).

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::fft::{fft_axes, for_each_lane, signed_index};
use crate::grid::{semiclassical_fourier, Field, Grid};
use crate::interp::{spectral_derivative, TrigInterpolator};
use crate::states::Profile;

/// Symplecticity tolerance.
pub const SYMPLECTIC_TOL: f64 = 1e-10;
/// Intermediate Nyquist-shell mass that aborts `mp_apply`.
pub const MP_ALIASING_TOL: f64 = 1e-6;

pub type Mat = DMatrix<f64>;

/// J = [[0, I], [−I, 0]].
pub fn j_matrix(l: usize) -> Mat {
    let mut j = Mat::zeros(2 * l, 2 * l);
    for i in 0..l {
        j[(i, l + i)] = 1.0;
        j[(l + i, i)] = -1.0;
    }
    j
}

fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// A 2l×2l real symplectic matrix in (u, μ) block order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpMatrix {
    m: Mat,
}

impl SpMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if m.nrows() != m.ncols() || !m.nrows().is_multiple_of(2) || m.nrows() == 0 {
            return Err(Error::Dimension(format!("{}x{} is not 2l x 2l", m.nrows(), m.ncols())));
        }
        let d = symplectic_defect(&m);
        if d > SYMPLECTIC_TOL * (1.0 + max_abs(&m).powi(2)) {
            return Err(Error::NotSymplectic { defect: d });
        }
        Ok(Self { m })
    }

    pub fn from_row_major(l: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != 4 * l * l {
            return Err(Error::Dimension(format!("{} entries for Sp({})", entries.len(), 2 * l)));
        }
        Self::new(Mat::from_row_slice(2 * l, 2 * l, entries))
    }

    pub fn identity(l: usize) -> Self {
        Self { m: Mat::identity(2 * l, 2 * l) }
    }

    pub fn j(l: usize) -> Self {
        Self { m: j_matrix(l) }
    }

    /// Rotation by θ in every (u_i, μ_i) plane.
    pub fn rotation(l: usize, theta: f64) -> Self {
        let mut m = Mat::zeros(2 * l, 2 * l);
        for i in 0..l {
            m[(i, i)] = theta.cos();
            m[(i, l + i)] = theta.sin();
            m[(l + i, i)] = -theta.sin();
            m[(l + i, l + i)] = theta.cos();
        }
        Self { m }
    }

    pub fn l(&self) -> usize {
        self.m.nrows() / 2
    }
    pub fn matrix(&self) -> &Mat {
        &self.m
    }
    pub fn block(&self, r: usize, c: usize) -> Mat {
        let l = self.l();
        self.m.view((r * l, c * l), (l, l)).into_owned()
    }
    pub fn a(&self) -> Mat {
        self.block(0, 0)
    }
    pub fn b(&self) -> Mat {
        self.block(0, 1)
    }
    pub fn c(&self) -> Mat {
        self.block(1, 0)
    }
    pub fn d(&self) -> Mat {
        self.block(1, 1)
    }

    pub fn mul(&self, other: &SpMatrix) -> SpMatrix {
        SpMatrix { m: &self.m * &other.m }
    }

    /// S⁻¹ = −J Sᵀ J.
    pub fn inverse(&self) -> SpMatrix {
        let j = j_matrix(self.l());
        SpMatrix { m: -(&j * self.m.transpose() * &j) }
    }

    pub fn defect(&self) -> f64 {
        symplectic_defect(&self.m)
    }

    pub fn row_major(&self) -> Vec<f64> {
        let n = self.m.nrows();
        (0..n * n).map(|k| self.m[(k / n, k % n)]).collect()
    }
}

/// max |SᵀJS − J|.
pub fn symplectic_defect(m: &Mat) -> f64 {
    let j = j_matrix(m.nrows() / 2);
    max_abs(&(m.transpose() * &j * m - j))
}

/// One generator of the metaplectic group.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// [[B, 0], [0, B^{-T}]], acting by ψ ↦ |det B|^{-1/2}ψ(B⁻¹u).
    Dilation(Mat),
    /// [[I, 0], [C, I]] with C symmetric, acting by ψ ↦ e^{iu·Cu/2}ψ.
    Shear(Mat),
    /// J, acting by the unitary Fourier transform.
    Fourier,
}

impl Generator {
    pub fn matrix(&self, l: usize) -> Mat {
        match self {
            Generator::Dilation(b) => {
                let bit = b.clone().try_inverse().map(|x| x.transpose()).unwrap_or_else(|| Mat::zeros(l, l));
                let mut m = Mat::zeros(2 * l, 2 * l);
                m.view_mut((0, 0), (l, l)).copy_from(b);
                m.view_mut((l, l), (l, l)).copy_from(&bit);
                m
            }
            Generator::Shear(c) => {
                let mut m = Mat::identity(2 * l, 2 * l);
                m.view_mut((l, 0), (l, l)).copy_from(c);
                m
            }
            Generator::Fourier => j_matrix(l),
        }
    }

    fn is_identity(&self, l: usize) -> bool {
        match self {
            Generator::Dilation(b) => max_abs(&(b - Mat::identity(l, l))) <= 1e-14,
            Generator::Shear(c) => max_abs(c) <= 1e-14,
            Generator::Fourier => false,
        }
    }

    fn is_parity(&self, l: usize) -> bool {
        matches!(self, Generator::Dilation(b) if max_abs(&(b + Mat::identity(l, l))) <= 1e-14)
    }
}

/// An ordered product of generators (application order).
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorWord {
    pub l: usize,
    pub gens: Vec<Generator>,
}

impl GeneratorWord {
    pub fn new(l: usize, gens: Vec<Generator>) -> Self {
        Self { l, gens }
    }

    pub fn empty(l: usize) -> Self {
        Self { l, gens: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    /// M(last)···M(first).
    pub fn matrix(&self) -> Mat {
        self.gens.iter().fold(Mat::identity(2 * self.l, 2 * self.l), |acc, g| g.matrix(self.l) * acc)
    }

    /// `self` followed by `then`.
    pub fn then(&self, then: &GeneratorWord) -> GeneratorWord {
        let mut gens = self.gens.clone();
        gens.extend(then.gens.iter().cloned());
        GeneratorWord { l: self.l, gens }
    }

    /// The exact operator inverse (F⁻¹ = parity∘F).
    pub fn inverse(&self) -> Result<GeneratorWord> {
        let l = self.l;
        let mut gens = Vec::with_capacity(self.gens.len() + 1);
        for g in self.gens.iter().rev() {
            match g {
                Generator::Dilation(b) => gens.push(Generator::Dilation(
                    b.clone().try_inverse().ok_or_else(|| Error::Singular("dilation block".to_string()))?,
                )),
                Generator::Shear(c) => gens.push(Generator::Shear(-c)),
                Generator::Fourier => {
                    gens.push(Generator::Dilation(-Mat::identity(l, l)));
                    gens.push(Generator::Fourier);
                }
            }
        }
        Ok(GeneratorWord { l, gens }.simplified())
    }

    /// Operator-exact rewriting: drop identities, merge neighbours, F·F = parity,
    /// and fold the central parity into a dilation.
    pub fn simplified(&self) -> GeneratorWord {
        let l = self.l;
        let mut parity = false;
        let mut out: Vec<Generator> = Vec::new();
        for g in &self.gens {
            if g.is_parity(l) {
                parity = !parity;
                continue;
            }
            match (out.last_mut(), g) {
                (Some(Generator::Dilation(b0)), Generator::Dilation(b1)) => {
                    *b0 = b1 * &*b0;
                }
                (Some(Generator::Shear(c0)), Generator::Shear(c1)) => {
                    *c0 += c1;
                }
                (Some(Generator::Fourier), Generator::Fourier) => {
                    out.pop();
                    parity = !parity;
                }
                _ => out.push(g.clone()),
            }
            if out.last().is_some_and(|h| h.is_identity(l)) {
                out.pop();
            } else if out.last().is_some_and(|h| h.is_parity(l)) {
                out.pop();
                parity = !parity;
            }
        }
        if parity {
            if let Some(pos) = out.iter().position(|g| matches!(g, Generator::Dilation(_))) {
                if let Generator::Dilation(b) = &mut out[pos] {
                    *b = -&*b;
                }
            } else {
                out.push(Generator::Dilation(-Mat::identity(l, l)));
            }
        }
        GeneratorWord { l, gens: out }
    }
}

fn sym(m: Mat) -> Mat {
    (&m + m.transpose()) * 0.5
}

/// Largest chirp |C| or stretch max(|B|, |B⁻¹|) among the generators of a word.
pub fn word_distortion(w: &GeneratorWord) -> f64 {
    w.gens
        .iter()
        .map(|g| match g {
            Generator::Shear(c) => max_abs(c),
            Generator::Dilation(b) => {
                let inv = b.clone().try_inverse().map_or(f64::INFINITY, |bi| max_abs(&bi));
                max_abs(b).max(inv)
            }
            Generator::Fourier => 1.0,
        })
        .fold(1.0, f64::max)
}

fn sigma_min(m: &Mat) -> f64 {
    m.clone().svd(false, false).singular_values.iter().fold(f64::INFINITY, |a, &v| a.min(v))
}

/// [Shear(B⁻¹A), Fourier, Dilation(B), Shear(DB⁻¹)] for invertible B.
fn factor_invertible_b(s: &Mat, l: usize) -> Result<Vec<Generator>> {
    let a = s.view((0, 0), (l, l)).into_owned();
    let b = s.view((0, l), (l, l)).into_owned();
    let d = s.view((l, l), (l, l)).into_owned();
    let bi = b.clone().try_inverse().ok_or_else(|| Error::Singular("B block".to_string()))?;
    Ok(vec![
        Generator::Shear(sym(&bi * a)),
        Generator::Fourier,
        Generator::Dilation(b),
        Generator::Shear(sym(d * bi)),
    ])
}

/// Factor S into a word of length ≤ 6.
///
/// Candidates are S, S·J and S·L(cI)·J for c in {1, 2, −1, 1/2}, where L is the lower
/// shear. Among candidates with invertible B block the word with the smallest
/// [`word_distortion`] is used, the earliest on ties.
pub fn sp_factor(s: &SpMatrix) -> Result<GeneratorWord> {
    let d = s.defect();
    if d > SYMPLECTIC_TOL * (1.0 + max_abs(s.matrix()).powi(2)) {
        return Err(Error::NotSymplectic { defect: d });
    }
    let l = s.l();
    let id = Mat::identity(l, l);
    let jinv = vec![Generator::Dilation(-&id), Generator::Fourier];
    let mut cands: Vec<(Mat, Vec<Generator>)> = vec![(s.matrix().clone(), Vec::new())];
    cands.push((s.matrix() * j_matrix(l), jinv.clone()));
    for &c in &[1.0, 2.0, -1.0, 0.5] {
        let shear = Generator::Shear(&id * c).matrix(l);
        let mut prefix = vec![Generator::Shear(&id * -c)];
        prefix.extend(jinv.iter().cloned());
        cands.push((s.matrix() * shear * j_matrix(l), prefix));
    }
    let mut best: Option<(f64, GeneratorWord)> = None;
    for (m, prefix) in &cands {
        if sigma_min(&m.view((0, l), (l, l)).into_owned()) < 1e-12 {
            continue;
        }
        let mut gens = prefix.clone();
        gens.extend(factor_invertible_b(m, l)?);
        let w = GeneratorWord { l, gens }.simplified();
        let cost = word_distortion(&w);
        if best.as_ref().is_none_or(|(c, _)| cost < c * (1.0 - 1e-9)) {
            best = Some((cost, w));
        }
    }
    let (_, w) = best.ok_or_else(|| Error::Singular("no candidate with invertible B block".to_string()))?;
    debug_assert!(w.len() <= 6);
    Ok(w)
}

fn check_alias(p: &Profile, what: &str) -> Result<()> {
    let f = Field::new(p.grid.clone(), 1.0, p.values.clone())?;
    let frac = f.nyquist_fraction();
    if frac > MP_ALIASING_TOL {
        return Err(Error::Aliasing { fraction: frac, context: what.to_string() });
    }
    if frac > 1e-8 {
        log::warn!("{what}: Nyquist-shell mass {frac:.3e}");
    }
    Ok(())
}

/// Apply one generator to a profile.
pub fn apply_generator(g: &Generator, prof: &Profile) -> Result<Profile> {
    let l = prof.dim();
    let out = match g {
        Generator::Dilation(b) => {
            if b.nrows() != l {
                return Err(Error::Dimension("dilation block size".to_string()));
            }
            let det = b.determinant();
            if det.abs() < 1e-14 {
                return Err(Error::Singular(format!("dilation with det {det:.3e}")));
            }
            if max_abs(&(b + Mat::identity(l, l))) <= 1e-14 {
                parity(prof)
            } else {
                let bi = b.clone().try_inverse().ok_or_else(|| Error::Singular("dilation".to_string()))?;
                let it = prof.interpolator();
                let sc = det.abs().powf(-0.5);
                let mut y = vec![0.0; l];
                prof.map(|u, _| {
                    for i in 0..l {
                        y[i] = (0..l).map(|k| bi[(i, k)] * u[k]).sum();
                    }
                    it.eval(&y) * sc
                })
            }
        }
        Generator::Shear(c) => prof.map(|u, v| {
            let mut q = 0.0;
            for i in 0..l {
                for k in 0..l {
                    q += u[i] * c[(i, k)] * u[k];
                }
            }
            v * C64::from_polar(1.0, q / 2.0)
        }),
        Generator::Fourier => {
            let f = Field::new(prof.grid.clone(), 1.0, prof.values.clone())?;
            let ff = crate::grid::semiclassical_fourier_quiet(&f, 1);
            let dual = prof.grid.dual(1.0);
            if dual.compatible(&prof.grid) {
                Profile { grid: prof.grid.clone(), values: ff, base_point: prof.base_point.clone() }
            } else {
                let it = TrigInterpolator::new(&dual, &ff);
                let mut r = Profile::from_fn(&prof.grid, |u| it.eval(u));
                r.base_point = prof.base_point.clone();
                r
            }
        }
    };
    Ok(out)
}

/// ψ ↦ ψ(−u), exact on the periodic grid.
fn parity(prof: &Profile) -> Profile {
    let g = &prof.grid;
    let mut idx = vec![0usize; g.dim()];
    let values = (0..g.len())
        .map(|j| {
            g.multi_index(j, &mut idx);
            let src = idx.iter().enumerate().fold(0usize, |acc, (a, &m)| acc * g.size(a) + (g.size(a) - m) % g.size(a));
            prof.values[src]
        })
        .collect();
    Profile { grid: g.clone(), values, base_point: prof.base_point.clone() }
}

/// Apply a word left to right, checking each intermediate for aliasing.
pub fn mp_apply(word: &GeneratorWord, prof: &Profile) -> Result<Profile> {
    if prof.dim() != word.l {
        return Err(Error::Dimension(format!("word on Sp({}) applied to a {}-D profile", 2 * word.l, prof.dim())));
    }
    let mut cur = prof.clone();
    for (k, g) in word.gens.iter().enumerate() {
        cur = apply_generator(g, &cur)?;
        check_alias(&cur, &format!("mp_apply step {k}"))?;
    }
    Ok(cur)
}

/// Heisenberg Lie-algebra element; a translates u, b translates μ, c is central.
#[derive(Clone, Debug, PartialEq)]
pub struct HeisenbergElement {
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub c: C64,
}

impl HeisenbergElement {
    pub fn real(a: &[f64], b: &[f64], c: f64) -> Self {
        Self {
            a: a.iter().map(|&v| C64::new(v, 0.0)).collect(),
            b: b.iter().map(|&v| C64::new(v, 0.0)).collect(),
            c: C64::new(c, 0.0),
        }
    }

    /// The phase-space vector (a, b), if real.
    pub fn as_real_vector(&self) -> Option<Vec<f64>> {
        if self.a.iter().chain(&self.b).any(|v| v.im != 0.0) {
            return None;
        }
        Some(self.a.iter().chain(&self.b).map(|v| v.re).collect())
    }

    /// S·(a, b), central part unchanged.
    pub fn transformed(&self, s: &Mat) -> Result<Self> {
        let v = self.as_real_vector().ok_or_else(|| Error::InvalidArgument("complex Heisenberg element".to_string()))?;
        let l = self.a.len();
        let w: Vec<f64> = (0..2 * l).map(|i| (0..2 * l).map(|k| s[(i, k)] * v[k]).sum()).collect();
        Ok(Self::real(&w[..l], &w[l..], self.c.re).with_central(self.c))
    }

    fn with_central(mut self, c: C64) -> Self {
        self.c = c;
        self
    }
}

/// (1/i)Σa_j∂_jψ − (b·u)ψ + icψ.
pub fn heisenberg_drho(xi: &HeisenbergElement, prof: &Profile) -> Result<Profile> {
    let l = prof.dim();
    if xi.a.len() != l || xi.b.len() != l {
        return Err(Error::Dimension("Heisenberg element size".to_string()));
    }
    let mi = C64::new(0.0, -1.0);
    let mut out = prof.map(|u, v| {
        let bu: C64 = xi.b.iter().zip(u).map(|(b, x)| b * x).sum();
        v * (C64::new(0.0, 1.0) * xi.c - bu)
    });
    for j in 0..l {
        if xi.a[j] != C64::new(0.0, 0.0) {
            let d = prof.derivative(j, 1);
            for (o, dv) in out.values.iter_mut().zip(&d.values) {
                *o += mi * xi.a[j] * dv;
            }
        }
    }
    Ok(out)
}

/// ρ(v) = exp(−i·dρ(v)) = e^{ib·u}e^{−a·∂}e^{−ia·b/2}e^{c}, translation done spectrally.
pub fn heisenberg_exp(xi: &HeisenbergElement, prof: &Profile) -> Result<Profile> {
    let v = xi.as_real_vector().ok_or_else(|| Error::InvalidArgument("heisenberg_exp needs real a, b".to_string()))?;
    let l = prof.dim();
    if v.len() != 2 * l {
        return Err(Error::Dimension("Heisenberg element size".to_string()));
    }
    let (a, b) = (&v[..l], &v[l..]);
    let g = &prof.grid;
    let mut data = prof.values.clone();
    let sizes = g.sizes().to_vec();
    for ax in 0..l {
        if a[ax] == 0.0 {
            continue;
        }
        let n = sizes[ax];
        let len = g.half_width(ax);
        let mult: Vec<C64> = (0..n)
            .map(|m| {
                let k = PI * signed_index(m, n) as f64 / len;
                if m == n / 2 {
                    C64::new((PI * (n / 2) as f64 / len * a[ax]).cos(), 0.0) / n as f64
                } else {
                    C64::from_polar(1.0 / n as f64, -k * a[ax])
                }
            })
            .collect();
        fft_axes(&mut data, &sizes, &[ax], false);
        for_each_lane(&mut data, &sizes, ax, |lane| {
            for (x, m) in lane.iter_mut().zip(&mult) {
                *x *= m;
            }
        });
        fft_axes(&mut data, &sizes, &[ax], true);
    }
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let central = xi.c.exp() * C64::from_polar(1.0, -ab / 2.0);
    let shifted = Profile { grid: g.clone(), values: data, base_point: prof.base_point.clone() };
    Ok(shifted.map(|u, val| {
        let bu: f64 = b.iter().zip(u).map(|(x, y)| x * y).sum();
        val * C64::from_polar(1.0, bu) * central
    }))
}

/// Weyl quantization q^W of q(z) = ½zᵀHz, z = (u, μ), μ ↦ (1/i)∂.
pub fn quadratic_weyl(h: &Mat, prof: &Profile) -> Result<Profile> {
    let l = prof.dim();
    if h.nrows() != 2 * l || h.ncols() != 2 * l {
        return Err(Error::Dimension("Hessian size".to_string()));
    }
    let i = C64::new(0.0, 1.0);
    let g = &prof.grid;
    let d1: Vec<Vec<C64>> = (0..l).map(|j| spectral_derivative(g, &prof.values, j, 1)).collect();
    let mut out = prof.map(|u, v| {
        let mut q = 0.0;
        for a in 0..l {
            for b in 0..l {
                q += h[(a, b)] * u[a] * u[b];
            }
        }
        v * (0.5 * q)
    });
    let mut p = vec![0.0; l];
    for a in 0..l {
        for b in 0..l {
            // Σ H_uμ[a][b]·Weyl(u_a μ_b) = H·(u_a D_b + δ_ab/(2i)).
            let hab = h[(a, l + b)];
            if hab != 0.0 {
                for (jj, o) in out.values.iter_mut().enumerate() {
                    g.point(jj, &mut p);
                    *o += -i * hab * p[a] * d1[b][jj];
                    if a == b {
                        *o += hab * prof.values[jj] / (2.0 * i);
                    }
                }
            }
            let hmm = h[(l + a, l + b)];
            if hmm != 0.0 {
                let d2 = spectral_derivative(g, &d1[a], b, 1);
                for (o, v) in out.values.iter_mut().zip(d2) {
                    *o += -0.5 * hmm * v;
                }
            }
        }
    }
    Ok(out)
}

/// exp(M) by scaling and squaring with a Taylor kernel.
pub fn mat_exp(m: &Mat) -> Mat {
    let n = m.nrows();
    let norm = max_abs(m) * n as f64;
    let mut s = 0u32;
    while norm / 2f64.powi(s as i32) > 0.25 {
        s += 1;
    }
    let a = m / 2f64.powi(s as i32);
    let mut term = Mat::identity(n, n);
    let mut sum = Mat::identity(n, n);
    for k in 1..=18 {
        term = &term * &a / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Symplectic matrix as a product of `count` mild random generators.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, l: usize, count: usize) -> SpMatrix {
    let mut m = Mat::identity(2 * l, 2 * l);
    for _ in 0..count {
        let g = match rng.gen_range(0..3) {
            0 => {
                let mut b = Mat::identity(l, l);
                for v in b.iter_mut() {
                    *v += rng.gen_range(-0.3..0.3);
                }
                Generator::Dilation(b)
            }
            1 => {
                let mut c = Mat::zeros(l, l);
                for i in 0..l {
                    for k in i..l {
                        let v = rng.gen_range(-0.5..0.5);
                        c[(i, k)] = v;
                        c[(k, i)] = v;
                    }
                }
                Generator::Shear(c)
            }
            _ => Generator::Fourier,
        };
        m = g.matrix(l) * m;
    }
    SpMatrix { m }
}

/// Unitary Fourier transform of a profile (kept for callers that need it directly).
pub fn profile_fourier(prof: &Profile, sign: i32) -> Result<Profile> {
    let f = Field::new(prof.grid.clone(), 1.0, prof.values.clone())?;
    let ff = semiclassical_fourier(&f, sign)?;
    Ok(Profile { grid: ff.grid().clone(), values: ff.into_values(), base_point: prof.base_point.clone() })
}

/// Self-dual profile grid (half-width √(πN/2) on every axis).
pub fn self_dual_grid(l: usize, n: usize) -> Result<Grid> {
    Grid::cube(l, Grid::self_dual_half_width(n, 1.0), n)
}

/// Worst-case defects of the metaplectic suite over seeded random samples.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetaplecticReport {
    pub samples: usize,
    pub factor_error: f64,
    pub max_word_length: usize,
    pub unitarity_error: f64,
    pub intertwining_defect: f64,
    pub projective_defect: f64,
    pub pass: bool,
}

/// Asymmetric Gaussian test profile on a self-dual grid (N = 256 for l = 1, else 128).
pub fn test_profile(l: usize) -> Profile {
    let n = if l == 1 { 256 } else { 128 };
    let g = self_dual_grid(l, n).unwrap_or_else(|_| unreachable!());
    Profile::from_fn(&g, |u| {
        let r2: f64 = u.iter().map(|v| v * v).sum();
        C64::new(1.0 + 0.4 * u[0], 0.3 * u[l - 1]) * (-r2 / 2.0).exp()
    })
}

/// Factorization, unitarity, Heisenberg intertwining and projective homomorphism
/// on `count` random matrices for each of Sp(2) and Sp(4). Profile-level checks on
/// Sp(4) use the first `count.min(10)` samples.
pub fn metaplectic_check<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Result<MetaplecticReport> {
    let mut rep = MetaplecticReport {
        samples: count,
        factor_error: 0.0,
        max_word_length: 0,
        unitarity_error: 0.0,
        intertwining_defect: 0.0,
        projective_defect: 0.0,
        pass: false,
    };
    for l in 1..=2 {
        let psi = test_profile(l);
        let n2 = psi.norm().powi(2);
        let mats: Vec<SpMatrix> = (0..count).map(|_| random_symplectic(rng, l, 4)).collect();
        let mut words = Vec::with_capacity(count);
        for s in &mats {
            let w = sp_factor(s)?;
            rep.factor_error = rep.factor_error.max(max_abs(&(w.matrix() - s.matrix())));
            rep.max_word_length = rep.max_word_length.max(w.len());
            words.push(w);
        }
        let deep = if l == 1 { count } else { count.min(10) };
        for i in 0..deep {
            let out = mp_apply(&words[i], &psi)?;
            rep.unitarity_error = rep.unitarity_error.max((out.norm() - psi.norm()).abs() / psi.norm());
            let j = (i + 1) % count;
            let two = mp_apply(&words[i], &mp_apply(&words[j], &psi)?)?;
            let direct = mp_apply(&sp_factor(&mats[i].mul(&mats[j]))?, &psi)?;
            rep.projective_defect = rep.projective_defect.max((two.inner(&direct).norm() - n2).abs() / n2);
        }
        let mut b = Mat::identity(l, l);
        b[(0, 0)] = 1.4;
        b[(l - 1, 0)] += 0.2;
        let mut c = Mat::from_element(l, l, 0.2);
        c[(0, 0)] = 0.6;
        for g in [Generator::Dilation(b), Generator::Shear(c), Generator::Fourier] {
            let w = GeneratorWord::new(l, vec![g.clone()]);
            let base = mp_apply(&w, &psi)?;
            for k in 0..2 * l {
                let mut v = vec![0.0; 2 * l];
                v[k] = 0.5;
                let h = HeisenbergElement::real(&v[..l], &v[l..], 0.0);
                let lhs = mp_apply(&w, &heisenberg_exp(&h, &psi)?)?;
                let rhs = heisenberg_exp(&h.transformed(&g.matrix(l))?, &base)?;
                let e = lhs.axpy(C64::new(-1.0, 0.0), &rhs)?.norm() / psi.norm();
                rep.intertwining_defect = rep.intertwining_defect.max(e);
            }
        }
    }
    rep.pass = rep.factor_error <= 1e-10
        && rep.max_word_length <= 6
        && rep.unitarity_error <= 1e-8
        && rep.intertwining_defect <= 1e-6
        && rep.projective_defect <= 1e-6;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::hermite_profile;
    use rand::SeedableRng;

    fn gauss(l: usize, n: usize) -> Profile {
        let g = self_dual_grid(l, n).unwrap();
        hermite_profile(&vec![0; l], &vec![1.0; l]).unwrap().sample(&g, &[])
    }

    #[test]
    fn factor_examples() {
        assert!(sp_factor(&SpMatrix::identity(1)).unwrap().is_empty());
        assert_eq!(sp_factor(&SpMatrix::j(1)).unwrap().gens, vec![Generator::Fourier]);
        let r = SpMatrix::rotation(1, 0.3);
        let w = sp_factor(&r).unwrap();
        assert!(max_abs(&(w.matrix() - r.matrix())) < 1e-10);
        let bad = Mat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(SpMatrix::new(bad), Err(Error::NotSymplectic { .. })));
    }

    #[test]
    fn random_factorizations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for l in 1..=2 {
            for _ in 0..100 {
                let s = random_symplectic(&mut rng, l, 6);
                let w = sp_factor(&s).unwrap();
                assert!(w.len() <= 6);
                assert!(max_abs(&(w.matrix() - s.matrix())) < 1e-10);
                let wi = w.inverse().unwrap();
                assert!(max_abs(&(wi.matrix() - s.inverse().matrix())) < 1e-10);
            }
        }
    }

    #[test]
    fn generator_actions() {
        let g = gauss(1, 128);
        let f = mp_apply(&GeneratorWord::new(1, vec![Generator::Fourier]), &g).unwrap();
        assert!(f.relative_error(&g).unwrap() < 1e-8);
        let d = mp_apply(&GeneratorWord::new(1, vec![Generator::Dilation(Mat::from_element(1, 1, 2.0))]), &g).unwrap();
        assert!((d.norm() - 1.0).abs() < 1e-10);
        let want = Profile::from_fn(&g.grid, |u| C64::new(2f64.powf(-0.5) * PI.powf(-0.25) * (-u[0] * u[0] / 8.0).exp(), 0.0));
        assert!(d.relative_error(&want).unwrap() < 1e-8);
        assert_eq!(mp_apply(&GeneratorWord::empty(1), &g).unwrap(), g);
    }

    #[test]
    fn drho_examples() {
        let g = gauss(1, 128);
        let m = heisenberg_drho(&HeisenbergElement::real(&[0.0], &[1.0], 0.0), &g).unwrap();
        let want = g.map(|u, v| -v * u[0]);
        assert!(m.relative_error(&want).unwrap() < 1e-12);
        let d = heisenberg_drho(&HeisenbergElement::real(&[1.0], &[0.0], 0.0), &g).unwrap();
        let want = g.map(|u, v| C64::new(0.0, 1.0) * u[0] * v);
        assert!(d.relative_error(&want).unwrap() < 1e-10);
    }

    #[test]
    fn seeded_suite() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let r = metaplectic_check(&mut rng, 3).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn intertwining_all_generators() {
        let psi = hermite_profile(&[1], &[1.3]).unwrap().sample(&self_dual_grid(1, 256).unwrap(), &[]);
        let gens = [
            Generator::Dilation(Mat::from_element(1, 1, 1.4)),
            Generator::Shear(Mat::from_element(1, 1, 0.6)),
            Generator::Fourier,
        ];
        for g in &gens {
            let w = GeneratorWord::new(1, vec![g.clone()]);
            for v in [HeisenbergElement::real(&[0.5], &[0.0], 0.0), HeisenbergElement::real(&[0.0], &[0.5], 0.0)] {
                let lhs = mp_apply(&w, &heisenberg_exp(&v, &psi).unwrap()).unwrap();
                let sv = v.transformed(&g.matrix(1)).unwrap();
                let rhs = heisenberg_exp(&sv, &mp_apply(&w, &psi).unwrap()).unwrap();
                let e = lhs.axpy(C64::new(-1.0, 0.0), &rhs).unwrap().norm();
                assert!(e < 1e-6, "{g:?} {v:?} {e}");
            }
        }
    }
}
