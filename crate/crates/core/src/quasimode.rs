//! Quasimodes at points where {Re H, Im H} < 0, built order by order in √ℏ.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64 as C64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::{fft_axes, for_each_lane, signed_index};
use crate::grid::{Field, Grid, PhasePoint};
use crate::metaplectic::{mp_apply, self_dual_grid, sp_factor, GeneratorWord, Mat, SpMatrix};
use crate::quantize::{apply_kn, SymbolOracle};
use crate::states::{loglog_slope, place_profile, read_profile, Profile};

/// Largest number of correction steps accepted by [`build_quasimode`].
pub const MAX_ORDER: usize = 4;
/// Profile-grid size used by [`build_quasimode`].
pub const PROFILE_SIZE: usize = 256;

/// Frame data at p. The Hamilton field satisfies Ξ = α(e₁ + iεf₁) with
/// ω(e₁, f₁) = 1; columns of `frame` are (e₁..e_n, f₁..f_n).
#[derive(Clone, Debug)]
pub struct BracketData {
    pub p: PhasePoint,
    pub value: C64,
    pub xi: Vec<C64>,
    pub bracket: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub frame: Mat,
}

fn omega(v: &[f64], w: &[f64]) -> f64 {
    let n = v.len() / 2;
    (0..n).map(|i| v[i] * w[n + i] - v[n + i] * w[i]).sum()
}

/// Symplectic Gram–Schmidt frame adapted to Ξ(p).
pub fn bracket_frame(h: &SymbolOracle, p: &PhasePoint) -> Result<BracketData> {
    let n = p.dim();
    if h.dim() != n {
        return Err(Error::Dimension("symbol and point dimensions differ".to_string()));
    }
    let xi = h.hamilton_field(&p.x, &p.xi);
    let x: Vec<f64> = xi.iter().map(|v| v.re).collect();
    let y: Vec<f64> = xi.iter().map(|v| v.im).collect();
    let w = omega(&x, &y);
    let bracket = -w;
    if !(bracket < -1e-10) {
        return Err(Error::NonNegativeBracket { value: bracket });
    }
    let alpha = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let epsilon = w / (alpha * alpha);
    let mut es: Vec<Vec<f64>> = vec![x.iter().map(|v| v / alpha).collect()];
    let mut fs: Vec<Vec<f64>> = vec![y.iter().map(|v| v / (alpha * epsilon)).collect()];
    let project = |v: &[f64], es: &[Vec<f64>], fs: &[Vec<f64>]| -> Vec<f64> {
        let mut out = v.to_vec();
        for (e, f) in es.iter().zip(fs) {
            let (cf, ce) = (omega(v, f), omega(v, e));
            for k in 0..2 * n {
                out[k] -= cf * e[k] - ce * f[k];
            }
        }
        out
    };
    let mut pool: Vec<Vec<f64>> = (0..2 * n)
        .map(|k| {
            let mut v = vec![0.0; 2 * n];
            v[k] = 1.0;
            v
        })
        .collect();
    while es.len() < n {
        let cand: Vec<Vec<f64>> = pool.iter().map(|v| project(v, &es, &fs)).collect();
        let mut best = (0, 0, 0.0f64);
        for a in 0..cand.len() {
            for b in 0..cand.len() {
                let o = omega(&cand[a], &cand[b]);
                if o > best.2 {
                    best = (a, b, o);
                }
            }
        }
        if best.2 < 1e-8 {
            return Err(Error::Singular("symplectic completion of the frame".to_string()));
        }
        let e = cand[best.0].clone();
        let f: Vec<f64> = cand[best.1].iter().map(|v| v / best.2).collect();
        let (ia, ib) = (best.0.max(best.1), best.0.min(best.1));
        pool.remove(ia);
        if ia != ib {
            pool.remove(ib);
        }
        es.push(e);
        fs.push(f);
    }
    let frame = Mat::from_fn(2 * n, 2 * n, |r, c| if c < n { es[c][r] } else { fs[c - n][r] });
    let defect = crate::metaplectic::symplectic_defect(&frame);
    if defect > 1e-10 {
        return Err(Error::NotSymplectic { defect });
    }
    Ok(BracketData { p: p.clone(), value: h.p0(&p.x, &p.xi), xi, bracket, alpha, epsilon, frame })
}

impl BracketData {
    pub fn sp_frame(&self) -> Result<SpMatrix> {
        SpMatrix::new(self.frame.clone())
    }

    /// ω(e₁, f₁).
    pub fn pairing(&self) -> f64 {
        let n = self.p.dim();
        let e: Vec<f64> = (0..2 * n).map(|r| self.frame[(r, 0)]).collect();
        let f: Vec<f64> = (0..2 * n).map(|r| self.frame[(r, n)]).collect();
        omega(&e, &f)
    }
}

const GL_X: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Band-limited samples f(s_j + c·Δ) for every node j.
fn shifted_lane(lane: &[C64], half_width: f64, c: f64) -> Vec<C64> {
    let n = lane.len();
    let d = 2.0 * half_width / n as f64;
    let mut data = lane.to_vec();
    fft_axes(&mut data, &[n], &[0], false);
    for (m, v) in data.iter_mut().enumerate() {
        let k = PI * signed_index(m, n) as f64 / half_width;
        *v *= if m == n / 2 { C64::new((k * c * d).cos(), 0.0) } else { C64::from_polar(1.0, k * c * d) } / n as f64;
    }
    fft_axes(&mut data, &[n], &[0], true);
    data
}

/// Decaying solution of ∂₁τ + εy₁τ = f, orthogonal to e^{−εy₁²/2} along each
/// y₁-line. Exponential integrator outward from y₁ = 0 with 8-point
/// Gauss–Legendre quadrature per cell.
pub fn solve_transport_ode(epsilon: f64, f: &Profile) -> Result<Profile> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
    }
    let g = f.grid.clone();
    let n = g.size(0);
    let lw = g.half_width(0);
    let d = g.spacing(0);
    let s = g.nodes(0);
    let kernel: Vec<f64> = s.iter().map(|x| (-epsilon * x * x / 2.0).exp()).collect();
    let kk: f64 = kernel.iter().map(|k| k * k).sum();
    let mut values = f.values.clone();
    let sizes = g.sizes().to_vec();
    let m0 = n / 2;
    for_each_lane(&mut values, &sizes, 0, |lane| {
        let shifted: Vec<Vec<C64>> = GL_X.iter().map(|x| shifted_lane(lane, lw, 0.5 * (1.0 + x))).collect();
        // ∫ over [s_j, s_j + Δ] of e^{ε(s² − r²)/2} f(s) ds for the given reference r.
        let cell = |j: usize, r: f64| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..8 {
                let sq = s[j] + 0.5 * (1.0 + GL_X[q]) * d;
                acc += shifted[q][j] * (0.5 * d * GL_W[q] * (epsilon * (sq * sq - r * r) / 2.0).exp());
            }
            acc
        };
        let mut tau = vec![C64::new(0.0, 0.0); n];
        for j in m0..n - 1 {
            let decay = (-epsilon * (s[j + 1] * s[j + 1] - s[j] * s[j]) / 2.0).exp();
            tau[j + 1] = tau[j] * decay + cell(j, s[j + 1]);
        }
        for j in (1..=m0).rev() {
            let decay = (-epsilon * (s[j - 1] * s[j - 1] - s[j] * s[j]) / 2.0).exp();
            tau[j - 1] = tau[j] * decay - cell(j - 1, s[j - 1]);
        }
        let c: C64 = tau.iter().zip(&kernel).map(|(t, k)| t * k).sum::<C64>() / kk;
        for (l, (t, k)) in lane.iter_mut().zip(tau.iter().zip(&kernel)) {
            *l = t - c * k;
        }
    });
    let out = Profile { grid: g, values, base_point: f.base_point.clone() };
    let tail = out.schwartz_tail();
    if tail > 1e-8 {
        return Err(Error::Resolution(format!("transport ODE solution has edge mass {tail:.3e}")));
    }
    Ok(out)
}

/// ∂₁τ + εy₁τ, spectrally.
pub fn transport_operator(epsilon: f64, tau: &Profile) -> Profile {
    let d = tau.derivative(0, 1);
    tau.map(|u, v| v * (epsilon * u[0])).axpy(C64::new(1.0, 0.0), &d).unwrap_or(d)
}

/// Quasimode and its residual history.
#[derive(Clone, Debug)]
pub struct Quasimode {
    pub field: Field,
    pub profile: Profile,
    pub lambda: C64,
    pub frame: BracketData,
    /// ‖(A − λ)Υ_k‖/‖Υ_k‖ for k = 0..=N.
    pub ratios: Vec<f64>,
}

/// Field grid √ℏ·(profile grid) refined by a power of two until it resolves ξ_p.
pub fn quasimode_field_grid(p: &PhasePoint, ugrid: &Grid, hbar: f64) -> Result<Grid> {
    let s = hbar.sqrt();
    let mut hw = Vec::with_capacity(p.dim());
    let mut sizes = Vec::with_capacity(p.dim());
    for a in 0..p.dim() {
        let lf = s * ugrid.half_width(a) + p.x[a].abs();
        let need = p.xi[a].abs() + s * ugrid.half_width(a);
        let mut nf = ugrid.size(a);
        while PI * hbar * nf as f64 / (2.0 * lf) < 1.05 * need {
            nf *= 2;
        }
        hw.push(lf);
        sizes.push(nf);
    }
    Grid::new(&hw, &sizes)
}

/// Kernel profile Mp(F)[e^{−(εy₁² + |y′|²)/2}], normalized.
pub fn kernel_profile(bd: &BracketData, ugrid: &Grid, word: &GeneratorWord) -> Result<Profile> {
    let eps = bd.epsilon;
    let g0 = Profile::from_fn(ugrid, |y| {
        let q: f64 = eps * y[0] * y[0] + y[1..].iter().map(|v| v * v).sum::<f64>();
        C64::new((-q / 2.0).exp(), 0.0)
    });
    let g0 = g0.scaled(C64::new(1.0 / g0.norm(), 0.0));
    mp_apply(word, &g0)
}

/// Υ_N with σ₀ in the kernel of dρ(Ξ) and σ_k solving dρ(Ξ)σ_k = −(order-k residual profile).
pub fn build_quasimode(a: &SymbolOracle, p: &PhasePoint, n_max: usize, hbar: f64) -> Result<Quasimode> {
    if n_max > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("N = {n_max} exceeds the cap {MAX_ORDER}")));
    }
    let bd = bracket_frame(a, p)?;
    let lambda = bd.value;
    let shifted = a.shifted(lambda);
    let ugrid = self_dual_grid(p.dim(), PROFILE_SIZE)?;
    let grid = quasimode_field_grid(p, &ugrid, hbar)?;
    let word = sp_factor(&bd.sp_frame()?)?;
    let inv = word.inverse()?;
    let mut sigma = kernel_profile(&bd, &ugrid, &word)?;
    let mut field = place_profile(&sigma, p, &grid, hbar, 1.0)?;
    let mut ratios = Vec::with_capacity(n_max + 1);
    let mut res = apply_kn(&shifted, &field)?;
    ratios.push(res.norm() / field.norm());
    for k in 1..=n_max {
        if ratios[k - 1] < 1e-13 {
            break;
        }
        let rk = read_profile(&res, p, &ugrid, hbar.powf((k + 1) as f64 / 2.0))?;
        let rf = mp_apply(&inv, &rk)?;
        let tf = solve_transport_ode(bd.epsilon, &rf.scaled(C64::new(0.0, -1.0 / bd.alpha)))?;
        let tk = mp_apply(&word, &tf)?;
        let sk = hbar.powf(k as f64 / 2.0);
        sigma = sigma.axpy(C64::new(sk, 0.0), &tk)?;
        field = field.axpy(C64::new(1.0, 0.0), &place_profile(&tk, p, &grid, hbar, sk)?)?;
        res = apply_kn(&shifted, &field)?;
        let ratio = res.norm() / field.norm();
        if ratio > ratios[k - 1] {
            return Err(Error::ResidualNotDecreasing { iteration: k, ratio: ratio / ratios[k - 1] });
        }
        ratios.push(ratio);
    }
    Ok(Quasimode { field, profile: sigma, lambda, frame: bd, ratios })
}

/// Ratios for every N ≤ n_max over an ℏ schedule, with fitted slopes per N.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuasimodeSweep {
    pub hbars: Vec<f64>,
    /// `ratios[N][i]` at `hbars[i]`.
    pub ratios: Vec<Vec<f64>>,
    pub slopes: Vec<f64>,
}

pub fn quasimode_sweep(a: &SymbolOracle, p: &PhasePoint, n_max: usize, hbars: &[f64]) -> Result<QuasimodeSweep> {
    let mut ratios = vec![Vec::with_capacity(hbars.len()); n_max + 1];
    for &h in hbars {
        let q = build_quasimode(a, p, n_max, h)?;
        for (k, r) in ratios.iter_mut().enumerate() {
            r.push(*q.ratios.get(k).unwrap_or(q.ratios.last().unwrap_or(&0.0)));
        }
    }
    let slopes = ratios.iter().map(|r| loglog_slope(hbars, r)).collect();
    Ok(QuasimodeSweep { hbars: hbars.to_vec(), ratios, slopes })
}
