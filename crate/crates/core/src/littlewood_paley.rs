//! Three-parameter Littlewood–Paley families on the twisted plane.
//!
//! A family is given per axis by a symbol `a_i(r, ξ)`; the twisted dilate has spectrum
//! `a_1(r1, ξ1) a_2(r2, ξ2) a_3(r3, ξ1 + ξ2)`, the third axis indexed by the aliased sum.
//! Scales are log-spaced, `r = 2^{k/q}`, with weight `ln 2 / q` per axis.

use crate::error::{Result, TwlpError};
use crate::maximal::ball1;
use crate::signal_grid::{axis_frequency, dft1, dft2, idft1, idft2, Grid2D, Signal1D, Signal2D, Spectrum2D, C64};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::LN_2;

/// Log-spaced scale nodes `2^{k/q}`, `k_min ≤ k ≤ k_max`, shared by the three axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaleGrid {
    pub q: u32,
    pub k_min: i32,
    pub k_max: i32,
}

impl ScaleGrid {
    pub fn new(q: u32, k_min: i32, k_max: i32) -> Result<Self> {
        if q == 0 || k_min > k_max {
            return Err(TwlpError::InvalidArgument(format!("bad scale grid q={q}, k in [{k_min}, {k_max}]")));
        }
        Ok(ScaleGrid { q, k_min, k_max })
    }

    /// Nodes spanning `[h, L/2]`.
    pub fn covering(grid: &Grid2D, q: u32) -> Result<Self> {
        let l = grid.length1().min(grid.length2());
        let qf = q as f64;
        let k_min = (qf * grid.h().log2() - 1e-9).ceil() as i32;
        let k_max = (qf * (l / 2.0).log2() + 1e-9).floor() as i32;
        Self::new(q, k_min, k_max)
    }

    pub fn radii(&self) -> Vec<f64> {
        (self.k_min..=self.k_max).map(|k| 2f64.powf(k as f64 / self.q as f64)).collect()
    }

    pub fn len(&self) -> usize {
        (self.k_max - self.k_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of `dr/r` per node.
    pub fn weight(&self) -> f64 {
        LN_2 / self.q as f64
    }

    pub fn r_min(&self) -> f64 {
        2f64.powf(self.k_min as f64 / self.q as f64)
    }

    pub fn r_max(&self) -> f64 {
        2f64.powf(self.k_max as f64 / self.q as f64)
    }

    /// `Σ_k w f(r_k)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.radii().into_iter().map(|r| self.weight() * f(r)).sum()
    }

    /// Frequencies `|ξ|` for which every dilate of an annulus profile on `[1/2, 2]` is a node:
    /// `[2/r_max, 1/(2 r_min)]`.
    pub fn covered_band(&self) -> (f64, f64) {
        (2.0 / self.r_max(), 0.5 / self.r_min())
    }
}

/// Antiderivative of the normalized mollifier `c (1 − (v/w)²)^p` on `|v| < w`, from `−w`.
fn mollifier_cdf(v: f64, w: f64, p: u32) -> f64 {
    if v <= -w {
        return 0.0;
    }
    if v >= w {
        return 1.0;
    }
    let x = v / w;
    let prim = |x: f64| -> f64 {
        let mut s = 0.0;
        let mut binom = 1.0;
        for j in 0..=p {
            if j > 0 {
                binom *= (p - j + 1) as f64 / j as f64;
            }
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            s += sign * binom * x.powi(2 * j as i32 + 1) / (2 * j + 1) as f64;
        }
        s
    };
    (prim(x) - prim(-1.0)) / (prim(1.0) - prim(-1.0))
}

const MOLLIFIER_POWER: u32 = 5;

/// Annulus profile in `u = log2 s`: `β(u) = (P(u + 1/2) − P(u − 1/2)) / ln 2`, supported in `|u| < 1`.
/// Any `q`-point-per-octave sampling sums to exactly one.
fn beta(s: f64) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    let u = s.log2();
    if u.abs() >= 1.0 {
        return 0.0;
    }
    (mollifier_cdf(u + 0.5, 0.5, MOLLIFIER_POWER) - mollifier_cdf(u - 0.5, 0.5, MOLLIFIER_POWER)) / LN_2
}

/// Cardinal B-spline of order `P` with knot spacing `A`, centered at 0.
const BSPLINE_ORDER: u32 = 8;
const BSPLINE_KNOT: f64 = 0.5;

/// Cardinal B-spline `M_q` with integer knots on `[0, q]` (Cox–de Boor recursion).
fn cardinal(q: u32, t: f64) -> f64 {
    if q == 1 {
        return if (0.0..1.0).contains(&t) { 1.0 } else { 0.0 };
    }
    if t <= 0.0 || t >= q as f64 {
        return 0.0;
    }
    let qf = q as f64;
    (t * cardinal(q - 1, t) + (qf - t) * cardinal(q - 1, t - 1.0)) / (qf - 1.0)
}

/// `d`-th derivative of the centered B-spline `g`, from `M_p^{(d)}(t) = Σ_j (−1)^j C(d, j) M_{p−d}(t − j)`.
pub fn bspline_derivative(x: f64, d: u32) -> f64 {
    let p = BSPLINE_ORDER;
    assert!(d + 1 < p, "derivative order too high");
    let t = x / BSPLINE_KNOT + p as f64 / 2.0;
    let mut s = 0.0;
    let mut binom = 1.0;
    for j in 0..=d {
        if j > 0 {
            binom *= (d - j + 1) as f64 / j as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * binom * cardinal(p - d, t - j as f64);
    }
    s / BSPLINE_KNOT.powi(1 + d as i32)
}

pub fn bspline(x: f64) -> f64 {
    bspline_derivative(x, 0)
}

/// `ĝ(s) = (sin(s a/2)/(s a/2))^P`.
pub fn bspline_hat(s: f64) -> f64 {
    let t = s * BSPLINE_KNOT / 2.0;
    if t.abs() < 1e-8 {
        return 1.0;
    }
    (t.sin() / t).powi(BSPLINE_ORDER as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProfileKind {
    /// Annulus partition `β`, `Σ w β(r s) = 1`.
    Partition,
    /// `√β`, `Σ w β(r s)^{1/2·2} = 1`.
    PartitionL2,
    /// `(s/λ)^{2N} ĝ(s/λ)`, the Fourier side of `λ (Δ^N g)(λ ·)`.
    Psi { order: u32, lambda: f64 },
}

/// Radial Fourier profile on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialProfile {
    pub kind: ProfileKind,
}

impl RadialProfile {
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.abs();
        match self.kind {
            ProfileKind::Partition => beta(s),
            ProfileKind::PartitionL2 => beta(s).sqrt(),
            ProfileKind::Psi { order, lambda } => (s / lambda).powi(2 * order as i32) * bspline_hat(s / lambda),
        }
    }

    /// Fourier support for annulus profiles; `None` for the space-compact `ψ`.
    pub fn support(&self) -> Option<(f64, f64)> {
        match self.kind {
            ProfileKind::Partition | ProfileKind::PartitionL2 => Some((0.5, 2.0)),
            ProfileKind::Psi { .. } => None,
        }
    }

    /// Number of vanishing space moments.
    pub fn moments(&self) -> u32 {
        match self.kind {
            ProfileKind::Partition | ProfileKind::PartitionL2 => u32::MAX,
            ProfileKind::Psi { order, .. } => 2 * order,
        }
    }
}

pub fn build_phi_partition(q: u32) -> Result<RadialProfile> {
    if q < 4 {
        return Err(TwlpError::InvalidArgument(format!("need at least 4 scales per octave, got {q}")));
    }
    Ok(RadialProfile { kind: ProfileKind::Partition })
}

/// The `L²`-calibrated variant `√β`.
pub fn build_phi_partition_l2(q: u32) -> Result<RadialProfile> {
    build_phi_partition(q)?;
    Ok(RadialProfile { kind: ProfileKind::PartitionL2 })
}

/// `Σ_k w p(2^{k/q} s)` over all integer `k` (the profile has compact support in `log s`).
pub fn partition_sum(profile: &RadialProfile, s: f64, q: u32) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    let qf = q as f64;
    let c = -qf * s.log2();
    let (lo, hi) = ((c - qf - 1.0).floor() as i64, (c + qf + 1.0).ceil() as i64);
    let w = LN_2 / qf;
    (lo..=hi)
        .map(|k| {
            let v = profile.eval(2f64.powf(k as f64 / qf) * s);
            match profile.kind {
                ProfileKind::PartitionL2 => w * v * v,
                _ => w * v,
            }
        })
        .sum()
}

/// Per-axis symbols of a dilation family, sampled on the DFT frequencies of an `n`-point axis.
pub trait SpectralFamily: Sync {
    fn axis_symbol(&self, axis: usize, r: f64, n: usize, h: f64) -> Result<Vec<f64>>;
}

impl SpectralFamily for RadialProfile {
    fn axis_symbol(&self, _axis: usize, r: f64, n: usize, h: f64) -> Result<Vec<f64>> {
        Ok((0..n).map(|k| self.eval(r * axis_frequency(k, n, h))).collect())
    }
}

/// Reproducing pair: `ψ = λ(Δ^N g)(λ·)` per axis and `φ̂ = β/ψ̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairPsiPhi {
    pub orders: [u32; 3],
    pub lambda: f64,
    pub partition: RadialProfile,
    /// Calibration tolerance on the covered band.
    pub eps: f64,
}

pub const DEFAULT_LAMBDA: f64 = 6.0;

pub fn build_pair(orders: [u32; 3], lambda: f64) -> Result<PairPsiPhi> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(TwlpError::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    for &n in &orders {
        if n == 0 || 2 * n + 1 >= BSPLINE_ORDER {
            return Err(TwlpError::InvalidArgument(format!("moment order N must be in 1..=3, got {n}")));
        }
    }
    // ψ̂ must not vanish on the annulus; its only zeros are those of ĝ(s/λ)
    for &n in &orders {
        let psi = RadialProfile { kind: ProfileKind::Psi { order: n, lambda } };
        let vals: Vec<f64> = (0..=4000).map(|i| psi.eval(0.5 * 4f64.powf(i as f64 / 4000.0))).collect();
        let peak = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let sign_change = vals.windows(2).any(|w| w[0] * w[1] <= 0.0);
        if sign_change || vals.iter().any(|v| v.abs() < 1e-9 * peak) {
            return Err(TwlpError::Construction(format!(
                "ψ̂ vanishes on 1/2 ≤ |ξ| ≤ 2 for λ = {lambda}; choose λ outside [1/(8πm), 1/(2πm)]"
            )));
        }
    }
    Ok(PairPsiPhi { orders, lambda, partition: RadialProfile { kind: ProfileKind::Partition }, eps: 1e-3 })
}

impl PairPsiPhi {
    pub fn default_pair() -> Self {
        build_pair([1, 1, 1], DEFAULT_LAMBDA).expect("default pair is valid")
    }

    pub fn psi_profile(&self, axis: usize) -> RadialProfile {
        RadialProfile { kind: ProfileKind::Psi { order: self.orders[axis], lambda: self.lambda } }
    }

    /// Space samples of `Ψ_r = (r/λ)^{2N} G_r`, `G_r = (λ/r) g(λ·/r)`, so that `ψ_r = Δ^N Ψ_r`.
    pub fn potential_samples(&self, axis: usize, r: f64, n: usize, h: f64) -> Vec<f64> {
        let nn = self.orders[axis] as i32;
        let c = (r / self.lambda).powi(2 * nn) * self.lambda / r;
        (0..n)
            .map(|i| {
                let x = crate::signal_grid::signed_alias(i, n) as f64 * h;
                c * bspline(self.lambda * x / r)
            })
            .collect()
    }

    /// Space radius of the support of `Ψ_r`.
    pub fn potential_radius(&self, r: f64) -> f64 {
        BSPLINE_ORDER as f64 * BSPLINE_KNOT / 2.0 * r / self.lambda
    }

    /// DFT of the potential samples.
    pub fn potential_symbol(&self, axis: usize, r: f64, n: usize, h: f64) -> Vec<f64> {
        let s = Signal1D::from_real(h, &self.potential_samples(axis, r, n, h)).expect("finite samples");
        dft1(&s).into_iter().map(|c| c.re).collect()
    }

    /// Discrete `ψ̂_r = ξ^{2N} DFT(Ψ_r)`.
    pub fn psi_symbol(&self, axis: usize, r: f64, n: usize, h: f64) -> Vec<f64> {
        let nn = self.orders[axis] as i32;
        self.potential_symbol(axis, r, n, h)
            .into_iter()
            .enumerate()
            .map(|(k, v)| axis_frequency(k, n, h).powi(2 * nn) * v)
            .collect()
    }

    /// `φ̂_r = β(r|ξ|)/ψ̂_r(ξ)`, zero off the annulus.
    pub fn phi_symbol(&self, axis: usize, r: f64, n: usize, h: f64) -> Result<Vec<f64>> {
        let psi = self.psi_symbol(axis, r, n, h);
        let mut out = vec![0.0; n];
        for k in 0..n {
            let b = self.partition.eval(r * axis_frequency(k, n, h));
            if b == 0.0 {
                continue;
            }
            if psi[k].abs() < 1e-300 || !psi[k].is_finite() {
                return Err(TwlpError::Construction(format!(
                    "discrete ψ̂ vanishes at r = {r}, k = {k}; choose a different λ"
                )));
            }
            out[k] = b / psi[k];
        }
        Ok(out)
    }

    /// Discrete moments `Σ_j x_j^k ψ(x_j) dx` of `ψ = λ(−1)^N g^{(2N)}(λ·)` on the lattice
    /// `x_j = j a/(λ M)`, which is aligned with the knots of `g(λ·)`. Each entry is the moment
    /// divided by the absolute moment `Σ_j |x_j^k ψ(x_j)| dx`.
    pub fn psi_moments(&self, axis: usize, max_k: u32, refine: u32) -> Vec<f64> {
        let nn = self.orders[axis];
        let dx = BSPLINE_KNOT / (self.lambda * refine.max(1) as f64);
        let half = (BSPLINE_ORDER as f64 * BSPLINE_KNOT / 2.0 / self.lambda / dx).ceil() as i64 + 1;
        let sign = if nn % 2 == 0 { 1.0 } else { -1.0 };
        let c = sign * self.lambda.powi(2 * nn as i32 + 1);
        (0..=max_k)
            .map(|k| {
                let (mut m, mut a) = (0.0, 0.0);
                for j in -half..=half {
                    let x = j as f64 * dx;
                    let v = x.powi(k as i32) * c * bspline_derivative(self.lambda * x, 2 * nn);
                    m += v;
                    a += v.abs();
                }
                m / a
            })
            .collect()
    }
}

/// `ψ_r` family of a pair.
pub struct PsiFamily<'a>(pub &'a PairPsiPhi);
/// `φ_r` family of a pair.
pub struct PhiFamily<'a>(pub &'a PairPsiPhi);

impl SpectralFamily for PsiFamily<'_> {
    fn axis_symbol(&self, axis: usize, r: f64, n: usize, h: f64) -> Result<Vec<f64>> {
        Ok(self.0.psi_symbol(axis, r, n, h))
    }
}

impl SpectralFamily for PhiFamily<'_> {
    fn axis_symbol(&self, axis: usize, r: f64, n: usize, h: f64) -> Result<Vec<f64>> {
        self.0.phi_symbol(axis, r, n, h)
    }
}

/// Precomputed per-axis symbols of a family over a scale grid.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    grid: Grid2D,
    scales: ScaleGrid,
    radii: Vec<f64>,
    /// `sym[axis][scale][k]`
    sym: [Vec<Vec<f64>>; 3],
}

impl SymbolTable {
    pub fn new(family: &dyn SpectralFamily, grid: &Grid2D, scales: &ScaleGrid) -> Result<Self> {
        if !grid.is_square() {
            return Err(TwlpError::InvalidGrid("twisted families need a square grid".into()));
        }
        let (n, h) = (grid.n1(), grid.h());
        let radii = scales.radii();
        let mut sym: [Vec<Vec<f64>>; 3] = Default::default();
        for (axis, s) in sym.iter_mut().enumerate() {
            for &r in &radii {
                s.push(family.axis_symbol(axis, r, n, h)?);
            }
        }
        Ok(SymbolTable { grid: *grid, scales: *scales, radii, sym })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn scales(&self) -> &ScaleGrid {
        &self.scales
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn axis(&self, axis: usize, scale: usize) -> &[f64] {
        &self.sym[axis][scale]
    }

    /// Spectrum of the dilate at scale indices `(i1, i2, i3)`.
    pub fn spectrum(&self, idx: [usize; 3]) -> Vec<f64> {
        let n = self.grid.n1();
        let (a1, a2, a3) = (&self.sym[0][idx[0]], &self.sym[1][idx[1]], &self.sym[2][idx[2]]);
        let mut out = vec![0.0; n * n];
        for k1 in 0..n {
            if a1[k1] == 0.0 {
                continue;
            }
            for k2 in 0..n {
                out[k1 * n + k2] = a1[k1] * a2[k2] * a3[(k1 + k2) % n];
            }
        }
        out
    }

    /// `Σ_r w³ Π_i a_i`, which factorizes over the axes.
    pub fn total(&self, other: Option<&SymbolTable>) -> Vec<f64> {
        let n = self.grid.n1();
        let w = self.scales.weight();
        let per_axis: Vec<Vec<f64>> = (0..3)
            .map(|axis| {
                let mut acc = vec![0.0; n];
                for s in 0..self.radii.len() {
                    for k in 0..n {
                        let v = self.sym[axis][s][k];
                        let o = match other {
                            Some(t) => t.sym[axis][s][k],
                            None => 1.0,
                        };
                        acc[k] += w * v * o;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![0.0; n * n];
        for k1 in 0..n {
            for k2 in 0..n {
                out[k1 * n + k2] = per_axis[0][k1] * per_axis[1][k2] * per_axis[2][(k1 + k2) % n];
            }
        }
        out
    }
}

/// Spectrum of `φ_r = π_*(φ_{r1} ⊗ φ_{r2} ⊗ φ_{r3})`.
pub fn phi_r_spectrum(family: &dyn SpectralFamily, r: [f64; 3], grid: &Grid2D) -> Result<Spectrum2D> {
    if !grid.is_square() {
        return Err(TwlpError::InvalidGrid("twisted families need a square grid".into()));
    }
    let (n, h) = (grid.n1(), grid.h());
    let a: Vec<Vec<f64>> = (0..3).map(|i| family.axis_symbol(i, r[i], n, h)).collect::<Result<_>>()?;
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for k1 in 0..n {
        for k2 in 0..n {
            out[k1 * n + k2] = C64::new(a[0][k1] * a[1][k2] * a[2][(k1 + k2) % n], 0.0);
        }
    }
    Spectrum2D::new(*grid, out)
}

/// Space-side samples of one axis of a family (`idft1` of its symbol).
pub fn axis_space_samples(family: &dyn SpectralFamily, axis: usize, r: f64, n: usize, h: f64) -> Result<Signal1D> {
    let sym: Vec<C64> = family.axis_symbol(axis, r, n, h)?.into_iter().map(|v| C64::new(v, 0.0)).collect();
    idft1(&sym, h)
}

/// `|Ω|`-indexed in-band mask: `|ξ1|, |ξ2|, |ξ1 + ξ2|` (aliased) all in the covered band.
pub fn in_band_mask(grid: &Grid2D, scales: &ScaleGrid) -> Vec<bool> {
    let n = grid.n1();
    let h = grid.h();
    let (lo, hi) = scales.covered_band();
    let ok = |k: usize| {
        let x = axis_frequency(k, n, h).abs();
        x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12)
    };
    let mut out = vec![false; n * n];
    for k1 in 0..n {
        for k2 in 0..n {
            out[k1 * n + k2] = ok(k1) && ok(k2) && ok((k1 + k2) % n);
        }
    }
    out
}

/// Scale triples whose dilate does not vanish on the support of `spec`.
pub(crate) fn active_triples(table: &SymbolTable, spec: &[C64]) -> Vec<[usize; 3]> {
    let n = table.grid.n1();
    let s = table.radii.len();
    let support: Vec<(usize, usize)> =
        (0..n * n).filter(|&i| spec[i] != C64::new(0.0, 0.0)).map(|i| (i / n, i % n)).collect();
    let mut out = Vec::new();
    for i1 in 0..s {
        let a1 = &table.sym[0][i1];
        let sup1: Vec<(usize, usize)> = support.iter().copied().filter(|&(k1, _)| a1[k1] != 0.0).collect();
        if sup1.is_empty() {
            continue;
        }
        for i2 in 0..s {
            let a2 = &table.sym[1][i2];
            let sup12: Vec<(usize, usize)> = sup1.iter().copied().filter(|&(_, k2)| a2[k2] != 0.0).collect();
            if sup12.is_empty() {
                continue;
            }
            for i3 in 0..s {
                let a3 = &table.sym[2][i3];
                if sup12.iter().any(|&(k1, k2)| a3[(k1 + k2) % n] != 0.0) {
                    out.push([i1, i2, i3]);
                }
            }
        }
    }
    out
}

/// `f ∗ φ_r` for one scale triple.
pub fn filtered(f_hat: &Spectrum2D, table: &SymbolTable, idx: [usize; 3]) -> Signal2D {
    let m = table.spectrum(idx);
    let v: Vec<C64> = f_hat.values().iter().zip(&m).map(|(a, b)| a * b).collect();
    idft2(&Spectrum2D::new(*f_hat.grid(), v).expect("same grid"))
}

/// `g(f)` and `S(f)` in one pass over the scale triples.
pub fn square_functions(f: &Signal2D, table: &SymbolTable) -> Result<(Signal2D, Signal2D)> {
    let g = *f.grid();
    if g != table.grid {
        return Err(TwlpError::GridMismatch("signal and symbol table grids differ".into()));
    }
    let n = g.n1();
    let fh = dft2(f);
    let triples = active_triples(table, fh.values());
    let w3 = table.scales.weight().powi(3);
    let radii = &table.radii;
    if table.scales.r_min() < g.h() * (1.0 - 1e-12) {
        return Err(TwlpError::ScaleRange("the area function needs scales of at least one grid step".into()));
    }
    // χ̂_r = b̂_{r1}(ξ1) b̂_{r2}(ξ2) b̂_{r3}(ξ1 + ξ2) with b the discrete 1D balls
    let chi_cache: Vec<Vec<C64>> = radii
        .iter()
        .map(|&r| dft1(&Signal1D::from_real(g.h(), &ball1(n, g.h(), r)).expect("finite")))
        .collect();
    let s_len = radii.len();
    let by_first: Vec<Vec<[usize; 3]>> = (0..s_len).map(|i| triples.iter().copied().filter(|t| t[0] == i).collect()).collect();
    let partials: Vec<(Vec<f64>, Vec<C64>)> = by_first
        .par_iter()
        .map(|ts| {
            let mut g2 = vec![0.0; n * n];
            let mut s2 = vec![C64::new(0.0, 0.0); n * n];
            for &t in ts {
                let fr = filtered(&fh, table, t);
                let sq: Vec<f64> = fr.values().iter().map(|v| v.norm_sqr()).collect();
                for (a, b) in g2.iter_mut().zip(&sq) {
                    *a += w3 * b;
                }
                let sq_hat = dft2(&Signal2D::from_real(g, &sq).expect("finite"));
                let (c1, c2, c3) = (&chi_cache[t[0]], &chi_cache[t[1]], &chi_cache[t[2]]);
                for k1 in 0..n {
                    for k2 in 0..n {
                        let i = k1 * n + k2;
                        s2[i] += sq_hat.values()[i] * c1[k1] * c2[k2] * c3[(k1 + k2) % n] * w3;
                    }
                }
            }
            (g2, s2)
        })
        .collect();
    let mut g2 = vec![0.0; n * n];
    let mut s2 = vec![C64::new(0.0, 0.0); n * n];
    for (a, b) in &partials {
        for (x, y) in g2.iter_mut().zip(a) {
            *x += y;
        }
        for (x, y) in s2.iter_mut().zip(b) {
            *x += y;
        }
    }
    let s_space = idft2(&Spectrum2D::new(g, s2)?);
    let gv: Vec<f64> = g2.iter().map(|v| v.max(0.0).sqrt()).collect();
    let sv: Vec<f64> = s_space.values().iter().map(|v| v.re.max(0.0).sqrt()).collect();
    Ok((Signal2D::from_real(g, &gv)?, Signal2D::from_real(g, &sv)?))
}

/// Littlewood–Paley square function `g(f) = (Σ_r w |f ∗ φ_r|²)^{1/2}`.
pub fn g_square(f: &Signal2D, table: &SymbolTable) -> Result<Signal2D> {
    let g = *f.grid();
    if g != table.grid {
        return Err(TwlpError::GridMismatch("signal and symbol table grids differ".into()));
    }
    let n = g.n1();
    let fh = dft2(f);
    let w3 = table.scales.weight().powi(3);
    let mut g2 = vec![0.0; n * n];
    for t in active_triples(table, fh.values()) {
        let fr = filtered(&fh, table, t);
        for (a, b) in g2.iter_mut().zip(fr.values()) {
            *a += w3 * b.norm_sqr();
        }
    }
    Signal2D::from_real(g, &g2.iter().map(|v| v.sqrt()).collect::<Vec<_>>())
}

/// Area function `S(f) = (Σ_r w |f ∗ φ_r|² ∗ χ_r)^{1/2}`.
pub fn area_function(f: &Signal2D, table: &SymbolTable) -> Result<Signal2D> {
    Ok(square_functions(f, table)?.1)
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub output: Signal2D,
    /// Fraction of `‖f‖²` on frequencies outside the covered band.
    pub leakage_fraction: f64,
    /// `max |Σ w ψ̂_r φ̂_r − 1|` over in-band frequencies.
    pub calibration_error: f64,
}

/// `Σ_r w ψ̂_r φ̂_r` on the grid.
pub fn calibration(pair: &PairPsiPhi, grid: &Grid2D, scales: &ScaleGrid) -> Result<Vec<f64>> {
    let psi = SymbolTable::new(&PsiFamily(pair), grid, scales)?;
    let phi = SymbolTable::new(&PhiFamily(pair), grid, scales)?;
    Ok(psi.total(Some(&phi)))
}

/// `f ↦ Σ_r w f ∗ ψ_r ∗ φ_r`.
pub fn reconstruct(f: &Signal2D, pair: &PairPsiPhi, scales: &ScaleGrid) -> Result<Reconstruction> {
    let g = *f.grid();
    let cal = calibration(pair, &g, scales)?;
    let mask = in_band_mask(&g, scales);
    let fh = dft2(f);
    let total: f64 = fh.values().iter().map(|v| v.norm_sqr()).sum();
    let outside: f64 = fh.values().iter().zip(&mask).filter(|(_, &m)| !m).map(|(v, _)| v.norm_sqr()).sum();
    let err = cal.iter().zip(&mask).filter(|(_, &m)| m).map(|(c, _)| (c - 1.0).abs()).fold(0.0, f64::max);
    let v: Vec<C64> = fh.values().iter().zip(&cal).map(|(a, c)| a * c).collect();
    Ok(Reconstruction {
        output: idft2(&Spectrum2D::new(g, v)?),
        leakage_fraction: if total > 0.0 { outside / total } else { 0.0 },
        calibration_error: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_grid::{pushforward3, Signal3D};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn band_limited(grid: &Grid2D, scales: &ScaleGrid, seed: u64) -> Signal2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = in_band_mask(grid, scales);
        let n = grid.n1();
        let mut v = vec![C64::new(0.0, 0.0); n * n];
        for k1 in 0..n {
            for k2 in 0..n {
                if mask[k1 * n + k2] {
                    let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let j = ((n - k1) % n) * n + (n - k2) % n;
                    v[k1 * n + k2] += c;
                    v[j] += c.conj();
                }
            }
        }
        idft2(&Spectrum2D::new(*grid, v).unwrap())
    }

    #[test]
    fn partition_is_exact() {
        let p = build_phi_partition(8).unwrap();
        for i in 0..200 {
            let s = 0.01 * 1.07f64.powi(i);
            assert!((partition_sum(&p, s, 8) - 1.0).abs() < 1e-12, "s = {s}");
            assert!((partition_sum(&p, s, 8) - partition_sum(&p, 2.0 * s, 8)).abs() < 1e-13);
        }
        for q in [4, 5, 7, 16] {
            assert!((partition_sum(&p, 0.731, q) - 1.0).abs() < 1e-12);
        }
        assert_eq!(partition_sum(&p, 0.0, 8), 0.0);
        assert_eq!(p.eval(0.5), 0.0);
        assert_eq!(p.eval(2.0), 0.0);
        assert!(p.eval(1.0) > 0.0);
        let l2 = build_phi_partition_l2(8).unwrap();
        assert!((partition_sum(&l2, 3.3, 8) - 1.0).abs() < 1e-12);
        assert!(build_phi_partition(3).is_err());
        // continuum Mellin integral by fine quadrature
        let m: f64 = (0..20000).map(|i| p.eval(2f64.powf(-1.0 + 2.0 * (i as f64 + 0.5) / 20000.0)) * 2.0 * LN_2 / 20000.0).sum();
        assert!((m - 1.0).abs() < 1e-8);
    }

    #[test]
    fn bspline_closed_forms() {
        // unit mass, support [-2, 2], transform against quadrature
        let dx = 1e-3;
        let mass: f64 = (-2000..=2000).map(|i| bspline(i as f64 * dx) * dx).sum();
        assert!((mass - 1.0).abs() < 1e-10);
        assert_eq!(bspline(2.0), 0.0);
        assert_eq!(bspline(-2.1), 0.0);
        for s in [0.3, 1.0, 4.0] {
            let ft: f64 = (-2000..=2000).map(|i| bspline(i as f64 * dx) * (s * i as f64 * dx).cos() * dx).sum();
            assert!((ft - bspline_hat(s)).abs() < 1e-9);
        }
        // derivative against finite differences
        for &x in &[-1.3, -0.2, 0.45, 1.7] {
            let e = 1e-5;
            let fd = (bspline_derivative(x + e, 1) - bspline_derivative(x - e, 1)) / (2.0 * e);
            assert!((fd - bspline_derivative(x, 2)).abs() < 1e-5);
        }
    }

    #[test]
    fn pair_moments_vanish() {
        for n in 1..=3u32 {
            let pair = build_pair([n, n, n], DEFAULT_LAMBDA).unwrap();
            let m = pair.psi_moments(0, 2 * n, 3);
            for (k, v) in m.iter().enumerate().take(2 * n as usize) {
                assert!(v.abs() < 1e-10, "N={n} k={k}: {v}");
            }
            assert!(m[2 * n as usize].abs() > 1e-3);
        }
        assert!(matches!(build_pair([1, 1, 1], 0.1), Err(TwlpError::Construction(_))));
        assert!(build_pair([0, 1, 1], 6.0).is_err());
    }

    #[test]
    fn pair_calibration_and_reconstruction() {
        let grid = Grid2D::square(64, 1.0).unwrap();
        let sg = ScaleGrid::covering(&grid, 8).unwrap();
        assert_eq!((sg.r_min(), sg.r_max()), (1.0, 32.0));
        let pair = PairPsiPhi::default_pair();
        let cal = calibration(&pair, &grid, &sg).unwrap();
        let mask = in_band_mask(&grid, &sg);
        assert!(mask.iter().any(|&m| m));
        for (c, m) in cal.iter().zip(&mask) {
            if *m {
                assert!((c - 1.0).abs() < 1e-12);
            }
        }
        let f = band_limited(&grid, &sg, 1);
        let rec = reconstruct(&f, &pair, &sg).unwrap();
        assert!(rec.output.rel_l2_error(&f) < 1e-10);
        assert!(rec.leakage_fraction < 1e-20);
        // anti-diagonal wave: third-axis frequency zero, not reconstructed
        let w = Signal2D::from_fn(grid, |x1, x2| C64::new((2.0 * PI * 3.0 * (x1 - x2) / 64.0).cos(), 0.0)).unwrap();
        let r = reconstruct(&w, &pair, &sg).unwrap();
        assert!((r.leakage_fraction - 1.0).abs() < 1e-12);
        assert!(r.output.norm_l2() < 1e-12 * w.norm_l2());
    }

    #[test]
    fn spectrum_examples() {
        let grid = Grid2D::square(32, 2.0 * PI / 32.0).unwrap();
        let p = build_phi_partition(8).unwrap();
        let s = phi_r_spectrum(&p, [1.0, 1.0, 1.0], &grid).unwrap();
        assert_eq!(s.at(1, 1).re, p.eval(1.0) * p.eval(1.0) * p.eval(2.0));
        assert_eq!(s.at(1, 31).re, 0.0);
        let r = [0.7, 1.3, 0.9];
        let s = phi_r_spectrum(&p, r, &grid).unwrap();
        let h = grid.h();
        let a: Vec<Signal1D> = (0..3).map(|i| axis_space_samples(&p, i, r[i], 32, h).unwrap()).collect();
        let lifted = dft2(&pushforward3(&Signal3D::tensor(&a[0], &a[1], &a[2]).unwrap()).unwrap());
        let err = s.values().iter().zip(lifted.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8);
        let space = axis_space_samples(&p, 0, 1.0, 32, h).unwrap();
        let sum: C64 = space.values().iter().sum();
        assert!(sum.norm() < 1e-10);
    }

    #[test]
    fn square_function_plancherel() {
        let grid = Grid2D::square(32, 1.0).unwrap();
        let sg = ScaleGrid::covering(&grid, 4).unwrap();
        let table = SymbolTable::new(&build_phi_partition_l2(4).unwrap(), &grid, &sg).unwrap();
        let f = band_limited(&grid, &sg, 2);
        let (g, s) = square_functions(&f, &table).unwrap();
        assert!((g.norm_l2() / f.norm_l2() - 1.0).abs() < 1e-10);
        assert!((s.norm_l2() - g.norm_l2()).abs() / g.norm_l2() < 1e-10);
        let g2 = g_square(&f, &table).unwrap();
        assert!(g2.rel_l2_error(&g) < 1e-12);
        let z = Signal2D::zeros(grid);
        assert_eq!(g_square(&z, &table).unwrap().max_abs(), 0.0);
        assert_eq!(area_function(&z, &table).unwrap().max_abs(), 0.0);
        let e = Signal2D::from_fn(grid, |x1, x2| C64::from_polar(1.0, 2.0 * PI * (2.0 * x1 + 1.0 * x2) / 32.0)).unwrap();
        let ge = g_square(&e, &table).unwrap().real_part();
        assert!(ge.iter().all(|v| (v - ge[0]).abs() < 1e-12 && *v > 0.0));
    }

    #[test]
    fn scale_grid_octaves() {
        let sg = ScaleGrid::new(8, -16, 23).unwrap();
        let v = sg.integrate(|r| r.log2().floor().abs() + 1.0);
        let exact: f64 = (-2..3).map(|j: i32| (j.abs() as f64 + 1.0) * LN_2).sum();
        assert!((v - exact).abs() < 1e-12);
        let g = Grid2D::square(64, 1.0).unwrap();
        let c = ScaleGrid::covering(&g, 8).unwrap();
        assert_eq!((c.k_min, c.k_max, c.len()), (0, 40, 41));
    }
}
