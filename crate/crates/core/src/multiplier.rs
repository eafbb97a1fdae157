//! The twisted Hilbert multiplier, its six-region phase geometry, flag splitting and
//! multiplier application.
//!
//! Symbols here are sampled at the grid frequencies with the unreduced sum `ξ1 + ξ2`,
//! so the region label and the multiplier value always agree.

use crate::error::{Result, TwlpError};
use crate::signal_grid::{dft2, idft2, signed_alias, Grid2D, Signal2D, C64, ZERO};
use serde::{Deserialize, Serialize};

const MINUS_I: C64 = C64 { re: 0.0, im: -1.0 };

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Complex frequency-domain symbol with nodal bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier2D {
    grid: Grid2D,
    values: Vec<C64>,
    nodal_mask: Vec<bool>,
}

/// Nodal lines `ξ1 = 0`, `ξ2 = 0`, `ξ1 + ξ2 = 0` on the index lattice.
pub fn nodal_mask(grid: &Grid2D) -> Vec<bool> {
    let mut mask = Vec::with_capacity(grid.len());
    for k1 in 0..grid.n1() {
        let a = signed_alias(k1, grid.n1());
        for k2 in 0..grid.n2() {
            let b = signed_alias(k2, grid.n2());
            let (x1, x2) = grid.freq(k1, k2);
            // compare the reduced integers so that ξ1 + ξ2 = 0 is exact on non-square grids too
            let on_sum = if grid.n1() == grid.n2() { a + b == 0 } else { x1 + x2 == 0.0 };
            mask.push(a == 0 || b == 0 || on_sum);
        }
    }
    mask
}

impl Multiplier2D {
    pub fn from_values(grid: Grid2D, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(TwlpError::ShapeMismatch(format!(
                "expected {} symbol values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(TwlpError::InvalidArgument("non-finite symbol value".into()));
        }
        let nodal_mask = nodal_mask(&grid);
        Ok(Multiplier2D { grid, values, nodal_mask })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn nodal_mask(&self) -> &[bool] {
        &self.nodal_mask
    }
    pub fn at(&self, k1: usize, k2: usize) -> C64 {
        self.values[self.grid.index(k1, k2)]
    }

    /// True when `m(−k) = conj m(k)` on every index (real signals stay real).
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let (n1, n2) = (self.grid.n1(), self.grid.n2());
        (0..n1).all(|k1| {
            (0..n2).all(|k2| {
                let a = self.at(k1, k2);
                let b = self.at((n1 - k1) % n1, (n2 - k2) % n2);
                (a - b.conj()).norm() <= tol
            })
        })
    }
}

/// `m(ξ) = −i sgn ξ1 sgn ξ2 sgn(ξ1 + ξ2)`.
pub fn tht_symbol(xi1: f64, xi2: f64) -> C64 {
    MINUS_I * (sgn(xi1) * sgn(xi2) * sgn(xi1 + xi2))
}

pub fn tht_multiplier(grid: &Grid2D) -> Multiplier2D {
    let mut values = Vec::with_capacity(grid.len());
    for k1 in 0..grid.n1() {
        for k2 in 0..grid.n2() {
            let (a, b) = grid.freq(k1, k2);
            values.push(tht_symbol(a, b));
        }
    }
    let mut m = Multiplier2D { grid: *grid, values, nodal_mask: nodal_mask(grid) };
    for (v, &nod) in m.values.iter_mut().zip(&m.nodal_mask) {
        if nod {
            *v = ZERO;
        }
    }
    m
}

/// Six open sectors of the frequency plane plus the nodal lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum RegionLabel {
    I,
    II,
    III,
    IV,
    V,
    VI,
    Nodal,
}

impl RegionLabel {
    pub const SECTORS: [RegionLabel; 6] =
        [RegionLabel::I, RegionLabel::II, RegionLabel::III, RegionLabel::IV, RegionLabel::V, RegionLabel::VI];

    /// Sign `σ = sgn ξ1 sgn ξ2 sgn(ξ1+ξ2)` on the sector (0 on nodal lines).
    pub fn sigma(self) -> i32 {
        match self {
            RegionLabel::I | RegionLabel::III | RegionLabel::V => 1,
            RegionLabel::II | RegionLabel::IV | RegionLabel::VI => -1,
            RegionLabel::Nodal => 0,
        }
    }

    /// Sector containing `−ξ`.
    pub fn antipode(self) -> RegionLabel {
        match self {
            RegionLabel::I => RegionLabel::IV,
            RegionLabel::IV => RegionLabel::I,
            RegionLabel::II => RegionLabel::V,
            RegionLabel::V => RegionLabel::II,
            RegionLabel::III => RegionLabel::VI,
            RegionLabel::VI => RegionLabel::III,
            RegionLabel::Nodal => RegionLabel::Nodal,
        }
    }

    /// Small integer code used by region maps (nodal = 0).
    pub fn code(self) -> u8 {
        match self {
            RegionLabel::Nodal => 0,
            RegionLabel::I => 1,
            RegionLabel::II => 2,
            RegionLabel::III => 3,
            RegionLabel::IV => 4,
            RegionLabel::V => 5,
            RegionLabel::VI => 6,
        }
    }
}

pub fn classify_region(xi1: f64, xi2: f64) -> RegionLabel {
    let s = xi1 + xi2;
    if xi1 == 0.0 || xi2 == 0.0 || s == 0.0 {
        return RegionLabel::Nodal;
    }
    match (xi1 > 0.0, xi2 > 0.0, s > 0.0) {
        (true, true, _) => RegionLabel::I,
        (false, true, true) => RegionLabel::II,
        (false, true, false) => RegionLabel::III,
        (false, false, _) => RegionLabel::IV,
        (true, false, false) => RegionLabel::V,
        (true, false, true) => RegionLabel::VI,
    }
}

/// Region label of every grid frequency, row-major.
pub fn region_map(grid: &Grid2D) -> Vec<RegionLabel> {
    let mut out = Vec::with_capacity(grid.len());
    for k1 in 0..grid.n1() {
        for k2 in 0..grid.n2() {
            let (a, b) = grid.freq(k1, k2);
            out.push(classify_region(a, b));
        }
    }
    out
}

/// Restriction `m3(ξ1, ξ2, ξ1 + ξ2)` of a lifted symbol to the grid.
pub fn pushforward_multiplier(m3: impl Fn(f64, f64, f64) -> C64, grid: &Grid2D) -> Multiplier2D {
    let mut values = Vec::with_capacity(grid.len());
    for k1 in 0..grid.n1() {
        for k2 in 0..grid.n2() {
            let (a, b) = grid.freq(k1, k2);
            values.push(m3(a, b, a + b));
        }
    }
    Multiplier2D { grid: *grid, values, nodal_mask: nodal_mask(grid) }
}

/// Cutoff `η` on `[0, ∞)` with values in `[0, 1]`, vanishing beyond `1/4`.
pub trait CutoffProfile {
    fn eval(&self, t: f64) -> f64;
}

impl<F: Fn(f64) -> f64> CutoffProfile for F {
    fn eval(&self, t: f64) -> f64 {
        self(t)
    }
}

/// Identically 1 on `[0, 1/8]`, quintic C² fall-off, 0 from `1/4` on.
#[derive(Debug, Clone, Copy, Default)]
pub struct PolyBump;

impl CutoffProfile for PolyBump {
    fn eval(&self, t: f64) -> f64 {
        if t <= 0.125 {
            1.0
        } else if t >= 0.25 {
            0.0
        } else {
            let s = (t - 0.125) / 0.125;
            1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        }
    }
}

fn check_cutoff(eta: &dyn CutoffProfile) -> Result<()> {
    for i in 0..=4096 {
        let t = i as f64 / 1024.0;
        let v = eta.eval(t);
        if !(0.0..=1.0).contains(&v) || !v.is_finite() {
            return Err(TwlpError::ProfileContract(format!("η({t}) = {v} outside [0,1]")));
        }
        if t > 0.25 && v != 0.0 {
            return Err(TwlpError::ProfileContract(format!("η({t}) = {v} but support must lie in [0,1/4]")));
        }
    }
    for t in [8.0, 1e3, 1e9, f64::INFINITY] {
        if eta.eval(t) != 0.0 {
            return Err(TwlpError::ProfileContract(format!("η({t}) ≠ 0")));
        }
    }
    Ok(())
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    if b == 0.0 {
        if a == 0.0 {
            None
        } else {
            Some(f64::INFINITY)
        }
    } else {
        Some((a * a) / (b * b))
    }
}

/// `m1 = m η(|ξ1|²/|ξ2|²)`, `m2 = m η(|ξ2|²/|ξ1|²)`, `m3 = m (1 − η1 − η2)`.
pub fn flag_split(m: &Multiplier2D, eta: &dyn CutoffProfile) -> Result<(Multiplier2D, Multiplier2D, Multiplier2D)> {
    check_cutoff(eta)?;
    let g = m.grid;
    let n = g.len();
    let (mut v1, mut v2, mut v3) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for k1 in 0..g.n1() {
        for k2 in 0..g.n2() {
            let (a, b) = g.freq(k1, k2);
            let val = m.at(k1, k2);
            let e1 = ratio(a, b).map_or(0.0, |t| eta.eval(t));
            let e2 = ratio(b, a).map_or(0.0, |t| eta.eval(t));
            v1.push(val * e1);
            v2.push(val * e2);
            v3.push(val * (1.0 - e1 - e2));
        }
    }
    let mk = |values| Multiplier2D { grid: g, values, nodal_mask: m.nodal_mask.clone() };
    Ok((mk(v1), mk(v2), mk(v3)))
}

/// `idft(m · f̂)`.
pub fn apply_multiplier(m: &Multiplier2D, f: &Signal2D) -> Result<Signal2D> {
    if m.grid != *f.grid() {
        return Err(TwlpError::GridMismatch(format!("{:?} vs {:?}", m.grid, f.grid())));
    }
    Ok(idft2(&dft2(f).multiply(&m.values)))
}

/// Riesz symbol `−i ξ_j/|ξ|` (0 at the origin), `j ∈ {1, 2}`.
pub fn riesz_multiplier(j: usize, grid: &Grid2D) -> Result<Multiplier2D> {
    if j != 1 && j != 2 {
        return Err(TwlpError::InvalidArgument(format!("Riesz axis must be 1 or 2, got {j}")));
    }
    let mut values = Vec::with_capacity(grid.len());
    for k1 in 0..grid.n1() {
        for k2 in 0..grid.n2() {
            let (a, b) = grid.freq(k1, k2);
            values.push(riesz_symbol(j, a, b));
        }
    }
    Ok(Multiplier2D { grid: *grid, values, nodal_mask: nodal_mask(grid) })
}

pub fn riesz_symbol(j: usize, xi1: f64, xi2: f64) -> C64 {
    let r = xi1.hypot(xi2);
    if r == 0.0 {
        return ZERO;
    }
    let c = if j == 1 { xi1 } else { xi2 };
    MINUS_I * (c / r)
}

/// Zeroes the spectrum of `f` on the nodal lines.
pub fn remove_nodal(f: &Signal2D) -> Signal2D {
    let mask = nodal_mask(f.grid());
    let mut s = dft2(f);
    for (v, &m) in s.values_mut().iter_mut().zip(&mask) {
        if m {
            *v = ZERO;
        }
    }
    idft2(&s)
}
