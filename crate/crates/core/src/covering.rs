//! Maximal dyadic tubes inside a pixel set, hat enlargements and covering sums.
//!
//! Open sets are unions of unit pixels of an `n × n` window (`h = 1`); everything outside the
//! window is outside the set. A dyadic tube is the set of pixels whose sheared integer
//! coordinates lie in its box (see [`crate::tubes::Family`]), so `|R| = 2^{e_i + e_j}`.
//!
//! Direction 1 extends the first sheared side and direction 2 the second one. Geometrically:
//! type I extends along `x1` / `x2`; types II, III along `x1` / `(1, 1)`; types IV, V along
//! `(1, 1)` / `x2`.

use crate::error::{Result, TwlpError};
use crate::maximal::{m_hl, m_strong, m_tube_brute, ScaleList};
use crate::signal_grid::{Grid2D, Signal2D};
use crate::tubes::{DyadicTube, Family, TubeType};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq)]
pub struct OpenSetMask {
    grid: Grid2D,
    mask: Vec<bool>,
}

impl OpenSetMask {
    pub fn new(grid: Grid2D, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(TwlpError::ShapeMismatch(format!("mask has {} entries for {} pixels", mask.len(), grid.len())));
        }
        Ok(OpenSetMask { grid, mask })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut mask = vec![false; grid.len()];
        for i1 in 0..grid.n1() {
            for i2 in 0..grid.n2() {
                mask[grid.index(i1, i2)] = f(i1, i2);
            }
        }
        OpenSetMask { grid, mask }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_area()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Membership of an arbitrary integer pixel (outside the window is outside the set).
    pub fn contains(&self, p1: i64, p2: i64) -> bool {
        let (n1, n2) = (self.grid.n1() as i64, self.grid.n2() as i64);
        (0..n1).contains(&p1) && (0..n2).contains(&p2) && self.mask[(p1 * n2 + p2) as usize]
    }

    pub fn is_subset_of(&self, other: &OpenSetMask) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    fn indicator(&self) -> Signal2D {
        let v: Vec<f64> = self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        Signal2D::from_real(self.grid, &v).expect("finite")
    }
}

pub(crate) fn require_unit_grid(grid: &Grid2D) -> Result<()> {
    if grid.h() != 1.0 || !grid.is_square() {
        return Err(TwlpError::Precondition("dyadic tube machinery works in pixel units: square grid with h = 1".into()));
    }
    Ok(())
}

fn sheared_coords(fam: Family, p1: i64, p2: i64) -> (i64, i64) {
    match fam {
        Family::Standard => (p1, p2),
        Family::First => (p1 - p2, p2),
        Family::Second => (p1, p2 - p1),
    }
}

fn unsheared(fam: Family, u: i64, v: i64) -> (i64, i64) {
    match fam {
        Family::Standard => (u, v),
        Family::First => (u + v, v),
        Family::Second => (u, v + u),
    }
}

/// Summed-area table of a pixel set in the sheared coordinates of one family.
#[derive(Debug, Clone)]
pub struct ShearedCounts {
    fam: Family,
    u0: i64,
    v0: i64,
    wu: usize,
    wv: usize,
    sat: Vec<u32>,
}

impl ShearedCounts {
    pub fn new(set: &OpenSetMask, fam: Family) -> Self {
        let n = set.grid.n1() as i64;
        let (u0, v0, wu, wv) = match fam {
            Family::Standard => (0, 0, n, n),
            Family::First => (-(n - 1), 0, 2 * n - 1, n),
            Family::Second => (0, -(n - 1), n, 2 * n - 1),
        };
        let (wu, wv) = (wu as usize, wv as usize);
        let mut sat = vec![0u32; (wu + 1) * (wv + 1)];
        for iu in 0..wu {
            let mut row = 0u32;
            for iv in 0..wv {
                let (p1, p2) = unsheared(fam, iu as i64 + u0, iv as i64 + v0);
                if set.contains(p1, p2) {
                    row += 1;
                }
                sat[(iu + 1) * (wv + 1) + iv + 1] = sat[iu * (wv + 1) + iv + 1] + row;
            }
        }
        ShearedCounts { fam, u0, v0, wu, wv, sat }
    }

    pub fn family(&self) -> Family {
        self.fam
    }

    /// Pixels of the set in `[ua, ub) × [va, vb)` (sheared coordinates).
    pub fn count(&self, ua: i64, ub: i64, va: i64, vb: i64) -> u64 {
        let cu = |u: i64| (u - self.u0).clamp(0, self.wu as i64) as usize;
        let cv = |v: i64| (v - self.v0).clamp(0, self.wv as i64) as usize;
        let (a, b, c, d) = (cu(ua), cu(ub), cv(va), cv(vb));
        if a >= b || c >= d {
            return 0;
        }
        let w = self.wv + 1;
        (self.sat[b * w + d] + self.sat[a * w + c]) as u64 - (self.sat[a * w + d] + self.sat[b * w + c]) as u64
    }

    fn tube_box(t: &DyadicTube) -> (i64, i64, i64, i64) {
        let (si, sj) = (1i64 << t.exps.0, 1i64 << t.exps.1);
        (t.index.0 * si, (t.index.0 + 1) * si, t.index.1 * sj, (t.index.1 + 1) * sj)
    }

    /// `|R ∩ Ω|` for a tube of this family with nonnegative exponents.
    pub fn tube_count(&self, t: &DyadicTube) -> u64 {
        debug_assert_eq!(t.family(), self.fam);
        let (a, b, c, d) = Self::tube_box(t);
        self.count(a, b, c, d)
    }

    pub fn density(&self, t: &DyadicTube) -> f64 {
        self.tube_count(t) as f64 / 2f64.powi(t.exps.0 + t.exps.1)
    }

    pub fn contains_tube(&self, t: &DyadicTube) -> bool {
        self.tube_count(t) == 1u64 << (t.exps.0 + t.exps.1)
    }

    /// Index ranges of cells with exponents `exps` meeting the sheared extent of the window.
    pub fn index_range(&self, exps: (i32, i32)) -> ((i64, i64), (i64, i64)) {
        let (si, sj) = (1i64 << exps.0, 1i64 << exps.1);
        let ua = self.u0.div_euclid(si);
        let ub = (self.u0 + self.wu as i64 - 1).div_euclid(si);
        let va = self.v0.div_euclid(sj);
        let vb = (self.v0 + self.wv as i64 - 1).div_euclid(sj);
        ((ua, ub), (va, vb))
    }
}

/// Inclusive range of dyadic side exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpRange {
    pub min: i32,
    pub max: i32,
}

impl ExpRange {
    pub fn for_grid(grid: &Grid2D) -> Self {
        ExpRange { min: 0, max: grid.n1().trailing_zeros() as i32 }
    }

    fn contains(&self, e: i32) -> bool {
        (self.min..=self.max).contains(&e)
    }
}

fn admissible_exps(kind: TubeType, range: ExpRange) -> Vec<(i32, i32)> {
    let mut out = vec![];
    for ei in range.min..=range.max {
        for ej in range.min..=range.max {
            if kind.admits(ei, ej) {
                out.push((ei, ej));
            }
        }
    }
    out
}

fn in_range(t: &DyadicTube, range: ExpRange) -> bool {
    range.contains(t.exps.0) && range.contains(t.exps.1)
}

/// `true` when `t` cannot be extended one step in `dir` inside `Ω` while keeping its type and range.
fn is_maximal_in(counts: &ShearedCounts, t: &DyadicTube, dir: u8, range: ExpRange) -> bool {
    match t.extend(dir) {
        Some(p) if in_range(&p, range) => !counts.contains_tube(&p),
        _ => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HatCase {
    /// The enlarged side is the larger one (or the type is I): plain longest-dyadic search.
    Plain,
    /// Density at the equal-sides step fails; the smaller side grows while staying smaller.
    Case1,
    /// Density at the equal-sides step holds; both sides grow jointly.
    Case2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaximalTubeEntry {
    pub tube: DyadicTube,
    /// Direction in which the tube is maximal.
    pub direction: u8,
    /// Exponent of the hat on the enlarged side (the side other than `direction`).
    pub hat_scale: i32,
    /// Exponent of the other side of the hat tube (grows only in [`HatCase::Case2`]).
    pub hat_other_scale: i32,
    pub case: HatCase,
    /// The search reached the top of the exponent range while the density still held.
    pub capped: bool,
}

impl MaximalTubeEntry {
    /// Side exponent that the hat enlarges.
    pub fn enlarged_side(&self) -> i32 {
        if self.direction == 1 {
            self.tube.exps.1
        } else {
            self.tube.exps.0
        }
    }
}

/// Maximal tubes of `kind` in `Ω` for one direction, via summed-area tables.
pub fn maximal_tubes(set: &OpenSetMask, kind: TubeType, direction: u8, range: ExpRange) -> Result<Vec<MaximalTubeEntry>> {
    require_unit_grid(&set.grid)?;
    if direction != 1 && direction != 2 {
        return Err(TwlpError::InvalidArgument(format!("direction must be 1 or 2, got {direction}")));
    }
    if range.min < 0 {
        return Err(TwlpError::InvalidArgument("exponents below the pixel size".into()));
    }
    let counts = ShearedCounts::new(set, kind.family());
    let mut out = vec![];
    if set.is_empty() {
        return Ok(out);
    }
    for exps in admissible_exps(kind, range) {
        let ((a0, a1), (b0, b1)) = counts.index_range(exps);
        for a in a0..=a1 {
            for b in b0..=b1 {
                let t = DyadicTube { kind, exps, index: (a, b) };
                if counts.contains_tube(&t) && is_maximal_in(&counts, &t, direction, range) {
                    out.push(hat_enlargement_with(&counts, t, direction, range));
                }
            }
        }
    }
    Ok(out)
}

/// Reference enumeration: pixel-by-pixel containment of every candidate tube.
pub fn maximal_tubes_brute(set: &OpenSetMask, kind: TubeType, direction: u8, range: ExpRange) -> Result<HashSet<DyadicTube>> {
    require_unit_grid(&set.grid)?;
    let n = set.grid.n1() as i64;
    let fam = kind.family();
    let inside = |t: &DyadicTube| -> bool {
        let (si, sj) = (1i64 << t.exps.0, 1i64 << t.exps.1);
        for u in t.index.0 * si..(t.index.0 + 1) * si {
            for v in t.index.1 * sj..(t.index.1 + 1) * sj {
                let (p1, p2) = unsheared(fam, u, v);
                if !set.contains(p1, p2) {
                    return false;
                }
            }
        }
        true
    };
    let mut out = HashSet::new();
    for exps in admissible_exps(kind, range) {
        let (si, sj) = (1i64 << exps.0, 1i64 << exps.1);
        // every pixel of the window, mapped to its candidate cell
        let mut cands = HashSet::new();
        for p1 in 0..n {
            for p2 in 0..n {
                let (u, v) = sheared_coords(fam, p1, p2);
                cands.insert((u.div_euclid(si), v.div_euclid(sj)));
            }
        }
        for (a, b) in cands {
            let t = DyadicTube { kind, exps, index: (a, b) };
            if !inside(&t) {
                continue;
            }
            let maximal = match t.extend(direction) {
                Some(p) if in_range(&p, range) => !inside(&p),
                _ => true,
            };
            if maximal {
                out.insert(t);
            }
        }
    }
    Ok(out)
}

/// Hat enlargement of a maximal tube (density against `Ω`).
pub fn hat_enlargement(entry: &MaximalTubeEntry, set: &OpenSetMask, range: ExpRange) -> Result<MaximalTubeEntry> {
    require_unit_grid(&set.grid)?;
    let counts = ShearedCounts::new(set, entry.tube.family());
    Ok(hat_enlargement_with(&counts, entry.tube, entry.direction, range))
}

fn ancestor(t: &DyadicTube, d_i: i32, d_j: i32) -> (i32, i32, i64, i64) {
    let (ei, ej) = (t.exps.0 + d_i, t.exps.1 + d_j);
    (ei, ej, t.index.0 >> d_i, t.index.1 >> d_j)
}

fn hat_enlargement_with(counts: &ShearedCounts, t: DyadicTube, direction: u8, range: ExpRange) -> MaximalTubeEntry {
    // side that grows: 0 = first sheared side, 1 = second
    let grow = if direction == 1 { 1 } else { 0 };
    let (e_grow, e_keep) = if grow == 0 { (t.exps.0, t.exps.1) } else { (t.exps.1, t.exps.0) };
    let dens = |dg: i32, dk: i32| -> Option<f64> {
        let (di, dj) = if grow == 0 { (dg, dk) } else { (dk, dg) };
        let (ei, ej, a, b) = ancestor(&t, di, dj);
        if !range.contains(ei) || !range.contains(ej) {
            return None;
        }
        let cand = DyadicTube { kind: t.kind, exps: (ei, ej), index: (a, b) };
        Some(counts.density(&cand))
    };
    let slant_smaller = t.family() != Family::Standard && e_grow < e_keep
        || (t.family() != Family::Standard && e_grow == e_keep && matches!(t.kind, TubeType::II | TubeType::IV) && grow == 0);
    let entry = |hat: i32, other: i32, case: HatCase, capped: bool| MaximalTubeEntry {
        tube: t,
        direction,
        hat_scale: hat,
        hat_other_scale: other,
        case,
        capped,
    };
    if !slant_smaller {
        let mut best = 0;
        let mut l = 1;
        while let Some(d) = dens(l, 0) {
            if d > 0.5 {
                best = l;
            }
            l += 1;
        }
        let capped = best == l - 1;
        return entry(e_grow + best, e_keep, HatCase::Plain, capped);
    }
    let k0 = e_keep - e_grow;
    match dens(k0, 0) {
        Some(d) if d > 0.5 => {
            let mut l = 0;
            let capped;
            loop {
                match dens(k0 + l + 1, l + 1) {
                    Some(d) if d > 0.5 => l += 1,
                    Some(_) => {
                        capped = false;
                        break;
                    }
                    None => {
                        capped = true;
                        break;
                    }
                }
            }
            entry(e_grow + k0 + l, e_keep + l, HatCase::Case2, capped)
        }
        _ => {
            let mut best = 0;
            for l in 1..k0 {
                if let Some(d) = dens(l, 0) {
                    if d > 0.5 {
                        best = l;
                    }
                }
            }
            entry(e_grow + best, e_keep, HatCase::Case1, false)
        }
    }
}

/// `Σ |R| (ℓ/ℓ̂)^κ` over entries (with `m = 1`), skipping capped hats.
pub fn covering_sum(entries: &[MaximalTubeEntry], kappa: f64) -> f64 {
    entries
        .iter()
        .filter(|e| !e.capped)
        .map(|e| 2f64.powi(e.tube.exps.0 + e.tube.exps.1) * 2f64.powf((e.enlarged_side() - e.hat_scale) as f64 * kappa))
        .sum()
}

/// Operator used to enlarge an open set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaximalOp {
    /// Uncentered dyadic tubes of all types (or of one type) containing the pixel.
    DyadicTubes(Option<TubeType>),
    /// Centered periodic tube maximal function.
    Tube,
    Strong,
    HardyLittlewood,
}

/// `{x : M(χ_Ω)(x) > threshold} ∪ Ω`.
pub fn tilde_set(set: &OpenSetMask, op: MaximalOp, threshold: f64) -> Result<OpenSetMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(TwlpError::InvalidArgument(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let grid = set.grid;
    let values: Vec<f64> = match op {
        MaximalOp::DyadicTubes(kind) => {
            require_unit_grid(&grid)?;
            dyadic_maximal(set, kind, ExpRange::for_grid(&grid))
        }
        MaximalOp::Tube => m_tube_brute(&set.indicator(), &ScaleList::dyadic(&grid))?.real_part(),
        MaximalOp::Strong => m_strong(&set.indicator()).real_part(),
        MaximalOp::HardyLittlewood => m_hl(&set.indicator()).real_part(),
    };
    let mask = values.iter().zip(&set.mask).map(|(&v, &b)| b || v > threshold).collect();
    OpenSetMask::new(grid, mask)
}

/// `sup_{R ∋ x} |R ∩ Ω|/|R|` over dyadic tubes of the given type(s) with exponents in `range`.
pub fn dyadic_maximal(set: &OpenSetMask, kind: Option<TubeType>, range: ExpRange) -> Vec<f64> {
    let n = set.grid.n1();
    let mut best = vec![0.0f64; n * n];
    let kinds: Vec<TubeType> = match kind {
        Some(k) => vec![k],
        None => TubeType::ALL.to_vec(),
    };
    for k in kinds {
        let counts = ShearedCounts::new(set, k.family());
        for exps in admissible_exps(k, range) {
            let (si, sj) = (1i64 << exps.0, 1i64 << exps.1);
            for p1 in 0..n as i64 {
                for p2 in 0..n as i64 {
                    let (u, v) = sheared_coords(k.family(), p1, p2);
                    let t = DyadicTube { kind: k, exps, index: (u.div_euclid(si), v.div_euclid(sj)) };
                    let d = counts.density(&t);
                    let b = &mut best[(p1 * n as i64 + p2) as usize];
                    *b = b.max(d);
                }
            }
        }
    }
    best
}

/// Per-type covering statistics for one open set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringStats {
    pub kind: TubeType,
    pub direction: u8,
    pub entries: usize,
    pub capped: usize,
    pub measure: f64,
    /// `(κ, covering_sum / |Ω|)`
    pub ratios: Vec<(f64, f64)>,
}

pub fn covering_stats(set: &OpenSetMask, kappas: &[f64]) -> Result<Vec<CoveringStats>> {
    let range = ExpRange::for_grid(&set.grid);
    let mut out = vec![];
    for kind in TubeType::ALL {
        for direction in [1u8, 2] {
            let e = maximal_tubes(set, kind, direction, range)?;
            let m = set.measure();
            out.push(CoveringStats {
                kind,
                direction,
                entries: e.len(),
                capped: e.iter().filter(|x| x.capped).count(),
                measure: m,
                ratios: kappas.iter().map(|&k| (k, if m > 0.0 { covering_sum(&e, k) / m } else { 0.0 })).collect(),
            });
        }
    }
    Ok(out)
}
