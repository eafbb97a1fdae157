//! Tubes `T(x, r)` in the plane (`m = 1`), the five dyadic tube types and their tents.
//!
//! Every tube family is an axis rectangle in its own sheared coordinates:
//! standard `(x1, x2)`, first-direction slant `(x1 − x2, x2)`, second-direction slant `(x1, x2 − x1)`.

use crate::error::{Result, TwlpError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeParams {
    pub center: [f64; 2],
    pub r: [f64; 3],
}

impl TubeParams {
    pub fn new(center: [f64; 2], r: [f64; 3]) -> Result<Self> {
        if r.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(TwlpError::InvalidArgument(format!("radii must be positive, got {r:?}")));
        }
        Ok(TubeParams { center, r })
    }

    pub fn shape(&self) -> TubeShape {
        tube_shape(self.r)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        tube_contains(self, p)
    }
}

/// Resolved shape with its two active radii.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TubeShape {
    /// `|x1| < a, |x2| < b`
    Rectangle { a: f64, b: f64 },
    /// `|x1 − x2| < a, |x2| < b`
    SlantFirst { a: f64, b: f64 },
    /// `|x2 − x1| < a, |x1| < b`
    SlantSecond { a: f64, b: f64 },
}

impl TubeShape {
    pub fn family(&self) -> Family {
        match self {
            TubeShape::Rectangle { .. } => Family::Standard,
            TubeShape::SlantFirst { .. } => Family::First,
            TubeShape::SlantSecond { .. } => Family::Second,
        }
    }
}

pub fn tube_shape(r: [f64; 3]) -> TubeShape {
    let [r1, r2, r3] = r;
    if r1 >= r3 && r2 >= r3 {
        TubeShape::Rectangle { a: r1, b: r2 }
    } else if r1 >= r2 && r3 >= r2 {
        TubeShape::SlantFirst { a: r1, b: r3 }
    } else {
        TubeShape::SlantSecond { a: r2, b: r3 }
    }
}

pub fn tube_volume(r: [f64; 3], m: u32) -> f64 {
    let (a, b) = match tube_shape(r) {
        TubeShape::Rectangle { a, b } | TubeShape::SlantFirst { a, b } | TubeShape::SlantSecond { a, b } => (a, b),
    };
    (a * b).powi(m as i32)
}

pub fn tube_contains(t: &TubeParams, p: [f64; 2]) -> bool {
    let (x1, x2) = (p[0] - t.center[0], p[1] - t.center[1]);
    match t.shape() {
        TubeShape::Rectangle { a, b } => x1.abs() < a && x2.abs() < b,
        TubeShape::SlantFirst { a, b } => (x1 - x2).abs() < a && x2.abs() < b,
        TubeShape::SlantSecond { a, b } => (x2 - x1).abs() < a && x1.abs() < b,
    }
}

/// Coordinate system in which a family of tubes is a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Standard,
    First,
    Second,
}

impl Family {
    pub fn shear(self, p: [f64; 2]) -> [f64; 2] {
        match self {
            Family::Standard => p,
            Family::First => [p[0] - p[1], p[1]],
            Family::Second => [p[0], p[1] - p[0]],
        }
    }

    pub fn unshear(self, q: [f64; 2]) -> [f64; 2] {
        match self {
            Family::Standard => q,
            Family::First => [q[0] + q[1], q[1]],
            Family::Second => [q[0], q[1] + q[0]],
        }
    }

    /// Integer version on a periodic grid of side `n`.
    pub fn shear_index(self, p: (usize, usize), n: usize) -> (usize, usize) {
        match self {
            Family::Standard => p,
            Family::First => ((p.0 + n - p.1) % n, p.1),
            Family::Second => (p.0, (p.1 + n - p.0) % n),
        }
    }

    pub fn unshear_index(self, q: (usize, usize), n: usize) -> (usize, usize) {
        match self {
            Family::Standard => q,
            Family::First => ((q.0 + q.1) % n, q.1),
            Family::Second => (q.0, (q.1 + q.0) % n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TubeType {
    I,
    II,
    III,
    IV,
    V,
}

impl TubeType {
    pub const ALL: [TubeType; 5] = [TubeType::I, TubeType::II, TubeType::III, TubeType::IV, TubeType::V];

    pub fn family(self) -> Family {
        match self {
            TubeType::I => Family::Standard,
            TubeType::II | TubeType::III => Family::First,
            TubeType::IV | TubeType::V => Family::Second,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TubeType::I => "I",
            TubeType::II => "II",
            TubeType::III => "III",
            TubeType::IV => "IV",
            TubeType::V => "V",
        }
    }

    /// Whether side exponents `(e_i, e_j)` are admissible for this type.
    pub fn admits(self, e_i: i32, e_j: i32) -> bool {
        match self {
            TubeType::I => true,
            TubeType::II | TubeType::IV => e_i <= e_j,
            TubeType::III | TubeType::V => e_i > e_j,
        }
    }

    /// The type of a slant family for given side exponents.
    pub fn for_family(f: Family, e_i: i32, e_j: i32) -> TubeType {
        match f {
            Family::Standard => TubeType::I,
            Family::First if e_i <= e_j => TubeType::II,
            Family::First => TubeType::III,
            Family::Second if e_i <= e_j => TubeType::IV,
            Family::Second => TubeType::V,
        }
    }
}

/// Type and side exponents of the dyadic rectangles of scale `j`.
///
/// Ties are resolved with the same precedence as [`tube_shape`]. The second slant family has
/// its `x1` side `2^{j3}` and its `x2 − x1` side `2^{j2}`, as in `T(0, r)`.
pub fn type_for_scale(j: [i32; 3]) -> (TubeType, (i32, i32)) {
    let [j1, j2, j3] = j;
    if j1 >= j3 && j2 >= j3 {
        (TubeType::I, (j1, j2))
    } else if j1 >= j2 && j3 >= j2 {
        (TubeType::for_family(Family::First, j1, j3), (j1, j3))
    } else {
        (TubeType::for_family(Family::Second, j3, j2), (j3, j2))
    }
}

fn p2(e: i32) -> f64 {
    2f64.powi(e)
}

/// A dyadic tube: the box `[a 2^{e_i}, (a+1) 2^{e_i}) × [b 2^{e_j}, (b+1) 2^{e_j})` in the
/// sheared coordinates of its type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicTube {
    pub kind: TubeType,
    pub exps: (i32, i32),
    pub index: (i64, i64),
}

impl DyadicTube {
    pub fn new(kind: TubeType, exps: (i32, i32), index: (i64, i64)) -> Result<Self> {
        if !kind.admits(exps.0, exps.1) {
            return Err(TwlpError::InvalidArgument(format!("exponents {exps:?} not admissible for type {}", kind.name())));
        }
        Ok(DyadicTube { kind, exps, index })
    }

    /// The cell of scale `j` containing `p` (no periodic wrap).
    pub fn containing(j: [i32; 3], p: [f64; 2]) -> Self {
        let (kind, exps) = type_for_scale(j);
        let q = kind.family().shear(p);
        let a = (q[0] / p2(exps.0)).floor() as i64;
        let b = (q[1] / p2(exps.1)).floor() as i64;
        DyadicTube { kind, exps, index: (a, b) }
    }

    pub fn family(&self) -> Family {
        self.kind.family()
    }

    pub fn sides(&self) -> (f64, f64) {
        (p2(self.exps.0), p2(self.exps.1))
    }

    pub fn measure(&self) -> f64 {
        p2(self.exps.0 + self.exps.1)
    }

    /// Lattice anchor in the original coordinates.
    pub fn anchor(&self) -> [f64; 2] {
        let (si, sj) = self.sides();
        self.family().unshear([self.index.0 as f64 * si, self.index.1 as f64 * sj])
    }

    pub fn center(&self) -> [f64; 2] {
        let (si, sj) = self.sides();
        self.family().unshear([(self.index.0 as f64 + 0.5) * si, (self.index.1 as f64 + 0.5) * sj])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (si, sj) = self.sides();
        let q = self.family().shear(p);
        let (u, v) = (q[0] / si - self.index.0 as f64, q[1] / sj - self.index.1 as f64);
        (0.0..1.0).contains(&u) && (0.0..1.0).contains(&v)
    }

    /// Membership on the torus `[0, period)²`.
    pub fn contains_periodic(&self, p: [f64; 2], period: f64) -> bool {
        let (si, sj) = self.sides();
        let q = self.family().shear(p);
        let u = (q[0] - self.index.0 as f64 * si).rem_euclid(period);
        let v = (q[1] - self.index.1 as f64 * sj).rem_euclid(period);
        u < si && v < sj
    }

    /// Scale triple with the free exponent set to its largest admissible value.
    pub fn scale_triple(&self) -> [i32; 3] {
        let (ei, ej) = self.exps;
        match self.family() {
            Family::Standard => [ei, ej, ei.min(ej)],
            Family::First => [ei, ei.min(ej) - 1, ej],
            Family::Second => [ei.min(ej) - 1, ej, ei],
        }
    }

    /// Parent in the direction of the first (`dir = 1`) or second sheared side.
    pub fn extend(&self, dir: u8) -> Option<DyadicTube> {
        let (ei, ej) = self.exps;
        let (a, b) = self.index;
        let (exps, index) = if dir == 1 {
            ((ei + 1, ej), (a.div_euclid(2), b))
        } else {
            ((ei, ej + 1), (a, b.div_euclid(2)))
        };
        let kind = TubeType::for_family(self.family(), exps.0, exps.1);
        if kind != self.kind {
            return None;
        }
        Some(DyadicTube { kind, exps, index })
    }
}

/// Dyadic rectangles of scale `j` tiling the periodic window `[0, 2^w)²`.
pub fn dyadic_cells(j: [i32; 3], window_log2: i32) -> Result<Vec<DyadicTube>> {
    let (kind, exps) = type_for_scale(j);
    if exps.0 > window_log2 || exps.1 > window_log2 {
        return Err(TwlpError::InvalidArgument(format!("scale {j:?} exceeds the window 2^{window_log2}")));
    }
    if window_log2 - exps.0.min(exps.1) > 24 {
        return Err(TwlpError::InvalidArgument("too many cells".into()));
    }
    let na = 1i64 << (window_log2 - exps.0);
    let nb = 1i64 << (window_log2 - exps.1);
    let mut out = Vec::with_capacity((na * nb) as usize);
    for a in 0..na {
        for b in 0..nb {
            out.push(DyadicTube { kind, exps, index: (a, b) });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TilingReport {
    pub cells: usize,
    pub volume_sum: f64,
    pub window_volume: f64,
    pub samples: usize,
    pub uncovered: usize,
    pub overlapped: usize,
}

impl TilingReport {
    pub fn exact(&self) -> bool {
        self.uncovered == 0 && self.overlapped == 0 && (self.volume_sum - self.window_volume).abs() < 1e-9 * self.window_volume
    }
}

/// Brute-force tiling check on a `res × res` grid of cell-centered sample points.
pub fn tiling_check(j: [i32; 3], window_log2: i32, res: usize) -> Result<TilingReport> {
    let cells = dyadic_cells(j, window_log2)?;
    let l = p2(window_log2);
    let mut uncovered = 0;
    let mut overlapped = 0;
    for i1 in 0..res {
        for i2 in 0..res {
            let p = [(i1 as f64 + 0.37) * l / res as f64, (i2 as f64 + 0.61) * l / res as f64];
            let c = cells.iter().filter(|t| t.contains_periodic(p, l)).count();
            if c == 0 {
                uncovered += 1;
            } else if c > 1 {
                overlapped += 1;
            }
        }
    }
    Ok(TilingReport {
        cells: cells.len(),
        volume_sum: cells.iter().map(|t| t.measure()).sum(),
        window_volume: l * l,
        samples: res * res,
        uncovered,
        overlapped,
    })
}

/// σ-enlargement `c_R + T(0, 2^{j+σ−1})`: the concentric tube whose sides are `2^σ` times those of `t`.
pub fn enlarge(t: &DyadicTube, sigma: u32) -> TubeParams {
    let j = t.scale_triple();
    let s = sigma as i32 - 1;
    TubeParams { center: t.center(), r: [p2(j[0] + s), p2(j[1] + s), p2(j[2] + s)] }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tent {
    pub base: DyadicTube,
    pub scale: [i32; 3],
}

impl Tent {
    /// Tent over the cell of scale `j` containing `x`.
    pub fn at(j: [i32; 3], x: [f64; 2]) -> Tent {
        Tent { base: DyadicTube::containing(j, x), scale: j }
    }

    /// Height box `Π [2^{j_i}, 2^{j_i+1})`.
    pub fn height_box(&self) -> [(f64, f64); 3] {
        self.scale.map(|e| (p2(e), p2(e + 1)))
    }

    pub fn contains(&self, x: [f64; 2], t: [f64; 3]) -> bool {
        self.height_box().iter().zip(t.iter()).all(|(&(lo, hi), &v)| lo <= v && v < hi) && self.base.contains(x)
    }
}

pub fn tent_of(t: &DyadicTube) -> Tent {
    Tent { base: *t, scale: t.scale_triple() }
}

/// Scale triple of the tent containing `(x, t)`.
pub fn tent_scale(t: [f64; 3]) -> [i32; 3] {
    t.map(|v| v.log2().floor() as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TentPartitionReport {
    pub samples: usize,
    pub exactly_one: usize,
    pub none: usize,
    pub multiple: usize,
}

impl TentPartitionReport {
    pub fn fraction(&self) -> f64 {
        self.exactly_one as f64 / self.samples.max(1) as f64
    }
}

/// Samples points of `[0, 2^w)² × [2^lo, 2^{hi+1})³` and counts the tents containing each one,
/// scanning every scale triple and every cell of the periodic window.
pub fn tent_partition_check(window_log2: i32, scale_range: (i32, i32), samples: usize, seed: u64) -> Result<TentPartitionReport> {
    let (lo, hi) = scale_range;
    if lo > hi || hi > window_log2 {
        return Err(TwlpError::InvalidArgument(format!("bad scale range {scale_range:?}")));
    }
    let l = p2(window_log2);
    let mut by_scale = Vec::new();
    for j1 in lo..=hi {
        for j2 in lo..=hi {
            for j3 in lo..=hi {
                let j = [j1, j2, j3];
                by_scale.push((j, dyadic_cells(j, window_log2)?));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = TentPartitionReport { samples, exactly_one: 0, none: 0, multiple: 0 };
    for _ in 0..samples {
        let x = [rng.gen_range(0.0..l), rng.gen_range(0.0..l)];
        let t: [f64; 3] = [0; 3].map(|_| 2f64.powf(rng.gen_range(lo as f64..(hi + 1) as f64)));
        let mut count = 0;
        for (j, cells) in &by_scale {
            let in_height = j.iter().zip(t.iter()).all(|(&e, &v)| p2(e) <= v && v < p2(e + 1));
            if !in_height {
                continue;
            }
            count += cells.iter().filter(|c| c.contains_periodic(x, l)).count();
        }
        match count {
            0 => rep.none += 1,
            1 => rep.exactly_one += 1,
            _ => rep.multiple += 1,
        }
    }
    Ok(rep)
}

/// `y ∈ π(B̃(0, r))`: the intervals `y1 ± r1`, `y2 ± r2`, `±r3` share a point.
pub fn in_projected_ball(y: [f64; 2], r: [f64; 3]) -> bool {
    let lo = (y[0] - r[0]).max(y[1] - r[1]).max(-r[2]);
    let hi = (y[0] + r[0]).min(y[1] + r[1]).min(r[2]);
    lo < hi
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub trials: usize,
    pub inner_checked: usize,
    pub inner_failures: usize,
    pub outer_checked: usize,
    pub outer_failures: usize,
}

/// Checks `T(x, r/2) ⊂ π(B̃(x, r)) ⊂ T(x, 2r)` for random `(x, r)`.
///
/// Inner: a 41×41 grid of points of `T(x, r/2)` is tested against the projected ball.
/// Outer: `ball_samples` points of the product ball are projected and tested against `T(x, 2r)`.
pub fn sandwich_check(trials: usize, ball_samples: usize, seed: u64) -> SandwichReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SandwichReport { trials, inner_checked: 0, inner_failures: 0, outer_checked: 0, outer_failures: 0 };
    for _ in 0..trials {
        let x = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let r: [f64; 3] = [0; 3].map(|_| 2f64.powf(rng.gen_range(-3.0..3.0)));
        let half = TubeParams { center: x, r: r.map(|v| v / 2.0) };
        let double = TubeParams { center: x, r: r.map(|v| v * 2.0) };
        let fam = half.shape().family();
        let (a, b) = match half.shape() {
            TubeShape::Rectangle { a, b } | TubeShape::SlantFirst { a, b } | TubeShape::SlantSecond { a, b } => (a, b),
        };
        // box coordinates in the sheared frame, ordered as the shape's (a, b)
        let to_sheared = |s: f64, t: f64| -> [f64; 2] {
            match fam {
                Family::Standard | Family::First => [s, t],
                Family::Second => [t, s],
            }
        };
        for i in 0..41 {
            for k in 0..41 {
                let s = a * (i as f64 - 20.0) / 20.5;
                let t = b * (k as f64 - 20.0) / 20.5;
                let d = fam.unshear(to_sheared(s, t));
                let y = [x[0] + d[0], x[1] + d[1]];
                if !half.contains(y) {
                    continue;
                }
                rep.inner_checked += 1;
                if !in_projected_ball([y[0] - x[0], y[1] - x[1]], r) {
                    rep.inner_failures += 1;
                }
            }
        }
        for _ in 0..ball_samples {
            let z: [f64; 3] = [0, 1, 2].map(|i| rng.gen_range(-r[i]..r[i]));
            let y = [x[0] + z[0] + z[2], x[1] + z[1] + z[2]];
            rep.outer_checked += 1;
            if !double.contains(y) {
                rep.outer_failures += 1;
            }
        }
    }
    rep
}
