//! Seeded test corpora: random signals and random open sets.

use crate::covering::OpenSetMask;
use crate::littlewood_paley::{in_band_mask, ScaleGrid};
use crate::multiplier::remove_nodal;
use crate::signal_grid::{dft2, idft2, Grid2D, Signal2D, Spectrum2D, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Real white noise, unit variance per sample.
pub fn white_noise(grid: Grid2D, seed: u64) -> Signal2D {
    let mut r = rng(seed);
    let v: Vec<f64> = (0..grid.len()).map(|_| r.sample(StandardNormal)).collect();
    Signal2D::from_real(grid, &v).expect("finite")
}

/// White noise with every nodal frequency removed.
pub fn non_nodal_noise(grid: Grid2D, seed: u64) -> Signal2D {
    remove_nodal(&white_noise(grid, seed))
}

/// Real noise projected onto the covered band of `scales`.
pub fn in_band_noise(grid: Grid2D, scales: &ScaleGrid, seed: u64) -> Signal2D {
    let f_hat = dft2(&white_noise(grid, seed));
    let mask = in_band_mask(&grid, scales);
    let vals: Vec<C64> = f_hat.values().iter().zip(&mask).map(|(&v, &m)| if m { v } else { C64::new(0.0, 0.0) }).collect();
    let out = idft2(&Spectrum2D::new(grid, vals).expect("same grid"));
    Signal2D::from_real(grid, &out.real_part()).expect("finite")
}

/// Nonnegative smooth-ish signals of varied character, indexed by `family` (0..5).
pub fn signal_family(grid: Grid2D, family: usize, seed: u64) -> Signal2D {
    let mut r = rng(seed ^ (family as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let (n1, n2) = (grid.n1(), grid.n2());
    let mut v = vec![0.0; grid.len()];
    match family % 5 {
        0 => {
            for x in v.iter_mut() {
                *x = r.gen::<f64>();
            }
        }
        1 => {
            for _ in 0..6 {
                let (c1, c2) = (r.gen_range(0..n1), r.gen_range(0..n2));
                let a = r.gen_range(0.5..2.0);
                v[grid.index(c1, c2)] += a;
            }
        }
        2 => {
            for _ in 0..4 {
                let (c1, c2) = (r.gen_range(0.0..n1 as f64), r.gen_range(0.0..n2 as f64));
                let s = r.gen_range(1.0..(n1 as f64 / 6.0));
                for i in 0..n1 {
                    for j in 0..n2 {
                        let d1 = wrap(i as f64 - c1, n1 as f64);
                        let d2 = wrap(j as f64 - c2, n2 as f64);
                        v[grid.index(i, j)] += (-(d1 * d1 + d2 * d2) / (2.0 * s * s)).exp();
                    }
                }
            }
        }
        3 => {
            let w = r.gen_range(1..4);
            let c = r.gen_range(0..n1) as i64;
            for i in 0..n1 {
                for j in 0..n2 {
                    let d = (i as i64 - j as i64 - c).rem_euclid(n1 as i64);
                    if d < w {
                        v[grid.index(i, j)] = 1.0;
                    }
                }
            }
        }
        _ => {
            for x in v.iter_mut() {
                let g: f64 = r.sample(StandardNormal);
                *x = g.abs().powi(3);
            }
        }
    }
    Signal2D::from_real(grid, &v).expect("finite")
}

/// Nonnegative field defined on the continuum torus of side `grid.length1()`, so the same seed
/// gives samples of one function at every resolution. Gaussian bumps plus one diagonal ridge.
pub fn smooth_field(grid: Grid2D, seed: u64) -> Signal2D {
    let mut r = rng(seed);
    let l = grid.length1();
    let bumps: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| (r.gen_range(0.0..l), r.gen_range(0.0..l), r.gen_range(0.04..0.15) * l, r.gen_range(0.5..2.0)))
        .collect();
    let (c, w) = (r.gen_range(0.0..l), r.gen_range(0.02..0.06) * l);
    Signal2D::from_fn(grid, |x1, x2| {
        let mut v = 0.0;
        for &(c1, c2, s, a) in &bumps {
            let (d1, d2) = (wrap(x1 - c1, l), wrap(x2 - c2, l));
            v += a * (-(d1 * d1 + d2 * d2) / (2.0 * s * s)).exp();
        }
        let d = wrap(x1 - x2 - c, l);
        v += (-d * d / (2.0 * w * w)).exp();
        C64::new(v, 0.0)
    })
    .expect("finite")
}

fn wrap(d: f64, n: f64) -> f64 {
    d - n * (d / n).round()
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Disc { c: (f64, f64), r: f64 },
    Rect { lo: (f64, f64), hi: (f64, f64) },
    /// `|x1 - x2 - c| < w`, `x2 ∈ [a, b)`
    SlantFirst { c: f64, w: f64, a: f64, b: f64 },
    /// `|x2 - x1 - c| < w`, `x1 ∈ [a, b)`
    SlantSecond { c: f64, w: f64, a: f64, b: f64 },
}

impl Shape {
    fn contains(&self, x: (f64, f64)) -> bool {
        match *self {
            Shape::Disc { c, r } => (x.0 - c.0).powi(2) + (x.1 - c.1).powi(2) < r * r,
            Shape::Rect { lo, hi } => x.0 > lo.0 && x.0 < hi.0 && x.1 > lo.1 && x.1 < hi.1,
            Shape::SlantFirst { c, w, a, b } => (x.0 - x.1 - c).abs() < w && x.1 > a && x.1 < b,
            Shape::SlantSecond { c, w, a, b } => (x.1 - x.0 - c).abs() < w && x.0 > a && x.0 < b,
        }
    }
}

/// Random open subset of the unit square, independent of resolution.
#[derive(Debug, Clone)]
pub struct RandomOpenSet {
    shapes: Vec<Shape>,
}

impl RandomOpenSet {
    pub fn new(seed: u64) -> Self {
        let mut r = rng(seed);
        let count = r.gen_range(2..7);
        let shapes = (0..count)
            .map(|_| match r.gen_range(0..4) {
                0 => Shape::Disc { c: (r.gen_range(0.15..0.85), r.gen_range(0.15..0.85)), r: r.gen_range(0.08..0.2) },
                1 => {
                    let lo = (r.gen_range(0.05..0.7), r.gen_range(0.05..0.7));
                    Shape::Rect { lo, hi: (lo.0 + r.gen_range(0.1..0.3), lo.1 + r.gen_range(0.1..0.3)) }
                }
                2 => {
                    let a = r.gen_range(0.1..0.6);
                    Shape::SlantFirst { c: r.gen_range(-0.3..0.3), w: r.gen_range(0.05..0.12), a, b: a + r.gen_range(0.15..0.35) }
                }
                _ => {
                    let a = r.gen_range(0.1..0.6);
                    Shape::SlantSecond { c: r.gen_range(-0.3..0.3), w: r.gen_range(0.05..0.12), a, b: a + r.gen_range(0.15..0.35) }
                }
            })
            .collect();
        RandomOpenSet { shapes }
    }

    pub fn contains(&self, x: (f64, f64)) -> bool {
        self.shapes.iter().any(|s| s.contains(x))
    }

    /// Pixels of an `n × n` raster whose centers lie in the set.
    pub fn rasterize(&self, n: usize) -> OpenSetMask {
        let grid = Grid2D::square(n, 1.0).expect("power of two");
        let s = 1.0 / n as f64;
        OpenSetMask::from_fn(grid, |i, j| self.contains(((i as f64 + 0.5) * s, (j as f64 + 0.5) * s)))
    }
}

/// Independent Bernoulli pixels with density `p` (for small brute-force checks).
pub fn bernoulli_set(n: usize, p: f64, seed: u64) -> OpenSetMask {
    let mut r = rng(seed);
    let grid = Grid2D::square(n, 1.0).expect("power of two");
    let mask: Vec<bool> = (0..n * n).map(|_| r.gen_bool(p)).collect();
    OpenSetMask::new(grid, mask).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_band() {
        let g = Grid2D::square(32, 1.0).unwrap();
        assert_eq!(white_noise(g, 3), white_noise(g, 3));
        let q = ScaleGrid::covering(&g, 4).unwrap();
        let f = in_band_noise(g, &q, 1);
        let spec = dft2(&f);
        let mask = in_band_mask(&g, &q);
        for (v, m) in spec.values().iter().zip(&mask) {
            if !m {
                assert!(v.norm() < 1e-9);
            }
        }
        assert!(f.values().iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn open_sets_refine() {
        let s = RandomOpenSet::new(5);
        let a = s.rasterize(32).measure() / 1024.0;
        let b = s.rasterize(64).measure() / 4096.0;
        assert!(a > 0.0 && (a - b).abs() < 0.1);
    }
}
