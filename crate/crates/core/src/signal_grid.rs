//! Periodic grids, signals and spectra, the projection push-forward and the twisted convolution.
//!
//! DFT convention: `F[k] = h^d Σ f[x] e^{-i ξ_k·x}` with `ξ_k = 2π k̃ /(n h)`, and the inverse
//! divides by `n1·n2·h²` (or `n·h` in one dimension).

use crate::error::{Result, TwlpError};
use crate::fft;
use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Signed alias of index `k` modulo `n`, in `(-n/2, n/2]`.
pub fn signed_alias(k: usize, n: usize) -> i64 {
    let k = (k % n) as i64;
    let n = n as i64;
    if k > n / 2 {
        k - n
    } else {
        k
    }
}

/// Angular frequency of index `k` on an `n`-point axis with spacing `h`.
pub fn axis_frequency(k: usize, n: usize, h: f64) -> f64 {
    2.0 * PI * signed_alias(k, n) as f64 / (n as f64 * h)
}

/// Uniform periodic grid on the torus `[0, n1 h) × [0, n2 h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n1: usize,
    n2: usize,
    h: f64,
}

impl Grid2D {
    pub fn new(n1: usize, n2: usize, h: f64) -> Result<Self> {
        if n1 == 0 || !n1.is_power_of_two() || n2 == 0 || !n2.is_power_of_two() {
            return Err(TwlpError::InvalidGrid(format!(
                "sizes must be powers of two, got {n1}x{n2}"
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(TwlpError::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        Ok(Grid2D { n1, n2, h })
    }

    /// Square `n × n` grid with spacing `h`.
    pub fn square(n: usize, h: f64) -> Result<Self> {
        Self::new(n, n, h)
    }

    /// Square grid with unit spacing (pixel units).
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn length1(&self) -> f64 {
        self.n1 as f64 * self.h
    }
    pub fn length2(&self) -> f64 {
        self.n2 as f64 * self.h
    }
    pub fn is_square(&self) -> bool {
        self.n1 == self.n2
    }
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    #[inline]
    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.n2 + i2
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.n2, idx % self.n2)
    }

    pub fn freq1(&self, k1: usize) -> f64 {
        axis_frequency(k1, self.n1, self.h)
    }
    pub fn freq2(&self, k2: usize) -> f64 {
        axis_frequency(k2, self.n2, self.h)
    }

    /// Frequency pair of index `(k1, k2)`.
    pub fn freq(&self, k1: usize, k2: usize) -> (f64, f64) {
        (self.freq1(k1), self.freq2(k2))
    }

    /// Aliased representative of `ξ1 + ξ2` (requires a square grid).
    pub fn freq_sum_aliased(&self, k1: usize, k2: usize) -> f64 {
        axis_frequency((k1 + k2) % self.n1, self.n1, self.h)
    }

    /// Signed position `k̃·h` of index `i` along axis 1.
    pub fn signed_pos1(&self, i: usize) -> f64 {
        signed_alias(i, self.n1) as f64 * self.h
    }
    pub fn signed_pos2(&self, i: usize) -> f64 {
        signed_alias(i, self.n2) as f64 * self.h
    }

    fn check_same(&self, other: &Grid2D) -> Result<()> {
        if self != other {
            return Err(TwlpError::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

fn check_finite(values: &[C64]) -> Result<()> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(TwlpError::InvalidArgument("non-finite sample".into()))
    }
}

/// Complex samples on a [`Grid2D`], row-major (`x1` major).
#[derive(Debug, Clone, PartialEq)]
pub struct Signal2D {
    grid: Grid2D,
    values: Vec<C64>,
}

impl Signal2D {
    pub fn new(grid: Grid2D, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(TwlpError::ShapeMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Signal2D { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid2D, values: Vec<C64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Signal2D { grid, values }
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Signal2D { grid, values: vec![ZERO; grid.len()] }
    }

    pub fn constant(grid: Grid2D, c: C64) -> Self {
        Signal2D { grid, values: vec![c; grid.len()] }
    }

    pub fn from_real(grid: Grid2D, re: &[f64]) -> Result<Self> {
        Self::new(grid, re.iter().map(|&r| C64::new(r, 0.0)).collect())
    }

    /// Samples `f(x1, x2)` at the grid points `(i1 h, i2 h)`.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let h = grid.h;
        let mut v = Vec::with_capacity(grid.len());
        for i1 in 0..grid.n1 {
            for i2 in 0..grid.n2 {
                v.push(f(i1 as f64 * h, i2 as f64 * h));
            }
        }
        Self::new(grid, v)
    }

    /// Unit-mass grid delta at index `(i1, i2)`: value `h⁻²` there.
    pub fn delta(grid: Grid2D, i1: usize, i2: usize) -> Self {
        let mut s = Self::zeros(grid);
        s.values[grid.index(i1, i2)] = C64::new(1.0 / grid.cell_area(), 0.0);
        s
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<C64> {
        self.values
    }
    pub fn at(&self, i1: usize, i2: usize) -> C64 {
        self.values[self.grid.index(i1, i2)]
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }
    pub fn modulus(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// `(h² Σ |f|^p)^{1/p}`.
    pub fn norm_lp(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm().powf(p)).sum();
        (self.grid.cell_area() * s).powf(1.0 / p)
    }

    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (self.grid.cell_area() * s).sqrt()
    }

    /// `h² Σ f`.
    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, a: C64) -> Signal2D {
        Signal2D { grid: self.grid, values: self.values.iter().map(|v| v * a).collect() }
    }

    pub fn add(&self, other: &Signal2D) -> Result<Signal2D> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Signal2D { grid: self.grid, values })
    }

    pub fn sub(&self, other: &Signal2D) -> Result<Signal2D> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub(crate) fn add_assign_scaled(&mut self, other: &Signal2D, a: C64) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    /// Relative L² distance `‖self − other‖ / ‖other‖`.
    pub fn rel_l2_error(&self, reference: &Signal2D) -> f64 {
        let num: f64 = self.values.iter().zip(&reference.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = reference.values.iter().map(|b| b.norm_sqr()).sum();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// DFT of a [`Signal2D`]; `‖f‖₂² = normalization · Σ|F|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum2D {
    grid: Grid2D,
    values: Vec<C64>,
}

impl Spectrum2D {
    pub fn new(grid: Grid2D, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(TwlpError::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Spectrum2D { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid2D, values: Vec<C64>) -> Self {
        Spectrum2D { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
    pub(crate) fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }
    pub fn at(&self, k1: usize, k2: usize) -> C64 {
        self.values[self.grid.index(k1, k2)]
    }

    /// Parseval constant `1/(n1 n2 h²)`.
    pub fn normalization(&self) -> f64 {
        1.0 / (self.grid.len() as f64 * self.grid.cell_area())
    }

    /// Pointwise product with a real or complex symbol.
    pub fn multiply(&self, symbol: &[C64]) -> Spectrum2D {
        let values = self.values.iter().zip(symbol).map(|(a, b)| a * b).collect();
        Spectrum2D { grid: self.grid, values }
    }

    pub fn multiply_real(&self, symbol: &[f64]) -> Spectrum2D {
        let values = self.values.iter().zip(symbol).map(|(a, b)| a * b).collect();
        Spectrum2D { grid: self.grid, values }
    }
}

pub fn dft2(f: &Signal2D) -> Spectrum2D {
    let g = f.grid;
    let mut v = f.values.clone();
    fft::fft2(&mut v, g.n1, g.n2, false);
    let s = g.cell_area();
    for x in v.iter_mut() {
        *x *= s;
    }
    Spectrum2D { grid: g, values: v }
}

pub fn idft2(spec: &Spectrum2D) -> Signal2D {
    let g = spec.grid;
    let mut v = spec.values.clone();
    fft::fft2(&mut v, g.n1, g.n2, true);
    let s = 1.0 / (g.len() as f64 * g.cell_area());
    for x in v.iter_mut() {
        *x *= s;
    }
    Signal2D { grid: g, values: v }
}

/// One-axis signal on an `n`-point periodic grid with spacing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal1D {
    h: f64,
    values: Vec<C64>,
}

impl Signal1D {
    pub fn new(h: f64, values: Vec<C64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_power_of_two() {
            return Err(TwlpError::InvalidGrid(format!(
                "length must be a power of two, got {}",
                values.len()
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(TwlpError::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        check_finite(&values)?;
        Ok(Signal1D { h, values })
    }

    pub fn from_real(h: f64, re: &[f64]) -> Result<Self> {
        Self::new(h, re.iter().map(|&r| C64::new(r, 0.0)).collect())
    }

    /// Samples `f` at signed positions `k̃ h`.
    pub fn from_fn_signed(n: usize, h: f64, f: impl Fn(f64) -> C64) -> Result<Self> {
        Self::new(h, (0..n).map(|i| f(signed_alias(i, n) as f64 * h)).collect())
    }

    /// Unit-mass delta at the origin.
    pub fn delta(n: usize, h: f64) -> Result<Self> {
        let mut v = vec![ZERO; n];
        v[0] = C64::new(1.0 / h, 0.0);
        Self::new(h, v)
    }

    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
}

/// `h Σ f[x] e^{-iξx}`.
pub fn dft1(f: &Signal1D) -> Vec<C64> {
    let mut v = f.values.clone();
    fft::fft1(&mut v, false);
    for x in v.iter_mut() {
        *x *= f.h;
    }
    v
}

pub fn idft1(spec: &[C64], h: f64) -> Result<Signal1D> {
    let n = spec.len();
    let mut v = spec.to_vec();
    fft::fft1(&mut v, true);
    let s = 1.0 / (n as f64 * h);
    for x in v.iter_mut() {
        *x *= s;
    }
    Signal1D::new(h, v)
}

/// Samples on the lifted torus, shape `n × n × n`, index `(i1 n + i2) n + i3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal3D {
    n: usize,
    h: f64,
    values: Vec<C64>,
}

impl Signal3D {
    pub fn new(n1: usize, n2: usize, n3: usize, h: f64, values: Vec<C64>) -> Result<Self> {
        if n1 != n2 || n2 != n3 {
            return Err(TwlpError::ShapeMismatch(format!(
                "all axes must share n, got {n1}x{n2}x{n3}"
            )));
        }
        if !n1.is_power_of_two() || !(h > 0.0) {
            return Err(TwlpError::InvalidGrid(format!("bad lifted grid n={n1}, h={h}")));
        }
        if values.len() != n1 * n1 * n1 {
            return Err(TwlpError::ShapeMismatch(format!(
                "expected {} samples, got {}",
                n1 * n1 * n1,
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Signal3D { n: n1, h, values })
    }

    /// `f1 ⊗ f2 ⊗ f3`.
    pub fn tensor(f1: &Signal1D, f2: &Signal1D, f3: &Signal1D) -> Result<Self> {
        let n = f1.len();
        if f2.len() != n || f3.len() != n || f1.h != f2.h || f2.h != f3.h {
            return Err(TwlpError::ShapeMismatch("tensor factors differ in length or spacing".into()));
        }
        let mut v = Vec::with_capacity(n * n * n);
        for a in &f1.values {
            for b in &f2.values {
                let ab = a * b;
                for c in &f3.values {
                    v.push(ab * c);
                }
            }
        }
        Ok(Signal3D { n, h: f1.h, values: v })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn values(&self) -> &[C64] {
        &self.values
    }
}

/// `(π_* F)(x1, x2) = h Σ_u F(x1 − u, x2 − u, u)` on the torus.
pub fn pushforward3(f: &Signal3D) -> Result<Signal2D> {
    let n = f.n;
    let grid = Grid2D::square(n, f.h)?;
    let mut out = vec![ZERO; n * n];
    for i1 in 0..n {
        for i2 in 0..n {
            let mut acc = ZERO;
            for u in 0..n {
                let a = (i1 + n - u) % n;
                let b = (i2 + n - u) % n;
                acc += f.values[(a * n + b) * n + u];
            }
            out[i1 * n + i2] = acc * f.h;
        }
    }
    Ok(Signal2D { grid, values: out })
}

/// Periodic convolution `h² Σ_y f(x − y) g(y)`.
pub fn conv2(f: &Signal2D, g: &Signal2D) -> Result<Signal2D> {
    f.grid.check_same(&g.grid)?;
    let a = dft2(f);
    let b = dft2(g);
    Ok(idft2(&a.multiply(&b.values)))
}

/// Twisted convolution `h Σ_u f(x1 − u, x2 − u) φ(u)`; spectrum `f̂(ξ) φ̂(ξ1 + ξ2)` (aliased sum).
pub fn conv_twist(f: &Signal2D, phi: &Signal1D) -> Result<Signal2D> {
    let g = f.grid;
    if !g.is_square() || phi.len() != g.n1 || (phi.h - g.h).abs() > 0.0 {
        return Err(TwlpError::ShapeMismatch(format!(
            "twisted convolution needs a square grid matching the 1D signal (n={}, h={})",
            phi.len(),
            phi.h
        )));
    }
    let n = g.n1;
    let ph = dft1(phi);
    let mut spec = dft2(f);
    for k1 in 0..n {
        for k2 in 0..n {
            spec.values[k1 * n + k2] *= ph[(k1 + k2) % n];
        }
    }
    Ok(idft2(&spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(grid: Grid2D, rng: &mut ChaCha8Rng) -> Signal2D {
        let v = (0..grid.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        Signal2D::new(grid, v).unwrap()
    }

    fn random_1d(n: usize, h: f64, rng: &mut ChaCha8Rng) -> Signal1D {
        Signal1D::new(h, (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()).unwrap()
    }

    #[test]
    fn grid_rejects_non_power_of_two() {
        assert!(Grid2D::new(12, 16, 1.0).is_err());
        assert!(Grid2D::new(16, 16, 0.0).is_err());
        assert!(Grid2D::new(16, 8, 0.5).is_ok());
    }

    #[test]
    fn alias_and_frequency() {
        assert_eq!(signed_alias(0, 8), 0);
        assert_eq!(signed_alias(4, 8), 4);
        assert_eq!(signed_alias(5, 8), -3);
        let g = Grid2D::square(8, 0.5).unwrap();
        assert!((g.freq1(1) - 2.0 * PI / 4.0).abs() < 1e-15);
        assert!((g.freq1(7) + 2.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn constant_has_dc_only_spectrum() {
        let g = Grid2D::square(8, 1.0).unwrap();
        let s = dft2(&Signal2D::constant(g, C64::new(1.0, 0.0)));
        for k in 1..g.len() {
            assert!(s.values()[k].norm() < 1e-12);
        }
        assert!((s.values()[0].re - 64.0).abs() < 1e-12);
    }

    #[test]
    fn delta_has_flat_spectrum() {
        let g = Grid2D::square(8, 0.25).unwrap();
        let s = dft2(&Signal2D::delta(g, 0, 0));
        for v in s.values() {
            assert!((v - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Grid2D::new(16, 16, 0.3).unwrap();
        let f = random_signal(g, &mut rng);
        let spec = dft2(&f);
        let back = idft2(&spec);
        assert!(back.rel_l2_error(&f) < 1e-12);
        let e = f.norm_l2().powi(2);
        let es: f64 = spec.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * spec.normalization();
        assert!(((e - es) / e).abs() < 1e-12);
    }

    #[test]
    fn pushforward_of_deltas_is_unit_mass_delta() {
        let n = 8;
        let h = 0.5;
        let d = Signal1D::delta(n, h).unwrap();
        let out = pushforward3(&Signal3D::tensor(&d, &d, &d).unwrap()).unwrap();
        // fiber sum h · h⁻³ = h⁻², the 2D unit-mass delta
        assert!((out.at(0, 0).re - 1.0 / (h * h)).abs() < 1e-12);
        assert!((out.integral().re - 1.0).abs() < 1e-12);
        let nonzero = out.values().iter().filter(|v| v.norm() > 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn pushforward_of_ones_is_period() {
        let n = 8;
        let h = 0.25;
        let one = Signal1D::from_real(h, &vec![1.0; n]).unwrap();
        let out = pushforward3(&Signal3D::tensor(&one, &one, &one).unwrap()).unwrap();
        for v in out.values() {
            assert!((v.re - n as f64 * h).abs() < 1e-12);
        }
    }

    #[test]
    fn pushforward_spectrum_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 16;
        let h = 0.5;
        let (a, b, c) = (random_1d(n, h, &mut rng), random_1d(n, h, &mut rng), random_1d(n, h, &mut rng));
        let out = dft2(&pushforward3(&Signal3D::tensor(&a, &b, &c).unwrap()).unwrap());
        // oracle: direct triple sums for each transform
        let direct = |s: &Signal1D, k: usize| -> C64 {
            (0..n)
                .map(|x| s.values()[x] * C64::from_polar(1.0, -2.0 * PI * (k * x) as f64 / n as f64))
                .sum::<C64>()
                * h
        };
        let mut err: f64 = 0.0;
        for k1 in 0..n {
            for k2 in 0..n {
                let want = direct(&a, k1) * direct(&b, k2) * direct(&c, (k1 + k2) % n);
                err = err.max((out.at(k1, k2) - want).norm());
            }
        }
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn pushforward_rejects_mismatched_axes() {
        assert!(Signal3D::new(4, 4, 8, 1.0, vec![ZERO; 128]).is_err());
    }

    #[test]
    fn conv2_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid2D::square(8, 0.5).unwrap();
        let f = random_signal(g, &mut rng);
        let k = random_signal(g, &mut rng);
        let fk = conv2(&f, &k).unwrap();
        let kf = conv2(&k, &f).unwrap();
        let n = 8;
        let mut err: f64 = 0.0;
        for x1 in 0..n {
            for x2 in 0..n {
                let mut acc = ZERO;
                for y1 in 0..n {
                    for y2 in 0..n {
                        acc += f.at((x1 + n - y1) % n, (x2 + n - y2) % n) * k.at(y1, y2);
                    }
                }
                acc *= g.cell_area();
                err = err.max((fk.at(x1, x2) - acc).norm()).max((kf.at(x1, x2) - acc).norm());
            }
        }
        assert!(err < 1e-12, "err {err}");
    }

    #[test]
    fn conv2_delta_and_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Grid2D::square(8, 0.5).unwrap();
        let f = random_signal(g, &mut rng);
        assert!(conv2(&Signal2D::delta(g, 0, 0), &f).unwrap().rel_l2_error(&f) < 1e-12);
        let one = conv2(&Signal2D::constant(g, C64::new(1.0, 0.0)), &f).unwrap();
        let total = f.integral();
        for v in one.values() {
            assert!((v - total).norm() < 1e-12);
        }
        let other = Grid2D::square(8, 1.0).unwrap();
        assert!(conv2(&f, &Signal2D::zeros(other)).is_err());
    }

    #[test]
    fn conv_twist_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 16;
        let h = 0.25;
        let g = Grid2D::square(n, h).unwrap();
        let f = random_signal(g, &mut rng);
        let phi = random_1d(n, h, &mut rng);
        let out = conv_twist(&f, &phi).unwrap();
        let mut err: f64 = 0.0;
        for x1 in 0..n {
            for x2 in 0..n {
                let mut acc = ZERO;
                for u in 0..n {
                    acc += f.at((x1 + n - u) % n, (x2 + n - u) % n) * phi.values()[u];
                }
                err = err.max((out.at(x1, x2) - acc * h).norm());
            }
        }
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn conv_twist_spectral_identity_on_every_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 8;
        let g = Grid2D::square(n, 1.0).unwrap();
        let f = random_signal(g, &mut rng);
        let phi = random_1d(n, 1.0, &mut rng);
        let lhs = dft2(&conv_twist(&f, &phi).unwrap());
        let fh = dft2(&f);
        let ph = dft1(&phi);
        for k1 in 0..n {
            for k2 in 0..n {
                let want = fh.at(k1, k2) * ph[(k1 + k2) % n];
                assert!((lhs.at(k1, k2) - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn conv_twist_delta_and_antidiagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 16;
        let h = 0.5;
        let g = Grid2D::square(n, h).unwrap();
        let f = random_signal(g, &mut rng);
        let d = Signal1D::delta(n, h).unwrap();
        assert!(conv_twist(&f, &d).unwrap().rel_l2_error(&f) < 1e-12);
        // a wave on ξ1 + ξ2 = 0 only picks up φ̂(0)
        let a = 2.0 * PI * 3.0 / g.length1();
        let wave = Signal2D::from_fn(g, |x1, x2| C64::from_polar(1.0, a * (x1 - x2))).unwrap();
        let phi = random_1d(n, h, &mut rng);
        let ph0 = dft1(&phi)[0];
        let out = conv_twist(&wave, &phi).unwrap();
        assert!(out.rel_l2_error(&wave.scale(ph0)) < 1e-12);
        assert!(conv_twist(&f, &Signal1D::delta(8, h).unwrap()).is_err());
    }

    #[test]
    fn pushforward_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 8;
        let h = 0.5;
        let mk = |rng: &mut ChaCha8Rng| {
            Signal3D::new(n, n, n, h, (0..n * n * n).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect()).unwrap()
        };
        let a = mk(&mut rng);
        let b = mk(&mut rng);
        let (ca, cb) = (C64::new(2.0, 0.0), C64::new(-0.5, 0.0));
        let comb = Signal3D::new(n, n, n, h, a.values().iter().zip(b.values()).map(|(x, y)| ca * x + cb * y).collect()).unwrap();
        let lhs = pushforward3(&comb).unwrap();
        let rhs = pushforward3(&a).unwrap().scale(ca).add(&pushforward3(&b).unwrap().scale(cb)).unwrap();
        assert!(lhs.rel_l2_error(&rhs) < 1e-14);
    }
}
