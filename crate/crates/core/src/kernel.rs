//! Space-side model of the planar twisted Hilbert kernel
//! `K(x, y) = C1/(xy) + C2 ln|x/y| / ((x − y) ζ(x, y))` and its size estimates.

use crate::error::{Result, TwlpError};
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Degree-0 homogeneous factor `ζ`.
#[derive(Clone)]
pub enum Zeta {
    Constant(f64),
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Zeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Zeta::Constant(c) => write!(f, "Zeta::Constant({c})"),
            Zeta::Custom(_) => write!(f, "Zeta::Custom(..)"),
        }
    }
}

impl Zeta {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Zeta::Constant(c) => *c,
            Zeta::Custom(f) => f(x, y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwistedKernelModel {
    pub c1: f64,
    pub c2: f64,
    pub zeta: Zeta,
}

impl Default for TwistedKernelModel {
    fn default() -> Self {
        TwistedKernelModel { c1: 1.0, c2: 1.0, zeta: Zeta::Constant(1.0) }
    }
}

impl TwistedKernelModel {
    pub fn new(c1: f64, c2: f64) -> Self {
        TwistedKernelModel { c1, c2, zeta: Zeta::Constant(1.0) }
    }

    /// Checks `ζ(λx, λy) = ζ(x, y)` on a few sample points.
    pub fn zeta_is_homogeneous(&self, tol: f64) -> bool {
        let pts = [(1.0, 2.0), (-0.5, 3.0), (2.5, -1.5), (-4.0, -0.25)];
        pts.iter().all(|&(x, y)| {
            [0.1, 0.5, 3.0, 17.0].iter().all(|&l| (self.zeta.eval(l * x, l * y) - self.zeta.eval(x, y)).abs() <= tol)
        })
    }
}

fn off_sigma(x: f64, y: f64) -> Result<()> {
    if x == 0.0 || y == 0.0 || x == y || !x.is_finite() || !y.is_finite() {
        return Err(TwlpError::Singular(format!("({x}, {y}) lies on x = 0, y = 0 or x = y")));
    }
    Ok(())
}

/// `1/((x−z)(y−z)z) = 1/(xyz) − 1/(x(x−y)(x−z)) + 1/(y(x−y)(y−z))`, returned term by term.
pub fn partial_fraction_terms(x: f64, y: f64, z: f64) -> Result<(f64, f64, f64)> {
    for (name, v) in [("x", x), ("y", y), ("z", z), ("x-y", x - y), ("x-z", x - z), ("y-z", y - z)] {
        if v == 0.0 || !v.is_finite() {
            return Err(TwlpError::Singular(format!("{name} = {v}")));
        }
    }
    let t1 = 1.0 / (x * y * z);
    let t2 = -1.0 / (x * (x - y) * (x - z));
    let t3 = 1.0 / (y * (x - y) * (y - z));
    Ok((t1, t2, t3))
}

/// `ln|x/y|`, accurate near the diagonal.
fn log_ratio(x: f64, y: f64) -> f64 {
    let q = x / y;
    if q > 0.0 {
        ((x - y) / y).ln_1p()
    } else {
        (-q).ln()
    }
}

pub fn kernel_eval(model: &TwistedKernelModel, x: f64, y: f64) -> Result<f64> {
    off_sigma(x, y)?;
    let z = model.zeta.eval(x, y);
    Ok(model.c1 / (x * y) + model.c2 * log_ratio(x, y) / ((x - y) * z))
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn binom(n: u32, k: u32) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn sign(k: u32) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `∂x^a ∂y^b (ln|x| − ln|y|)`.
fn d_log(x: f64, y: f64, a: u32, b: u32) -> f64 {
    match (a, b) {
        (0, 0) => log_ratio(x, y),
        (a, 0) => sign(a - 1) * factorial(a - 1) * x.powi(-(a as i32)),
        (0, b) => -sign(b - 1) * factorial(b - 1) * y.powi(-(b as i32)),
        _ => 0.0,
    }
}

/// `∂x^c ∂y^d (x − y)^{-1}`.
fn d_inv_diff(x: f64, y: f64, c: u32, d: u32) -> f64 {
    sign(c) * factorial(c + d) * (x - y).powi(-1 - (c + d) as i32)
}

/// Closed-form `∂x^α ∂y^β K` (requires a constant `ζ`).
pub fn kernel_derivative(model: &TwistedKernelModel, x: f64, y: f64, alpha: u32, beta: u32) -> Result<f64> {
    off_sigma(x, y)?;
    let z = match model.zeta {
        Zeta::Constant(z) => z,
        Zeta::Custom(_) => {
            return Err(TwlpError::InvalidArgument("analytic derivatives need a constant ζ".into()))
        }
    };
    let prod = model.c1
        * sign(alpha + beta)
        * factorial(alpha)
        * factorial(beta)
        * x.powi(-1 - alpha as i32)
        * y.powi(-1 - beta as i32);
    let mut log_part = 0.0;
    for a in 0..=alpha {
        for b in 0..=beta {
            let da = d_log(x, y, a, b);
            if da == 0.0 {
                continue;
            }
            log_part += binom(alpha, a) * binom(beta, b) * da * d_inv_diff(x, y, alpha - a, beta - b);
        }
    }
    Ok(prod + model.c2 / z * log_part)
}

/// Right-hand side of the twisted size condition.
pub fn size_bound_rhs(x: f64, y: f64, alpha: u32, beta: u32) -> Result<f64> {
    off_sigma(x, y)?;
    let (ax, ay, d) = (x.abs(), y.abs(), (x - y).abs());
    let (a, b) = (alpha as i32, beta as i32);
    let mut s = ax.powi(-1 - a) * ay.powi(-1 - b);
    for g in 0..=a {
        s += d.powi(-(1 + a + b - g)) * ax.powi(-1 - g);
    }
    for g in 0..=b {
        s += d.powi(-(1 + a + b - g)) * ay.powi(-1 - g);
    }
    Ok(s)
}

/// Sample set for the size-bound sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSpec {
    /// `count` log-spaced magnitudes in `[lo, hi]`, both signs per axis, points with
    /// `|x − y| < delta · max(|x|, |y|)` dropped.
    LogGrid { lo: f64, hi: f64, delta: f64, count: usize },
    /// Explicit points; each must respect the margin.
    Points { points: Vec<(f64, f64)>, delta: f64 },
}

impl SampleSpec {
    pub fn default_sweep() -> Self {
        SampleSpec::LogGrid { lo: 0.1, hi: 10.0, delta: 0.05, count: 48 }
    }

    fn describe(&self) -> String {
        match self {
            SampleSpec::LogGrid { lo, hi, delta, count } => {
                format!("log grid |x|,|y| in [{lo}, {hi}], {count} magnitudes per axis, both signs, margin {delta}")
            }
            SampleSpec::Points { points, delta } => format!("{} explicit points, margin {delta}", points.len()),
        }
    }

    fn points(&self) -> Result<Vec<(f64, f64)>> {
        match self {
            SampleSpec::LogGrid { lo, hi, delta, count } => {
                if !(*delta > 0.0) || !(*lo > 0.0) || hi < lo || *count == 0 {
                    return Err(TwlpError::InvalidArgument(format!("bad sample grid {self:?}")));
                }
                let mags: Vec<f64> = if *count == 1 {
                    vec![*lo]
                } else {
                    (0..*count).map(|i| lo * (hi / lo).powf(i as f64 / (*count - 1) as f64)).collect()
                };
                let mut out = Vec::new();
                for &mx in &mags {
                    for sx in [1.0, -1.0] {
                        for &my in &mags {
                            for sy in [1.0, -1.0] {
                                let (x, y) = (sx * mx, sy * my);
                                if (x - y).abs() >= delta * x.abs().max(y.abs()) {
                                    out.push((x, y));
                                }
                            }
                        }
                    }
                }
                Ok(out)
            }
            SampleSpec::Points { points, delta } => {
                if !(*delta > 0.0) {
                    return Err(TwlpError::InvalidArgument("margin must be positive".into()));
                }
                for &(x, y) in points {
                    if x == 0.0 || y == 0.0 || (x - y).abs() < delta * x.abs().max(y.abs()) {
                        return Err(TwlpError::Precondition(format!("sample ({x}, {y}) too close to the singular set")));
                    }
                }
                Ok(points.clone())
            }
        }
    }

    fn refined(&self) -> Option<SampleSpec> {
        match self {
            SampleSpec::LogGrid { lo, hi, delta, count } if *count > 1 => {
                Some(SampleSpec::LogGrid { lo: *lo, hi: *hi, delta: *delta, count: 2 * count - 1 })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SizeBoundReport {
    pub orders: (u32, u32),
    /// `sup |∂^α∂^β K| / RHS` on the sample set.
    pub max_ratio: f64,
    /// Same supremum on the refined sample set (about twice the samples per axis).
    pub refined_ratio: f64,
    /// `refined_ratio / max_ratio − 1`.
    pub growth: f64,
    /// `sup |∂^α∂^β K| / (|x|^{-1-α}|y|^{-1-β})`, the product part of the bound alone.
    pub max_product_ratio: f64,
    pub sample_count: usize,
    pub grid_spec: String,
    pub pass: bool,
}

fn sup_ratios(model: &TwistedKernelModel, pts: &[(f64, f64)], a: u32, b: u32) -> Result<(f64, f64)> {
    let mut best = 0.0f64;
    let mut best_prod = 0.0f64;
    for &(x, y) in pts {
        let d = kernel_derivative(model, x, y, a, b)?.abs();
        let rhs = size_bound_rhs(x, y, a, b)?;
        best = best.max(d / rhs);
        best_prod = best_prod.max(d * x.abs().powi(1 + a as i32) * y.abs().powi(1 + b as i32));
    }
    Ok((best, best_prod))
}

/// Sup ratio `|∂^α∂^β K| / RHS` for all `α, β ≤ max_order`, with a refinement check.
pub fn verify_size_bounds(model: &TwistedKernelModel, max_order: u32, spec: &SampleSpec) -> Result<Vec<SizeBoundReport>> {
    let pts = spec.points()?;
    if pts.is_empty() {
        return Err(TwlpError::Precondition("no admissible sample points".into()));
    }
    let fine = spec.refined();
    let fine_pts = match &fine {
        Some(s) => Some(s.points()?),
        None => None,
    };
    let mut out = Vec::new();
    for a in 0..=max_order {
        for b in 0..=max_order {
            let (r, pr) = sup_ratios(model, &pts, a, b)?;
            let rf = match &fine_pts {
                Some(p) => sup_ratios(model, p, a, b)?.0,
                None => r,
            };
            let growth = if r > 0.0 { rf / r - 1.0 } else { 0.0 };
            out.push(SizeBoundReport {
                orders: (a, b),
                max_ratio: r,
                refined_ratio: rf,
                growth,
                max_product_ratio: pr,
                sample_count: pts.len(),
                grid_spec: spec.describe(),
                pass: r.is_finite() && rf.is_finite() && growth < 0.05,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::E;

    #[test]
    fn partial_fractions_examples() {
        let (a, b, c) = partial_fraction_terms(2.0, 3.0, 1.0).unwrap();
        assert!((a + b + c - 0.5).abs() < 1e-15);
        let (a, b, c) = partial_fraction_terms(1.0, -1.0, 2.0).unwrap();
        assert!((a + b + c - 1.0 / 6.0).abs() < 1e-15);
        let (a1, b1, c1) = partial_fraction_terms(2.5, -0.7, 1.3).unwrap();
        let (a2, b2, c2) = partial_fraction_terms(-0.7, 2.5, 1.3).unwrap();
        assert_eq!(a1, a2);
        assert!((b1 - c2).abs() < 1e-15 && (c1 - b2).abs() < 1e-15);
        assert!(matches!(partial_fraction_terms(1.0, 1.0, 2.0), Err(TwlpError::Singular(_))));
        assert!(partial_fraction_terms(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn partial_fractions_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10_000 {
            let (x, y, z): (f64, f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            if let Ok((a, b, c)) = partial_fraction_terms(x, y, z) {
                let lhs = 1.0 / ((x - z) * (y - z) * z);
                let scale = a.abs() + b.abs() + c.abs();
                assert!(((a + b + c) - lhs).abs() <= 1e-12 * scale.max(lhs.abs()));
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let m = TwistedKernelModel::new(0.0, 1.0);
        assert!((kernel_eval(&m, 1.0, E).unwrap() - 1.0 / (E - 1.0)).abs() < 1e-14);
        assert!((kernel_eval(&m, 1.0, E).unwrap() - 0.58198).abs() < 1e-5);
        assert!((kernel_eval(&m, 1.0, 1.0 + 1e-8).unwrap() - 1.0).abs() < 1e-6);
        let p = TwistedKernelModel::new(1.0, 0.0);
        for l in [0.5, 2.0, 7.0] {
            let a = kernel_eval(&p, 1.3 * l, -0.4 * l).unwrap();
            let b = kernel_eval(&p, 1.3, -0.4).unwrap();
            assert!((a - b / (l * l)).abs() <= 1e-15 * b.abs());
        }
        assert!(kernel_eval(&m, 0.0, 1.0).is_err());
        assert!(kernel_eval(&m, 2.0, 2.0).is_err());
        assert!(TwistedKernelModel::default().zeta_is_homogeneous(0.0));
        let custom = TwistedKernelModel {
            c1: 1.0,
            c2: 1.0,
            zeta: Zeta::Custom(Arc::new(|x: f64, y: f64| 2.0 + (x / y).atan())),
        };
        assert!(custom.zeta_is_homogeneous(1e-12));
        assert!(kernel_derivative(&custom, 1.0, 2.0, 1, 0).is_err());
    }

    #[test]
    fn rhs_examples() {
        assert!((size_bound_rhs(1.0, 2.0, 0, 0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(size_bound_rhs(2.0, 1.0, 0, 0).unwrap(), size_bound_rhs(1.0, 2.0, 0, 0).unwrap());
        assert_eq!(size_bound_rhs(2.0, -1.5, 2, 1).unwrap(), size_bound_rhs(-1.5, 2.0, 1, 2).unwrap());
        // one cross term stays comparable to the product term: RHS·|x||y| → 2
        let far = size_bound_rhs(1.0, -1e9, 0, 0).unwrap();
        assert!((far * 1e9 - 2.0).abs() < 1e-8);
        assert!(size_bound_rhs(1.0, 1.0, 0, 0).is_err());
    }

    /// Five-point stencil with Richardson extrapolation as an independent derivative oracle.
    fn fd(f: &dyn Fn(f64, f64) -> f64, x: f64, y: f64, a: u32, b: u32) -> f64 {
        fn d1(g: &dyn Fn(f64) -> f64, t: f64, h: f64) -> f64 {
            (g(t - 2.0 * h) - 8.0 * g(t - h) + 8.0 * g(t + h) - g(t + 2.0 * h)) / (12.0 * h)
        }
        if a == 0 && b == 0 {
            return f(x, y);
        }
        let h = 1e-3;
        if a > 0 {
            let g = |t: f64| fd(f, t, y, a - 1, b);
            d1(&g, x, h)
        } else {
            let g = |t: f64| fd(f, x, t, a, b - 1);
            d1(&g, y, h)
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let m = TwistedKernelModel::new(0.7, 1.3);
        let f = |x: f64, y: f64| kernel_eval(&m, x, y).unwrap();
        for &(x, y) in &[(1.0, 2.5), (-1.5, 0.8), (2.0, -3.0), (0.9, 1.6)] {
            for a in 0..=2 {
                for b in 0..=2 {
                    if a + b > 3 {
                        continue;
                    }
                    let an = kernel_derivative(&m, x, y, a, b).unwrap();
                    let num = fd(&f, x, y, a, b);
                    assert!((an - num).abs() < 1e-5 * an.abs().max(1.0), "({x},{y}) a={a} b={b}: {an} vs {num}");
                }
            }
        }
    }

    #[test]
    fn pure_product_ratio_is_factorial_constant() {
        let m = TwistedKernelModel::new(1.0, 0.0);
        let reports = verify_size_bounds(&m, 2, &SampleSpec::default_sweep()).unwrap();
        for r in &reports {
            let c = factorial(r.orders.0) * factorial(r.orders.1);
            assert!((r.max_product_ratio / c - 1.0).abs() < 0.01);
            assert!(r.max_ratio <= c * (1.0 + 1e-12));
        }
    }

    #[test]
    fn full_model_passes_default_sweep() {
        let reports = verify_size_bounds(&TwistedKernelModel::default(), 2, &SampleSpec::default_sweep()).unwrap();
        assert_eq!(reports.len(), 9);
        for r in &reports {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn single_point_and_margin_errors() {
        let spec = SampleSpec::Points { points: vec![(1.0, 3.0)], delta: 0.05 };
        let r = verify_size_bounds(&TwistedKernelModel::default(), 0, &spec).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].sample_count, 1);
        let bad = SampleSpec::Points { points: vec![(1.0, 1.01)], delta: 0.05 };
        assert!(matches!(verify_size_bounds(&TwistedKernelModel::default(), 0, &bad), Err(TwlpError::Precondition(_))));
    }
}
