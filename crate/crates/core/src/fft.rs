//! Cached 1D/2D FFT plans (unscaled, rustfft sign convention e^{-2πi kx/n} forward).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plan = Arc<dyn Fft<f64>>;

fn plans() -> &'static Mutex<HashMap<(usize, bool), Plan>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    PLANS.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(crate) fn plan(n: usize, inverse: bool) -> Plan {
    let mut map = plans().lock().expect("fft plan cache poisoned");
    map.entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Unscaled 1D transform in place.
pub(crate) fn fft1(data: &mut [Complex64], inverse: bool) {
    let p = plan(data.len(), inverse);
    p.process(data);
}

/// Unscaled 2D transform of a row-major n1×n2 array in place.
pub(crate) fn fft2(data: &mut [Complex64], n1: usize, n2: usize, inverse: bool) {
    debug_assert_eq!(data.len(), n1 * n2);
    let rows = plan(n2, inverse);
    rows.process(data);
    let cols = plan(n1, inverse);
    let mut t = vec![Complex64::new(0.0, 0.0); n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            t[j * n1 + i] = data[i * n2 + j];
        }
    }
    cols.process(&mut t);
    for i in 0..n1 {
        for j in 0..n2 {
            data[i * n2 + j] = t[j * n1 + i];
        }
    }
}
