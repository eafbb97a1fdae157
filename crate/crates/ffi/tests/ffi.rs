use std::ffi::{c_char, CStr};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;
use twlp_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 512];
    let n = unsafe { twlp_last_error(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(s.len(), n.min(511));
    s
}

fn signal(n1: usize, n2: usize, v: &[f64]) -> *mut TwlpSignal {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { twlp_signal_new(n1, n2, 1.0, v.as_ptr(), v.len(), &mut out) }, TwlpStatus::Ok, "{}", last_error());
    out
}

fn real(s: *const TwlpSignal, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    assert_eq!(unsafe { twlp_signal_real(s, v.as_mut_ptr(), len) }, TwlpStatus::Ok);
    v
}

#[test]
fn tht_twice_negates_through_handles() {
    let n = 16;
    // cos(2π(3i + 5j)/n) avoids the nodal lines
    let v: Vec<f64> = (0..n * n)
        .map(|k| (2.0 * std::f64::consts::PI * (3 * (k / n) + 5 * (k % n)) as f64 / n as f64).cos())
        .collect();
    let f = signal(n, n, &v);
    let (mut g, mut gg) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(twlp_filter(f, TwlpMultiplier::Tht, &mut g), TwlpStatus::Ok);
        assert_eq!(twlp_filter(g, TwlpMultiplier::Tht, &mut gg), TwlpStatus::Ok);
        let (mut a, mut b) = (0.0, 0.0);
        twlp_signal_norm_l2(f, &mut a);
        twlp_signal_norm_l2(g, &mut b);
        assert!((a - b).abs() < 1e-12 * a);
        let (mut n1, mut n2) = (0, 0);
        assert_eq!(twlp_signal_shape(gg, &mut n1, &mut n2), TwlpStatus::Ok);
        assert_eq!((n1, n2), (n, n));
    }
    let back = real(gg, n * n);
    assert!(back.iter().zip(&v).all(|(x, y)| (x + y).abs() < 1e-12));
    unsafe {
        twlp_signal_free(gg);
        twlp_signal_free(g);
        twlp_signal_free(f);
        twlp_signal_free(ptr::null_mut());
    }
}

#[test]
fn flag_pieces_sum_to_the_full_filter() {
    let n = 8;
    let v: Vec<f64> = (0..n * n).map(|k| ((k * 37) % 11) as f64 - 5.0).collect();
    let f = signal(n, n, &v);
    let run = |m| {
        let mut o = ptr::null_mut();
        assert_eq!(unsafe { twlp_filter(f, m, &mut o) }, TwlpStatus::Ok);
        let r = real(o, n * n);
        unsafe { twlp_signal_free(o) };
        r
    };
    let full = run(TwlpMultiplier::Tht);
    let (a, b, c) = (run(TwlpMultiplier::Flag1), run(TwlpMultiplier::Flag2), run(TwlpMultiplier::Flag3));
    for i in 0..n * n {
        assert!((full[i] - a[i] - b[i] - c[i]).abs() < 1e-12);
    }
    unsafe { twlp_signal_free(f) };
}

#[test]
fn error_codes_and_messages() {
    let mut out = ptr::null_mut();
    let v = [1.0; 6];
    unsafe {
        assert_eq!(twlp_signal_new(2, 2, 1.0, v.as_ptr(), 6, &mut out), TwlpStatus::ShapeMismatch);
        assert!(out.is_null());
        assert!(last_error().contains("6 samples"));
        assert_eq!(twlp_signal_new(2, 3, 1.0, v.as_ptr(), 6, &mut out), TwlpStatus::InvalidGrid);
        assert_eq!(twlp_signal_new(2, 2, 0.0, v.as_ptr(), 4, &mut out), TwlpStatus::InvalidGrid);
        assert_eq!(twlp_signal_new(2, 2, 1.0, ptr::null(), 4, &mut out), TwlpStatus::NullPointer);
        assert_eq!(twlp_signal_new(2, 2, 1.0, v.as_ptr(), 4, ptr::null_mut()), TwlpStatus::NullPointer);
        assert_eq!(twlp_filter(ptr::null(), TwlpMultiplier::Tht, &mut out), TwlpStatus::NullPointer);
        assert!(last_error().contains("sig"));
        let f = signal(2, 2, &v[..4]);
        let mut small = [0.0; 3];
        assert_eq!(twlp_signal_real(f, small.as_mut_ptr(), 3), TwlpStatus::ShapeMismatch);
        let mut n = 0.0;
        assert_eq!(twlp_signal_norm_l2(f, &mut n), TwlpStatus::Ok);
        assert_eq!(last_error(), "");
        twlp_signal_free(f);
        // a short buffer still gets a terminated prefix and the full length back
        twlp_signal_new(2, 2, 1.0, ptr::null(), 4, &mut out);
        let mut tiny = [1 as c_char; 4];
        let full = twlp_last_error(tiny.as_mut_ptr(), 4);
        assert!(full > 3 && tiny[3] == 0);
    }
}

#[test]
fn regions_and_verify() {
    assert_eq!(twlp_classify_region(1.0, 1.0), 1);
    assert_eq!(twlp_classify_region(-1.0, 2.0), 2);
    assert_eq!(twlp_classify_region(-2.0, 1.0), 3);
    assert_eq!(twlp_classify_region(-1.0, -1.0), 4);
    assert_eq!(twlp_classify_region(1.0, -2.0), 5);
    assert_eq!(twlp_classify_region(2.0, -1.0), 6);
    assert_eq!(twlp_classify_region(1.0, -1.0), 0);
    let (mut value, mut pass) = (f64::NAN, -1);
    unsafe {
        assert_eq!(twlp_verify_suite(c"isometry".as_ptr(), 7, &mut value, &mut pass), TwlpStatus::Ok);
        assert!(pass == 1 && value < 1e-10);
        assert_eq!(twlp_verify_suite(c"bogus".as_ptr(), 7, &mut value, &mut pass), TwlpStatus::InvalidArgument);
        assert!(last_error().contains("bogus"));
        let v = CStr::from_ptr(twlp_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(crate_dir().join("include/twlp.h")).unwrap();
    for name in [
        "twlp_version",
        "twlp_last_error",
        "twlp_signal_new",
        "twlp_signal_free",
        "twlp_signal_shape",
        "twlp_signal_real",
        "twlp_signal_imag",
        "twlp_signal_norm_l2",
        "twlp_filter",
        "twlp_classify_region",
        "twlp_verify_suite",
        "TWLP_STATUS_PANIC",
        "typedef struct TwlpSignal TwlpSignal",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

fn staticlib() -> PathBuf {
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().join("libtwlp_ffi.a")
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = staticlib();
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let exe = dir.join("twlp_smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(crate_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("run cc");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
