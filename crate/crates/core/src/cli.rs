//! The `twlp` command-line front end.

use crate::atoms::{atom_decompose, reconstruct_from_atoms, validate_atom, AtomSummary, DecomposeConfig, LaplacianOrder};
use crate::imageio::{quantize, read_image, write_image, GrayImage, Renormalization};
use crate::littlewood_paley::{build_pair, in_band_mask, ScaleGrid, DEFAULT_LAMBDA};
use crate::multiplier::{apply_multiplier, flag_split, region_map, riesz_multiplier, tht_multiplier, Multiplier2D, PolyBump, RegionLabel};
use crate::signal_grid::{dft2, idft2, Grid2D, Signal2D, Spectrum2D, C64};
use crate::tubes::TubeType;
use crate::verify::{self, VerifyConfig};
use crate::{Result, TwlpError};
use clap::{Parser, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Filter an image through a Fourier multiplier.
    Filter,
    /// Render the sign regions of the twisted multiplier.
    Regions,
    /// Run the verification suites.
    Verify,
    /// Atomic decomposition of an image.
    Decompose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MultChoice {
    Tht,
    Riesz1,
    Riesz2,
    /// Pieces of the flag split of the twisted multiplier.
    Flag1,
    Flag2,
    Flag3,
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "twlp", version, about = "Twisted Littlewood-Paley toolkit")]
pub struct RunConfig {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Grid side for `verify` and `regions`.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Grid spacing assigned to image pixels.
    #[arg(long, default_value_t = 1.0)]
    pub h: f64,
    /// Scales per octave.
    #[arg(long, default_value_t = 8)]
    pub q: u32,
    #[arg(long, value_enum, default_value_t = MultChoice::Tht)]
    pub mult: MultChoice,
    #[arg(long = "N1", default_value_t = 1)]
    pub n1: u32,
    #[arg(long = "N2", default_value_t = 1)]
    pub n2: u32,
    #[arg(long = "N3", default_value_t = 1)]
    pub n3: u32,
    #[arg(long, default_value_t = 2)]
    pub sigma: u32,
    /// Extra covering exponent reported by `verify`.
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Omit wall-clock times from reports so reruns are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long = "suite")]
    pub suites: Vec<String>,
    /// Crop non-power-of-two images to their central power-of-two window.
    #[arg(long)]
    pub center_crop: bool,
    /// Output bit depth (defaults to the input's).
    #[arg(long)]
    pub bits: Option<u8>,
}

/// Exit status for failed suites.
pub const EXIT_FAILED: i32 = 1;
/// Exit status for bad arguments (clap uses the same code).
pub const EXIT_USAGE: i32 = 2;
/// Exit status for I/O and data errors.
pub const EXIT_ERROR: i32 = 3;

pub fn main_from_env() -> i32 {
    let cfg = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    match run(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("twlp: {e}");
            match e {
                TwlpError::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_ERROR,
            }
        }
    }
}

/// Honors `TWLP_THREADS`; the global pool can only be set once per process.
fn configure_threads() {
    if let Some(n) = std::env::var("TWLP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn run(cfg: &RunConfig) -> Result<i32> {
    validate_paths(cfg)?;
    match cfg.command {
        Command::Filter => cmd_filter(cfg),
        Command::Regions => cmd_regions(cfg),
        Command::Verify => cmd_verify(cfg),
        Command::Decompose => cmd_decompose(cfg),
    }
}

fn validate_paths(cfg: &RunConfig) -> Result<()> {
    let needs_input = matches!(cfg.command, Command::Filter | Command::Decompose);
    match (&cfg.input, needs_input) {
        (None, true) => return Err(TwlpError::InvalidArgument("--input is required".into())),
        (Some(p), true) if !p.is_file() => return Err(TwlpError::Io(format!("{}: no such file", p.display()))),
        _ => {}
    }
    if matches!(cfg.command, Command::Filter | Command::Regions) && cfg.output.is_none() {
        return Err(TwlpError::InvalidArgument("--output is required".into()));
    }
    for p in [&cfg.output, &cfg.report].into_iter().flatten() {
        let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(TwlpError::Io(format!("{}: directory does not exist", parent.display())));
        }
    }
    if let Some(b) = cfg.bits {
        if b != 8 && b != 16 {
            return Err(TwlpError::InvalidArgument(format!("--bits must be 8 or 16, got {b}")));
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| TwlpError::Io(e.to_string()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| TwlpError::Io(format!("{}: {e}", path.display())))
}

fn emit_report<T: Serialize>(cfg: &RunConfig, v: &T) -> Result<()> {
    let text = to_json(v)?;
    match &cfg.report {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `<path>.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn prev_pow2(v: usize) -> usize {
    1 << (usize::BITS - 1 - v.leading_zeros())
}

/// Loads an image as a grid signal, cropping when allowed.
fn load_signal(cfg: &RunConfig, square: bool) -> Result<(GrayImage, Signal2D)> {
    let path = cfg.input.as_ref().expect("validated");
    let mut img = read_image(path)?;
    let pow2 = img.width.is_power_of_two() && img.height.is_power_of_two();
    if !pow2 || (square && img.width != img.height) {
        if !cfg.center_crop {
            return Err(TwlpError::Format(format!(
                "{}x{} is not a {}power-of-two size; pass --center-crop to use the central window",
                img.width,
                img.height,
                if square { "square " } else { "" }
            )));
        }
        let (mut h, mut w) = (prev_pow2(img.height), prev_pow2(img.width));
        if square {
            h = h.min(w);
            w = h;
        }
        img = img.center_crop(h, w)?;
    }
    let grid = Grid2D::new(img.height, img.width, cfg.h)?;
    let sig = Signal2D::from_real(grid, &img.to_f64())?;
    Ok((img, sig))
}

fn multiplier(choice: MultChoice, grid: &Grid2D) -> Result<Multiplier2D> {
    Ok(match choice {
        MultChoice::Tht => tht_multiplier(grid),
        MultChoice::Riesz1 => riesz_multiplier(1, grid)?,
        MultChoice::Riesz2 => riesz_multiplier(2, grid)?,
        MultChoice::Flag1 | MultChoice::Flag2 | MultChoice::Flag3 => {
            let (a, b, c) = flag_split(&tht_multiplier(grid), &PolyBump)?;
            match choice {
                MultChoice::Flag1 => a,
                MultChoice::Flag2 => b,
                _ => c,
            }
        }
    })
}

#[derive(Serialize)]
struct FilterSidecar<'a> {
    input: String,
    multiplier: MultChoice,
    width: usize,
    height: usize,
    h: f64,
    /// Output pixel `p` stands for `offset + scale · p`.
    renormalization: Renormalization,
    /// Largest imaginary part discarded when taking the real part.
    max_imag: f64,
    output: &'a str,
}

pub fn cmd_filter(cfg: &RunConfig) -> Result<i32> {
    let (img, f) = load_signal(cfg, false)?;
    let m = multiplier(cfg.mult, f.grid())?;
    let out = apply_multiplier(&m, &f)?;
    let max_imag = out.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let bits = cfg.bits.unwrap_or(img.bit_depth);
    let (q, renorm) = quantize(&out.real_part(), img.width, img.height, bits)?;
    let path = cfg.output.as_ref().expect("validated");
    write_image(path, &q)?;
    let side = FilterSidecar {
        input: cfg.input.as_ref().expect("validated").display().to_string(),
        multiplier: cfg.mult,
        width: img.width,
        height: img.height,
        h: cfg.h,
        renormalization: renorm,
        max_imag,
        output: &path.display().to_string(),
    };
    write_text(&sidecar_path(path), &to_json(&side)?)?;
    Ok(0)
}

/// Gray level used for a region in the rendered map.
pub fn region_gray(label: RegionLabel) -> u16 {
    label.code() as u16 * 36
}

/// Pixel `(row, col)` of the region map shows the frequency with signed indices
/// `(col − n/2, n/2 − 1 − row)`: `ξ1` grows to the right, `ξ2` upwards.
pub fn region_pixel_frequency(row: usize, col: usize, n: usize) -> (usize, usize) {
    let s1 = col as i64 - (n / 2) as i64;
    let s2 = (n / 2) as i64 - 1 - row as i64;
    (s1.rem_euclid(n as i64) as usize, s2.rem_euclid(n as i64) as usize)
}

#[derive(Serialize)]
struct RegionSidecar {
    n: usize,
    h: f64,
    legend: BTreeMap<String, u16>,
    counts: BTreeMap<String, usize>,
    nodal: usize,
}

pub fn cmd_regions(cfg: &RunConfig) -> Result<i32> {
    let n = cfg.n;
    let grid = Grid2D::square(n, cfg.h).map_err(|e| TwlpError::InvalidArgument(e.to_string()))?;
    let labels = region_map(&grid);
    let mut px = vec![0u16; n * n];
    let mut counts = BTreeMap::new();
    for row in 0..n {
        for col in 0..n {
            let (k1, k2) = region_pixel_frequency(row, col, n);
            let l = labels[grid.index(k1, k2)];
            px[row * n + col] = region_gray(l);
            *counts.entry(format!("{l:?}")).or_insert(0usize) += 1;
        }
    }
    let img = GrayImage::new(n, n, 8, px)?;
    let path = cfg.output.as_ref().expect("validated");
    write_image(path, &img)?;
    let mut all = RegionLabel::SECTORS.to_vec();
    all.push(RegionLabel::Nodal);
    let side = RegionSidecar {
        n,
        h: cfg.h,
        legend: all.iter().map(|l| (format!("{l:?}"), region_gray(*l))).collect(),
        nodal: counts.get("Nodal").copied().unwrap_or(0),
        counts,
    };
    write_text(&sidecar_path(path), &to_json(&side)?)?;
    Ok(0)
}

fn verify_config(cfg: &RunConfig) -> Result<VerifyConfig> {
    Ok(VerifyConfig {
        n: cfg.n,
        q: cfg.q,
        order: LaplacianOrder::new(cfg.n1, cfg.n2, cfg.n3).map_err(|e| TwlpError::InvalidArgument(e.to_string()))?,
        sigma: cfg.sigma,
        kappa: cfg.kappa,
        seed: cfg.seed,
        deterministic: cfg.deterministic,
        ..VerifyConfig::default()
    })
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let vc = verify_config(cfg)?;
    let (report, times) = verify::run(&vc, &cfg.suites)?;
    for e in &report.entries {
        eprintln!(
            "{} {:<20} {} = {:.3e} (threshold {:.3e}) {:.2}s",
            if e.pass { "PASS" } else { "FAIL" },
            e.name,
            e.metric,
            e.value,
            e.threshold,
            times[&e.name]
        );
    }
    emit_report(cfg, &report)?;
    Ok(if report.pass { 0 } else { EXIT_FAILED })
}

#[derive(Serialize)]
struct RecordRow {
    #[serde(flatten)]
    summary: AtomSummary,
    max_ratio: f64,
    valid: bool,
}

#[derive(Serialize)]
struct DecomposeReport {
    input: String,
    n: usize,
    q: u32,
    orders: [u32; 3],
    sigma: u32,
    /// Share of `‖f‖²` outside the covered band (not decomposed).
    out_of_band_fraction: f64,
    /// `‖P f − Σ λ a‖ / ‖P f‖` with `P` the band projection.
    rel_residual: f64,
    lambda_sum: f64,
    area_l1: f64,
    lambda_over_area_l1: f64,
    layer_cake: f64,
    levels: (i32, i32),
    records: Vec<RecordRow>,
}

fn band_project(f: &Signal2D, scales: &ScaleGrid) -> Result<(Signal2D, f64)> {
    let g = *f.grid();
    let mask = in_band_mask(&g, scales);
    let fh = dft2(f);
    let total: f64 = fh.values().iter().map(|v| v.norm_sqr()).sum();
    let vals: Vec<C64> = fh.values().iter().zip(&mask).map(|(&v, &m)| if m { v } else { C64::new(0.0, 0.0) }).collect();
    let kept: f64 = vals.iter().map(|v| v.norm_sqr()).sum();
    let p = idft2(&Spectrum2D::new(g, vals)?);
    let out = if total > 0.0 { 1.0 - kept / total } else { 0.0 };
    Ok((Signal2D::from_real(g, &p.real_part())?, out))
}

fn write_real(path: &Path, v: &Signal2D, bits: u8) -> Result<()> {
    let g = v.grid();
    let (img, renorm) = quantize(&v.real_part(), g.n2(), g.n1(), bits)?;
    write_image(path, &img)?;
    write_text(&sidecar_path(path), &to_json(&renorm)?)
}

fn level_path(path: &Path, level: i32) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}.level{level}{ext}"))
}

pub fn cmd_decompose(cfg: &RunConfig) -> Result<i32> {
    if cfg.h != 1.0 {
        return Err(TwlpError::InvalidArgument("decompose works in pixel units; --h must be 1".into()));
    }
    let (img, f) = load_signal(cfg, true)?;
    let g = *f.grid();
    let order = LaplacianOrder::new(cfg.n1, cfg.n2, cfg.n3).map_err(|e| TwlpError::InvalidArgument(e.to_string()))?;
    let scales = ScaleGrid::covering(&g, cfg.q)?;
    let pair = build_pair(order.as_array(), DEFAULT_LAMBDA)?;
    let (pf, out_of_band) = band_project(&f, &scales)?;
    let dc = DecomposeConfig { order, sigma: cfg.sigma, ..Default::default() };
    let mut d = atom_decompose(&pf, &pair, &scales, &TubeType::ALL, &dc)?;
    d.records.sort_by(|a, b| b.level.cmp(&a.level).then(a.kind.cmp(&b.kind)));
    let mut rows = vec![];
    for r in &d.records {
        let v = validate_atom(r, order, cfg.sigma)?;
        rows.push(RecordRow { summary: r.summary(), max_ratio: v.max_ratio, valid: v.pass });
    }
    if let Some(path) = &cfg.output {
        let bits = cfg.bits.unwrap_or(img.bit_depth);
        write_real(path, &reconstruct_from_atoms(&d.records, g), bits)?;
        let mut levels: Vec<i32> = d.records.iter().map(|r| r.level).collect();
        levels.dedup();
        for k in levels {
            let at: Vec<_> = d.records.iter().filter(|r| r.level == k).cloned().collect();
            write_real(&level_path(path, k), &reconstruct_from_atoms(&at, g), bits)?;
        }
    }
    let report = DecomposeReport {
        input: cfg.input.as_ref().expect("validated").display().to_string(),
        n: g.n1(),
        q: cfg.q,
        orders: order.as_array(),
        sigma: cfg.sigma,
        out_of_band_fraction: out_of_band,
        rel_residual: d.rel_residual,
        lambda_sum: d.lambda_sum,
        area_l1: d.area_l1,
        lambda_over_area_l1: if d.area_l1 > 0.0 { d.lambda_sum / d.area_l1 } else { 0.0 },
        layer_cake: d.layer_cake,
        levels: d.levels,
        records: rows,
    };
    emit_report(cfg, &report)?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<RunConfig, clap::Error> {
        RunConfig::try_parse_from(std::iter::once("twlp").chain(args.iter().copied()))
    }

    #[test]
    fn argument_parsing() {
        let c = parse(&["verify", "--suite", "isometry", "--suite", "involution", "--N2", "2", "--deterministic"]).unwrap();
        assert_eq!(c.command, Command::Verify);
        assert_eq!(c.suites, vec!["isometry", "involution"]);
        assert_eq!((c.n1, c.n2, c.n3, c.n, c.q, c.seed), (1, 2, 1, 64, 8, 42));
        assert!(c.deterministic);
        assert!(parse(&["verify", "--seed", "abc"]).is_err());
        assert!(parse(&["filter", "--mult", "hilbert"]).is_err());
        assert_eq!(parse(&["filter", "--mult", "flag2"]).unwrap().mult, MultChoice::Flag2);
    }

    #[test]
    fn path_validation() {
        let c = parse(&["filter", "--input", "/definitely/missing.pgm", "--output", "x.pgm"]).unwrap();
        assert!(matches!(run(&c), Err(TwlpError::Io(_))));
        let c = parse(&["regions"]).unwrap();
        assert!(matches!(run(&c), Err(TwlpError::InvalidArgument(_))));
        let c = parse(&["verify", "--report", "/no/such/dir/r.json"]).unwrap();
        assert!(matches!(run(&c), Err(TwlpError::Io(_))));
    }

    #[test]
    fn region_pixels_cover_the_grid_once() {
        let n = 8;
        let mut seen = vec![false; n * n];
        for r in 0..n {
            for c in 0..n {
                let (k1, k2) = region_pixel_frequency(r, c, n);
                assert!(!seen[k1 * n + k2]);
                seen[k1 * n + k2] = true;
            }
        }
        assert_eq!(region_pixel_frequency(n / 2 - 1, n / 2, n), (0, 0));
        assert_eq!(level_path(Path::new("out/rec.pgm"), -3), PathBuf::from("out/rec.level-3.pgm"));
        assert_eq!(sidecar_path(Path::new("a.png")), PathBuf::from("a.png.json"));
    }
}
