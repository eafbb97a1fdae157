//! Grayscale image files: binary PGM (P5, hand-rolled so fixtures stay bit-exact) and PNG.

use crate::{Result, TwlpError};
use std::path::Path;

/// Largest accepted side length.
pub const MAX_SIDE: usize = 8192;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// 8 or 16.
    pub bit_depth: u8,
    /// Row-major samples.
    pub pixels: Vec<u16>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, bit_depth: u8, pixels: Vec<u16>) -> Result<Self> {
        if bit_depth != 8 && bit_depth != 16 {
            return Err(TwlpError::Format(format!("bit depth must be 8 or 16, got {bit_depth}")));
        }
        if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
            return Err(TwlpError::Format(format!("image size {width}x{height} outside 1..={MAX_SIDE}")));
        }
        if pixels.len() != width * height {
            return Err(TwlpError::Format(format!("{} samples for a {width}x{height} image", pixels.len())));
        }
        let max = Self::max_for(bit_depth);
        if pixels.iter().any(|&p| p > max) {
            return Err(TwlpError::Format(format!("sample above {max}")));
        }
        Ok(GrayImage { width, height, bit_depth, pixels })
    }

    fn max_for(bit_depth: u8) -> u16 {
        if bit_depth == 8 {
            255
        } else {
            u16::MAX
        }
    }

    pub fn max_value(&self) -> u16 {
        Self::max_for(self.bit_depth)
    }

    pub fn at(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.width + col]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Central `h × w` window.
    pub fn center_crop(&self, h: usize, w: usize) -> Result<GrayImage> {
        if h > self.height || w > self.width {
            return Err(TwlpError::Format(format!("cannot crop {}x{} to {w}x{h}", self.width, self.height)));
        }
        let (r0, c0) = ((self.height - h) / 2, (self.width - w) / 2);
        let mut px = Vec::with_capacity(h * w);
        for r in r0..r0 + h {
            px.extend_from_slice(&self.pixels[r * self.width + c0..r * self.width + c0 + w]);
        }
        GrayImage::new(w, h, self.bit_depth, px)
    }
}

/// Affine map `value = offset + scale · sample` used when quantizing real data.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Renormalization {
    pub offset: f64,
    pub scale: f64,
    pub bit_depth: u8,
}

impl Renormalization {
    pub fn value(&self, sample: u16) -> f64 {
        self.offset + self.scale * sample as f64
    }
}

/// Quantizes `values` onto the full range of `bit_depth` (a constant input maps to all zeros).
pub fn quantize(values: &[f64], width: usize, height: usize, bit_depth: u8) -> Result<(GrayImage, Renormalization)> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(TwlpError::Format("non-finite sample".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max = GrayImage::max_for(bit_depth) as f64;
    let scale = if hi > lo { (hi - lo) / max } else { 0.0 };
    let px = values
        .iter()
        .map(|v| if scale > 0.0 { ((v - lo) / scale).round().clamp(0.0, max) as u16 } else { 0 })
        .collect();
    Ok((GrayImage::new(width, height, bit_depth, px)?, Renormalization { offset: lo, scale, bit_depth }))
}

fn pgm_token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(TwlpError::Format("truncated PGM header".into()));
    }
    Ok(&data[start..*pos])
}

fn pgm_number(data: &[u8], pos: &mut usize) -> Result<usize> {
    let t = pgm_token(data, pos)?;
    std::str::from_utf8(t)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| TwlpError::Format(format!("bad PGM header field {:?}", String::from_utf8_lossy(t))))
}

pub fn decode_pgm(data: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    if pgm_token(data, &mut pos)? != b"P5" {
        return Err(TwlpError::Format("not a binary PGM (P5)".into()));
    }
    let width = pgm_number(data, &mut pos)?;
    let height = pgm_number(data, &mut pos)?;
    let maxval = pgm_number(data, &mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(TwlpError::Format(format!("PGM maxval {maxval} outside 1..=65535")));
    }
    if width == 0 || height == 0 || width > MAX_SIDE || height > MAX_SIDE {
        return Err(TwlpError::Format(format!("image size {width}x{height} outside 1..={MAX_SIDE}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let wide = maxval > 255;
    let need = width * height * if wide { 2 } else { 1 };
    let raster = data.get(pos..pos + need).ok_or_else(|| TwlpError::Format("truncated PGM raster".into()))?;
    let pixels: Vec<u16> = if wide {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        raster.iter().map(|&b| b as u16).collect()
    };
    if pixels.iter().any(|&p| p as usize > maxval) {
        return Err(TwlpError::Format(format!("sample above maxval {maxval}")));
    }
    GrayImage::new(width, height, if wide { 16 } else { 8 }, pixels)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.max_value()).into_bytes();
    if img.bit_depth == 8 {
        out.extend(img.pixels.iter().map(|&p| p as u8));
    } else {
        for p in &img.pixels {
            out.extend_from_slice(&p.to_be_bytes());
        }
    }
    out
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn decode_png(data: &[u8]) -> Result<GrayImage> {
    let dynamic = image::load_from_memory_with_format(data, image::ImageFormat::Png).map_err(|e| TwlpError::Format(e.to_string()))?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    match dynamic {
        image::DynamicImage::ImageLuma8(b) => GrayImage::new(w, h, 8, b.into_raw().into_iter().map(u16::from).collect()),
        image::DynamicImage::ImageLuma16(b) => GrayImage::new(w, h, 16, b.into_raw()),
        other => Err(TwlpError::Format(format!("PNG must be grayscale, got {:?}", other.color()))),
    }
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    let (w, h) = (img.width as u32, img.height as u32);
    let res = if img.bit_depth == 8 {
        let buf = image::GrayImage::from_raw(w, h, img.pixels.iter().map(|&p| p as u8).collect()).expect("sized");
        buf.write_to(&mut out, image::ImageFormat::Png)
    } else {
        let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(w, h, img.pixels.clone()).expect("sized");
        buf.write_to(&mut out, image::ImageFormat::Png)
    };
    res.map_err(|e| TwlpError::Format(e.to_string()))?;
    Ok(out.into_inner())
}

/// Reads PGM (P5) or PNG, chosen by content.
pub fn read_image(path: &Path) -> Result<GrayImage> {
    let data = std::fs::read(path).map_err(|e| TwlpError::Io(format!("{}: {e}", path.display())))?;
    if data.starts_with(PNG_MAGIC) {
        decode_png(&data)
    } else {
        decode_pgm(&data)
    }
}

/// Writes PNG for a `.png` extension, PGM otherwise.
pub fn write_image(path: &Path, img: &GrayImage) -> Result<()> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png { encode_png(img)? } else { encode_pgm(img) };
    std::fs::write(path, bytes).map_err(|e| TwlpError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_both_depths() {
        let a = GrayImage::new(3, 2, 8, vec![0, 1, 2, 253, 254, 255]).unwrap();
        assert_eq!(decode_pgm(&encode_pgm(&a)).unwrap(), a);
        let b = GrayImage::new(2, 2, 16, vec![0, 256, 65535, 4097]).unwrap();
        let bytes = encode_pgm(&b);
        assert_eq!(&bytes[bytes.len() - 8..], &[0, 0, 1, 0, 255, 255, 16, 1]);
        assert_eq!(decode_pgm(&bytes).unwrap(), b);
    }

    #[test]
    fn pgm_header_comments_and_errors() {
        let data = b"P5\n# made by hand\n2 1 # width height\n255\n\x07\x09";
        let img = decode_pgm(data).unwrap();
        assert_eq!(img.pixels, vec![7, 9]);
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n100\n\xff").is_err());
        assert!(decode_pgm(b"P5\n99999 1\n255\n").is_err());
    }

    #[test]
    fn png_round_trip_both_depths() {
        let a = GrayImage::new(4, 1, 8, vec![0, 64, 128, 255]).unwrap();
        assert_eq!(decode_png(&encode_png(&a).unwrap()).unwrap(), a);
        let b = GrayImage::new(1, 3, 16, vec![0, 1000, 65535]).unwrap();
        assert_eq!(decode_png(&encode_png(&b).unwrap()).unwrap(), b);
    }

    #[test]
    fn quantize_and_crop() {
        let (img, r) = quantize(&[-1.0, 0.0, 1.0, 3.0], 2, 2, 8).unwrap();
        assert_eq!(img.pixels, vec![0, 64, 128, 255]);
        assert!((r.value(255) - 3.0).abs() < 1e-12 && r.value(0) == -1.0);
        let (z, r) = quantize(&[0.5; 4], 2, 2, 16).unwrap();
        assert!(z.pixels.iter().all(|&p| p == 0) && r.scale == 0.0 && r.offset == 0.5);
        let big = GrayImage::new(5, 4, 8, (0..20).collect()).unwrap();
        let c = big.center_crop(2, 2).unwrap();
        assert_eq!(c.pixels, vec![6, 7, 11, 12]);
        assert!(big.center_crop(8, 2).is_err());
    }
}
