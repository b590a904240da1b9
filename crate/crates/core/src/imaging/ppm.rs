//! Minimal binary PPM (P6) codec. The canonical encoding is
//! `P6\n{width} {height}\n255\n` followed by raw row-major RGB triples;
//! decoding accepts any whitespace-separated header but requires an exact
//! payload length, so canonical files round-trip byte-identically.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{Pixel, RgbImage};

/// Decode a raster image file. Only PPM P6 is supported; anything else is
/// rejected with `UnsupportedFormat` naming the path.
pub fn load_image(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(b"P6") {
        return decode_ppm(&bytes, path);
    }
    let detail = match bytes.first() {
        Some(b'P') => "only binary PPM (P6) is supported".to_string(),
        _ => "not a PPM P6 file".to_string(),
    };
    Err(Error::UnsupportedFormat {
        path: path.to_path_buf(),
        detail,
    })
}

fn is_ppm_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c)
}

/// Parse one ASCII unsigned integer starting at `pos`, skipping leading
/// whitespace. Returns the value and the position just past it.
fn parse_header_uint(bytes: &[u8], mut pos: usize, path: &Path, what: &str) -> Result<(u64, usize)> {
    while pos < bytes.len() && is_ppm_space(bytes[pos]) {
        pos += 1;
    }
    let start = pos;
    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
        pos += 1;
    }
    if pos == start {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            detail: format!("expected {what} in header"),
        });
    }
    let mut value: u64 = 0;
    for &b in &bytes[start..pos] {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(u64::from(b - b'0')))
            .ok_or_else(|| Error::CorruptImage {
                path: path.to_path_buf(),
                detail: format!("{what} overflows"),
            })?;
    }
    Ok((value, pos))
}

pub fn decode_ppm(bytes: &[u8], path: &Path) -> Result<RgbImage> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            detail: "missing P6 magic".into(),
        });
    }
    let (width, pos) = parse_header_uint(bytes, 2, path, "width")?;
    let (height, pos) = parse_header_uint(bytes, pos, path, "height")?;
    let (maxval, pos) = parse_header_uint(bytes, pos, path, "maxval")?;
    if maxval > 255 {
        // 16-bit payloads are rejected rather than downscaled.
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("maxval {maxval} exceeds 255 (16-bit samples unsupported)"),
        });
    }
    if maxval != 255 {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: format!("maxval {maxval} unsupported (must be 255)"),
        });
    }
    if width == 0 || height == 0 {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            detail: format!("degenerate dimensions {width}x{height}"),
        });
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !is_ppm_space(bytes[pos]) {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            detail: "missing whitespace after maxval".into(),
        });
    }
    let payload = &bytes[pos + 1..];
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::CorruptImage {
            path: path.to_path_buf(),
            detail: "image size overflows".into(),
        })?;
    if payload.len() < expected {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            detail: format!("payload truncated: {} of {expected} bytes", payload.len()),
        });
    }
    if payload.len() > expected {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            detail: format!("{} trailing bytes after payload", payload.len() - expected),
        });
    }
    let pixels = payload
        .chunks_exact(3)
        .map(|c| Pixel::new(c[0], c[1], c[2]))
        .collect();
    RgbImage::new(width as usize, height as usize, pixels)
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len() * 3);
    out.extend_from_slice(header.as_bytes());
    for p in img.pixels() {
        out.extend_from_slice(&[p.r, p.g, p.b]);
    }
    out
}

pub fn save_ppm(img: &RgbImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_ppm(img)).map_err(|e| Error::io(path, e))
}
