//! Binary 16-bit PGM ("P5", maxval 65535, big-endian samples) holding depth in millimeters.

use std::path::Path;

use super::image::{DepthImage, MAX_DEPTH};
use crate::{Error, Result};

/// Encodes an image; samples are rounded to the nearest millimeter.
pub fn encode_pgm(img: &DepthImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + 2 * img.data().len());
    out.extend_from_slice(header.as_bytes());
    for &d in img.data() {
        let sample = d.round().clamp(0.0, MAX_DEPTH) as u16;
        out.extend_from_slice(&sample.to_be_bytes());
    }
    out
}

pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<DepthImage, String> {
    let mut cursor = 0usize;
    let magic = next_token(bytes, &mut cursor).ok_or("missing magic number")?;
    if magic != b"P5" {
        return Err(format!(
            "expected magic P5, found {:?}",
            String::from_utf8_lossy(magic)
        ));
    }
    let width = parse_usize(next_token(bytes, &mut cursor), "width")?;
    let height = parse_usize(next_token(bytes, &mut cursor), "height")?;
    let maxval = parse_usize(next_token(bytes, &mut cursor), "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("maxval {maxval} outside 1..=65535"));
    }
    // exactly one whitespace byte separates the header from the raster
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err("missing whitespace after maxval".into());
    }
    cursor += 1;
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let raster = &bytes[cursor..];
    let expected = width * height * bytes_per_sample;
    if raster.len() != expected {
        return Err(format!(
            "raster holds {} bytes, expected {expected}",
            raster.len()
        ));
    }
    let data: Vec<f64> = if bytes_per_sample == 2 {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    } else {
        raster.iter().map(|&b| b as f64).collect()
    };
    DepthImage::new(width, height, data).map_err(|e| e.to_string())
}

pub fn write_pgm(img: &DepthImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<DepthImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|msg| Error::Format {
        what: "PGM depth image",
        path: path.to_path_buf(),
        msg,
    })
}

fn next_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    (*cursor > start).then(|| &bytes[start..*cursor])
}

fn parse_usize(token: Option<&[u8]>, field: &str) -> std::result::Result<usize, String> {
    let token = token.ok_or_else(|| format!("missing {field}"))?;
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("invalid {field} {:?}", String::from_utf8_lossy(token)))
}
