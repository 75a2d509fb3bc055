//! Image and map file I/O.
//!
//! PNG is the primary interchange format (8-bit, values mapped by /255 on
//! read and round(v*255) with clamping on write). ASCII PGM (P2) and PPM
//! (P3) are accepted as a dependency-free fallback. Scalar maps round-trip
//! through a raw grid format: one ASCII header line `H W` followed by
//! H*W little-endian f64 values in row-major order.

use crate::error::{Result, SrError};
use crate::tensor::{Image, Tensor};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

fn io_err(path: &Path, e: impl std::fmt::Display) -> SrError {
    SrError::io(path.display().to_string(), e.to_string())
}

pub fn load_image(path: &Path) -> Result<Image> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "pgm" | "ppm" | "pnm" => load_pnm(path),
        _ => load_png(path),
    }
}

pub fn load_png(path: &Path) -> Result<Image> {
    let dynimg = image::open(path).map_err(|e| io_err(path, e))?;
    let rgb = dynimg.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let values: Vec<f64> = rgb.into_raw().iter().map(|&b| b as f64 / 255.0).collect();
    Image::new(h, w, 3, values)
}

pub fn save_png(img: &Image, path: &Path) -> Result<()> {
    let (h, w) = (img.height(), img.width());
    let to_byte = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    if img.channels() == 1 {
        let mut buf = image::GrayImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                buf.put_pixel(x as u32, y as u32, image::Luma([to_byte(img.pixel(y, x, 0))]));
            }
        }
        buf.save(path).map_err(|e| io_err(path, e))
    } else {
        let mut buf = image::RgbImage::new(w as u32, h as u32);
        for y in 0..h {
            for x in 0..w {
                let px = image::Rgb([
                    to_byte(img.pixel(y, x, 0)),
                    to_byte(img.pixel(y, x, 1)),
                    to_byte(img.pixel(y, x, 2)),
                ]);
                buf.put_pixel(x as u32, y as u32, px);
            }
        }
        buf.save(path).map_err(|e| io_err(path, e))
    }
}

/// ASCII PGM (P2) or PPM (P3).
pub fn load_pnm(path: &Path) -> Result<Image> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .map(str::to_string)
        .collect::<Vec<_>>()
        .into_iter();
    let magic = tokens
        .next()
        .ok_or_else(|| io_err(path, "empty pnm file"))?;
    let channels = match magic.as_str() {
        "P2" => 1,
        "P3" => 3,
        other => return Err(io_err(path, format!("unsupported pnm magic {other}"))),
    };
    let mut next_usize = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| io_err(path, format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|e| io_err(path, format!("bad {what}: {e}")))
    };
    let w = next_usize("width")?;
    let h = next_usize("height")?;
    let maxval = next_usize("maxval")?;
    if maxval == 0 {
        return Err(io_err(path, "maxval must be positive"));
    }
    let mut values = Vec::with_capacity(h * w * channels);
    for _ in 0..h * w * channels {
        values.push(next_usize("sample")? as f64 / maxval as f64);
    }
    Image::new(h, w, channels, values)
}

pub fn save_pnm(img: &Image, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let magic = if img.channels() == 1 { "P2" } else { "P3" };
    writeln!(out, "{magic}\n{} {}\n255", img.width(), img.height()).map_err(|e| io_err(path, e))?;
    for y in 0..img.height() {
        let mut row = String::new();
        for x in 0..img.width() {
            for c in 0..img.channels() {
                let b = (img.pixel(y, x, c) * 255.0).round().clamp(0.0, 255.0) as u8;
                row.push_str(&b.to_string());
                row.push(' ');
            }
        }
        writeln!(out, "{}", row.trim_end()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Bit-depth-1 PNG: set bits render white, so edges are written
/// inverted (edge pixels black on white).
pub fn save_bilevel_png(bits: &[bool], height: usize, width: usize, path: &Path) -> Result<()> {
    if bits.len() != height * width {
        return Err(SrError::invalid(format!(
            "bit grid length {} does not match {height}x{width}",
            bits.len()
        )));
    }
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::One);
    let mut writer = encoder.write_header().map_err(|e| io_err(path, e))?;
    let row_bytes = width.div_ceil(8);
    let mut data = vec![0u8; row_bytes * height];
    for y in 0..height {
        for x in 0..width {
            if !bits[y * width + x] {
                data[y * row_bytes + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    writer.write_image_data(&data).map_err(|e| io_err(path, e))
}

/// Raw scalar grid: header line `H W`, then H*W little-endian f64.
pub fn save_raw_map(map: &Tensor, path: &Path) -> Result<()> {
    if map.shape().len() != 2 {
        return Err(SrError::invalid(format!(
            "raw map must be 2-D, got shape {:?}",
            map.shape()
        )));
    }
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{} {}", map.shape()[0], map.shape()[1]).map_err(|e| io_err(path, e))?;
    for v in map.data() {
        out.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub fn load_raw_map(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| io_err(path, "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| io_err(path, "header is not utf-8"))?;
    let mut parts = header.split_whitespace();
    let h: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| io_err(path, "bad header height"))?;
    let w: usize = parts
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| io_err(path, "bad header width"))?;
    let payload = &bytes[newline + 1..];
    let expected = h * w * 8;
    if payload.len() != expected {
        return Err(io_err(
            path,
            format!("expected {expected} payload bytes, found {}", payload.len()),
        ));
    }
    let mut data = Vec::with_capacity(h * w);
    for chunk in payload.chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Tensor::new(vec![h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Image;

    #[test]
    fn png_roundtrip_quantizes_to_8bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let img = Image::new(2, 2, 3, (0..12).map(|i| i as f64 / 11.0).collect()).unwrap();
        save_png(&img, &path).unwrap();
        let back = load_png(&path).unwrap();
        for (a, b) in img.tensor().data().iter().zip(back.tensor().data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-9);
        }
    }

    #[test]
    fn pnm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.ppm");
        let img = Image::new(2, 3, 3, (0..18).map(|i| (i % 5) as f64 / 4.0).collect()).unwrap();
        save_pnm(&img, &path).unwrap();
        let back = load_pnm(&path).unwrap();
        for (a, b) in img.tensor().data().iter().zip(back.tensor().data()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-9);
        }
    }

    #[test]
    fn raw_map_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.raw");
        let map = Tensor::new(vec![2, 3], vec![0.0, -1.5, 3.25, 0.1, 9.0, 2.0_f64.sqrt()]).unwrap();
        save_raw_map(&map, &path).unwrap();
        let back = load_raw_map(&path).unwrap();
        assert_eq!(map.shape(), back.shape());
        assert_eq!(map.data(), back.data());
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_png(Path::new("/nonexistent/image.png")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/image.png"));
    }

    #[test]
    fn bilevel_png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.png");
        let (h, w) = (5, 11);
        let bits: Vec<bool> = (0..h * w).map(|i| i % 3 == 0).collect();
        save_bilevel_png(&bits, h, w, &path).unwrap();
        let back = load_png(&path).unwrap();
        assert_eq!(back.height(), h);
        assert_eq!(back.width(), w);
        for y in 0..h {
            for x in 0..w {
                let expect = if bits[y * w + x] { 0.0 } else { 1.0 };
                assert_eq!(back.pixel(y, x, 0), expect, "at ({y},{x})");
            }
        }
    }
}
