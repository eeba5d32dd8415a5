//! File formats for lattice data.
//!
//! Binary container: 16-byte header (`ICHM` or `ICGF`, u32 width, u32 height,
//! f32 ppmm, all little-endian) followed by row-major f32 payloads. Height maps
//! carry one payload, gradient fields carry `gx` then `gy`.
//!
//! PNG views: height maps as 16-bit grayscale plus a `.scale` sidecar holding
//! the value range, masks as 1-bit grayscale.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::binary::BinaryImage;
use crate::error::{Error, Result};
use crate::geometry::{GradientField, HeightMap};

pub const HEIGHT_MAGIC: &[u8; 4] = b"ICHM";
pub const GRADIENT_MAGIC: &[u8; 4] = b"ICGF";

fn write_header(out: &mut impl Write, magic: &[u8; 4], w: usize, h: usize, ppmm: f64) -> Result<()> {
    let dims = |v: usize| {
        u32::try_from(v).map_err(|_| Error::invalid(format!("dimension {v} exceeds u32")))
    };
    out.write_all(magic)?;
    out.write_all(&dims(w)?.to_le_bytes())?;
    out.write_all(&dims(h)?.to_le_bytes())?;
    out.write_all(&(ppmm as f32).to_le_bytes())?;
    Ok(())
}

fn write_payload(out: &mut impl Write, data: &[f64]) -> Result<()> {
    for &v in data {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_header(bytes: &[u8], magic: &[u8; 4]) -> Result<(usize, usize, f64)> {
    if bytes.len() < 16 {
        return Err(Error::format("file shorter than the 16-byte header"));
    }
    if &bytes[0..4] != magic {
        return Err(Error::format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[0..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let ppmm = f32::from_le_bytes(bytes[12..16].try_into().unwrap()) as f64;
    Ok((w, h, ppmm))
}

fn read_payload(bytes: &[u8], count: usize) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .take(count)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect()
}

pub fn encode_height_map(hm: &HeightMap) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(16 + 4 * hm.data().len());
    write_header(&mut buf, HEIGHT_MAGIC, hm.width(), hm.height(), hm.ppmm())?;
    write_payload(&mut buf, hm.data())?;
    Ok(buf)
}

pub fn decode_height_map(bytes: &[u8]) -> Result<HeightMap> {
    let (w, h, ppmm) = read_header(bytes, HEIGHT_MAGIC)?;
    let n = w
        .checked_mul(h)
        .ok_or_else(|| Error::format("dimensions overflow"))?;
    if bytes.len() != 16 + 4 * n {
        return Err(Error::format(format!(
            "payload is {} bytes, expected {}",
            bytes.len() - 16,
            4 * n
        )));
    }
    HeightMap::new(w, h, ppmm, read_payload(&bytes[16..], n))
}

pub fn encode_gradient_field(g: &GradientField) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(16 + 8 * g.gx().len());
    write_header(&mut buf, GRADIENT_MAGIC, g.width(), g.height(), g.ppmm())?;
    write_payload(&mut buf, g.gx())?;
    write_payload(&mut buf, g.gy())?;
    Ok(buf)
}

pub fn decode_gradient_field(bytes: &[u8]) -> Result<GradientField> {
    let (w, h, ppmm) = read_header(bytes, GRADIENT_MAGIC)?;
    let n = w
        .checked_mul(h)
        .ok_or_else(|| Error::format("dimensions overflow"))?;
    if bytes.len() != 16 + 8 * n {
        return Err(Error::format(format!(
            "payload is {} bytes, expected {}",
            bytes.len() - 16,
            8 * n
        )));
    }
    let gx = read_payload(&bytes[16..], n);
    let gy = read_payload(&bytes[16 + 4 * n..], n);
    GradientField::new(w, h, ppmm, gx, gy)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}

pub fn save_height_map(hm: &HeightMap, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_height_map(hm)?)?;
    Ok(())
}

pub fn load_height_map(path: impl AsRef<Path>) -> Result<HeightMap> {
    decode_height_map(&read_all(path.as_ref())?)
}

pub fn save_gradient_field(g: &GradientField, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_gradient_field(g)?)?;
    Ok(())
}

pub fn load_gradient_field(path: impl AsRef<Path>) -> Result<GradientField> {
    decode_gradient_field(&read_all(path.as_ref())?)
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::format(format!("png: {e}"))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".scale");
    PathBuf::from(s)
}

/// Writes a 16-bit grayscale PNG and a `<path>.scale` sidecar.
pub fn export_height_png(hm: &HeightMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (lo, hi) = hm
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut raw = Vec::with_capacity(hm.data().len() * 2);
    for &v in hm.data() {
        let q = ((v - lo) / span * 65535.0).round().clamp(0.0, 65535.0) as u16;
        raw.extend_from_slice(&q.to_be_bytes());
    }
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, hm.width() as u32, hm.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Sixteen);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&raw).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    std::fs::write(
        sidecar_path(path),
        format!("ppmm={}\nmin={lo}\nmax={hi}\n", hm.ppmm()),
    )?;
    Ok(())
}

pub fn import_height_png(path: impl AsRef<Path>) -> Result<HeightMap> {
    let path = path.as_ref();
    let side = std::fs::read_to_string(sidecar_path(path))?;
    let mut ppmm = None;
    let mut lo = None;
    let mut hi = None;
    for line in side.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(format!("bad sidecar line {line:?}")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::format(format!("bad sidecar value {line:?}")))?;
        match k.trim() {
            "ppmm" => ppmm = Some(v),
            "min" => lo = Some(v),
            "max" => hi = Some(v),
            other => return Err(Error::format(format!("unknown sidecar key {other:?}"))),
        }
    }
    let (Some(ppmm), Some(lo), Some(hi)) = (ppmm, lo, hi) else {
        return Err(Error::format("sidecar must define ppmm, min and max"));
    };
    let (w, h, samples) = read_gray_png(path)?;
    if samples.bit_depth != 16 {
        return Err(Error::format("height PNG must be 16-bit grayscale"));
    }
    let span = if hi > lo { hi - lo } else { 0.0 };
    let data = samples
        .values
        .iter()
        .map(|&q| lo + q as f64 / 65535.0 * span)
        .collect();
    HeightMap::new(w, h, ppmm, data)
}

struct GraySamples {
    bit_depth: u8,
    values: Vec<u16>,
}

fn read_gray_png(path: &Path) -> Result<(usize, usize, GraySamples)> {
    let dec = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = dec.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format("png: image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::format(format!(
            "expected grayscale PNG, got {:?}",
            info.color_type
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let depth = info.bit_depth as u8;
    let mut values = Vec::with_capacity(w * h);
    for row in buf.chunks(info.line_size).take(h) {
        for x in 0..w {
            let v = match depth {
                16 => u16::from_be_bytes([row[2 * x], row[2 * x + 1]]),
                8 => row[x] as u16,
                1 | 2 | 4 => {
                    let per_byte = 8 / depth as usize;
                    let byte = row[x / per_byte];
                    let shift = 8 - depth as usize * (x % per_byte + 1);
                    ((byte >> shift) & ((1u8 << depth) - 1)) as u16
                }
                _ => return Err(Error::format(format!("unsupported bit depth {depth}"))),
            };
            values.push(v);
        }
    }
    Ok((w, h, GraySamples { bit_depth: depth, values }))
}

/// Writes a 1-bit grayscale PNG (white = set).
pub fn save_mask_png(mask: &BinaryImage, path: impl AsRef<Path>) -> Result<()> {
    let (w, h) = (mask.width(), mask.height());
    let stride = w.div_ceil(8);
    let mut raw = vec![0u8; stride * h];
    for (x, y) in mask.ones() {
        raw[y * stride + x / 8] |= 0x80 >> (x % 8);
    }
    let file = BufWriter::new(File::create(path.as_ref())?);
    let mut enc = png::Encoder::new(file, w as u32, h as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&raw).map_err(png_err)?;
    writer.finish().map_err(png_err)?;
    Ok(())
}

/// Reads a grayscale PNG of any depth; nonzero samples are set.
pub fn load_mask_png(path: impl AsRef<Path>) -> Result<BinaryImage> {
    let (w, h, samples) = read_gray_png(path.as_ref())?;
    BinaryImage::from_bits(w, h, samples.values.iter().map(|&v| v != 0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_map_binary_round_trip() {
        let data: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.0).collect();
        let hm = HeightMap::new(4, 3, 12.5, data).unwrap();
        let bytes = encode_height_map(&hm).unwrap();
        assert_eq!(&bytes[..4], b"ICHM");
        assert_eq!(bytes.len(), 16 + 48);
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 4);
        assert_eq!(decode_height_map(&bytes).unwrap(), hm);
        assert!(decode_height_map(&bytes[..40]).is_err());
        assert!(decode_gradient_field(&bytes).is_err());
    }

    #[test]
    fn gradient_binary_round_trip() {
        let g = GradientField::new(2, 3, 10.0, vec![0.5; 6], vec![-1.5; 6]).unwrap();
        let bytes = encode_gradient_field(&g).unwrap();
        assert_eq!(&bytes[..4], b"ICGF");
        assert_eq!(decode_gradient_field(&bytes).unwrap(), g);
    }

    #[test]
    fn png_views_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mask = BinaryImage::from_fn(13, 7, |x, y| (x + 2 * y) % 3 == 0);
        let p = dir.path().join("m.png");
        save_mask_png(&mask, &p).unwrap();
        assert_eq!(load_mask_png(&p).unwrap(), mask);

        let hm = HeightMap::new(3, 2, 10.0, vec![0.0, -1.0, -2.0, 1.0, 0.5, 2.0]).unwrap();
        let p = dir.path().join("h.png");
        export_height_png(&hm, &p).unwrap();
        let back = import_height_png(&p).unwrap();
        for (a, b) in back.data().iter().zip(hm.data()) {
            assert!((a - b).abs() < 4.0 / 65535.0 * 2.0);
        }
    }
}
