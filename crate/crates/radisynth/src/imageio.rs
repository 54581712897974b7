//! Raster files: 16-bit and 8-bit grayscale PNG, binary PGM (P5), and raw
//! little-endian `f32` with a JSON sidecar.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use radisynth_core::raster::{Mask, Raster};
use radisynth_core::xray::{quantize, ImageMeta, NoiseModel, ProjectionGeometry, ProjectionImage, QuantizationSpec};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

fn png_err(what: &str) -> impl Fn(png::EncodingError) -> Error + '_ {
    move |e| Error::parse(what, None, e.to_string())
}

fn encode_png(width: usize, height: usize, depth: png::BitDepth, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(depth);
        let mut w = enc.write_header().map_err(png_err("PNG"))?;
        w.write_image_data(data).map_err(png_err("PNG"))?;
        w.finish().map_err(png_err("PNG"))?;
    }
    Ok(out)
}

/// 16-bit grayscale PNG (samples stored big endian, as PNG requires).
pub fn png16_bytes(img: &Raster<u16>) -> Result<Vec<u8>> {
    let data: Vec<u8> = img.data.iter().flat_map(|v| v.to_be_bytes()).collect();
    encode_png(img.width, img.height, png::BitDepth::Sixteen, &data)
}

pub fn png8_bytes(img: &Raster<u8>) -> Result<Vec<u8>> {
    encode_png(img.width, img.height, png::BitDepth::Eight, &img.data)
}

/// Mask as 8-bit PNG: 255 where set.
pub fn mask_png_bytes(mask: &Mask) -> Result<Vec<u8>> {
    png8_bytes(&mask.map(|&b| if b { 255u8 } else { 0 }))
}

/// Values in `[0, 1]` as 8-bit PNG (clamped).
pub fn unit_png8_bytes(values: &Raster<f64>) -> Result<Vec<u8>> {
    png8_bytes(&values.map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
}

/// Decodes 8- or 16-bit grayscale PNG into 16-bit samples (8-bit values
/// are kept as is, not rescaled).
pub fn read_png(bytes: &[u8]) -> Result<Raster<u16>> {
    let perr = |e: png::DecodingError| Error::parse("PNG", None, e.to_string());
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec.read_info().map_err(perr)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(perr)?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::parse(
            "PNG",
            None,
            format!("expected grayscale, found {:?}", info.color_type),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data: Vec<u16> = match info.bit_depth {
        png::BitDepth::Sixteen => (0..w * h)
            .map(|i| {
                let row = i / w;
                let o = row * info.line_size + 2 * (i % w);
                u16::from_be_bytes([buf[o], buf[o + 1]])
            })
            .collect(),
        png::BitDepth::Eight => (0..w * h)
            .map(|i| u16::from(buf[(i / w) * info.line_size + i % w]))
            .collect(),
        d => return Err(Error::parse("PNG", None, format!("unsupported bit depth {d:?}"))),
    };
    Ok(Raster::from_vec(w, h, data)?)
}

pub fn read_mask_png(bytes: &[u8]) -> Result<Mask> {
    Ok(read_png(bytes)?.map(|&v| v > 0))
}

/// Binary PGM (P5). `maxval` above 255 stores two big-endian bytes per
/// sample.
pub fn pgm_bytes(img: &Raster<u16>, maxval: u16) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for &v in &img.data {
        let v = v.min(maxval);
        if maxval > 255 {
            out.extend_from_slice(&v.to_be_bytes());
        } else {
            out.push(v as u8);
        }
    }
    out
}

pub fn read_pgm(bytes: &[u8]) -> Result<(Raster<u16>, u16)> {
    let err = |off: usize, msg: &str| Error::parse("PGM", Some(off as u64), msg.to_string());
    let mut pos = 0usize;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(err(pos, "truncated header"));
        }
        fields.push((start, std::str::from_utf8(&bytes[start..pos]).unwrap_or("")));
    }
    if fields[0].1 != "P5" {
        return Err(err(0, "not a binary PGM (P5) file"));
    }
    let num = |k: usize| -> Result<usize> {
        fields[k]
            .1
            .parse()
            .map_err(|_| err(fields[k].0, "bad header number"))
    };
    let (w, h, maxval) = (num(1)?, num(2)?, num(3)?);
    if maxval == 0 || maxval > 65535 {
        return Err(err(fields[3].0, "maxval must be in 1..=65535"));
    }
    pos += 1;
    let bps = if maxval > 255 { 2 } else { 1 };
    let need = w * h * bps;
    if bytes.len() < pos + need {
        return Err(err(bytes.len(), "pixel data truncated"));
    }
    let px = &bytes[pos..pos + need];
    let data = if bps == 2 {
        px.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        px.iter().map(|&v| u16::from(v)).collect()
    };
    Ok((Raster::from_vec(w, h, data)?, maxval as u16))
}

/// Little-endian `f32` samples.
pub fn f32_bytes(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|&v| (v as f32).to_le_bytes()).collect()
}

pub fn read_f32(bytes: &[u8], expected: usize, what: &str) -> Result<Vec<f64>> {
    if bytes.len() != 4 * expected {
        return Err(Error::parse(
            what,
            Some(bytes.len().min(4 * expected) as u64),
            format!("{} bytes, expected {} ({} f32 values)", bytes.len(), 4 * expected, expected),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Sidecar for a raw `f32` projection image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSidecar {
    pub width: usize,
    pub height: usize,
    /// Detector pixel pitch (mm).
    pub pitch: f64,
    #[serde(default)]
    pub geometry: Option<ProjectionGeometry>,
    /// Noise seed, if noise was added.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub angle_deg: f64,
    #[serde(default)]
    pub bits: Option<u32>,
    #[serde(default)]
    pub spec_id: Option<String>,
    #[serde(default)]
    pub focal_blur_sigma_px: Option<f64>,
}

impl ImageSidecar {
    pub fn of(img: &ProjectionImage) -> Self {
        ImageSidecar {
            width: img.width(),
            height: img.height(),
            pitch: img.pixel_pitch,
            geometry: img.meta.geometry.clone(),
            seed: img.meta.noise.map(|n| n.seed),
            noise: img.meta.noise,
            angle_deg: img.meta.angle_deg,
            bits: img.meta.bits,
            spec_id: img.meta.spec_id.clone(),
            focal_blur_sigma_px: img.meta.focal_blur_sigma_px,
        }
    }

    pub fn meta(&self) -> ImageMeta {
        ImageMeta {
            spec_id: self.spec_id.clone(),
            geometry: self.geometry.clone(),
            angle_deg: self.angle_deg,
            noise: self.noise,
            focal_blur_sigma_px: self.focal_blur_sigma_px,
            bits: self.bits,
        }
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).at(path)
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).at(path)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path.display().to_string(), None, e.to_string()))?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|e| {
        Error::parse(path.display().to_string(), None, e.to_string())
    })
}

/// Writes `<stem>.f32`, `<stem>.json` and a 16-bit `<stem>.png` preview
/// into `dir`. Returns the file names.
pub fn save_image(dir: &Path, stem: &str, img: &ProjectionImage) -> Result<Vec<String>> {
    let raw = format!("{stem}.f32");
    let side = format!("{stem}.json");
    let png = format!("{stem}.png");
    write_file(&dir.join(&raw), &f32_bytes(&img.pixels.data))?;
    write_json(&dir.join(&side), &ImageSidecar::of(img))?;
    let q = quantize(img, QuantizationSpec::new(16)?)?;
    write_file(&dir.join(&png), &png16_bytes(&q)?)?;
    Ok(vec![raw, side, png])
}

/// Loads an image written by [`save_image`] (values read back from `f32`).
pub fn load_image(dir: &Path, stem: &str) -> Result<ProjectionImage> {
    let side: ImageSidecar = read_json(&dir.join(format!("{stem}.json")))?;
    let path = dir.join(format!("{stem}.f32"));
    let data = read_f32(&read_file(&path)?, side.width * side.height, &path.display().to_string())?;
    let mut img = ProjectionImage::new(Raster::from_vec(side.width, side.height, data)?, side.pitch);
    img.meta = side.meta();
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Raster<u16> {
        Raster::from_fn(7, 5, |x, y| (x * 9000 + y * 300) as u16)
    }

    #[test]
    fn png16_round_trip() {
        let r = ramp();
        assert_eq!(read_png(&png16_bytes(&r).unwrap()).unwrap(), r);
    }

    #[test]
    fn png8_mask_round_trip() {
        let m = Mask::from_fn(9, 4, |x, y| (x + y) % 3 == 0);
        assert_eq!(read_mask_png(&mask_png_bytes(&m).unwrap()).unwrap(), m);
    }

    #[test]
    fn pgm_round_trip_both_depths() {
        let r = ramp();
        let (back, maxval) = read_pgm(&pgm_bytes(&r, 65535)).unwrap();
        assert_eq!((back, maxval), (r, 65535));
        let small = Raster::from_fn(3, 2, |x, y| (x * 50 + y) as u16);
        let bytes = pgm_bytes(&small, 255);
        assert_eq!(bytes.len(), "P5\n3 2\n255\n".len() + 6);
        assert_eq!(read_pgm(&bytes).unwrap().0, small);
    }

    #[test]
    fn pgm_truncation_is_reported() {
        let bytes = pgm_bytes(&ramp(), 65535);
        assert!(matches!(
            read_pgm(&bytes[..bytes.len() - 1]),
            Err(Error::Parse { .. })
        ));
        assert!(read_pgm(b"P2\n1 1\n255\n0").is_err());
    }

    #[test]
    fn raw_f32_round_trip_and_size_check() {
        let v = vec![0.25, -1.5, 3.0e-7];
        let back = read_f32(&f32_bytes(&v), 3, "t").unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(*a as f32 as f64, *b);
        }
        assert!(read_f32(&f32_bytes(&v), 4, "t").is_err());
    }
}
