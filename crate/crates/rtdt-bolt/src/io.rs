//! Reading and writing 8-bit lossless rasters (binary PGM and PNG), plus
//! atomic text-file output for the CSV/JSON artifacts.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::img::{GrayImage, RgbImage};
use crate::{Error, Result};

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Serialize a luminance image to 8-bit binary PGM (P5) bytes.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.data.iter().map(|&v| quantize(v)));
    out
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        // Skip whitespace and `#` comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::malformed(path, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(bytes)?;
    if magic != "P5" {
        return Err(Error::malformed(path, format!("expected P5, got {magic}")));
    }
    let parse = |s: String| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::malformed(path, format!("bad PGM header field {s:?}")))
    };
    let width = parse(token(bytes)?)?;
    let height = parse(token(bytes)?)?;
    let maxval = parse(token(bytes)?)?;
    if maxval != 255 {
        return Err(Error::malformed(path, format!("unsupported maxval {maxval}")));
    }
    let data_start = pos + 1; // single whitespace byte after maxval
    let expected = width * height;
    let raster = bytes
        .get(data_start..data_start + expected)
        .ok_or_else(|| Error::malformed(path, "truncated PGM raster"))?;
    let data = raster.iter().map(|&b| b as f32 / 255.0).collect();
    GrayImage::new(width, height, data)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<RgbImage> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::malformed(path, e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::malformed(path, e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::malformed(path, "only 8-bit PNG is supported"));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let px = &buf[..info.buffer_size()];
    let mut data = Vec::with_capacity(w * h * 3);
    match info.color_type {
        png::ColorType::Grayscale => {
            for &v in px {
                data.extend_from_slice(&[v, v, v]);
            }
        }
        png::ColorType::GrayscaleAlpha => {
            for p in px.chunks_exact(2) {
                data.extend_from_slice(&[p[0], p[0], p[0]]);
            }
        }
        png::ColorType::Rgb => data.extend_from_slice(px),
        png::ColorType::Rgba => {
            for p in px.chunks_exact(4) {
                data.extend_from_slice(&p[..3]);
            }
        }
        other => {
            return Err(Error::malformed(path, format!("unsupported PNG color type {other:?}")));
        }
    }
    RgbImage::new(w, h, data)
}

fn encode_png_gray(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let bytes: Vec<u8> = img.data.iter().map(|&v| quantize(v)).collect();
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(out)
}

fn encode_png_rgb(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        writer
            .write_image_data(&img.data)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    }
    Ok(out)
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case(ext))
        .unwrap_or(false)
}

/// Read a PGM or PNG file as luminance (PNG color is converted via Rec.601).
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if has_ext(path, "pgm") || bytes.starts_with(b"P5") {
        decode_pgm(&bytes, path)
    } else {
        Ok(crate::img::to_grayscale(&decode_png(&bytes, path)?))
    }
}

/// Read a PNG (or PGM, replicated to gray triples) as RGB.
pub fn read_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if has_ext(path, "pgm") || bytes.starts_with(b"P5") {
        let gray = decode_pgm(&bytes, path)?;
        let mut data = Vec::with_capacity(gray.width * gray.height * 3);
        for &v in &gray.data {
            let b = quantize(v);
            data.extend_from_slice(&[b, b, b]);
        }
        RgbImage::new(gray.width, gray.height, data)
    } else {
        decode_png(&bytes, path)
    }
}

/// Write a luminance image as PGM or PNG depending on the file extension.
pub fn write_gray(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let bytes = if has_ext(path, "png") {
        encode_png_gray(img)?
    } else {
        encode_pgm(img)
    };
    write_bytes_atomic(path, &bytes)
}

pub fn write_rgb(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    let path = path.as_ref();
    let bytes = if has_ext(path, "png") {
        encode_png_rgb(img)?
    } else {
        encode_pgm(&crate::img::to_grayscale(img))
    };
    write_bytes_atomic(path, &bytes)
}

/// Write via a temp file in the same directory, then rename into place.
pub fn write_bytes_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = temp_sibling(path);
    {
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_text_atomic(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_bytes_atomic(path, text.as_bytes())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn read_to_string(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut s = String::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}
