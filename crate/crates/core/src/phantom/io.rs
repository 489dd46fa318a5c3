use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

const BINARY_MAGIC: &[u8; 8] = b"QTIMGF64";

/// On-disk image encodings, selected by file extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    /// `IMG <height> <width>` header followed by one line per row. Exact.
    Text,
    /// Magic, two little-endian `u64` dimensions, then `f64` values. Exact.
    Binary,
    /// 8-bit portable graymap; lossy, for viewing only.
    Pgm,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => ImageFormat::Pgm,
            Some("bin") => ImageFormat::Binary,
            _ => ImageFormat::Text,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    /// ASCII `P2`.
    Plain,
    /// Binary `P5`.
    Raw,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn save_image(image: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match ImageFormat::from_path(path) {
        ImageFormat::Text => fs::write(path, to_text(image))?,
        ImageFormat::Binary => fs::write(path, to_binary(image))?,
        ImageFormat::Pgm => save_pgm(image, path, PgmEncoding::Raw)?,
    }
    Ok(())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match ImageFormat::from_path(path) {
        ImageFormat::Text => from_text(&fs::read_to_string(path)?),
        ImageFormat::Binary => from_binary(&fs::read(path)?),
        ImageFormat::Pgm => load_pgm(path),
    }
}

pub(crate) fn to_text(image: &Image) -> String {
    let mut out = format!("IMG {} {}\n", image.height(), image.width());
    for row in image.values().chunks(image.width().max(1)) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub(crate) fn from_text(text: &str) -> Result<Image> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| format_err("empty image file"))?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("IMG") {
        return Err(format_err(format!("bad image header {header:?}")));
    }
    let mut dim = || -> Result<usize> {
        fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| format_err(format!("bad image header {header:?}")))
    };
    let (height, width) = (dim()?, dim()?);
    let mut values = Vec::with_capacity(height * width);
    let mut rows = 0;
    for line in lines {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format_err(format!("bad value {t:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != width {
            return Err(format_err(format!(
                "row {rows} has {} values, header says {width}",
                row.len()
            )));
        }
        values.extend(row);
        rows += 1;
    }
    if rows != height {
        return Err(format_err(format!("found {rows} rows, header says {height}")));
    }
    Image::new(height, width, values).map_err(|e| format_err(e.to_string()))
}

fn to_binary(image: &Image) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * image.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(image.height() as u64).to_le_bytes());
    out.extend_from_slice(&(image.width() as u64).to_le_bytes());
    for v in image.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn from_binary(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 24 || &bytes[..8] != BINARY_MAGIC {
        return Err(format_err("missing binary image header"));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let (height, width) = (word(8) as usize, word(16) as usize);
    let body = &bytes[24..];
    if body.len() != 8 * height * width {
        return Err(format_err(format!(
            "binary image {height}x{width} expects {} payload bytes, found {}",
            8 * height * width,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Image::new(height, width, values).map_err(|e| format_err(e.to_string()))
}

/// Writes a graymap with `0 -> 0` and the image maximum mapped to 255.
pub fn save_pgm(image: &Image, path: impl AsRef<Path>, encoding: PgmEncoding) -> Result<()> {
    let max = image.values().iter().cloned().fold(0.0, f64::max);
    let gray: Vec<u8> = image
        .values()
        .iter()
        .map(|&v| if max > 0.0 { (v / max * 255.0).round() as u8 } else { 0 })
        .collect();
    let mut out = Vec::new();
    match encoding {
        PgmEncoding::Plain => {
            let mut text = format!("P2\n{} {}\n255\n", image.width(), image.height());
            for row in gray.chunks(image.width().max(1)) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                text.push_str(&line.join(" "));
                text.push('\n');
            }
            out.extend_from_slice(text.as_bytes());
        }
        PgmEncoding::Raw => {
            out.extend_from_slice(format!("P5\n{} {}\n255\n", image.width(), image.height()).as_bytes());
            out.extend_from_slice(&gray);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a P2 or P5 graymap; intensities come back as `gray / maxval`.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    let bytes = fs::read(path)?;
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err("truncated graymap header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |t: String| t.parse::<usize>().map_err(|_| format_err(format!("bad graymap field {t:?}")));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 255 {
        return Err(format_err(format!("unsupported maxval {maxval}")));
    }
    let gray: Vec<usize> = match magic.as_str() {
        "P2" => (0..width * height).map(|_| token().and_then(num)).collect::<Result<_>>()?,
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            let start = pos + 1;
            let raster = bytes
                .get(start..start + width * height)
                .ok_or_else(|| format_err("truncated graymap raster"))?;
            raster.iter().map(|&b| b as usize).collect()
        }
        other => return Err(format_err(format!("unsupported graymap magic {other:?}"))),
    };
    let values = gray.into_iter().map(|g| g as f64 / maxval as f64).collect();
    Image::new(height, width, values).map_err(|e| format_err(e.to_string()))
}
