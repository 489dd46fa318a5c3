use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Geometry, Sinogram};
use crate::error::{Error, Result};

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// `SINO <n_angles> <n_detectors> <path_scale>`, the angle list, then rows.
pub(crate) fn to_text(sino: &Sinogram) -> String {
    let g = sino.geometry();
    let mut out = format!("SINO {} {} {}\n", g.n_angles(), g.detectors(), sino.path_scale());
    let join = |vals: &[f64]| {
        let mut s = String::new();
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            write!(s, "{v}").unwrap();
        }
        s
    };
    out.push_str(&join(g.angles()));
    out.push('\n');
    for a in 0..g.n_angles() {
        out.push_str(&join(sino.row(a)));
        out.push('\n');
    }
    out
}

/// The file format carries no image size; the loaded geometry assumes one
/// detector bin per pixel.
pub(crate) fn from_text(text: &str) -> Result<Sinogram> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| format_err("empty sinogram file"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    if f.len() != 4 || f[0] != "SINO" {
        return Err(format_err(format!("bad sinogram header {header:?}")));
    }
    let bad = || format_err(format!("bad sinogram header {header:?}"));
    let n_angles: usize = f[1].parse().map_err(|_| bad())?;
    let detectors: usize = f[2].parse().map_err(|_| bad())?;
    let path_scale: f64 = f[3].parse().map_err(|_| bad())?;
    let parse_row = |line: &str, want: usize, what: &str| -> Result<Vec<f64>> {
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format_err(format!("bad value {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != want {
            return Err(format_err(format!("{what} has {} values, expected {want}", row.len())));
        }
        Ok(row)
    };
    let angles = parse_row(lines.next().ok_or_else(|| format_err("missing angle line"))?, n_angles, "angle line")?;
    let mut values = Vec::with_capacity(n_angles * detectors);
    let mut rows = 0;
    for line in lines {
        values.extend(parse_row(line, detectors, &format!("row {rows}"))?);
        rows += 1;
    }
    if rows != n_angles {
        return Err(format_err(format!("found {rows} rows, header says {n_angles}")));
    }
    let geometry = Geometry::new(detectors, angles, detectors).map_err(|e| format_err(e.to_string()))?;
    Sinogram::new(geometry, values, path_scale).map_err(|e| format_err(e.to_string()))
}

pub fn save_sinogram(sino: &Sinogram, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_text(sino))?;
    Ok(())
}

pub fn load_sinogram(path: impl AsRef<Path>) -> Result<Sinogram> {
    from_text(&fs::read_to_string(path)?)
}
