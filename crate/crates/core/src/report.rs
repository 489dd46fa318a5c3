//! Accuracy metrics, dose estimates and the refinement gap table.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::image::Image;
use crate::phantom::{save_pgm, PgmEncoding};
use crate::pipeline::{Reconstruction, RefinementRecord};

/// Header of the ledger CSV.
pub const GAP_TABLE_HEADER: &str = "sample,iteration,region,runtime_s,target_min,achieved,abs_gap";

/// Nearest entry of `levels`; ties go to the lower level.
pub fn quantize(value: f64, levels: &[f64]) -> f64 {
    let mut best = levels[0];
    for &l in &levels[1..] {
        let (d, db) = ((value - l).abs(), (value - best).abs());
        if d < db || (d == db && l < best) {
            best = l;
        }
    }
    best
}

/// Fraction of pixels that agree after both images are snapped to `levels`.
pub fn pixel_accuracy(reconstructed: &Image, reference: &Image, levels: &[f64]) -> Result<f64> {
    if reconstructed.height() != reference.height() || reconstructed.width() != reference.width() {
        return Err(invalid(format!(
            "image is {}x{}, reference is {}x{}",
            reconstructed.height(),
            reconstructed.width(),
            reference.height(),
            reference.width()
        )));
    }
    if levels.is_empty() || levels.iter().any(|l| !l.is_finite()) {
        return Err(invalid("accuracy needs at least one finite level"));
    }
    if reference.is_empty() {
        return Err(invalid("empty images"));
    }
    let same = reconstructed
        .values()
        .iter()
        .zip(reference.values())
        .filter(|(&a, &b)| quantize(a, levels) == quantize(b, levels))
        .count();
    Ok(same as f64 / reference.len() as f64)
}

/// Root-mean-square pixel difference.
pub fn image_rmse(a: &Image, b: &Image) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(invalid("images differ in size"));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let ss: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Percent of projections saved by measuring at side `n` instead of `big_n`.
pub fn dose_reduction(n: usize, big_n: usize) -> Result<f64> {
    if n == 0 || n > big_n {
        return Err(invalid(format!("need 0 < n <= N, got n = {n}, N = {big_n}")));
    }
    Ok(100.0 * (big_n - n) as f64 / big_n as f64)
}

/// Ledger as CSV, one row per record in ledger order.
pub fn render_gap_table(ledger: &[RefinementRecord]) -> Result<String> {
    if ledger.is_empty() {
        return Err(Error::EmptyTable("ledger has no records".into()));
    }
    let mut out = String::from(GAP_TABLE_HEADER);
    out.push('\n');
    for r in ledger {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_field(&r.sample),
            r.iteration,
            r.region_label(),
            r.runtime_s,
            r.target_min,
            r.achieved,
            r.abs_gap
        )
        .unwrap();
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `|a - b|` as a graymap.
pub fn save_difference_pgm(a: &Image, b: &Image, path: impl AsRef<Path>) -> Result<()> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(invalid("images differ in size"));
    }
    let diff: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).collect();
    save_pgm(&Image::new(a.height(), a.width(), diff)?, path, PgmEncoding::Raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub stage: usize,
    pub iteration: usize,
    pub region: String,
    pub target_min: f64,
    pub achieved: f64,
    pub abs_gap: f64,
}

/// Summary written next to a reconstruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    /// Present when a reference image was available.
    pub pixel_accuracy: Option<f64>,
    /// Pixel RMSE against the reference.
    pub rmse: Option<f64>,
    /// Relative RMSE between the final image's sinogram and the measurement.
    pub sinogram_rmse: f64,
    pub converged: bool,
    pub gaps: Vec<GapRow>,
    pub dose_reduction_pct: f64,
    pub wall_time_s: f64,
}

impl ReconReport {
    pub fn new(
        recon: &Reconstruction,
        reference: Option<&Image>,
        levels: &[f64],
        wall_time_s: f64,
    ) -> Result<Self> {
        let (pixel_accuracy, rmse) = match reference {
            Some(r) => (Some(pixel_accuracy(&recon.image, r, levels)?), Some(image_rmse(&recon.image, r)?)),
            None => (None, None),
        };
        let gaps = recon
            .ledger
            .iter()
            .map(|r| GapRow {
                stage: r.stage,
                iteration: r.iteration,
                region: r.region_label(),
                target_min: r.target_min,
                achieved: r.achieved,
                abs_gap: r.abs_gap,
            })
            .collect();
        Ok(Self {
            pixel_accuracy,
            rmse,
            sinogram_rmse: recon.final_rmse,
            converged: recon.converged,
            gaps,
            dose_reduction_pct: dose_reduction(recon.initial_size, recon.image.height())?,
            wall_time_s,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Region;
    use crate::pipeline::RecordStatus;
    use proptest::prelude::*;

    fn record(iteration: usize, region: Option<usize>, target: f64, achieved: f64) -> RefinementRecord {
        RefinementRecord {
            sample: "s".into(),
            stage: 1,
            iteration,
            region,
            bounds: Region::new(0, 0, 2, 2),
            n_vars: 4,
            target_min: target,
            achieved,
            abs_gap: (target - achieved).abs(),
            runtime_s: 0.0,
            status: RecordStatus::Solved,
        }
    }

    #[test]
    fn accuracy_examples() {
        let a = Image::new(10, 10, (0..100).map(|k| (k % 2) as f64).collect()).unwrap();
        assert_eq!(pixel_accuracy(&a, &a, &[0.0, 1.0]).unwrap(), 1.0);
        let comp = Image::new(10, 10, a.values().iter().map(|v| 1.0 - v).collect()).unwrap();
        assert_eq!(pixel_accuracy(&comp, &a, &[0.0, 1.0]).unwrap(), 0.0);
        let mut one = a.clone();
        one.set(3, 3, 1.0 - a.get(3, 3));
        assert_eq!(pixel_accuracy(&one, &a, &[0.0, 1.0]).unwrap(), 0.99);
        assert!(pixel_accuracy(&a, &Image::zeros(9, 10), &[0.0, 1.0]).is_err());
    }

    #[test]
    fn quantize_ties_go_low() {
        assert_eq!(quantize(0.5, &[0.0, 1.0]), 0.0);
        assert_eq!(quantize(0.5, &[1.0, 0.0]), 0.0);
        assert_eq!(quantize(0.51, &[0.0, 1.0]), 1.0);
        assert_eq!(quantize(7.0, &[0.0, 1.0, 2.0, 3.0]), 3.0);
    }

    #[test]
    fn dose_examples() {
        assert_eq!(dose_reduction(50, 500).unwrap(), 90.0);
        assert_eq!(dose_reduction(64, 64).unwrap(), 0.0);
        assert_eq!(dose_reduction(50, 100).unwrap(), 50.0);
        assert!(dose_reduction(101, 100).is_err());
        assert!(dose_reduction(0, 100).is_err());
    }

    #[test]
    fn gap_table_rows() {
        let ledger = vec![record(0, None, -10.0, -9.5), record(1, Some(0), -4.0, -4.0)];
        let csv = render_gap_table(&ledger).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], GAP_TABLE_HEADER);
        assert_eq!(lines[1], "s,0,full,0,-10,-9.5,0.5");
        assert_eq!(lines[2], "s,1,S1,0,-4,-4,0");
        for line in &lines[1..] {
            let f: Vec<f64> = line.split(',').skip(4).map(|x| x.parse().unwrap()).collect();
            assert_eq!(f[2], (f[0] - f[1]).abs());
        }
        assert!(matches!(render_gap_table(&[]), Err(Error::EmptyTable(_))));
    }

    #[test]
    fn sample_names_are_quoted() {
        let mut r = record(1, Some(0), -1.0, -1.0);
        r.sample = "a,\"b\"".into();
        assert!(render_gap_table(&[r]).unwrap().lines().nth(1).unwrap().starts_with("\"a,\"\"b\"\"\",1,"));
    }

    proptest! {
        #[test]
        fn dose_is_monotone(big_n in 1usize..2000, a in 1usize..2000, b in 1usize..2000) {
            let (a, b) = (a.min(big_n), b.min(big_n));
            let (lo, hi) = (a.min(b), a.max(b));
            let (dl, dh) = (dose_reduction(lo, big_n).unwrap(), dose_reduction(hi, big_n).unwrap());
            prop_assert!(dl >= dh);
            prop_assert!((0.0..100.0).contains(&dl));
        }

        #[test]
        fn accuracy_is_a_fraction(vals in prop::collection::vec(0.0f64..3.0, 16), refv in prop::collection::vec(0usize..4, 16)) {
            let a = Image::new(4, 4, vals).unwrap();
            let r = Image::new(4, 4, refv.into_iter().map(|v| v as f64).collect()).unwrap();
            let acc = pixel_accuracy(&a, &r, &[0.0, 1.0, 2.0, 3.0]).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
        }

        #[test]
        fn gap_table_is_pure(n in 1usize..6, t in -1e6f64..0.0) {
            let ledger: Vec<_> = (0..n).map(|k| record(k, Some(k), t, t / 2.0)).collect();
            prop_assert_eq!(render_gap_table(&ledger).unwrap(), render_gap_table(&ledger.clone()).unwrap());
        }
    }
}
