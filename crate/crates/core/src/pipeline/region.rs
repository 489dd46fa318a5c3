use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoding::EncodingSpec;
use crate::error::{invalid, Error, Result};
use crate::image::{Image, Region};
use crate::projector::{Projector, Sinogram};
use crate::qubo::{build_region_qubo_with, decode_solution};
use crate::solver::SolverSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Solved,
    /// No ray crosses the region; its pixels were left as they were.
    Degenerate,
}

/// One row of the refinement ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub sample: String,
    /// 1-based stage index.
    pub stage: usize,
    /// 0 for the initial whole-image solve, then 1, 2, ... across the run.
    pub iteration: usize,
    /// 0-based index into the stage's region list; `None` for the
    /// whole-image solve.
    pub region: Option<usize>,
    pub bounds: Region,
    pub n_vars: usize,
    pub target_min: f64,
    pub achieved: f64,
    pub abs_gap: f64,
    pub runtime_s: f64,
    pub status: RecordStatus,
}

impl RefinementRecord {
    /// `S1`, `S2`, ... for regions and `full` for the whole-image solve.
    pub fn region_label(&self) -> String {
        match self.region {
            Some(k) => format!("S{}", k + 1),
            None => "full".into(),
        }
    }
}

/// Row-major tiling. With `overlap > 0` regions step by
/// `region_size - overlap` and the last row and column are clamped to the
/// image edge, so every pixel is covered.
pub fn partition_regions(image_size: usize, region_size: usize, overlap: usize) -> Result<Vec<Region>> {
    if region_size == 0 || region_size > image_size {
        return Err(invalid(format!("region size {region_size} does not fit a {image_size} image")));
    }
    if overlap >= region_size {
        return Err(invalid(format!("overlap {overlap} must be smaller than the region size {region_size}")));
    }
    let starts: Vec<usize> = if overlap == 0 {
        if !image_size.is_multiple_of(region_size) {
            return Err(invalid(format!(
                "image size {image_size} is not divisible by region size {region_size}"
            )));
        }
        (0..image_size / region_size).map(|k| k * region_size).collect()
    } else {
        let step = region_size - overlap;
        let last = image_size - region_size;
        let mut s: Vec<usize> = (0..).map(|k| k * step).take_while(|&p| p < last).collect();
        s.push(last);
        s
    };
    Ok(starts
        .iter()
        .flat_map(|&r| starts.iter().map(move |&c| Region::new(r, c, region_size, region_size)))
        .collect())
}

/// One refinement step: zero the region, project, take the difference,
/// build and solve the QUBO, and write the decoded pixels back. Pixels
/// outside the region are never touched.
pub fn refine_region(
    current: &Image,
    region: &Region,
    target: &Sinogram,
    encoding: &EncodingSpec,
    solver: &SolverSpec,
    seed: u64,
) -> Result<(Image, RefinementRecord)> {
    refine_region_with(&Projector::new(target.geometry()), current, region, target, encoding, solver, seed)
}

/// As [`refine_region`], reusing a cached projector.
pub fn refine_region_with(
    projector: &Projector,
    current: &Image,
    region: &Region,
    target: &Sinogram,
    encoding: &EncodingSpec,
    solver: &SolverSpec,
    seed: u64,
) -> Result<(Image, RefinementRecord)> {
    let start = Instant::now();
    let mut record = RefinementRecord {
        sample: String::new(),
        stage: 0,
        iteration: 0,
        region: None,
        bounds: *region,
        n_vars: 0,
        target_min: 0.0,
        achieved: 0.0,
        abs_gap: 0.0,
        runtime_s: 0.0,
        status: RecordStatus::Solved,
    };
    let problem = match build_region_qubo_with(projector, current, region, target, encoding) {
        Ok(p) => p,
        Err(Error::Degenerate(_)) => {
            record.status = RecordStatus::Degenerate;
            record.runtime_s = start.elapsed().as_secs_f64();
            return Ok((current.clone(), record));
        }
        Err(e) => return Err(e),
    };
    let result = solver.solve(&problem, seed)?;
    let patch = decode_solution(&result.bits, &problem, encoding)?;

    let mut out = current.clone();
    for (r, c) in region.pixels() {
        out.set(r, c, patch.get(r - region.row0, c - region.col0));
    }
    let target_min = problem.target_min().expect("region problems carry a target minimum");
    record.n_vars = problem.n_vars();
    record.target_min = target_min;
    record.achieved = result.energy;
    record.abs_gap = (target_min - result.energy).abs();
    record.runtime_s = start.elapsed().as_secs_f64();
    Ok((out, record))
}
