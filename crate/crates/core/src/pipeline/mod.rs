//! Reconstruction drivers.
//!
//! All three strategies run the same staged loop. Stage 1 solves one QUBO
//! for the whole image at the smallest size against a downscaled sinogram.
//! Every later stage upscales the previous image and refines it region by
//! region against its own target sinogram, iterating until the generated
//! sinogram matches or the iteration cap is hit. The final stage always
//! works at the measured resolution against the measured sinogram.

mod post;
mod region;

pub use post::{convergence_check, hole_fill, relative_rmse, CONVERGENCE_EPS};
pub use region::{partition_regions, refine_region, refine_region_with, RecordStatus, RefinementRecord};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::encoding::EncodingSpec;
use crate::error::{invalid, Error, Result};
use crate::image::{Image, Region};
use crate::projector::{Geometry, Projector, Sinogram};
use crate::resample::{
    downscale_full_view, gaussian_filter, upscale_image, Aggregate, AngleMode, DownscaleSpec, Interpolation,
};
use crate::solver::SolverSpec;

/// One resolution step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub image_size: usize,
    /// Consecutive angles merged when downscaling the sinogram; 1 keeps the
    /// angle list as measured.
    #[serde(default = "one")]
    pub angle_factor: usize,
    #[serde(default)]
    pub aggregate: Aggregate,
    #[serde(default)]
    pub angle_mode: AngleMode,
    /// Blur applied before each repeat iteration; falls back to the plan's.
    #[serde(default)]
    pub gaussian_sigma: Option<f64>,
    /// Falls back to the plan's cap.
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

impl StageSpec {
    pub fn new(image_size: usize, angle_factor: usize) -> Self {
        Self {
            image_size,
            angle_factor,
            aggregate: Aggregate::Mean,
            angle_mode: AngleMode::PickSecond,
            gaussian_sigma: None,
            max_iterations: None,
        }
    }
}

fn one() -> usize {
    1
}
fn default_max_iterations() -> usize {
    5
}
fn default_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    /// Strictly increasing sizes. The measured size is appended when the
    /// last entry is smaller.
    pub stages: Vec<StageSpec>,
    #[serde(default)]
    pub interpolation: Interpolation,
    /// Side of the refinement regions; defaults to the first stage size.
    #[serde(default)]
    pub region_size: Option<usize>,
    #[serde(default)]
    pub overlap: usize,
    /// Explicit region list for the final stage, replacing the tiling.
    /// Regions may repeat to revisit them.
    #[serde(default)]
    pub regions: Option<Vec<Region>>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Iterations run even when the sinogram already matches.
    #[serde(default = "one")]
    pub min_iterations: usize,
    /// Relative sinogram RMSE that counts as a match.
    #[serde(default = "default_tol")]
    pub convergence_tol: f64,
    #[serde(default)]
    pub gaussian_sigma: Option<f64>,
    /// Snap isolated pixels to their neighbours before each repeat iteration.
    #[serde(default)]
    pub hole_fill: bool,
}

impl StagePlan {
    pub fn new(stages: Vec<StageSpec>) -> Result<Self> {
        let plan = Self {
            stages,
            interpolation: Interpolation::default(),
            region_size: None,
            overlap: 0,
            regions: None,
            max_iterations: default_max_iterations(),
            min_iterations: 1,
            convergence_tol: default_tol(),
            gaussian_sigma: None,
            hole_fill: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan with the given stage sizes and angle factors all set to `angle_factor`.
    pub fn with_sizes(sizes: &[usize], angle_factor: usize) -> Result<Self> {
        Self::new(sizes.iter().map(|&n| StageSpec::new(n, angle_factor)).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(invalid("stage plan is empty"));
        }
        if self.stages.iter().any(|s| s.image_size == 0 || s.angle_factor == 0) {
            return Err(invalid("stage sizes and angle factors must be positive"));
        }
        if self.stages.windows(2).any(|w| w[1].image_size <= w[0].image_size) {
            return Err(invalid("stage sizes must be strictly increasing"));
        }
        if self.max_iterations == 0 || self.min_iterations > self.max_iterations {
            return Err(invalid(format!(
                "iteration bounds {}..={} are inconsistent",
                self.min_iterations, self.max_iterations
            )));
        }
        if !(self.convergence_tol >= 0.0 && self.convergence_tol.is_finite()) {
            return Err(invalid("convergence tolerance must be a non-negative number"));
        }
        let sigmas = self.stages.iter().filter_map(|s| s.gaussian_sigma).chain(self.gaussian_sigma);
        for s in sigmas {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid(format!("gaussian sigma {s} must be positive")));
            }
        }
        if self.stages.iter().any(|s| s.max_iterations == Some(0)) {
            return Err(invalid("a stage needs at least one iteration"));
        }
        Ok(())
    }

    /// Stages for a measured size `n`, with the final stage appended.
    fn resolved(&self, n: usize) -> Result<Vec<StageSpec>> {
        let last = self.stages.last().expect("validated").image_size;
        if last > n {
            return Err(invalid(format!("stage size {last} exceeds the measured size {n}")));
        }
        let mut stages = self.stages.clone();
        if last < n {
            stages.push(StageSpec::new(n, 1));
        }
        if stages.last().unwrap().angle_factor != 1 {
            return Err(invalid("the final stage must use the measured angles"));
        }
        Ok(stages)
    }
}

fn default_sample() -> String {
    "sample".into()
}
fn default_max_vars() -> usize {
    8192
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    /// Label for the ledger's sample column.
    #[serde(default = "default_sample")]
    pub sample: String,
    pub encoding: EncodingSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Solve `k` of the run (0-based) uses `seed + k`.
    #[serde(default)]
    pub seed: u64,
    pub plan: StagePlan,
    /// Largest QUBO the run may build.
    #[serde(default = "default_max_vars")]
    pub max_vars: usize,
    /// Keep measured wall times in the ledger. Off by default so that equal
    /// seeds give byte-identical ledgers.
    #[serde(default)]
    pub record_runtime: bool,
}

impl ReconstructionConfig {
    pub fn new(encoding: EncodingSpec, solver: SolverSpec, seed: u64, plan: StagePlan) -> Self {
        Self {
            sample: default_sample(),
            encoding,
            solver,
            seed,
            plan,
            max_vars: default_max_vars(),
            record_runtime: false,
        }
    }

    /// Checks every stage against the measured sinogram geometry.
    pub fn validate_for(&self, geometry: &Geometry) -> Result<()> {
        self.plan.validate()?;
        self.encoding.validate()?;
        let n = geometry.image_size();
        let stages = self.plan.resolved(n)?;
        let region_size = self.plan.region_size.unwrap_or(stages[0].image_size);
        for (k, s) in stages.iter().enumerate() {
            if !n.is_multiple_of(s.image_size) {
                return Err(invalid(format!("stage size {} does not divide {n}", s.image_size)));
            }
            DownscaleSpec::new(s.angle_factor, n / s.image_size, s.aggregate, s.angle_mode).validate_for(geometry)?;
            if k > 0 && !(k + 1 == stages.len() && self.plan.regions.is_some()) {
                partition_regions(s.image_size, region_size.min(s.image_size), self.plan.overlap)?;
            }
        }
        if let Some(regions) = &self.plan.regions {
            if regions.is_empty() {
                return Err(invalid("region override list is empty"));
            }
            for r in regions {
                r.check_inside(n, n)?;
            }
        }
        Ok(())
    }
}

/// Output of a reconstruction run.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub image: Image,
    pub ledger: Vec<RefinementRecord>,
    /// Whether the final stage met the convergence tolerance.
    pub converged: bool,
    /// Relative sinogram RMSE of the final image.
    pub final_rmse: f64,
    /// Side of the first-stage image.
    pub initial_size: usize,
}

pub fn multi_stage_reconstruct(sino_full: &Sinogram, config: &ReconstructionConfig) -> Result<Reconstruction> {
    run(sino_full, config)
}

/// Multi-stage run with a single low-resolution stage.
pub fn single_stage_reconstruct(sino_full: &Sinogram, config: &ReconstructionConfig) -> Result<Reconstruction> {
    let n = sino_full.geometry().image_size();
    let stages = &config.plan.stages;
    let ok = stages.len() == 1 || (stages.len() == 2 && stages[1].image_size == n);
    if !ok {
        return Err(invalid("a single-stage plan has one stage below the measured size"));
    }
    run(sino_full, config)
}

/// Reconstruction from a sinogram with a reduced (possibly non-uniform)
/// angle list. Only the detector axis is downscaled.
pub fn sparse_view_reconstruct(sino_sparse: &Sinogram, config: &ReconstructionConfig) -> Result<Reconstruction> {
    if config.plan.stages.iter().any(|s| s.angle_factor != 1) {
        return Err(invalid("sparse-view stages keep every measured angle (angle_factor 1)"));
    }
    run(sino_sparse, config)
}

struct Runner<'a> {
    config: &'a ReconstructionConfig,
    ledger: Vec<RefinementRecord>,
    solves: u64,
    bits: usize,
}

impl Runner<'_> {
    fn next_seed(&mut self) -> u64 {
        let s = self.config.seed.wrapping_add(self.solves);
        self.solves += 1;
        s
    }

    fn check_budget(&self, region: &Region) -> Result<()> {
        let n_vars = region.len() * self.bits;
        if n_vars > self.config.max_vars {
            return Err(Error::Capacity(format!(
                "{}x{} region with {} bits per pixel needs {n_vars} variables, budget is {}",
                region.height, region.width, self.bits, self.config.max_vars
            )));
        }
        Ok(())
    }

    fn push(&mut self, mut record: RefinementRecord, stage: usize, iteration: usize, region: Option<usize>) {
        record.sample = self.config.sample.clone();
        record.stage = stage;
        record.iteration = iteration;
        record.region = region;
        if !self.config.record_runtime {
            record.runtime_s = 0.0;
        }
        self.ledger.push(record);
    }
}

fn run(sino: &Sinogram, config: &ReconstructionConfig) -> Result<Reconstruction> {
    let geometry = sino.geometry();
    config.validate_for(geometry)?;
    let n = geometry.image_size();
    let plan = &config.plan;
    let stages = plan.resolved(n)?;
    let region_size = plan.region_size.unwrap_or(stages[0].image_size);
    let levels = config.encoding.representable_values().ok();
    let mut runner = Runner { config, ledger: Vec::new(), solves: 0, bits: config.encoding.basis()?.n_vars() };

    let target_for = |s: &StageSpec| -> Result<Sinogram> {
        if s.image_size == n && s.angle_factor == 1 {
            return Ok(sino.clone());
        }
        downscale_full_view(sino, &DownscaleSpec::new(s.angle_factor, n / s.image_size, s.aggregate, s.angle_mode))
    };

    // stage 1: whole image
    let first = &stages[0];
    let target = target_for(first)?;
    let projector = Projector::new(target.geometry());
    let whole = Region::whole(first.image_size, first.image_size);
    runner.check_budget(&whole)?;
    let seed = runner.next_seed();
    let zeros = Image::zeros(first.image_size, first.image_size);
    let (mut image, record) =
        refine_region_with(&projector, &zeros, &whole, &target, &config.encoding, &config.solver, seed)?;
    runner.push(record, 1, 0, None);
    let mut rmse = relative_rmse(&projector.forward(&image)?, &target)?;
    let mut converged = rmse <= plan.convergence_tol;

    let mut iteration = 0;
    for (k, stage) in stages.iter().enumerate().skip(1) {
        let target = target_for(stage)?;
        let projector = Projector::new(target.geometry());
        image = upscale_image(&image, stage.image_size, plan.interpolation)?;
        let regions = match &plan.regions {
            Some(list) if k + 1 == stages.len() => list.clone(),
            _ => partition_regions(stage.image_size, region_size.min(stage.image_size), plan.overlap)?,
        };
        for r in &regions {
            runner.check_budget(r)?;
        }
        let max_it = stage.max_iterations.unwrap_or(plan.max_iterations);
        let sigma = stage.gaussian_sigma.or(plan.gaussian_sigma);
        for it in 1..=max_it {
            iteration += 1;
            for (ri, region) in regions.iter().enumerate() {
                let seed = runner.next_seed();
                let (next, record) =
                    refine_region_with(&projector, &image, region, &target, &config.encoding, &config.solver, seed)?;
                image = next;
                runner.push(record, k + 1, iteration, Some(ri));
            }
            rmse = relative_rmse(&projector.forward(&image)?, &target)?;
            converged = rmse <= plan.convergence_tol;
            if it == max_it || (converged && it >= plan.min_iterations) {
                break;
            }
            if let Some(s) = sigma {
                image = gaussian_filter(&image, s)?;
            }
            if plan.hole_fill {
                if let Some(lv) = &levels {
                    image = hole_fill(&image, lv)?;
                }
            }
        }
    }

    Ok(Reconstruction {
        image,
        ledger: runner.ledger,
        converged,
        final_rmse: rmse,
        initial_size: stages[0].image_size,
    })
}

/// Wall-clock helper for callers that time whole runs.
pub fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests;
