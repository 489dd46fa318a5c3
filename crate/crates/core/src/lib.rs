//! Region-wise QUBO refinement for parallel-beam tomographic reconstruction.
//!
//! ```
//! use qtomo::encoding::EncodingSpec;
//! use qtomo::phantom::{generate_shepp_logan, PhantomMode};
//! use qtomo::pipeline::{multi_stage_reconstruct, ReconstructionConfig, StagePlan};
//! use qtomo::projector::{radon, Geometry};
//! use qtomo::report::pixel_accuracy;
//! use qtomo::solver::SolverSpec;
//!
//! # fn main() -> qtomo::Result<()> {
//! let img = generate_shepp_logan(16, PhantomMode::Binary)?;
//! let sino = radon(&img, &Geometry::uniform(16, 16)?)?;
//! let plan = StagePlan::with_sizes(&[8], 2)?;
//! let cfg = ReconstructionConfig::new(EncodingSpec::binary(), SolverSpec::sa(), 7, plan);
//! let out = multi_stage_reconstruct(&sino, &cfg)?;
//! assert!(pixel_accuracy(&out.image, &img, &[0.0, 1.0])? > 0.9);
//! # Ok(())
//! # }
//! ```

pub mod encoding;
pub mod error;
pub mod image;
pub mod manifest;
pub mod par;
pub mod phantom;
pub mod pipeline;
pub mod projector;
pub mod qubo;
pub mod report;
pub mod resample;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use image::{Image, Region};
