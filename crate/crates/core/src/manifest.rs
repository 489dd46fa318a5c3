//! JSON run manifests and their execution.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::Image;
use crate::phantom::{generate_shepp_logan, load_image, save_image, save_pgm, PgmEncoding, PhantomMode};
use crate::pipeline::{
    multi_stage_reconstruct, single_stage_reconstruct, sparse_view_reconstruct, Reconstruction, ReconstructionConfig,
};
use crate::projector::{load_sinogram, radon, uniform_angles, Geometry, Sinogram};
use crate::report::{render_gap_table, save_difference_pgm, ReconReport};
use crate::solver::SolverSpec;

/// Where the measured sinogram comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Source {
    /// Shepp-Logan phantom, projected with the manifest's acquisition.
    Phantom { size: usize, mode: PhantomMode },
    /// Image file, projected with the manifest's acquisition.
    Image { path: PathBuf },
    /// Measured sinogram, optionally with a reference image for scoring.
    Sinogram {
        path: PathBuf,
        #[serde(default)]
        reference: Option<PathBuf>,
    },
}

/// Projection geometry for image sources. Defaults to one uniform angle per
/// image row and one detector per pixel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    #[serde(default)]
    pub n_angles: Option<usize>,
    /// Explicit angles in degrees; excludes `n_angles`.
    #[serde(default)]
    pub angles_deg: Option<Vec<f64>>,
    #[serde(default)]
    pub detectors: Option<usize>,
}

impl Acquisition {
    pub fn geometry(&self, image_size: usize) -> Result<Geometry> {
        let angles = match (&self.angles_deg, self.n_angles) {
            (Some(_), Some(_)) => return Err(invalid("acquisition sets both n_angles and angles_deg")),
            (Some(a), None) => a.clone(),
            (None, n) => uniform_angles(n.unwrap_or(image_size)),
        };
        Geometry::new(image_size, angles, self.detectors.unwrap_or(image_size))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    MultiStage,
    SingleStage,
    SparseView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: Source,
    #[serde(default)]
    pub acquisition: Acquisition,
    #[serde(default)]
    pub mode: RunMode,
    pub reconstruction: ReconstructionConfig,
    /// Levels used for pixel accuracy; defaults to the reference image's
    /// levels, then to the encoding's representable values.
    #[serde(default)]
    pub levels: Option<Vec<f64>>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Backend kinds selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exhaustive,
    Sa,
    Remote,
}

impl SolverKind {
    fn of(spec: &SolverSpec) -> Self {
        match spec {
            SolverSpec::Exhaustive => SolverKind::Exhaustive,
            SolverSpec::Sa { .. } => SolverKind::Sa,
            SolverSpec::Remote { .. } => SolverKind::Remote,
        }
    }

    fn default_spec(self) -> SolverSpec {
        match self {
            SolverKind::Exhaustive => SolverSpec::Exhaustive,
            SolverKind::Sa => SolverSpec::sa(),
            SolverKind::Remote => SolverSpec::Remote { url: None, time_limit_s: 10.0 },
        }
    }
}

/// Command-line values that replace manifest fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub solver: Option<SolverKind>,
    pub out_dir: Option<PathBuf>,
    pub time_limit_s: Option<f64>,
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a manifest; relative paths inside it are taken relative to the
    /// manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut m = Self::from_json(&fs::read_to_string(path)?)?;
        m.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.source {
            Source::Phantom { .. } => {}
            Source::Image { path } => fix(path),
            Source::Sinogram { path, reference } => {
                fix(path);
                if let Some(r) = reference {
                    fix(r);
                }
            }
        }
        if let Some(o) = &mut self.out_dir {
            fix(o);
        }
    }

    /// Applies command-line overrides. A flag may replace a manifest value
    /// but may not contradict the rest of the manifest: switching backend
    /// while the manifest tunes the old one, or setting a time limit for a
    /// backend that has none, is rejected.
    pub fn apply_overrides(&mut self, o: &Overrides) -> Result<()> {
        let cfg = &mut self.reconstruction;
        if let Some(kind) = o.solver {
            if kind != SolverKind::of(&cfg.solver) {
                let current = SolverKind::of(&cfg.solver);
                if cfg.solver != current.default_spec() {
                    return Err(invalid(format!(
                        "--solver {} conflicts with the manifest's tuned {} solver",
                        kind.default_spec().name(),
                        cfg.solver.name()
                    )));
                }
                cfg.solver = kind.default_spec();
            }
        }
        if let Some(t) = o.time_limit_s {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid(format!("time limit must be positive, got {t}")));
            }
            match &mut cfg.solver {
                SolverSpec::Remote { time_limit_s, .. } => *time_limit_s = t,
                other => {
                    return Err(invalid(format!(
                        "--time-limit only applies to the remote solver, manifest uses {}",
                        other.name()
                    )))
                }
            }
        }
        if let Some(s) = o.seed {
            cfg.seed = s;
        }
        if let Some(d) = &o.out_dir {
            self.out_dir = Some(d.clone());
        }
        Ok(())
    }

    /// Measured sinogram and, when available, the image it came from.
    pub fn measurement(&self) -> Result<(Sinogram, Option<Image>)> {
        let project = |img: Image| -> Result<(Sinogram, Option<Image>)> {
            if !img.is_square() {
                return Err(invalid("source image must be square"));
            }
            let sino = radon(&img, &self.acquisition.geometry(img.height())?)?;
            Ok((sino, Some(img)))
        };
        match &self.source {
            Source::Phantom { size, mode } => project(generate_shepp_logan(*size, *mode)?),
            Source::Image { path } => project(load_image(path)?),
            Source::Sinogram { path, reference } => {
                if self.acquisition != Acquisition::default() {
                    return Err(invalid("acquisition settings do not apply to a sinogram source"));
                }
                let sino = load_sinogram(path)?;
                let reference = reference.as_ref().map(load_image).transpose()?;
                Ok((sino, reference))
            }
        }
    }

    fn accuracy_levels(&self, reference: Option<&Image>) -> Result<Vec<f64>> {
        if let Some(l) = &self.levels {
            return Ok(l.clone());
        }
        if let Some(l) = reference.and_then(Image::levels) {
            return Ok(l.to_vec());
        }
        self.reconstruction.encoding.representable_values()
    }

    pub fn reconstruct(&self, sino: &Sinogram) -> Result<Reconstruction> {
        match self.mode {
            RunMode::MultiStage => multi_stage_reconstruct(sino, &self.reconstruction),
            RunMode::SingleStage => single_stage_reconstruct(sino, &self.reconstruction),
            RunMode::SparseView => sparse_view_reconstruct(sino, &self.reconstruction),
        }
    }
}

/// Files written by [`execute`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub image: PathBuf,
    pub preview: PathBuf,
    pub ledger: PathBuf,
    pub report: PathBuf,
    pub difference: Option<PathBuf>,
    pub summary: ReconReport,
}

/// Runs the manifest and writes `image.txt`, `image.pgm`, `ledger.csv`,
/// `report.json` and, with a reference, `difference.pgm` into `out_dir`.
pub fn execute(manifest: &Manifest) -> Result<RunOutputs> {
    let out_dir = manifest
        .out_dir
        .clone()
        .ok_or_else(|| invalid("no output directory in the manifest or on the command line"))?;
    let start = Instant::now();
    let (sino, reference) = manifest.measurement()?;
    manifest.reconstruction.validate_for(sino.geometry())?;
    let levels = manifest.accuracy_levels(reference.as_ref())?;
    let recon = manifest.reconstruct(&sino)?;
    let wall = if manifest.reconstruction.record_runtime { start.elapsed().as_secs_f64() } else { 0.0 };
    let summary = ReconReport::new(&recon, reference.as_ref(), &levels, wall)?;

    fs::create_dir_all(&out_dir)?;
    let out = RunOutputs {
        image: out_dir.join("image.txt"),
        preview: out_dir.join("image.pgm"),
        ledger: out_dir.join("ledger.csv"),
        report: out_dir.join("report.json"),
        difference: reference.as_ref().map(|_| out_dir.join("difference.pgm")),
        summary,
    };
    save_image(&recon.image, &out.image)?;
    save_pgm(&recon.image, &out.preview, PgmEncoding::Raw)?;
    fs::write(&out.ledger, render_gap_table(&recon.ledger)?)?;
    fs::write(&out.report, out.summary.to_json()?)?;
    if let (Some(r), Some(p)) = (&reference, &out.difference) {
        save_difference_pgm(&recon.image, r, p)?;
    }
    Ok(out)
}
