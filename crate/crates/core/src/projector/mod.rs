//! Parallel-beam forward projection.
//!
//! Ray weights are exact intersection lengths of the ray through each
//! detector-bin centre with the unit pixels it crosses. A [`Projector`]
//! caches those weights for one [`Geometry`] as a sparse ray-by-pixel
//! matrix; the free functions build a projector on the fly.

mod io;
mod siddon;

pub use io::{load_sinogram, save_sinogram};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::{Image, Region};
use crate::par;

/// Acquisition geometry for a square `image_size x image_size` grid.
///
/// Detector spacing is one pixel width and the detector axis is centred on
/// the rotation axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    image_size: usize,
    angles_deg: Vec<f64>,
    detectors: usize,
}

impl Geometry {
    pub fn new(image_size: usize, angles_deg: Vec<f64>, detectors: usize) -> Result<Self> {
        if image_size == 0 {
            return Err(invalid("image size must be positive"));
        }
        if detectors == 0 {
            return Err(invalid("detector count must be positive"));
        }
        if angles_deg.is_empty() {
            return Err(invalid("geometry needs at least one angle"));
        }
        if let Some(a) = angles_deg.iter().find(|a| !(0.0..180.0).contains(*a)) {
            return Err(invalid(format!("angle {a} outside [0, 180)")));
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("angles must be strictly increasing"));
        }
        Ok(Self { image_size, angles_deg, detectors })
    }

    /// `n_angles` uniform angles on `[0, 180)` and one detector per pixel.
    pub fn uniform(image_size: usize, n_angles: usize) -> Result<Self> {
        Self::new(image_size, uniform_angles(n_angles), image_size)
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn n_angles(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn detectors(&self) -> usize {
        self.detectors
    }

    pub fn n_rays(&self) -> usize {
        self.n_angles() * self.detectors
    }

    pub fn detector_spacing(&self) -> f64 {
        1.0
    }
}

/// Uniform angles `k * 180 / n`, endpoint excluded.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * 180.0 / n as f64).collect()
}

/// Line integrals indexed `(angle, detector)`, row-major.
///
/// `path_scale` records the factor already applied to the values by
/// detector-axis downscaling (1 for a raw projection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    geometry: Geometry,
    values: Vec<f64>,
    path_scale: f64,
}

impl Sinogram {
    pub fn new(geometry: Geometry, values: Vec<f64>, path_scale: f64) -> Result<Self> {
        if values.len() != geometry.n_rays() {
            return Err(invalid(format!(
                "sinogram needs {}x{} values, got {}",
                geometry.n_angles(),
                geometry.detectors(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sinogram values must be finite"));
        }
        if !(path_scale.is_finite() && path_scale > 0.0) {
            return Err(invalid(format!("path scale {path_scale} must be positive")));
        }
        Ok(Self { geometry, values, path_scale })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let n = geometry.n_rays();
        Self { geometry, values: vec![0.0; n], path_scale: 1.0 }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn path_scale(&self) -> f64 {
        self.path_scale
    }

    pub fn get(&self, angle: usize, detector: usize) -> f64 {
        self.values[angle * self.geometry.detectors + detector]
    }

    pub fn row(&self, angle: usize) -> &[f64] {
        let d = self.geometry.detectors;
        &self.values[angle * d..(angle + 1) * d]
    }

    /// Same values relabelled with another path scale.
    pub fn with_path_scale(mut self, path_scale: f64) -> Result<Self> {
        if !(path_scale.is_finite() && path_scale > 0.0) {
            return Err(invalid(format!("path scale {path_scale} must be positive")));
        }
        self.path_scale = path_scale;
        Ok(self)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `D = P - P_z`: the isolated contribution of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceSinogram {
    geometry: Geometry,
    values: Vec<f64>,
}

impl DifferenceSinogram {
    pub fn from_values(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.n_rays() {
            return Err(invalid("difference sinogram shape does not match geometry"));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Sparse system matrix: for every ray, the pixels it crosses and the
/// intersection lengths.
#[derive(Debug, Clone)]
pub struct Projector {
    geometry: Geometry,
    offsets: Vec<usize>,
    pixels: Vec<u32>,
    weights: Vec<f64>,
}

impl Projector {
    pub fn new(geometry: &Geometry) -> Self {
        let n = geometry.image_size;
        let det = geometry.detectors;
        let per_angle = par::map_range(geometry.n_angles(), |a| {
            let angle = geometry.angles_deg[a];
            let mut rays = Vec::with_capacity(det);
            let mut scratch = Vec::new();
            for s in 0..det {
                let mut w = Vec::new();
                siddon::trace(n, angle, siddon::bin_offset(s, det), &mut w, &mut scratch);
                rays.push(w);
            }
            rays
        });
        let mut offsets = Vec::with_capacity(geometry.n_rays() + 1);
        let mut pixels = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0);
        for ray in per_angle.into_iter().flatten() {
            for (p, w) in ray {
                pixels.push(p as u32);
                weights.push(w);
            }
            offsets.push(pixels.len());
        }
        Self { geometry: geometry.clone(), offsets, pixels, weights }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    /// `(pixel_index, weight)` pairs of ray `(angle, detector)`.
    pub fn ray(&self, angle: usize, detector: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.ray_by_index(angle * self.geometry.detectors + detector)
    }

    pub(crate) fn ray_by_index(&self, ray: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[ray]..self.offsets[ray + 1];
        self.pixels[span.clone()]
            .iter()
            .zip(&self.weights[span])
            .map(|(&p, &w)| (p as usize, w))
    }

    fn check_image(&self, image: &Image) -> Result<()> {
        let n = self.geometry.image_size;
        if image.height() != n || image.width() != n {
            return Err(invalid(format!(
                "image is {}x{}, geometry expects {n}x{n}",
                image.height(),
                image.width()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, image: &Image) -> Result<Sinogram> {
        self.check_image(image)?;
        let px = image.values();
        let det = self.geometry.detectors;
        let mut values = vec![0.0; self.geometry.n_rays()];
        par::for_each_chunk_mut(&mut values, det, |a, row| {
            for (s, v) in row.iter_mut().enumerate() {
                *v = self.ray_by_index(a * det + s).map(|(p, w)| w * px[p]).sum();
            }
        });
        Sinogram::new(self.geometry.clone(), values, 1.0)
    }

    pub fn zero_masked(&self, image: &Image, region: &Region) -> Result<Sinogram> {
        self.check_image(image)?;
        region.check_inside(image.height(), image.width())?;
        self.forward(&image.masked(region))
    }
}

/// Intersection lengths of ray `(angle_index, detector_index)` with the
/// pixels it crosses, in traversal order. Pixel index is `row * size + col`.
pub fn ray_weights(geometry: &Geometry, angle_index: usize, detector_index: usize) -> Result<Vec<(usize, f64)>> {
    if angle_index >= geometry.n_angles() || detector_index >= geometry.detectors {
        return Err(invalid(format!(
            "ray ({angle_index}, {detector_index}) outside {}x{} sinogram",
            geometry.n_angles(),
            geometry.detectors
        )));
    }
    let mut out = Vec::new();
    siddon::trace(
        geometry.image_size,
        geometry.angles_deg[angle_index],
        siddon::bin_offset(detector_index, geometry.detectors),
        &mut out,
        &mut Vec::new(),
    );
    Ok(out)
}

pub fn radon(image: &Image, geometry: &Geometry) -> Result<Sinogram> {
    if image.height() != geometry.image_size || image.width() != geometry.image_size {
        return Err(invalid(format!(
            "image is {}x{}, geometry expects {n}x{n}",
            image.height(),
            image.width(),
            n = geometry.image_size
        )));
    }
    Projector::new(geometry).forward(image)
}

/// Projection of `image` with every pixel of `region` set to zero.
pub fn zero_masked_sinogram(image: &Image, region: &Region, geometry: &Geometry) -> Result<Sinogram> {
    region.check_inside(image.height(), image.width())?;
    radon(&image.masked(region), geometry)
}

pub fn region_contribution(full: &Sinogram, masked: &Sinogram) -> Result<DifferenceSinogram> {
    if full.geometry != masked.geometry {
        return Err(invalid("sinograms have different geometries"));
    }
    if full.path_scale != masked.path_scale {
        return Err(invalid(format!(
            "path scales differ ({} vs {})",
            full.path_scale, masked.path_scale
        )));
    }
    let values = full.values.iter().zip(&masked.values).map(|(p, z)| p - z).collect();
    Ok(DifferenceSinogram { geometry: full.geometry.clone(), values })
}
