//! Sinogram downscaling with path-length correction, image interpolation,
//! and Gaussian smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::image::Image;
use crate::projector::{Geometry, Sinogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    Max,
    Min,
}

impl Aggregate {
    fn apply(self, vals: impl Iterator<Item = f64>) -> f64 {
        match self {
            Aggregate::Mean => {
                let (sum, n) = vals.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                sum / n as f64
            }
            Aggregate::Max => vals.fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Min => vals.fold(f64::INFINITY, f64::min),
        }
    }
}

/// How a group of `d1` consecutive angles collapses to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AngleMode {
    /// Aggregate the whole `d1 x d2` patch and label it with the last
    /// (highest) angle of the group.
    #[default]
    PickSecond,
    /// Average the `d1` projections, aggregate along the detector axis, and
    /// label the result with the mean angle.
    MeanProjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownscaleSpec {
    pub d1: usize,
    pub d2: usize,
    #[serde(default)]
    pub aggregate: Aggregate,
    #[serde(default)]
    pub angle_mode: AngleMode,
}

impl DownscaleSpec {
    pub fn new(d1: usize, d2: usize, aggregate: Aggregate, angle_mode: AngleMode) -> Self {
        Self { d1, d2, aggregate, angle_mode }
    }

    pub fn validate_for(&self, geometry: &Geometry) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 {
            return Err(invalid("downscale factors must be at least 1"));
        }
        if !geometry.n_angles().is_multiple_of(self.d1) {
            return Err(invalid(format!(
                "{} angles not divisible by d1 = {}",
                geometry.n_angles(),
                self.d1
            )));
        }
        if !geometry.detectors().is_multiple_of(self.d2) {
            return Err(invalid(format!(
                "{} detectors not divisible by d2 = {}",
                geometry.detectors(),
                self.d2
            )));
        }
        if !geometry.image_size().is_multiple_of(self.d2) {
            return Err(invalid(format!(
                "image size {} not divisible by d2 = {}",
                geometry.image_size(),
                self.d2
            )));
        }
        Ok(())
    }
}

/// Block-reduces `d1 x d2` patches and multiplies by `1/d2`.
///
/// Detector groups tile the axis exactly, so with an exact divisor the
/// grouping is symmetric about the rotation axis.
pub fn downscale_full_view(sino: &Sinogram, spec: &DownscaleSpec) -> Result<Sinogram> {
    let g = sino.geometry();
    spec.validate_for(g)?;
    let (d1, d2) = (spec.d1, spec.d2);
    let n_out = g.n_angles() / d1;
    let m_out = g.detectors() / d2;
    let correction = 1.0 / d2 as f64;

    let mut angles = Vec::with_capacity(n_out);
    let mut values = Vec::with_capacity(n_out * m_out);
    for a in 0..n_out {
        let group = a * d1..(a + 1) * d1;
        match spec.angle_mode {
            AngleMode::PickSecond => {
                angles.push(g.angles()[group.end - 1]);
                for b in 0..m_out {
                    let patch = group
                        .clone()
                        .flat_map(|aa| (b * d2..(b + 1) * d2).map(move |s| sino.get(aa, s)));
                    values.push(spec.aggregate.apply(patch) * correction);
                }
            }
            AngleMode::MeanProjection => {
                angles.push(g.angles()[group.clone()].iter().sum::<f64>() / d1 as f64);
                for b in 0..m_out {
                    let bins = (b * d2..(b + 1) * d2)
                        .map(|s| group.clone().map(|aa| sino.get(aa, s)).sum::<f64>() / d1 as f64);
                    values.push(spec.aggregate.apply(bins) * correction);
                }
            }
        }
    }
    let geometry = Geometry::new(g.image_size() / d2, angles, m_out)?;
    Sinogram::new(geometry, values, sino.path_scale() * correction)
}

/// Detector-axis-only reduction; the angle list is kept as is.
pub fn downscale_sparse_view(sino: &Sinogram, d: usize, aggregate: Aggregate) -> Result<Sinogram> {
    downscale_full_view(sino, &DownscaleSpec::new(1, d, aggregate, AngleMode::PickSecond))
}

/// Averages non-overlapping `d x d` pixel blocks.
pub fn block_mean_image(image: &Image, d: usize) -> Result<Image> {
    if d == 0 || !image.height().is_multiple_of(d) || !image.width().is_multiple_of(d) {
        return Err(invalid(format!(
            "{}x{} image cannot be split into {d}x{d} blocks",
            image.height(),
            image.width()
        )));
    }
    let (h, w) = (image.height() / d, image.width() / d);
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let mut s = 0.0;
            for rr in r * d..(r + 1) * d {
                for cc in c * d..(c + 1) * d {
                    s += image.get(rr, cc);
                }
            }
            out.push(s / (d * d) as f64);
        }
    }
    Image::new(h, w, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
    Bicubic,
}

/// Source coordinate of destination index `i` under pixel-centre alignment.
fn source_coord(i: usize, n_src: usize, n_dst: usize) -> f64 {
    (i as f64 + 0.5) * n_src as f64 / n_dst as f64 - 0.5
}

fn cubic_weight(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Per-axis interpolation taps: `(source index, weight)` for every output
/// index.
fn taps(n_src: usize, n_dst: usize, method: Interpolation) -> Vec<Vec<(usize, f64)>> {
    let last = n_src as isize - 1;
    let clamp = |i: isize| i.clamp(0, last) as usize;
    (0..n_dst)
        .map(|i| {
            let x = source_coord(i, n_src, n_dst);
            match method {
                Interpolation::Nearest => {
                    let k = ((i as f64 + 0.5) * n_src as f64 / n_dst as f64).floor() as isize;
                    vec![(clamp(k), 1.0)]
                }
                Interpolation::Bilinear => {
                    let x = x.clamp(0.0, last as f64);
                    let i0 = x.floor() as isize;
                    let t = x - i0 as f64;
                    vec![(clamp(i0), 1.0 - t), (clamp(i0 + 1), t)]
                }
                Interpolation::Bicubic => {
                    let i0 = x.floor() as isize;
                    let t = x - i0 as f64;
                    (-1..=2).map(|k| (clamp(i0 + k), cubic_weight(t - k as f64))).collect()
                }
            }
        })
        .collect()
}

/// Resizes a square image to `target_size x target_size`. The result carries
/// real values and no level declaration; bicubic overshoot below zero is
/// clipped.
pub fn upscale_image(image: &Image, target_size: usize, method: Interpolation) -> Result<Image> {
    if !image.is_square() || image.is_empty() {
        return Err(invalid("upscaling needs a non-empty square image"));
    }
    let n = image.height();
    if target_size < n {
        return Err(invalid(format!("target size {target_size} is smaller than source {n}")));
    }
    let t = taps(n, target_size, method);
    // rows first, then columns
    let mut tmp = vec![0.0; n * target_size];
    for r in 0..n {
        for (c, tap) in t.iter().enumerate() {
            tmp[r * target_size + c] = tap.iter().map(|&(k, w)| w * image.get(r, k)).sum();
        }
    }
    let mut out = vec![0.0; target_size * target_size];
    for (r, tap) in t.iter().enumerate() {
        for c in 0..target_size {
            let v: f64 = tap.iter().map(|&(k, w)| w * tmp[k * target_size + c]).sum();
            out[r * target_size + c] = v.max(0.0);
        }
    }
    Image::new(target_size, target_size, out)
}

/// Normalised 1-D Gaussian taps on `[-r, r]`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid(format!("sigma {sigma} must be positive")));
    }
    let r = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-r..=r).map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Separable Gaussian blur with reflective borders.
pub fn gaussian_filter(image: &Image, sigma: f64) -> Result<Image> {
    let k = gaussian_kernel(sigma)?;
    let r = (k.len() / 2) as isize;
    let (h, w) = (image.height(), image.width());
    let mut tmp = vec![0.0; h * w];
    for row in 0..h {
        for col in 0..w {
            tmp[row * w + col] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * image.get(row, reflect(col as isize + t as isize - r, w)))
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for row in 0..h {
        for col in 0..w {
            out[row * w + col] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * tmp[reflect(row as isize + t as isize - r, h) * w + col])
                .sum::<f64>()
                .max(0.0);
        }
    }
    Image::new(h, w, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_shepp_logan, PhantomMode};
    use crate::projector::{radon, uniform_angles};

    fn sino(n_angles: usize, det: usize, vals: Vec<f64>) -> Sinogram {
        Sinogram::new(Geometry::new(det, uniform_angles(n_angles), det).unwrap(), vals, 1.0).unwrap()
    }

    #[test]
    fn hundred_square_halves_with_half_path_scale() {
        let s = sino(100, 100, (0..10_000).map(|i| (i % 37) as f64).collect());
        let out = downscale_full_view(&s, &DownscaleSpec::new(2, 2, Aggregate::Mean, AngleMode::PickSecond)).unwrap();
        assert_eq!(out.geometry().n_angles(), 50);
        assert_eq!(out.geometry().detectors(), 50);
        assert_eq!(out.geometry().image_size(), 50);
        assert_eq!(out.path_scale(), 0.5);
        // the higher angle of each pair survives: 1.8, 5.4, ...
        assert!((out.geometry().angles()[0] - 1.8).abs() < 1e-12);
        assert!((out.geometry().angles()[49] - 178.2).abs() < 1e-9);
    }

    #[test]
    fn identity_spec_is_identity() {
        let s = sino(6, 4, (0..24).map(f64::from).collect());
        let out = downscale_full_view(&s, &DownscaleSpec::new(1, 1, Aggregate::Max, AngleMode::PickSecond)).unwrap();
        assert_eq!(out, s);
        assert_eq!(downscale_sparse_view(&s, 1, Aggregate::Mean).unwrap(), s);
    }

    #[test]
    fn detector_pairs_by_hand() {
        #[rustfmt::skip]
        let vals = vec![
            1.0, 3.0, 5.0, 9.0,
            2.0, 2.0, 0.0, 4.0,
            7.0, 1.0, 6.0, 6.0,
            0.5, 1.5, 8.0, 2.0,
        ];
        let s = sino(4, 4, vals.clone());
        let out = downscale_full_view(&s, &DownscaleSpec::new(1, 2, Aggregate::Mean, AngleMode::PickSecond)).unwrap();
        for a in 0..4 {
            for b in 0..2 {
                let (x, y) = (vals[a * 4 + 2 * b], vals[a * 4 + 2 * b + 1]);
                assert_eq!(out.get(a, b), (x + y) / 2.0 * 0.5);
            }
        }
        let mx = downscale_full_view(&s, &DownscaleSpec::new(2, 2, Aggregate::Max, AngleMode::PickSecond)).unwrap();
        assert_eq!(mx.values(), &[3.0 * 0.5, 9.0 * 0.5, 7.0 * 0.5, 8.0 * 0.5]);
        let mn = downscale_full_view(&s, &DownscaleSpec::new(2, 2, Aggregate::Min, AngleMode::MeanProjection)).unwrap();
        // mean of the two angles first, then the minimum across the bin pair
        assert_eq!(mn.values(), &[1.5 * 0.5, 2.5 * 0.5, 1.25 * 0.5, 4.0 * 0.5]);
        assert_eq!(mn.geometry().angles(), &[22.5, 112.5]);
    }

    #[test]
    fn non_divisible_axes_are_rejected() {
        let s = sino(6, 4, vec![0.0; 24]);
        assert!(downscale_full_view(&s, &DownscaleSpec::new(4, 1, Aggregate::Mean, AngleMode::PickSecond)).is_err());
        assert!(downscale_full_view(&s, &DownscaleSpec::new(1, 3, Aggregate::Mean, AngleMode::PickSecond)).is_err());
        assert!(downscale_full_view(&s, &DownscaleSpec::new(0, 1, Aggregate::Mean, AngleMode::PickSecond)).is_err());
        assert!(downscale_sparse_view(&s, 3, Aggregate::Mean).is_err());
    }

    #[test]
    fn sparse_view_keeps_angles() {
        let angles: Vec<f64> = (0..50).map(|k| k as f64 * 3.6).collect();
        let g = Geometry::new(100, angles.clone(), 100).unwrap();
        let s = Sinogram::new(g, vec![4.0; 5000], 1.0).unwrap();
        let out = downscale_sparse_view(&s, 2, Aggregate::Mean).unwrap();
        assert_eq!(out.geometry().angles(), &angles[..]);
        assert_eq!(out.geometry().detectors(), 50);
        assert_eq!(out.path_scale(), 0.5);
        assert!(out.values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn mean_outputs_stay_within_patch_bounds() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..12 * 12).map(|_| rng.gen_range(0.0..10.0)).collect();
        let s = sino(12, 12, vals);
        let spec = DownscaleSpec::new(3, 4, Aggregate::Mean, AngleMode::PickSecond);
        let out = downscale_full_view(&s, &spec).unwrap();
        for a in 0..4 {
            for b in 0..3 {
                let patch: Vec<f64> = (a * 3..a * 3 + 3)
                    .flat_map(|aa| (b * 4..b * 4 + 4).map(move |ss| (aa, ss)))
                    .map(|(aa, ss)| s.get(aa, ss))
                    .collect();
                let lo = patch.iter().cloned().fold(f64::INFINITY, f64::min) * 0.25;
                let hi = patch.iter().cloned().fold(f64::NEG_INFINITY, f64::max) * 0.25;
                let v = out.get(a, b);
                assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
        assert_eq!(out.path_scale(), 0.25);
        let twice = downscale_sparse_view(&out, 3, Aggregate::Mean).unwrap();
        assert!((twice.path_scale() - 0.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_replicates_blocks() {
        let img = Image::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let up = upscale_image(&img, 4, Interpolation::Nearest).unwrap();
        #[rustfmt::skip]
        let want = [
            1.0, 1.0, 2.0, 2.0,
            1.0, 1.0, 2.0, 2.0,
            3.0, 3.0, 4.0, 4.0,
            3.0, 3.0, 4.0, 4.0,
        ];
        assert_eq!(up.values(), &want);
        assert!(up.levels().is_none());
    }

    #[test]
    fn constants_survive_every_method() {
        let img = Image::new(5, 5, vec![2.5; 25]).unwrap();
        for m in [Interpolation::Nearest, Interpolation::Bilinear, Interpolation::Bicubic] {
            for t in [5, 7, 10, 15] {
                let up = upscale_image(&img, t, m).unwrap();
                assert!(up.values().iter().all(|v| (v - 2.5).abs() < 1e-12), "{m:?} {t}");
            }
        }
        assert!(upscale_image(&img, 4, Interpolation::Nearest).is_err());
    }

    /// 1-D linear interpolation with pixel-centre alignment and edge clamping.
    fn lerp_1d(src: &[f64], n_dst: usize) -> Vec<f64> {
        let n = src.len();
        (0..n_dst)
            .map(|i| {
                let x = ((i as f64 + 0.5) * n as f64 / n_dst as f64 - 0.5).clamp(0.0, (n - 1) as f64);
                let lo = x.floor() as usize;
                let hi = (lo + 1).min(n - 1);
                src[lo] + (x - lo as f64) * (src[hi] - src[lo])
            })
            .collect()
    }

    #[test]
    fn bilinear_matches_separable_oracle() {
        let img = generate_shepp_logan(16, PhantomMode::IntegerLevels(4)).unwrap();
        let up = upscale_image(&img, 32, Interpolation::Bilinear).unwrap();
        let rows: Vec<Vec<f64>> = img.values().chunks(16).map(|r| lerp_1d(r, 32)).collect();
        for c in 0..32 {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let want = lerp_1d(&col, 32);
            for (r, w) in want.iter().enumerate() {
                assert!((up.get(r, c) - w).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gaussian_preserves_constants_and_mass() {
        let flat = Image::new(6, 7, vec![3.0; 42]).unwrap();
        let out = gaussian_filter(&flat, 1.3).unwrap();
        assert!(out.values().iter().all(|v| (v - 3.0).abs() < 1e-12));

        let mut blob = Image::zeros(21, 21);
        blob.set(10, 10, 5.0);
        blob.set(9, 11, 2.0);
        let out = gaussian_filter(&blob, 1.0).unwrap();
        assert!((out.sum() - blob.sum()).abs() <= 1e-6 * blob.sum());
        assert!(gaussian_filter(&blob, 0.0).is_err());
        assert!(gaussian_filter(&blob, -1.0).is_err());
    }

    #[test]
    fn impulse_response_is_outer_product_of_kernel() {
        // explicit sigma = 1 taps on [-3, 3]
        let raw: Vec<f64> = (-3i32..=3).map(|x| (-(x * x) as f64 / 2.0).exp()).collect();
        let total: f64 = raw.iter().sum();
        let k: Vec<f64> = raw.iter().map(|v| v / total).collect();
        assert!((k[3] - 0.399_050_279_652_450_3).abs() < 1e-12);

        let mut img = Image::zeros(9, 9);
        img.set(4, 4, 1.0);
        let out = gaussian_filter(&img, 1.0).unwrap();
        assert!((out.get(4, 4) - k[3] * k[3]).abs() < 1e-15);
        assert!((out.get(4, 6) - k[3] * k[5]).abs() < 1e-15);
        assert!((out.get(2, 7) - k[1] * k[6]).abs() < 1e-15);
    }

    #[test]
    fn path_correction_tracks_projection_of_downscaled_disk() {
        let n = 64;
        let r2 = (0.35 * n as f64).powi(2);
        let vals = (0..n * n)
            .map(|k| {
                let (y, x) = ((k / n) as f64 - 31.5, (k % n) as f64 - 31.5);
                if x * x + y * y <= r2 { 1.0 } else { 0.0 }
            })
            .collect();
        let img = Image::new(n, n, vals).unwrap();
        let g = Geometry::uniform(n, 64).unwrap();
        let reduced = downscale_full_view(&radon(&img, &g).unwrap(), &DownscaleSpec::new(2, 2, Aggregate::Mean, AngleMode::PickSecond)).unwrap();
        let small = block_mean_image(&img, 2).unwrap();
        let direct = radon(&small, reduced.geometry()).unwrap();
        let err: f64 = direct.values().iter().zip(reduced.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err / direct.norm() < 0.05, "relative rmse {}", err / direct.norm());
    }
}
