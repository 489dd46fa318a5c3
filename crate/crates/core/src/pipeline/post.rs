use crate::error::{invalid, Result};
use crate::image::Image;
use crate::projector::Sinogram;

/// Guard for the relative error of an all-zero target.
pub const CONVERGENCE_EPS: f64 = 1e-12;

fn nearest_level(v: f64, levels: &[f64]) -> f64 {
    levels
        .iter()
        .copied()
        .min_by(|a, b| (a - v).abs().total_cmp(&(b - v).abs()).then(a.total_cmp(b)))
        .unwrap_or(v)
}

/// Replaces isolated pixels: an interior pixel whose four neighbours share
/// one level that differs from its own takes that level. Neighbours that are
/// themselves isolated do not count as a surrounding region, so patterns
/// such as a checkerboard are left alone. Values are compared after snapping
/// to the nearest of `levels`.
pub fn hole_fill(image: &Image, levels: &[f64]) -> Result<Image> {
    if levels.is_empty() {
        return Err(invalid("hole filling needs a declared level set"));
    }
    let (h, w) = (image.height(), image.width());
    let q: Vec<f64> = image.values().iter().map(|&v| nearest_level(v, levels)).collect();
    let neighbours = |r: usize, c: usize| {
        [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)]
            .into_iter()
            .filter(|&(rr, cc)| rr < h && cc < w)
    };
    let isolated = |r: usize, c: usize| neighbours(r, c).all(|(rr, cc)| q[rr * w + cc] != q[r * w + c]);
    let mut out = image.clone();
    for r in 1..h.saturating_sub(1) {
        for c in 1..w.saturating_sub(1) {
            let n = q[(r - 1) * w + c];
            let surrounded = neighbours(r, c).all(|(rr, cc)| q[rr * w + cc] == n && !isolated(rr, cc));
            if surrounded && q[r * w + c] != n {
                out.set(r, c, n);
            }
        }
    }
    Ok(out)
}

/// `|gen - target|_2 / max(|target|_2, eps) <= tol`.
pub fn convergence_check(generated: &Sinogram, target: &Sinogram, tol: f64) -> Result<bool> {
    Ok(relative_rmse(generated, target)? <= tol)
}

pub fn relative_rmse(generated: &Sinogram, target: &Sinogram) -> Result<f64> {
    let (g, t) = (generated.geometry(), target.geometry());
    if g.n_angles() != t.n_angles() || g.detectors() != t.detectors() {
        return Err(invalid(format!(
            "sinogram shapes differ: {}x{} vs {}x{}",
            g.n_angles(),
            g.detectors(),
            t.n_angles(),
            t.detectors()
        )));
    }
    let diff: f64 = generated
        .values()
        .iter()
        .zip(target.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / target.norm().max(CONVERGENCE_EPS))
}
