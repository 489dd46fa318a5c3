use std::collections::HashMap;

use super::{QuboProblem, VarSlot, PRUNE_THRESHOLD};
use crate::encoding::EncodingSpec;
use crate::error::{invalid, Error, Result};
use crate::image::{Image, Region};
use crate::par;
use crate::projector::{region_contribution, Geometry, Projector, Sinogram};

const OUTSIDE: u32 = u32::MAX;

/// Pixel-level normal equations for one angle: `G = A^T A` pairs keyed by
/// `lo * n + hi` and `h = A^T D`.
struct AngleTerms {
    gram: Vec<(u64, f64)>,
    linear: Vec<f64>,
}

pub fn build_region_qubo(
    fixed_image: &Image,
    region: &Region,
    target_sino: &Sinogram,
    geometry: &Geometry,
    encoding: &EncodingSpec,
) -> Result<QuboProblem> {
    build_region_qubo_with(&Projector::new(geometry), fixed_image, region, target_sino, encoding)
}

/// As [`build_region_qubo`], reusing a cached projector.
///
/// The target is taken to be expressed at the natural scale of its own
/// geometry (a downscaled sinogram already carries its `1/d` correction), so
/// the projection of the fixed pixels is labelled with the target's path
/// scale before the two are subtracted.
pub fn build_region_qubo_with(
    projector: &Projector,
    fixed_image: &Image,
    region: &Region,
    target_sino: &Sinogram,
    encoding: &EncodingSpec,
) -> Result<QuboProblem> {
    let geometry = projector.geometry();
    if target_sino.geometry() != geometry {
        return Err(invalid("target sinogram geometry differs from the projector geometry"));
    }
    let n = geometry.image_size();
    region.check_inside(n, n)?;
    let basis = encoding.basis()?;
    if basis.n_vars() == 0 {
        return Err(Error::Degenerate("encoding has no free bits".into()));
    }

    let masked = projector
        .zero_masked(fixed_image, region)?
        .with_path_scale(target_sino.path_scale())?;
    let diff = region_contribution(target_sino, &masked)?;

    let n_px = region.len();
    let mut local = vec![OUTSIDE; n * n];
    for (l, (r, c)) in region.pixels().enumerate() {
        local[r * n + c] = l as u32;
    }

    // subtract the projection of the constant per-pixel offset
    let det = geometry.detectors();
    let adjusted: Vec<f64> = if basis.offset != 0.0 {
        (0..geometry.n_rays())
            .map(|ray| {
                let cover: f64 = projector
                    .ray(ray / det, ray % det)
                    .filter(|(p, _)| local[*p] != OUTSIDE)
                    .map(|(_, w)| w)
                    .sum();
                diff.values()[ray] - basis.offset * cover
            })
            .collect()
    } else {
        diff.values().to_vec()
    };
    let target_min = -adjusted.iter().map(|v| v * v).sum::<f64>();

    let per_angle = par::map_range(geometry.n_angles(), |a| {
        let mut gram: HashMap<u64, f64> = HashMap::new();
        let mut linear = vec![0.0; n_px];
        let mut hits: Vec<(u32, f64)> = Vec::new();
        for s in 0..det {
            hits.clear();
            hits.extend(
                projector
                    .ray(a, s)
                    .filter(|(p, _)| local[*p] != OUTSIDE)
                    .map(|(p, w)| (local[p], w)),
            );
            if hits.is_empty() {
                continue;
            }
            hits.sort_by_key(|h| h.0);
            let d = adjusted[a * det + s];
            for (k, &(li, ci)) in hits.iter().enumerate() {
                linear[li as usize] += ci * d;
                for &(lj, cj) in &hits[k..] {
                    *gram.entry(li as u64 * n_px as u64 + lj as u64).or_insert(0.0) += ci * cj;
                }
            }
        }
        let mut gram: Vec<(u64, f64)> = gram.into_iter().collect();
        gram.sort_unstable_by_key(|g| g.0);
        AngleTerms { gram, linear }
    });

    // fixed angle order keeps the floating-point sums worker-independent
    let mut gram: HashMap<u64, f64> = HashMap::new();
    let mut linear = vec![0.0; n_px];
    for terms in &per_angle {
        for &(k, v) in &terms.gram {
            *gram.entry(k).or_insert(0.0) += v;
        }
        for (acc, v) in linear.iter_mut().zip(&terms.linear) {
            *acc += v;
        }
    }
    drop(per_angle);

    if !gram.iter().any(|(k, v)| k / n_px as u64 == k % n_px as u64 && *v > 0.0) {
        return Err(Error::Degenerate(format!("no ray crosses region {region:?}")));
    }

    let bits = basis.n_vars();
    let w = &basis.weights;
    let var = |l: u64, b: usize| (l as usize * bits + b) as u32;
    let mut entries: Vec<(u32, u32, f64)> = Vec::with_capacity(gram.len() * bits * bits);
    let mut push = |i: u32, j: u32, c: f64| {
        if c.abs() >= PRUNE_THRESHOLD {
            entries.push((i, j, c));
        }
    };
    for (&key, &g) in &gram {
        let (lo, hi) = (key / n_px as u64, key % n_px as u64);
        if lo == hi {
            for b in 0..bits {
                push(var(lo, b), var(lo, b), w[b] * w[b] * g - 2.0 * w[b] * linear[lo as usize]);
                for b2 in b + 1..bits {
                    push(var(lo, b), var(lo, b2), 2.0 * w[b] * w[b2] * g);
                }
            }
        } else {
            for b in 0..bits {
                for b2 in 0..bits {
                    push(var(lo, b), var(hi, b2), 2.0 * w[b] * w[b2] * g);
                }
            }
        }
    }
    entries.sort_unstable_by_key(|e| (e.0, e.1));

    let var_map = region
        .pixels()
        .flat_map(|(r, c)| {
            (0..bits).map(move |bit| VarSlot { row: r - region.row0, col: c - region.col0, bit })
        })
        .collect();
    Ok(QuboProblem::from_parts(n_px * bits, entries, var_map, Some(*region), Some(target_min)))
}

/// Variable bits reproducing the region's current pixels, if every pixel is
/// representable by the encoding.
pub fn encode_region(image: &Image, region: &Region, encoding: &EncodingSpec) -> Result<Option<Vec<u8>>> {
    region.check_inside(image.height(), image.width())?;
    let mut out = Vec::with_capacity(region.len() * encoding.basis()?.n_vars());
    for (r, c) in region.pixels() {
        match encoding.encode(image.get(r, c))? {
            Some(bits) => out.extend(bits),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}
