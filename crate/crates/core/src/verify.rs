//! Self-check suite run by `qtomo verify`.
//!
//! Every check builds region QUBOs from random images whose true pixels are
//! known, so the optimum is known in closed form.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::encoding::EncodingSpec;
use crate::error::{invalid, Error, Result};
use crate::image::{Image, Region};
use crate::pipeline::refine_region;
use crate::projector::{radon, uniform_angles, Geometry};
use crate::qubo::{build_region_qubo, decode_solution, encode_region, evaluate_energy};
use crate::solver::{solve_exhaustive, SolverSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    /// 3x3 regions in 4x4 images.
    Tiny,
    /// 3x3 and 4x4 regions in 8x8 images.
    Small,
}

impl FromStr for VerifyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tiny" => Ok(VerifyLevel::Tiny),
            "small" => Ok(VerifyLevel::Small),
            _ => Err(invalid(format!("unknown verify level {s:?} (expected tiny or small)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

struct Case {
    image: Image,
    region: Region,
    geometry: Geometry,
    encoding: EncodingSpec,
}

fn cases(level: VerifyLevel, encoding: &EncodingSpec, count: usize, seed: u64) -> Result<Vec<Case>> {
    let (size, sides, n_angles) = match level {
        VerifyLevel::Tiny => (4, &[3usize][..], 8),
        VerifyLevel::Small => (8, &[3usize, 4][..], 8),
    };
    let values = encoding.representable_values()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let side = sides[k % sides.len()];
            let px = (0..size * size).map(|_| values[rng.gen_range(0..values.len())]).collect();
            let image = Image::new(size, size, px)?;
            let region = Region::new(rng.gen_range(0..=size - side), rng.gen_range(0..=size - side), side, side);
            let geometry = Geometry::new(size, uniform_angles(n_angles), size)?;
            Ok(Case { image, region, geometry, encoding: encoding.clone() })
        })
        .collect()
}

fn outcome(name: &str, failures: Vec<String>, total: usize) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed: failures.is_empty(),
        detail: match failures.first() {
            None => format!("{total}/{total} cases"),
            Some(f) => format!("{}/{total} cases failed; first: {f}", failures.len()),
        },
    }
}

fn ground_truth_identity(cases: &[Case]) -> Result<CheckOutcome> {
    let mut failures = Vec::new();
    for (k, c) in cases.iter().enumerate() {
        let sino = radon(&c.image, &c.geometry)?;
        let q = build_region_qubo(&c.image, &c.region, &sino, &c.geometry, &c.encoding)?;
        let bits = encode_region(&c.image, &c.region, &c.encoding)?.expect("case values are representable");
        let (e, t) = (evaluate_energy(&q, &bits)?, q.target_min().unwrap_or(f64::NAN));
        let close = (e - t).abs() <= 1e-6 * t.abs().max(1.0);
        if !close {
            failures.push(format!("case {k}: energy {e} vs target {t}"));
        }
    }
    Ok(outcome("ground-truth energy identity", failures, cases.len()))
}

fn exhaustive_equivalence(cases: &[Case]) -> Result<CheckOutcome> {
    let mut failures = Vec::new();
    for (k, c) in cases.iter().enumerate() {
        let sino = radon(&c.image, &c.geometry)?;
        let q = build_region_qubo(&c.image, &c.region, &sino, &c.geometry, &c.encoding)?;
        let t = q.target_min().unwrap_or(f64::NAN);
        let best = solve_exhaustive(&q)?;
        let patch = decode_solution(&best.bits, &q, &c.encoding)?;
        let truth: Vec<f64> = c.region.pixels().map(|(r, col)| c.image.get(r, col)).collect();
        let close = (best.energy - t).abs() <= 1e-9 * t.abs().max(1.0);
        if !close {
            failures.push(format!("case {k}: minimum {} vs target {t}", best.energy));
        } else if patch.values() != truth.as_slice() {
            failures.push(format!("case {k}: argmin does not decode to the true pixels"));
        }
    }
    Ok(outcome("exhaustive minimum equals target", failures, cases.len()))
}

fn annealer_matches_exhaustive(cases: &[Case]) -> Result<CheckOutcome> {
    let mut failures = Vec::new();
    for (k, c) in cases.iter().enumerate() {
        let sino = radon(&c.image, &c.geometry)?;
        let q = build_region_qubo(&c.image, &c.region, &sino, &c.geometry, &c.encoding)?;
        let exact = solve_exhaustive(&q)?;
        let sa = SolverSpec::sa().solve(&q, k as u64)?;
        if sa.energy > exact.energy + 1e-9 * exact.energy.abs().max(1.0) {
            failures.push(format!("case {k}: annealer {} vs exhaustive {}", sa.energy, exact.energy));
        }
    }
    Ok(outcome("annealer reaches the exhaustive minimum", failures, cases.len()))
}

fn locality(cases: &[Case]) -> Result<CheckOutcome> {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (k, c) in cases.iter().enumerate() {
        let sino = radon(&c.image, &c.geometry)?;
        let n = c.image.height();
        let start = Image::new(n, n, (0..n * n).map(|_| rng.gen_range(0.0..2.0)).collect())?;
        let (out, _) = refine_region(&start, &c.region, &sino, &c.encoding, &SolverSpec::Exhaustive, 0)?;
        let moved = (0..n)
            .flat_map(|r| (0..n).map(move |col| (r, col)))
            .any(|(r, col)| !c.region.contains(r, col) && out.get(r, col).to_bits() != start.get(r, col).to_bits());
        if moved {
            failures.push(format!("case {k}: a pixel outside the region changed"));
        }
    }
    Ok(outcome("refinement leaves outside pixels untouched", failures, cases.len()))
}

/// Runs the suite; a returned `Err` means a check could not run at all.
pub fn run_checks(level: VerifyLevel) -> Result<Vec<CheckOutcome>> {
    let count = match level {
        VerifyLevel::Tiny => 10,
        VerifyLevel::Small => 20,
    };
    let binary = cases(level, &EncodingSpec::binary(), count, 1)?;
    let radix = cases(level, &EncodingSpec::Radix2 { bits: 2 }, count / 2, 2)?;
    let all: Vec<&[Case]> = vec![&binary, &radix];
    let mut out = Vec::new();
    for (label, set) in ["binary", "radix2"].iter().zip(all) {
        for check in [ground_truth_identity, exhaustive_equivalence, annealer_matches_exhaustive, locality] {
            let mut o = check(set)?;
            o.name = format!("{} ({label})", o.name);
            out.push(o);
        }
    }
    Ok(out)
}
