//! Region QUBOs built from difference sinograms.
//!
//! For a region with encoded variables `x`, the objective is
//! `|A x - D|^2 = x^T Q x - |D|^2`, where `A` maps region bits to sinogram
//! bins and `D = P - P_z`. Linear terms are folded into the diagonal of the
//! upper-triangular `Q` (valid since `x_i^2 = x_i`) and the constant is kept
//! aside as `target_min = -|D|^2`, the energy of an exact fit.

mod build;
mod io;

pub use build::{build_region_qubo, build_region_qubo_with, encode_region};
pub use io::{load_qubo, save_qubo};

use serde::{Deserialize, Serialize};

use crate::encoding::EncodingSpec;
use crate::error::{invalid, Result};
use crate::image::{Image, Region};
use crate::projector::DifferenceSinogram;

/// Coefficients below this magnitude are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// Which region pixel and bit a variable stands for. `row` and `col` are
/// relative to the region origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSlot {
    pub row: usize,
    pub col: usize,
    pub bit: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    n_vars: usize,
    entries: Vec<(u32, u32, f64)>,
    var_map: Vec<VarSlot>,
    region: Option<Region>,
    target_min: Option<f64>,
}

impl QuboProblem {
    /// Builds a problem from `(i, j, coeff)` triples. Lower-triangular pairs
    /// are mirrored, duplicates summed and tiny coefficients dropped.
    pub fn from_entries(n_vars: usize, entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut merged: Vec<(u32, u32, f64)> = Vec::new();
        for (i, j, c) in entries {
            if i >= n_vars || j >= n_vars {
                return Err(invalid(format!("entry ({i}, {j}) outside {n_vars} variables")));
            }
            if !c.is_finite() {
                return Err(invalid(format!("coefficient for ({i}, {j}) is not finite")));
            }
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            merged.push((a as u32, b as u32, c));
        }
        merged.sort_by_key(|x| (x.0, x.1));
        merged.dedup_by(|next, kept| {
            if (next.0, next.1) == (kept.0, kept.1) {
                kept.2 += next.2;
                true
            } else {
                false
            }
        });
        merged.retain(|e| e.2.abs() >= PRUNE_THRESHOLD);
        let var_map = (0..n_vars).map(|v| VarSlot { row: 0, col: v, bit: 0 }).collect();
        Ok(Self { n_vars, entries: merged, var_map, region: None, target_min: None })
    }

    pub(crate) fn from_parts(
        n_vars: usize,
        entries: Vec<(u32, u32, f64)>,
        var_map: Vec<VarSlot>,
        region: Option<Region>,
        target_min: Option<f64>,
    ) -> Self {
        debug_assert!(entries.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1)));
        Self { n_vars, entries, var_map, region, target_min }
    }

    pub fn with_target_min(mut self, target_min: f64) -> Self {
        self.target_min = Some(target_min);
        self
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// Upper-triangular `(i, j, coeff)` entries sorted by `(i, j)`.
    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn var_map(&self) -> &[VarSlot] {
        &self.var_map
    }

    pub fn region(&self) -> Option<Region> {
        self.region
    }

    /// `-sum D^2` for region problems; `None` for hand-built problems.
    pub fn target_min(&self) -> Option<f64> {
        self.target_min
    }

    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i as u32, j as u32) } else { (j as u32, i as u32) };
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    /// Sum of absolute coefficients, a scale for tolerances.
    pub fn coefficient_scale(&self) -> f64 {
        self.entries.iter().map(|e| e.2.abs()).sum()
    }

    /// Diagonal plus symmetric neighbour lists, for local-search solvers.
    pub fn adjacency(&self) -> Adjacency {
        let n = self.n_vars;
        let mut diag = vec![0.0; n];
        let mut degree = vec![0usize; n];
        for &(i, j, _) in &self.entries {
            if i != j {
                degree[i as usize] += 1;
                degree[j as usize] += 1;
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..n].to_vec();
        let mut nbrs = vec![(0u32, 0.0); *offsets.last().unwrap()];
        for &(i, j, c) in &self.entries {
            if i == j {
                diag[i as usize] = c;
            } else {
                nbrs[fill[i as usize]] = (j, c);
                fill[i as usize] += 1;
                nbrs[fill[j as usize]] = (i, c);
                fill[j as usize] += 1;
            }
        }
        Adjacency { diag, offsets, nbrs }
    }
}

/// Compressed symmetric view of a QUBO's couplings.
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub diag: Vec<f64>,
    offsets: Vec<usize>,
    nbrs: Vec<(u32, f64)>,
}

impl Adjacency {
    pub fn neighbors(&self, v: usize) -> &[(u32, f64)] {
        &self.nbrs[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Energy change from flipping `v`, given `field[v] = sum_u Q_uv x_u`.
    #[inline]
    pub fn flip_delta(&self, v: usize, x: u8, field: f64) -> f64 {
        let d = self.diag[v] + field;
        if x == 0 {
            d
        } else {
            -d
        }
    }

    /// Off-diagonal local fields for an assignment.
    pub fn fields(&self, bits: &[u8]) -> Vec<f64> {
        (0..self.diag.len())
            .map(|v| {
                self.neighbors(v)
                    .iter()
                    .filter(|(u, _)| bits[*u as usize] != 0)
                    .map(|(_, c)| c)
                    .sum()
            })
            .collect()
    }

    /// Flips `v` and updates neighbour fields.
    #[inline]
    pub fn apply_flip(&self, v: usize, bits: &mut [u8], fields: &mut [f64]) {
        let sign = if bits[v] == 0 { 1.0 } else { -1.0 };
        bits[v] ^= 1;
        for &(u, c) in self.neighbors(v) {
            fields[u as usize] += sign * c;
        }
    }
}

/// `sum_{i<=j} Q_ij x_i x_j` in stored entry order.
pub fn evaluate_energy(problem: &QuboProblem, bits: &[u8]) -> Result<f64> {
    if bits.len() != problem.n_vars {
        return Err(invalid(format!(
            "assignment has {} bits, problem has {} variables",
            bits.len(),
            problem.n_vars
        )));
    }
    Ok(energy_unchecked(problem, bits))
}

pub(crate) fn energy_unchecked(problem: &QuboProblem, bits: &[u8]) -> f64 {
    problem
        .entries
        .iter()
        .filter(|(i, j, _)| bits[*i as usize] != 0 && bits[*j as usize] != 0)
        .map(|e| e.2)
        .sum()
}

/// `-sum D(theta, s)^2`.
pub fn target_minimum_energy(d: &DifferenceSinogram) -> f64 {
    -d.values().iter().map(|v| v * v).sum::<f64>()
}

/// Writes bits back to region pixel values through the variable map.
pub fn decode_solution(bits: &[u8], problem: &QuboProblem, encoding: &EncodingSpec) -> Result<Image> {
    if bits.len() != problem.n_vars {
        return Err(invalid(format!(
            "assignment has {} bits, problem has {} variables",
            bits.len(),
            problem.n_vars
        )));
    }
    let basis = encoding.basis()?;
    let (h, w) = match problem.region {
        Some(r) => (r.height, r.width),
        None => {
            let cols = problem.var_map.iter().map(|s| s.col + 1).max().unwrap_or(0);
            let rows = problem.var_map.iter().map(|s| s.row + 1).max().unwrap_or(0);
            (rows, cols)
        }
    };
    let mut px_bits = vec![vec![0u8; basis.n_vars()]; h * w];
    for (v, slot) in problem.var_map.iter().enumerate() {
        if slot.bit >= basis.n_vars() || slot.row >= h || slot.col >= w {
            return Err(invalid(format!("variable {v} does not fit the encoding")));
        }
        px_bits[slot.row * w + slot.col][slot.bit] = bits[v];
    }
    Image::new(h, w, px_bits.iter().map(|b| basis.value(b)).collect())
}
