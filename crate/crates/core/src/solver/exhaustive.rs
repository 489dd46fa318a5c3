use std::time::Instant;

use super::{candidate_order, tie_tolerance, SolveResult};
use crate::error::{Error, Result};
use crate::par;
use crate::qubo::{energy_unchecked, Adjacency, QuboProblem};

/// Largest problem the exhaustive search accepts.
pub const EXHAUSTIVE_MAX_VARS: usize = 24;

/// Incremental energies are recomputed from scratch this often.
const RESYNC_EVERY: u64 = 4096;
/// Near-optimal states kept per chunk for exact re-evaluation.
const MAX_CANDIDATES: usize = 256;

/// Enumerates all `2^n` assignments in Gray-code order.
pub fn solve_exhaustive(problem: &QuboProblem) -> Result<SolveResult> {
    let n = problem.n_vars();
    if n > EXHAUSTIVE_MAX_VARS {
        return Err(Error::Capacity(format!(
            "exhaustive search is limited to {EXHAUSTIVE_MAX_VARS} variables, problem has {n}"
        )));
    }
    let start = Instant::now();
    let adj = problem.adjacency();
    let tol = tie_tolerance(problem);
    // scan slack for the incremental energies, well above their drift
    let slack = 1e-9 * (1.0 + problem.coefficient_scale());

    let top = if n > 14 { 8.min(n) } else { 0 };
    let low = n - top;
    let chunks = par::map_range(1usize << top, |chunk| scan_chunk(problem, &adj, chunk, low, slack, tol));

    let mut best: Option<(f64, Vec<u8>)> = None;
    for bits in chunks.into_iter().flatten() {
        let e = energy_unchecked(problem, &bits);
        let better = match &best {
            None => true,
            Some((be, bb)) => candidate_order((e, &bits), (*be, bb), tol).is_lt(),
        };
        if better {
            best = Some((e, bits));
        }
    }
    let (energy, bits) = best.expect("at least one assignment");
    Ok(SolveResult {
        bits,
        energy,
        solver_id: "exhaustive".into(),
        seed: None,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

/// Scans all states whose top bits equal `chunk`, returning those within
/// `slack` of the chunk's best incremental energy.
fn scan_chunk(
    problem: &QuboProblem,
    adj: &Adjacency,
    chunk: usize,
    low: usize,
    slack: f64,
    tol: f64,
) -> Vec<Vec<u8>> {
    let n = problem.n_vars();
    let mut bits = vec![0u8; n];
    for (k, b) in bits[low..].iter_mut().enumerate() {
        *b = ((chunk >> k) & 1) as u8;
    }
    let mut fields = adj.fields(&bits);
    let mut e = energy_unchecked(problem, &bits);
    let mut best_e = e;
    let mut cands: Vec<Vec<u8>> = vec![bits.clone()];

    let steps: u64 = 1u64 << low;
    for k in 1..steps {
        let v = k.trailing_zeros() as usize;
        e += adj.flip_delta(v, bits[v], fields[v]);
        adj.apply_flip(v, &mut bits, &mut fields);
        if k % RESYNC_EVERY == 0 {
            e = energy_unchecked(problem, &bits);
            fields = adj.fields(&bits);
        }
        if e < best_e - slack {
            best_e = e;
            cands.retain(|_| false);
            cands.push(bits.clone());
        } else if e <= best_e + slack {
            if e < best_e {
                best_e = e;
            }
            cands.push(bits.clone());
            if cands.len() > 2 * MAX_CANDIDATES {
                prune(problem, &mut cands, tol);
            }
        }
    }
    cands
}

/// Keeps the exact-energy ties, lexicographically smallest first.
fn prune(problem: &QuboProblem, cands: &mut Vec<Vec<u8>>, tol: f64) {
    let energies: Vec<f64> = cands.iter().map(|b| energy_unchecked(problem, b)).collect();
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut kept: Vec<Vec<u8>> = cands
        .drain(..)
        .zip(energies)
        .filter(|(_, e)| *e <= min + tol)
        .map(|(b, _)| b)
        .collect();
    kept.sort();
    kept.truncate(MAX_CANDIDATES);
    *cands = kept;
}
