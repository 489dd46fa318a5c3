use std::time::Instant;

use super::SolveResult;
use crate::error::{invalid, Result};
use crate::qubo::{energy_unchecked, QuboProblem};

/// Single-bit-flip descent: sweeps the variables in order, taking every flip
/// that lowers the energy, until a full sweep makes no move. The result is
/// 1-flip locally optimal and never worse than the input.
pub fn polish_greedy(problem: &QuboProblem, bits: &[u8]) -> Result<SolveResult> {
    let n = problem.n_vars();
    if bits.len() != n || bits.iter().any(|&b| b > 1) {
        return Err(invalid(format!("start state must be {n} bits of 0 or 1")));
    }
    let start = Instant::now();
    let adj = problem.adjacency();
    let threshold = 1e-12 * (1.0 + problem.coefficient_scale());
    let mut x = bits.to_vec();
    let mut fields = adj.fields(&x);
    loop {
        let mut moved = false;
        for v in 0..n {
            if adj.flip_delta(v, x[v], fields[v]) < -threshold {
                adj.apply_flip(v, &mut x, &mut fields);
                moved = true;
            }
        }
        if !moved {
            break;
        }
        fields = adj.fields(&x);
    }
    let before = energy_unchecked(problem, bits);
    let after = energy_unchecked(problem, &x);
    let (bits, energy) = if after <= before { (x, after) } else { (bits.to_vec(), before) };
    Ok(SolveResult {
        bits,
        energy,
        solver_id: "polish".into(),
        seed: None,
        runtime_s: start.elapsed().as_secs_f64(),
    })
}
