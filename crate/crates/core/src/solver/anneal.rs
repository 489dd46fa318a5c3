use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{candidate_order, tie_tolerance, SolveResult};
use crate::error::{invalid, Result};
use crate::par;
use crate::qubo::{energy_unchecked, Adjacency, QuboProblem};

/// Sweeps between exact recomputations of the running energy.
const RESYNC_SWEEPS: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub sweeps: usize,
    pub restarts: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub seed: u64,
}

impl AnnealParams {
    /// `200 * n_vars` sweeps, 8 restarts, beta from 0.1 to 10.
    pub fn for_problem(problem: &QuboProblem, seed: u64) -> Self {
        Self { sweeps: 200 * problem.n_vars().max(1), restarts: 8, beta_min: 0.1, beta_max: 10.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps == 0 || self.restarts == 0 {
            return Err(invalid("annealing needs at least one sweep and one restart"));
        }
        if !(self.beta_min > 0.0 && self.beta_min < self.beta_max && self.beta_max.is_finite()) {
            return Err(invalid(format!(
                "beta schedule needs 0 < beta_min < beta_max, got {} and {}",
                self.beta_min, self.beta_max
            )));
        }
        Ok(())
    }

    fn beta(&self, sweep: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_max;
        }
        let t = sweep as f64 / (self.sweeps - 1) as f64;
        self.beta_min * (self.beta_max / self.beta_min).powf(t)
    }
}

/// Single-flip Metropolis annealing with a geometric inverse-temperature
/// schedule. Energy changes are divided by the mean coefficient magnitude
/// so one schedule suits problems of any scale. Restart `r` draws from seed
/// `seed + r`; restarts may run on parallel workers and are merged by energy,
/// then bitstring.
pub fn solve_sa(problem: &QuboProblem, params: &AnnealParams) -> Result<SolveResult> {
    params.validate()?;
    let start = Instant::now();
    let n = problem.n_vars();
    let tol = tie_tolerance(problem);
    let entries = problem.entries();
    let scale = entries.iter().map(|e| e.2.abs()).sum::<f64>() / entries.len().max(1) as f64;

    let runs = if n == 0 || scale == 0.0 {
        vec![(0.0, vec![0u8; n])]
    } else {
        let adj = problem.adjacency();
        par::map_range(params.restarts, |r| anneal_once(problem, &adj, params, r as u64, scale, tol))
    };
    let (energy, bits) = runs
        .into_iter()
        .reduce(|best, cand| {
            if candidate_order((cand.0, &cand.1), (best.0, &best.1), tol).is_lt() {
                cand
            } else {
                best
            }
        })
        .expect("at least one restart");
    Ok(SolveResult {
        bits,
        energy,
        solver_id: "sa".into(),
        seed: Some(params.seed),
        runtime_s: start.elapsed().as_secs_f64(),
    })
}

fn anneal_once(
    problem: &QuboProblem,
    adj: &Adjacency,
    params: &AnnealParams,
    restart: u64,
    scale: f64,
    tol: f64,
) -> (f64, Vec<u8>) {
    let n = problem.n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(restart));
    let mut bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut fields = adj.fields(&bits);
    let mut e = energy_unchecked(problem, &bits);

    let zeros = vec![0u8; n];
    let (mut best_e, mut best) = if candidate_order((e, &bits), (0.0, &zeros), tol).is_lt() {
        (e, bits.clone())
    } else {
        (0.0, zeros)
    };

    for sweep in 0..params.sweeps {
        let beta = params.beta(sweep) / scale;
        for v in 0..n {
            let delta = adj.flip_delta(v, bits[v], fields[v]);
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                e += delta;
                adj.apply_flip(v, &mut bits, &mut fields);
            }
        }
        if sweep % RESYNC_SWEEPS == RESYNC_SWEEPS - 1 {
            e = energy_unchecked(problem, &bits);
            fields = adj.fields(&bits);
        }
        if e < best_e - tol {
            let exact = energy_unchecked(problem, &bits);
            if candidate_order((exact, &bits), (best_e, &best), tol).is_lt() {
                best_e = exact;
                best.copy_from_slice(&bits);
            }
            e = exact;
        }
    }
    (energy_unchecked(problem, &best), best)
}
