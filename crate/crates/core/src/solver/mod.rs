//! QUBO backends.
//!
//! Every backend returns a [`SolveResult`] whose energy has been recomputed
//! with [`evaluate_energy`](crate::qubo::evaluate_energy). Ties between equal
//! energies go to the lexicographically smallest bitstring (variable 0 first).

mod anneal;
mod exhaustive;
pub mod mock;
mod polish;
mod remote;

pub use anneal::{solve_sa, AnnealParams};
pub use exhaustive::{solve_exhaustive, EXHAUSTIVE_MAX_VARS};
pub use polish::polish_greedy;
pub use remote::{solve_remote, RemoteConfig, ENV_TOKEN, ENV_URL};

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::qubo::QuboProblem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub solver_id: String,
    pub seed: Option<u64>,
    pub runtime_s: f64,
}

/// Energies closer than this are treated as equal when breaking ties.
pub(crate) fn tie_tolerance(problem: &QuboProblem) -> f64 {
    1e-12 * (1.0 + problem.coefficient_scale())
}

/// Orders `(energy, bits)` candidates: lower energy first, then
/// lexicographically smaller bits among energies within `tol`.
pub(crate) fn candidate_order(a: (f64, &[u8]), b: (f64, &[u8]), tol: f64) -> Ordering {
    if (a.0 - b.0).abs() <= tol {
        a.1.cmp(b.1)
    } else {
        a.0.total_cmp(&b.0)
    }
}

/// Backend selection as it appears in run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SolverSpec {
    Exhaustive,
    Sa {
        /// Defaults to `200 * n_vars`.
        #[serde(default)]
        sweeps: Option<usize>,
        #[serde(default = "default_restarts")]
        restarts: usize,
        #[serde(default = "default_beta_min")]
        beta_min: f64,
        #[serde(default = "default_beta_max")]
        beta_max: f64,
        /// Greedy single-flip polish of the annealer's best state.
        #[serde(default = "yes")]
        polish: bool,
    },
    Remote {
        /// Falls back to `QTOMO_SOLVER_URL`.
        #[serde(default)]
        url: Option<String>,
        #[serde(default = "default_time_limit")]
        time_limit_s: f64,
    },
}

fn default_restarts() -> usize {
    8
}
fn default_beta_min() -> f64 {
    0.1
}
fn default_beta_max() -> f64 {
    10.0
}
fn default_time_limit() -> f64 {
    10.0
}
fn yes() -> bool {
    true
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec::sa()
    }
}

impl SolverSpec {
    pub fn sa() -> Self {
        SolverSpec::Sa {
            sweeps: None,
            restarts: default_restarts(),
            beta_min: default_beta_min(),
            beta_max: default_beta_max(),
            polish: true,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::Exhaustive => "exhaustive",
            SolverSpec::Sa { .. } => "sa",
            SolverSpec::Remote { .. } => "remote",
        }
    }

    /// Solves with this backend; `seed` is ignored by deterministic backends.
    pub fn solve(&self, problem: &QuboProblem, seed: u64) -> Result<SolveResult> {
        match self {
            SolverSpec::Exhaustive => solve_exhaustive(problem),
            SolverSpec::Sa { sweeps, restarts, beta_min, beta_max, polish } => {
                let params = AnnealParams {
                    sweeps: sweeps.unwrap_or(200 * problem.n_vars().max(1)),
                    restarts: *restarts,
                    beta_min: *beta_min,
                    beta_max: *beta_max,
                    seed,
                };
                let res = solve_sa(problem, &params)?;
                if *polish {
                    let mut out = polish_greedy(problem, &res.bits)?;
                    out.solver_id = "sa+polish".into();
                    out.seed = Some(seed);
                    out.runtime_s += res.runtime_s;
                    Ok(out)
                } else {
                    Ok(res)
                }
            }
            SolverSpec::Remote { url, time_limit_s } => {
                let mut cfg = RemoteConfig::from_env();
                if let Some(u) = url {
                    cfg.url = u.clone();
                }
                cfg.time_limit_s = *time_limit_s;
                solve_remote(problem, &cfg)
            }
        }
    }
}
