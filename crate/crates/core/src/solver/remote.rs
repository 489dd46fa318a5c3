use std::env;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::SolveResult;
use crate::error::{invalid, Error, Result};
use crate::qubo::{evaluate_energy, QuboProblem};

pub const ENV_URL: &str = "QTOMO_SOLVER_URL";
pub const ENV_TOKEN: &str = "QTOMO_SOLVER_TOKEN";

/// Endpoint settings for a service speaking the JSON `/solve` protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{url}/solve`.
    pub url: String,
    pub token: Option<String>,
    /// Forwarded to the service as its solve budget.
    pub time_limit_s: f64,
    /// Added to the time limit for the HTTP read timeout.
    pub grace_s: f64,
    pub attempts: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff: Duration,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            token: None,
            time_limit_s: 10.0,
            grace_s: 30.0,
            attempts: 3,
            backoff: Duration::from_millis(200),
        }
    }

    /// Reads `QTOMO_SOLVER_URL` and `QTOMO_SOLVER_TOKEN`; the URL is empty
    /// when unset.
    pub fn from_env() -> Self {
        let mut cfg = Self::new(env::var(ENV_URL).unwrap_or_default());
        cfg.token = env::var(ENV_TOKEN).ok().filter(|t| !t.is_empty());
        cfg
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct SolveRequest {
    pub n_vars: usize,
    pub entries: Vec<(u32, u32, f64)>,
    pub time_limit_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct SolveResponse {
    pub bits: Vec<serde_json::Value>,
    pub energy: f64,
    pub runtime_s: f64,
}

enum Failure {
    Retry(String),
    Fatal(Error),
}

/// Posts the problem to a remote service and re-verifies the returned
/// energy locally. Transport failures and 5xx replies are retried with
/// exponential backoff.
pub fn solve_remote(problem: &QuboProblem, config: &RemoteConfig) -> Result<SolveResult> {
    if config.url.is_empty() {
        return Err(invalid(format!("no solver endpoint configured; set {ENV_URL}")));
    }
    if config.attempts == 0 {
        return Err(invalid("remote solver needs at least one attempt"));
    }
    let start = Instant::now();
    let agent = ureq::AgentBuilder::new()
        .timeout_connect(Duration::from_secs(10))
        .timeout_read(Duration::from_secs_f64(config.time_limit_s.max(0.0) + config.grace_s))
        .build();
    let url = format!("{}/solve", config.url.trim_end_matches('/'));
    let body = SolveRequest {
        n_vars: problem.n_vars(),
        entries: problem.entries().to_vec(),
        time_limit_s: config.time_limit_s,
    };

    let mut last = String::new();
    for attempt in 1..=config.attempts {
        if attempt > 1 {
            thread::sleep(config.backoff * 2u32.pow(attempt - 2));
        }
        match post(&agent, &url, config.token.as_deref(), &body) {
            Ok(resp) => {
                let (bits, energy) = check_response(problem, resp)?;
                return Ok(SolveResult {
                    bits,
                    energy,
                    solver_id: "remote".into(),
                    seed: None,
                    runtime_s: start.elapsed().as_secs_f64(),
                });
            }
            Err(Failure::Retry(msg)) => last = msg,
            Err(Failure::Fatal(e)) => return Err(e),
        }
    }
    Err(Error::Transport { attempts: config.attempts, message: last })
}

fn post(agent: &ureq::Agent, url: &str, token: Option<&str>, body: &SolveRequest) -> Result<SolveResponse, Failure> {
    let mut req = agent.post(url).set("Content-Type", "application/json");
    if let Some(t) = token {
        req = req.set("Authorization", &format!("Bearer {t}"));
    }
    match req.send_json(body) {
        Ok(resp) => {
            let text = resp
                .into_string()
                .map_err(|e| Failure::Retry(format!("reading response: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| Failure::Fatal(Error::Protocol(format!("malformed response: {e}"))))
        }
        Err(ureq::Error::Status(code, resp)) if code >= 500 => {
            Err(Failure::Retry(format!("HTTP {code} {}", resp.status_text())))
        }
        Err(ureq::Error::Status(code, resp)) => {
            Err(Failure::Fatal(Error::Protocol(format!("HTTP {code} {}", resp.status_text()))))
        }
        Err(ureq::Error::Transport(t)) => Err(Failure::Retry(t.to_string())),
    }
}

fn check_response(problem: &QuboProblem, resp: SolveResponse) -> Result<(Vec<u8>, f64)> {
    if resp.bits.len() != problem.n_vars() {
        return Err(Error::Protocol(format!(
            "service returned {} bits for {} variables",
            resp.bits.len(),
            problem.n_vars()
        )));
    }
    let bits = resp
        .bits
        .iter()
        .map(|b| match b.as_u64() {
            Some(0) => Ok(0u8),
            Some(1) => Ok(1u8),
            _ => Err(Error::Protocol(format!("bit value {b} is not 0 or 1"))),
        })
        .collect::<Result<Vec<u8>>>()?;
    let local = evaluate_energy(problem, &bits)?;
    if !resp.energy.is_finite() || (local - resp.energy).abs() > 1e-6 * local.abs().max(1.0) {
        return Err(Error::Integrity(format!(
            "service reported energy {} but the bits evaluate to {local}",
            resp.energy
        )));
    }
    Ok((bits, local))
}
