//! Loopback service speaking the remote `/solve` protocol, for tests and
//! offline runs. It solves with the exhaustive search (or annealing above
//! its limit) and can inject faults.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::remote::{SolveRequest, SolveResponse};
use super::{solve_exhaustive, solve_sa, AnnealParams, EXHAUSTIVE_MAX_VARS};
use crate::error::Result;
use crate::qubo::QuboProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    /// Answers with a correct solution.
    Solve,
    /// Drops one bit from the answer.
    WrongLength,
    /// Reports an energy that does not match the bits.
    BadEnergy,
    /// Closes every connection without replying.
    HangUp,
    /// Replies `503` to every request.
    Unavailable,
}

pub struct MockService {
    addr: String,
    requests: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl MockService {
    /// Binds an ephemeral loopback port. When `token` is set, requests
    /// without the matching bearer header get `401`.
    pub fn start(mode: MockMode, token: Option<String>) -> Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?.to_string();
        let requests = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (req, halt) = (requests.clone(), stop.clone());
        let worker = thread::spawn(move || {
            for stream in listener.incoming() {
                if halt.load(Ordering::SeqCst) {
                    break;
                }
                if let Ok(s) = stream {
                    req.fetch_add(1, Ordering::SeqCst);
                    let _ = handle(s, mode, token.as_deref());
                }
            }
        });
        Ok(Self { addr, requests, stop, worker: Some(worker) })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Connections accepted so far.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockService {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(&self.addr);
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn handle(mut stream: TcpStream, mode: MockMode, token: Option<&str>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut length = 0usize;
    let mut auth = None;
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h)? == 0 || h.trim().is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            match k.trim().to_ascii_lowercase().as_str() {
                "content-length" => length = v.trim().parse().unwrap_or(0),
                "authorization" => auth = Some(v.trim().to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;

    if mode == MockMode::HangUp {
        return stream.shutdown(Shutdown::Both);
    }
    if mode == MockMode::Unavailable {
        return reply(&mut stream, "503 Service Unavailable", "{}");
    }
    if !line.starts_with("POST /solve ") {
        return reply(&mut stream, "404 Not Found", "{}");
    }
    if let Some(t) = token {
        if auth.as_deref() != Some(&format!("Bearer {t}")) {
            return reply(&mut stream, "401 Unauthorized", "{}");
        }
    }
    let Some(out) = solve_request(&body, mode) else {
        return reply(&mut stream, "400 Bad Request", "{}");
    };
    reply(&mut stream, "200 OK", &out)
}

fn solve_request(body: &[u8], mode: MockMode) -> Option<String> {
    let req: SolveRequest = serde_json::from_slice(body).ok()?;
    let entries = req.entries.iter().map(|&(i, j, c)| (i as usize, j as usize, c));
    let problem = QuboProblem::from_entries(req.n_vars, entries).ok()?;
    let res = if problem.n_vars() <= EXHAUSTIVE_MAX_VARS {
        solve_exhaustive(&problem).ok()?
    } else {
        solve_sa(&problem, &AnnealParams::for_problem(&problem, 0)).ok()?
    };
    let mut bits: Vec<serde_json::Value> = res.bits.iter().map(|&b| b.into()).collect();
    let mut energy = res.energy;
    match mode {
        MockMode::WrongLength => {
            bits.pop();
        }
        MockMode::BadEnergy => energy += 1.0 + energy.abs(),
        _ => {}
    }
    serde_json::to_string(&SolveResponse { bits, energy, runtime_s: res.runtime_s }).ok()
}

fn reply(stream: &mut TcpStream, status: &str, body: &str) -> std::io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}
