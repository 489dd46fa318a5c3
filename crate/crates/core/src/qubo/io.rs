use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{QuboProblem, VarSlot};
use crate::error::{Error, Result};

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

/// `QUBO <n_vars> <n_entries> <target_min>` then `i j coeff` lines. An
/// unknown target minimum is written as `nan`.
pub(crate) fn to_text(problem: &QuboProblem) -> String {
    let target = problem.target_min().unwrap_or(f64::NAN);
    let mut out = format!("QUBO {} {} {}\n", problem.n_vars(), problem.entries().len(), target);
    for (i, j, c) in problem.entries() {
        writeln!(out, "{i} {j} {c}").unwrap();
    }
    out
}

/// `v row col bit` lines.
pub(crate) fn var_map_text(problem: &QuboProblem) -> String {
    let mut out = String::new();
    for (v, s) in problem.var_map().iter().enumerate() {
        writeln!(out, "{v} {} {} {}", s.row, s.col, s.bit).unwrap();
    }
    out
}

pub(crate) fn from_text(text: &str, var_map: Option<&str>) -> Result<QuboProblem> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| format_err("empty QUBO file"))?;
    let f: Vec<&str> = header.split_whitespace().collect();
    let bad = || format_err(format!("bad QUBO header {header:?}"));
    if f.len() != 4 || f[0] != "QUBO" {
        return Err(bad());
    }
    let n_vars: usize = f[1].parse().map_err(|_| bad())?;
    let n_entries: usize = f[2].parse().map_err(|_| bad())?;
    let target: f64 = f[3].parse().map_err(|_| bad())?;
    let mut entries = Vec::with_capacity(n_entries);
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        let parsed = (t.len() == 3)
            .then(|| Some((t[0].parse::<usize>().ok()?, t[1].parse::<usize>().ok()?, t[2].parse::<f64>().ok()?)))
            .flatten()
            .ok_or_else(|| format_err(format!("bad QUBO entry {line:?}")))?;
        entries.push(parsed);
    }
    if entries.len() != n_entries {
        return Err(format_err(format!("found {} entries, header says {n_entries}", entries.len())));
    }
    let mut problem = QuboProblem::from_entries(n_vars, entries).map_err(|e| format_err(e.to_string()))?;
    if !target.is_nan() {
        problem = problem.with_target_min(target);
    }
    if let Some(text) = var_map {
        let mut slots = vec![None; n_vars];
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let t: Vec<usize> = line
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| format_err(format!("bad var map line {line:?}"))))
                .collect::<Result<_>>()?;
            if t.len() != 4 || t[0] >= n_vars {
                return Err(format_err(format!("bad var map line {line:?}")));
            }
            slots[t[0]] = Some(VarSlot { row: t[1], col: t[2], bit: t[3] });
        }
        problem.var_map = slots
            .into_iter()
            .enumerate()
            .map(|(v, s)| s.ok_or_else(|| format_err(format!("variable {v} missing from var map"))))
            .collect::<Result<_>>()?;
    }
    Ok(problem)
}

pub fn save_qubo(problem: &QuboProblem, path: impl AsRef<Path>, var_map_path: Option<&Path>) -> Result<()> {
    fs::write(path, to_text(problem))?;
    if let Some(p) = var_map_path {
        fs::write(p, var_map_text(problem))?;
    }
    Ok(())
}

pub fn load_qubo(path: impl AsRef<Path>, var_map_path: Option<&Path>) -> Result<QuboProblem> {
    let text = fs::read_to_string(path)?;
    let vm = var_map_path.map(fs::read_to_string).transpose()?;
    from_text(&text, vm.as_deref())
}
