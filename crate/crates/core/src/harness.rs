//! Experiment harness: runs a scenario and persists its outputs, and
//! compares two persisted runs.
//!
//! Output layout (all under one directory):
//! - `digest.txt`      — algorithm tag line, then the final state digest
//! - `stats.csv`       — per step, per LP: events, sends, barrier share
//! - `timing.csv`      — per step, per LP wall-clock milliseconds
//! - `checksums.csv`   — per step global event-stream checksum
//! - `trace.jsonl`     — one processed event per line (trace = full only)
//! - `migrations.jsonl`— one migration per line
//! - `regions.jsonl`   — one refine/coarsen transition per line
//!
//! Determinism-sensitive data (digest, checksums, trace) never contains
//! wall-clock values; timing lives only in `timing.csv` and the
//! `barrier_wait_fraction` column of `stats.csv`.

use crate::config::ScenarioConfig;
use crate::digest::DIGEST_ALGO;
use crate::error::{SimError, SimResult};
use crate::runtime::{run, RunOutcome};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Run and, if an output directory is given, persist all artifacts.
pub fn run_simulation(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> SimResult<RunOutcome> {
    let outcome = run(cfg)?;
    if let Some(dir) = out_dir {
        write_outputs(cfg, &outcome, dir)?;
    }
    Ok(outcome)
}

pub fn write_outputs(cfg: &ScenarioConfig, outcome: &RunOutcome, dir: &Path) -> SimResult<()> {
    fs::create_dir_all(dir)?;

    fs::write(
        dir.join("digest.txt"),
        format!("{}\n{}\n", DIGEST_ALGO, outcome.digest.hex()),
    )?;

    let mut stats = String::from(
        "step,lp_id,events_processed,local_sends,remote_sends,barrier_wait_fraction\n",
    );
    let mut timing = String::from("step,lp_id,step_wall_ms\n");
    for r in &outcome.steps {
        writeln!(
            stats,
            "{},{},{},{},{},{:.6}",
            r.step, r.lp, r.events_processed, r.local_sends, r.remote_sends,
            r.barrier_wait_fraction
        )
        .unwrap();
        writeln!(timing, "{},{},{:.3}", r.step, r.lp, r.step_wall_ms).unwrap();
    }
    fs::write(dir.join("stats.csv"), stats)?;
    fs::write(dir.join("timing.csv"), timing)?;

    let mut checks = String::from("step,checksum\n");
    for (step, c) in outcome.step_checksums.iter().enumerate() {
        writeln!(checks, "{step},{c:016x}").unwrap();
    }
    fs::write(dir.join("checksums.csv"), checks)?;

    let mut migs = String::new();
    for m in &outcome.migrations {
        writeln!(migs, "{}", serde_json::to_string(m).unwrap()).unwrap();
    }
    fs::write(dir.join("migrations.jsonl"), migs)?;

    let mut regions = String::new();
    for r in &outcome.regions {
        writeln!(regions, "{}", serde_json::to_string(r).unwrap()).unwrap();
    }
    fs::write(dir.join("regions.jsonl"), regions)?;

    let mut trace = String::new();
    for t in &outcome.trace {
        writeln!(trace, "{}", serde_json::to_string(t).unwrap()).unwrap();
    }
    fs::write(dir.join("trace.jsonl"), trace)?;

    fs::write(dir.join("scenario.resolved.cfg"), cfg.to_toml())?;
    Ok(())
}

/// Result of comparing two persisted runs.
#[derive(Debug, PartialEq, Eq)]
pub enum Comparison {
    Equal,
    /// Digests differ; `first_divergent_step` is the earliest step whose
    /// global event-stream checksums disagree, if checksums are available.
    Diverged { first_divergent_step: Option<u64> },
}

pub fn compare_runs(a: &Path, b: &Path) -> SimResult<Comparison> {
    let da = read_digest(a)?;
    let db = read_digest(b)?;
    if da == db {
        return Ok(Comparison::Equal);
    }
    let ca = read_checksums(a).unwrap_or_default();
    let cb = read_checksums(b).unwrap_or_default();
    let first = ca
        .iter()
        .zip(&cb)
        .position(|(x, y)| x != y)
        .map(|i| i as u64)
        .or_else(|| {
            if ca.len() != cb.len() {
                Some(ca.len().min(cb.len()) as u64)
            } else {
                None
            }
        });
    Ok(Comparison::Diverged { first_divergent_step: first })
}

fn read_digest(dir: &Path) -> SimResult<String> {
    let text = fs::read_to_string(dir.join("digest.txt"))?;
    let mut lines = text.lines();
    let algo = lines.next().unwrap_or_default();
    if algo != DIGEST_ALGO {
        return Err(SimError::Parse(format!(
            "unknown digest algorithm `{algo}` in {}",
            dir.display()
        )));
    }
    Ok(lines.next().unwrap_or_default().trim().to_string())
}

fn read_checksums(dir: &Path) -> SimResult<Vec<u64>> {
    let text = fs::read_to_string(dir.join("checksums.csv"))?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        let Some((_, c)) = line.split_once(',') else { continue };
        out.push(
            u64::from_str_radix(c.trim(), 16)
                .map_err(|e| SimError::Parse(format!("bad checksum `{c}`: {e}")))?,
        );
    }
    Ok(out)
}
