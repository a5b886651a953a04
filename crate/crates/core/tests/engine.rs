//! End-to-end engine invariants and harness plumbing: event conservation,
//! run-to-run reproducibility, output files, and divergence localization.

use shiresim::harness::{compare_runs, run_simulation, Comparison};
use shiresim::ScenarioConfig;
use std::path::Path;

const SCENARIO: &str = r#"
    seed = 13
    total_coarse_steps = 80
    n_lps = 4
    partition = "spatial-grid"
    trace = "stats"
    [area]
    width = 600.0
    height = 600.0
    [counts]
    sensors = 20
    producers = 15
    consumers = 120
    relays = 20
    [[multilevel.regions]]
    id = 0
    bounds = [200.0, 200.0, 400.0, 400.0]
    theta_hi = 30
    theta_lo = 15
"#;

fn cfg() -> ScenarioConfig {
    ScenarioConfig::from_toml(SCENARIO).unwrap()
}

/// Every event created is eventually delivered or still queued at the end:
/// initial + sent == delivered + undelivered.
#[test]
fn event_conservation() {
    let out = run_simulation(&cfg(), None).unwrap();
    let t = &out.totals;
    assert!(t.sent > 0 && t.delivered > 0);
    assert_eq!(t.initial_events + t.sent, t.delivered + t.undelivered);
    assert_eq!(t.entities, 175);
}

/// Two runs of the same configuration in the same process are bit-identical,
/// including the per-step checksum stream.
#[test]
fn repeat_runs_are_identical() {
    let a = run_simulation(&cfg(), None).unwrap();
    let b = run_simulation(&cfg(), None).unwrap();
    assert_eq!(a.digest, b.digest);
    assert_eq!(a.step_checksums, b.step_checksums);
    assert_eq!(a.totals.sent, b.totals.sent);
}

/// The harness writes the full output set and `compare_runs` declares two
/// identical runs equal.
#[test]
fn output_files_and_equal_comparison() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_simulation(&cfg(), Some(&dir_a)).unwrap();
    run_simulation(&cfg(), Some(&dir_b)).unwrap();

    for name in
        ["digest.txt", "stats.csv", "timing.csv", "checksums.csv", "scenario.resolved.cfg"]
    {
        let p = dir_a.join(name);
        assert!(p.exists(), "missing output {name}");
        assert!(p.metadata().unwrap().len() > 0, "empty output {name}");
    }
    // stats.csv: header plus one row per (step, lp).
    let stats = std::fs::read_to_string(dir_a.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1 + 80 * 4);
    assert!(stats.starts_with("step,lp_id,events_processed,local_sends,remote_sends"));
    // The resolved scenario is loadable and reproduces the same run.
    let resolved = ScenarioConfig::load(&dir_a.join("scenario.resolved.cfg")).unwrap();
    assert_eq!(resolved, cfg());

    assert_eq!(compare_runs(&dir_a, &dir_b).unwrap(), Comparison::Equal);
}

/// Runs that differ from the first step are flagged as diverged at step 0;
/// the checksum stream localizes where histories split.
#[test]
fn divergence_is_localized() {
    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    let base = cfg();
    let mut other = base.clone();
    other.seed = 14;
    run_simulation(&base, Some(&dir_a)).unwrap();
    run_simulation(&other, Some(&dir_b)).unwrap();
    assert_eq!(
        compare_runs(&dir_a, &dir_b).unwrap(),
        Comparison::Diverged { first_divergent_step: Some(0) }
    );
}

/// compare_runs rejects directories without a digest.
#[test]
fn comparison_requires_digests() {
    let tmp = tempfile::tempdir().unwrap();
    assert!(compare_runs(tmp.path(), Path::new("/nonexistent")).is_err());
}
