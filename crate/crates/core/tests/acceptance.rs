//! Acceptance suite: every acceptance criterion as one test, each printing a
//! pass/fail line with the measured value and its runtime.
//!
//! Run with `cargo test -p sgld --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::time::Instant;

use sgld::config::{ExperimentConfig, ExperimentKind};
use sgld::experiment::{self, CheckResult};

struct Criterion {
    label: &'static str,
    budget_secs: f64,
}

impl Criterion {
    fn new(label: &'static str, budget_secs: f64) -> (Self, Instant) {
        (Criterion { label, budget_secs }, Instant::now())
    }

    fn finish(self, started: Instant, checks: &[CheckResult]) {
        let elapsed = started.elapsed().as_secs_f64();
        let failed: Vec<&CheckResult> = checks.iter().filter(|c| !c.pass).collect();
        let verdict = if failed.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "{verdict}  {}  ({} checks, {elapsed:.3}s, budget {}s)",
            self.label,
            checks.len(),
            self.budget_secs
        );
        for c in checks {
            println!(
                "      {}  {}  expected {}  observed {}",
                if c.pass { "ok " } else { "BAD" },
                c.name,
                c.expected,
                c.observed
            );
        }
        assert!(
            failed.is_empty(),
            "{} failed: {:?}",
            self.label,
            failed
                .iter()
                .map(|c| format!("{} expected {} observed {}", c.name, c.expected, c.observed))
                .collect::<Vec<_>>()
        );
        assert!(
            elapsed < self.budget_secs,
            "{} exceeded its runtime budget: {elapsed:.3}s >= {}s",
            self.label,
            self.budget_secs
        );
    }
}

#[test]
fn criterion_01_closed_form_reproduction() {
    let (c, t0) = Criterion::new(
        "criterion 1: matched-time closed forms and divergence reference",
        0.1,
    );
    let mut checks = experiment::verify::closed_form_reference();
    checks.extend(experiment::verify::kl_order_negative_control());
    c.finish(t0, &checks);
}

#[test]
fn criterion_02_divergence_rate_slope_two() {
    let (c, t0) = Criterion::new("criterion 2: sup-over-time divergence slope = 2", 1.0);
    let cfg = ExperimentConfig::default_for(ExperimentKind::RateSweep);
    let out = experiment::rate_sweep::run(&cfg).unwrap();
    let checks: Vec<CheckResult> = out
        .checks
        .iter()
        .filter(|c| c.name.contains("kl-rate slope") || c.name.contains("lower bound"))
        .cloned()
        .collect();
    assert!(!checks.is_empty());
    c.finish(t0, &checks);
}

#[test]
fn criterion_03_transport_rate_slope_one() {
    let (c, t0) = Criterion::new("criterion 3: final-time transport slope = 1", 1.0);
    let cfg = ExperimentConfig::default_for(ExperimentKind::RateSweep);
    let out = experiment::rate_sweep::run(&cfg).unwrap();
    let checks: Vec<CheckResult> = out
        .checks
        .iter()
        .filter(|c| c.name.contains("w2-rate slope"))
        .cloned()
        .collect();
    assert_eq!(checks.len(), 1);
    c.finish(t0, &checks);
}

#[test]
fn criterion_04_decaying_schedule_rates() {
    let (c, t0) = Criterion::new(
        "criterion 4: decaying-schedule slopes -2 theta for theta in {0.3, 0.5, 0.8}",
        5.0,
    );
    let cfg = ExperimentConfig::default_for(ExperimentKind::ScheduleDecay);
    let out = experiment::schedule_decay::run(&cfg).unwrap();
    let checks: Vec<CheckResult> = out
        .checks
        .iter()
        .filter(|c| c.name.contains("decay slope"))
        .cloned()
        .collect();
    assert_eq!(checks.len(), 3);
    c.finish(t0, &checks);
}

#[test]
fn criterion_05_envelope_dominance() {
    let (c, t0) = Criterion::new(
        "criterion 5: fitted envelope dominates the divergence pointwise",
        6.0,
    );
    let rate =
        experiment::rate_sweep::run(&ExperimentConfig::default_for(ExperimentKind::RateSweep))
            .unwrap();
    let decay = experiment::schedule_decay::run(&ExperimentConfig::default_for(
        ExperimentKind::ScheduleDecay,
    ))
    .unwrap();
    let checks: Vec<CheckResult> = rate
        .checks
        .iter()
        .chain(decay.checks.iter())
        .filter(|c| c.name.contains("envelope") || c.name.contains("dominance"))
        .cloned()
        .collect();
    assert_eq!(checks.len(), 4);
    c.finish(t0, &checks);
}

#[test]
fn criterion_06_surrogate_rate_and_moment_agreement() {
    let (c, t0) = Criterion::new(
        "criterion 6: surrogate divergence slope and 10^5-chain moment agreement",
        120.0,
    );
    let cfg = ExperimentConfig::default_for(ExperimentKind::SgldSweep);
    assert_eq!(cfg.chains, 100_000);
    let out = experiment::sgld_sweep::run(&cfg).unwrap();
    let s2 = out
        .rows
        .iter()
        .find(|r| r.metric == "intercept_variance")
        .unwrap();
    assert_eq!(s2.value, 1.0);
    c.finish(t0, &out.checks);
}

#[test]
fn criterion_07_batch_consistency() {
    let (c, t0) = Criterion::new(
        "criterion 7: batch-mean consistency at M = 10^4 over 20 states",
        1.0,
    );
    let checks = experiment::verify::batch_consistency(12345, 10_000, 20).unwrap();
    c.finish(t0, &checks);
}

#[test]
fn criterion_08_moment_boundedness() {
    let (c, t0) = Criterion::new(
        "criterion 8: second moment bounded to T = 100 at 10^4 chains",
        60.0,
    );
    let checks = experiment::verify::moment_bound(12345, 10_000, 0.1, 100.0).unwrap();
    c.finish(t0, &checks);
}

#[test]
fn criterion_09_metric_property_suite() {
    let (c, t0) = Criterion::new(
        "criterion 9: metric axioms and cross-method agreement",
        60.0,
    );
    let mut checks = experiment::verify::metric_axioms(12345).unwrap();
    checks.push(experiment::verify::quadrature_agreement(12345, 100).unwrap());
    checks.push(experiment::verify::empirical_w2_agreement(12345, 100_000).unwrap());
    checks.push(experiment::verify::tv_noise_floor(12345, 100_000).unwrap());
    c.finish(t0, &checks);
}

#[test]
fn criterion_10_contraction() {
    let (c, t0) = Criterion::new(
        "criterion 10: separated ensembles contract five-fold by T = 20",
        120.0,
    );
    let cfg = ExperimentConfig::default_for(ExperimentKind::Contraction);
    let out = experiment::contraction::run(&cfg).unwrap();
    c.finish(t0, &out.checks);
}

#[test]
fn criterion_11_stationary_bias_ratios() {
    let (c, t0) = Criterion::new(
        "criterion 11: pooled-sample bias halving ratios in [1.4, 2.8]",
        300.0,
    );
    let cfg = ExperimentConfig::default_for(ExperimentKind::StationaryBias);
    assert_eq!(cfg.pooled_target, 1_000_000);
    let out = experiment::stationary_bias::run(&cfg).unwrap();
    c.finish(t0, &out.checks);
}
