//! Mini-batch sweep: the moment-matched Gaussian surrogate of the batch
//! iterate's law against the exact diffusion law. The surrogate's variance
//! gap to the diffusion is linear in the step, so the surrogate divergence
//! is quadratic; an independent-chain ensemble validates the surrogate's
//! moments to Monte Carlo accuracy.

use crate::config::{ExperimentConfig, PotentialConfig};
use crate::error::{Error, Result};
use crate::experiment::{CheckResult, ExperimentOutput, PlotSeries, ResultRow};
use crate::law::{gaussian_kl, MomentRecursion};
use crate::metrics::loglog_slope;
use crate::sampler::run_ensemble;
use crate::schedule::StepSchedule;

pub const ID: &str = "sgld-sweep";

/// Closed-form surrogate sweep at one step size.
#[derive(Debug, Clone)]
pub struct SurrogatePoint {
    pub eta: f64,
    pub kl_sup: f64,
    pub var_gap_sup: f64,
    pub var_stationary: f64,
}

pub fn surrogate_point(
    a: f64,
    beta_inv: f64,
    s2: f64,
    m0: &[f64],
    v0: &[f64],
    horizon_t: f64,
    eta: f64,
) -> Result<SurrogatePoint> {
    let steps = (horizon_t / eta).round() as usize;
    let schedule = StepSchedule::constant(eta)?;
    let mut rec = MomentRecursion::new(a, beta_inv, s2, m0, v0, &schedule)?;
    let mut kl_sup = 0.0f64;
    let mut var_gap_sup = 0.0f64;
    for _ in 1..=steps {
        rec.advance()?;
        let surrogate = rec.law().surrogate()?;
        let exact = crate::law::ou_exact_law(a, beta_inv, m0, v0, rec.t())?;
        kl_sup = kl_sup.max(gaussian_kl(&exact, &surrogate)?);
        let gap = exact
            .var()
            .iter()
            .zip(surrogate.var())
            .map(|(ve, vs)| (vs - ve).abs())
            .fold(0.0f64, f64::max);
        var_gap_sup = var_gap_sup.max(gap);
    }
    Ok(SurrogatePoint {
        eta,
        kl_sup,
        var_gap_sup,
        var_stationary: rec.var()[0],
    })
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let PotentialConfig::LinearDrift { a, .. } = &cfg.potential else {
        return Err(Error::Config(
            "mini-batch sweep needs a linear_drift potential with offsets".into(),
        ));
    };
    let a = *a;
    let beta_inv = cfg.sampler.beta_inv;
    let potential = cfg.potential.build()?;
    let spec = cfg
        .sampler
        .batch_spec()?
        .ok_or_else(|| Error::Config("mini-batch sweep needs a batch_size".into()))?;
    let s2 = potential
        .intercept_variance(&spec)
        .ok_or_else(|| Error::Config("potential has no scalar intercept structure".into()))?;
    if !(s2 > 0.0) {
        return Err(Error::Config(format!(
            "mini-batch sweep needs intercept variance > 0, got {s2}; add spread offsets"
        )));
    }
    let init = cfg.sampler.initial_law()?;
    let (m0, v0) = init.moments();
    let mut out = ExperimentOutput::new(ID);
    out.rows
        .push(ResultRow::closed_form(ID, 0.0, "intercept_variance", s2));

    let mut kl_points = Vec::new();
    let mut gaps = Vec::new();
    for &eta in &cfg.eta_grid {
        if eta * a >= 2.0 {
            out.rows
                .push(ResultRow::closed_form(ID, eta, "unstable", 1.0));
            continue;
        }
        let p = surrogate_point(a, beta_inv, s2, &m0, &v0, cfg.horizon_t, eta)?;
        out.rows.push(ResultRow::closed_form(
            ID,
            eta,
            "surrogate_kl_sup",
            p.kl_sup,
        ));
        out.rows.push(ResultRow::closed_form(
            ID,
            eta,
            "var_gap_sup",
            p.var_gap_sup,
        ));
        out.rows.push(ResultRow::closed_form(
            ID,
            eta,
            "surrogate_var_stationary",
            p.var_stationary,
        ));
        kl_points.push((eta, p.kl_sup));
        gaps.push((eta, p.var_gap_sup));
    }
    if kl_points.len() < 3 {
        return Err(Error::Config(
            "fewer than 3 stable step sizes; cannot fit rate slopes".into(),
        ));
    }

    let fit = loglog_slope(&kl_points)?;
    out.push_fit("surrogate_kl_sup_vs_eta", fit);
    out.checks.push(CheckResult::window(
        "surrogate kl-rate slope (quadratic in step)",
        fit.slope,
        1.85,
        2.15,
    ));

    // variance-gap scale fitted at the coarsest step dominates the rest
    let c_fit = gaps[0].1 / gaps[0].0;
    out.rows.push(ResultRow::closed_form(
        ID,
        gaps[0].0,
        "var_gap_scale_c",
        c_fit,
    ));
    let worst_excess = gaps
        .iter()
        .map(|(eta, gap)| gap - c_fit * eta)
        .fold(f64::NEG_INFINITY, f64::max);
    out.checks.push(CheckResult::at_most(
        "variance gap bounded by c * eta with c fitted at the coarsest step",
        worst_excess,
        1e-12,
    ));

    // Monte Carlo validation of the surrogate moments at one step size
    let val_eta = cfg.eta_grid.get(1).copied().unwrap_or(cfg.eta_grid[0]);
    let steps = (cfg.horizon_t / val_eta).round() as usize;
    let schedule = StepSchedule::constant(val_eta)?;
    let sampler_cfg = cfg.sampler.build(schedule.clone(), cfg.seed)?;
    let sampler_cfg = crate::sampler::SamplerConfig {
        batch: Some(spec),
        ..sampler_cfg
    };
    let checkpoints: Vec<usize> = (1..=10).map(|i| i * steps / 10).collect();
    let ensemble = run_ensemble(&potential, &sampler_cfg, cfg.chains, steps, &checkpoints)?;

    let mut rec = MomentRecursion::new(a, beta_inv, s2, &m0, &v0, &schedule)?;
    let mut worst_sigma = 0.0f64;
    let mut next = 0usize;
    for k in 1..=steps {
        rec.advance()?;
        if next < checkpoints.len() && checkpoints[next] == k {
            let snap = ensemble.snapshot_at(k).expect("checkpoint recorded");
            let mean = snap.mean();
            let var = snap.var();
            let se_m = snap.se_mean();
            let se_v = snap.se_var();
            for c in 0..mean.len() {
                let zm = (mean[c] - rec.mean()[c]).abs() / se_m[c];
                let zv = (var[c] - rec.var()[c]).abs() / se_v[c];
                worst_sigma = worst_sigma.max(zm).max(zv);
            }
            out.rows.push(ResultRow::monte_carlo(
                ID,
                rec.t(),
                "ensemble_mean",
                mean[0],
                se_m[0],
            ));
            out.rows.push(ResultRow::monte_carlo(
                ID,
                rec.t(),
                "ensemble_var",
                var[0],
                se_v[0],
            ));
            out.rows.push(ResultRow::closed_form(
                ID,
                rec.t(),
                "surrogate_mean",
                rec.mean()[0],
            ));
            out.rows.push(ResultRow::closed_form(
                ID,
                rec.t(),
                "surrogate_var",
                rec.var()[0],
            ));
            next += 1;
        }
    }
    out.checks.push(CheckResult::at_most(
        &format!(
            "ensemble moments within 5 standard errors of the surrogate at {} checkpoints (eta = {val_eta}, {} chains)",
            checkpoints.len(),
            cfg.chains
        ),
        worst_sigma,
        5.0,
    ));

    // long-run ensemble variance against the discrete fixed point
    let stat = (val_eta * s2 + 2.0 * beta_inv) / (a * (2.0 - val_eta * a));
    let last = ensemble.snapshot_at(steps).expect("final checkpoint");
    out.checks.push(CheckResult::at_most(
        &format!("stationary ensemble variance matches ({stat:.7}) within 5 standard errors"),
        (last.var()[0] - stat).abs() / last.se_var()[0],
        5.0,
    ));

    out.plots.push(PlotSeries {
        name: "surrogate_kl_sup_vs_eta".into(),
        points: kl_points,
    });
    Ok(out)
}
