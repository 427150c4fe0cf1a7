//! Step-size sweep on the linear-drift target: sup-over-time relative
//! entropy between the Euler iterate's law and the diffusion's law, its
//! transport-distance companion, and the fitted error-envelope constants.
//!
//! Everything here is closed form; the sweep's slopes estimate the exponents
//! (2 for relative entropy, 1 for the Wasserstein distance).

use crate::config::{ExperimentConfig, PotentialConfig};
use crate::error::{Error, Result};
use crate::experiment::{fit_decay_rate, CheckResult, ExperimentOutput, PlotSeries, ResultRow};
use crate::law::{gaussian_kl, gaussian_w2, kl_mean_lower_bound, GaussianLaw, MomentRecursion};
use crate::metrics::loglog_slope;
use crate::schedule::{BoundParams, EnvelopeSeries, StepSchedule};

pub const ID: &str = "rate-sweep";

/// Per-step-size outcome of one closed-form sweep run.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub eta: f64,
    /// sup over grid indices `k >= 1` of the divergence at matched time.
    pub kl_sup: f64,
    pub kl_sup_at: usize,
    /// Divergence value at the final grid index.
    pub kl_final: f64,
    /// Transport distance of the matched-time pair at the final grid index.
    pub w2_final: f64,
    /// Count of grid indices where the mean-shift lower bound exceeded the
    /// divergence (must be zero).
    pub lower_bound_violations: usize,
    /// Fitted envelope scale `c2 = max_k KL_k / (d I_k)`.
    pub envelope_c2: f64,
    /// Count of grid indices where the fitted envelope fell below the
    /// divergence (must be zero).
    pub envelope_violations: usize,
    /// First grid index where the distance to the target is within 10% of
    /// its stationary floor.
    pub steps_to_floor: usize,
    /// Matched-time divergence curve, decimated for plotting.
    pub curve: Vec<(f64, f64)>,
}

/// Closed-form sweep at one step size. `a0` is the envelope decay constant.
pub fn sweep_point(
    a: f64,
    beta_inv: f64,
    m0: &[f64],
    v0: &[f64],
    horizon_t: f64,
    eta: f64,
    a0: f64,
) -> Result<SweepPoint> {
    let steps = (horizon_t / eta).round() as usize;
    let schedule = StepSchedule::constant(eta)?;
    let mut rec = MomentRecursion::new(a, beta_inv, 0.0, m0, v0, &schedule)?;
    let mut envelope = EnvelopeSeries::new(&schedule, BoundParams::new(a0, 0.0, 1.0, m0.len())?)?;
    let target = GaussianLaw::new(vec![0.0; m0.len()], vec![beta_inv / a; m0.len()])?;
    let w2_floor = {
        // stationary iterate variance: 2 beta_inv / (a (2 - eta a))
        let v_stat = 2.0 * beta_inv / (a * (2.0 - eta * a));
        let stat = GaussianLaw::new(vec![0.0; m0.len()], vec![v_stat; m0.len()])?;
        gaussian_w2(&stat, &target)?
    };

    let mut kl_sup = 0.0;
    let mut kl_sup_at = 0;
    let mut lower_bound_violations = 0;
    let mut kl_series = Vec::with_capacity(steps);
    let mut shape_series = Vec::with_capacity(steps);
    let mut steps_to_floor = 0;
    let mut kl_final = 0.0;
    let mut w2_final = 0.0;
    for k in 1..=steps {
        rec.advance()?;
        envelope.advance()?;
        let euler = rec.law().surrogate()?;
        let exact = crate::law::ou_exact_law(a, beta_inv, m0, v0, rec.t())?;
        let kl = gaussian_kl(&exact, &euler)?;
        let lb = kl_mean_lower_bound(&exact, &euler)?;
        if lb > kl * (1.0 + 1e-12) {
            lower_bound_violations += 1;
        }
        if kl > kl_sup {
            kl_sup = kl;
            kl_sup_at = k;
        }
        kl_series.push(kl);
        shape_series.push(envelope.integral() * m0.len() as f64);
        if steps_to_floor == 0 && gaussian_w2(&euler, &target)? <= 1.1 * w2_floor.max(1e-300) {
            steps_to_floor = k;
        }
        if k == steps {
            kl_final = kl;
            w2_final = gaussian_w2(&exact, &euler)?;
        }
    }

    // envelope scale as the max pointwise ratio, then confirm dominance
    let mut c2 = 0.0f64;
    for (kl, shape) in kl_series.iter().zip(&shape_series) {
        if *shape > 0.0 {
            c2 = c2.max(kl / shape);
        }
    }
    let mut envelope_violations = 0;
    for (kl, shape) in kl_series.iter().zip(&shape_series) {
        if c2 * shape < kl * (1.0 - 1e-12) {
            envelope_violations += 1;
        }
    }
    // cross-check through the public envelope evaluation at spot indices
    let fitted = BoundParams::new(a0, 0.0, c2, m0.len())?;
    let mut spot = 1usize;
    while spot <= steps {
        let v = crate::schedule::bound_envelope(&schedule, &fitted, spot)?;
        if v < kl_series[spot - 1] * (1.0 - 1e-12) {
            envelope_violations += 1;
        }
        spot = (spot * 2).max(spot + 1);
    }

    let stride = (steps / 200).max(1);
    let curve = (0..steps)
        .filter(|k| k % stride == 0 || *k + 1 == steps)
        .map(|k| (eta * (k + 1) as f64, kl_series[k]))
        .collect();

    Ok(SweepPoint {
        eta,
        kl_sup,
        kl_sup_at,
        kl_final,
        w2_final,
        lower_bound_violations,
        envelope_c2: c2,
        envelope_violations,
        steps_to_floor,
        curve,
    })
}

/// Isotropic product check: the divergence of `d` independent copies equals
/// `d` times the scalar divergence. Returns per-dimension values of `KL(d)/d`
/// and their worst relative spread.
pub fn dimension_scaling_spread(
    a: f64,
    beta_inv: f64,
    eta: f64,
    t: f64,
    dims: &[usize],
) -> Result<(Vec<(usize, f64)>, f64)> {
    let schedule = StepSchedule::constant(eta)?;
    let k = (t / eta).round() as usize;
    let mut per_dim = Vec::new();
    for &d in dims {
        let exact = crate::law::ou_exact_law(a, beta_inv, &vec![1.0; d], &vec![0.0; d], t)?;
        let euler = crate::law::em_law(a, beta_inv, &vec![1.0; d], &vec![0.0; d], &schedule, k)?;
        per_dim.push((d, gaussian_kl(&exact, &euler)? / d as f64));
    }
    let base = per_dim[0].1;
    let spread = per_dim
        .iter()
        .map(|(_, v)| ((v - base) / base).abs())
        .fold(0.0f64, f64::max);
    Ok((per_dim, spread))
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let PotentialConfig::LinearDrift { a, .. } = &cfg.potential else {
        return Err(Error::Config(
            "rate sweep needs a linear_drift potential (closed forms apply)".into(),
        ));
    };
    let a = *a;
    let beta_inv = cfg.sampler.beta_inv;
    let (m0, v0) = cfg.sampler.initial_law()?.moments();
    let mut out = ExperimentOutput::new(ID);

    let a0 = fit_decay_rate(a, beta_inv, m0[0], v0[0]).unwrap_or(2.0 * a);
    out.rows
        .push(ResultRow::closed_form(ID, 0.0, "envelope_a0_fitted", a0));
    out.notes.push(format!(
        "envelope decay constant a0 = {a0} fitted from the off-equilibrium decay of the exact law"
    ));

    let mut kl_points = Vec::new();
    let mut w2_points = Vec::new();
    let mut total_lb_violations = 0usize;
    let mut total_env_violations = 0usize;
    for &eta in &cfg.eta_grid {
        if eta * a >= 2.0 {
            out.rows
                .push(ResultRow::closed_form(ID, eta, "unstable", 1.0));
            out.notes
                .push(format!("eta = {eta} is unstable (eta a >= 2); row skipped"));
            continue;
        }
        let point = sweep_point(a, beta_inv, &m0, &v0, cfg.horizon_t, eta, a0)?;
        kl_points.push((eta, point.kl_sup));
        w2_points.push((eta, point.w2_final));
        total_lb_violations += point.lower_bound_violations;
        total_env_violations += point.envelope_violations;
        out.rows
            .push(ResultRow::closed_form(ID, eta, "kl_sup", point.kl_sup));
        out.rows.push(ResultRow::closed_form(
            ID,
            eta,
            "kl_sup_at_k",
            point.kl_sup_at as f64,
        ));
        out.rows
            .push(ResultRow::closed_form(ID, eta, "kl_final", point.kl_final));
        out.rows
            .push(ResultRow::closed_form(ID, eta, "w2_final", point.w2_final));
        out.rows.push(ResultRow::closed_form(
            ID,
            eta,
            "envelope_c2_fitted",
            point.envelope_c2,
        ));
        out.rows.push(ResultRow::closed_form(
            ID,
            eta,
            "w2_steps_to_1.1x_floor",
            point.steps_to_floor as f64,
        ));
        out.plots.push(PlotSeries {
            name: format!("kl_vs_t_eta_{eta}"),
            points: point.curve,
        });
    }

    if kl_points.len() < 3 {
        return Err(Error::Config(
            "fewer than 3 stable step sizes; cannot fit rate slopes".into(),
        ));
    }

    let kl_fit = loglog_slope(&kl_points)?;
    let w2_fit = loglog_slope(&w2_points)?;
    out.push_fit("kl_sup_vs_eta", kl_fit);
    out.push_fit("w2_final_vs_eta", w2_fit);
    out.checks.push(CheckResult::window(
        "kl-rate slope (quadratic in step)",
        kl_fit.slope,
        1.9,
        2.1,
    ));
    out.checks.push(CheckResult::window(
        "w2-rate slope (linear in step)",
        w2_fit.slope,
        0.9,
        1.1,
    ));
    out.checks.push(CheckResult::at_most(
        "mean-shift lower bound never exceeds the divergence",
        total_lb_violations as f64,
        0.0,
    ));
    out.checks.push(CheckResult::at_most(
        "fitted envelope dominates the divergence at every checkpoint",
        total_env_violations as f64,
        0.0,
    ));

    // slope stability under removal of the coarsest step
    let trimmed_fit = loglog_slope(&kl_points[1..])?;
    out.checks.push(CheckResult::at_most(
        "kl slope shift after dropping the largest step",
        (trimmed_fit.slope - kl_fit.slope).abs(),
        0.05,
    ));

    let (per_dim, spread) =
        dimension_scaling_spread(a, beta_inv, kl_points[0].0, 1.0, &[1, 2, 4, 8])?;
    for (d, v) in &per_dim {
        out.rows
            .push(ResultRow::closed_form(ID, *d as f64, "kl_per_dim", *v));
    }
    out.checks.push(CheckResult::at_most(
        "kl per dimension constant across isotropic products",
        spread,
        1e-12,
    ));

    out.plots.push(PlotSeries {
        name: "kl_sup_vs_eta".into(),
        points: kl_points,
    });
    out.plots.push(PlotSeries {
        name: "w2_final_vs_eta".into(),
        points: w2_points,
    });
    Ok(out)
}
