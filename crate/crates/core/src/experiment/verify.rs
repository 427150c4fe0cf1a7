//! The cross-module property battery behind the `verify` subcommand: batch
//! consistency, closed-form reference values, moment boundedness, metric
//! axioms, Monte Carlo agreement, and a negative control that proves the
//! suite notices a wrong divergence argument order.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::Distribution;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::experiment::{CheckResult, ExperimentOutput};
use crate::law::{
    em_law, gaussian_kl, gaussian_w2, kl_mean_lower_bound, ou_exact_law, sgld_moment_law,
    GaussianLaw,
};
use crate::metrics::{empirical_w1_1d, empirical_w2_1d, kl_quadrature_1d, SampleSet};
use crate::model::{
    check_consistency, exhaustive_batch_mean, validate_metadata, BatchSpec, Potential,
};
use crate::sampler::{run_ensemble, InitialLaw, SamplerConfig};
use crate::schedule::StepSchedule;

pub const ID: &str = "verify";

fn two_offset_potential() -> Potential {
    Potential::linear_drift(1.0, vec![vec![-1.0], vec![1.0]]).expect("canonical potential")
}

/// Matched-time reference pair at unit rate: the exact diffusion law and the
/// Euler law at T = 1, eta = 0.1, from a point mass at 1 with temperature 1/2.
fn reference_pair() -> (GaussianLaw, GaussianLaw) {
    let sched = StepSchedule::constant(0.1).unwrap();
    let exact = ou_exact_law(1.0, 0.5, &[1.0], &[0.0], 1.0).unwrap();
    let euler = em_law(1.0, 0.5, &[1.0], &[0.0], &sched, 10).unwrap();
    (exact, euler)
}

/// Closed-form reproduction of the matched-time pair: means, variances, the
/// divergence value, and its mean-shift lower bound, all against directly
/// evaluated displays.
pub fn closed_form_reference() -> Vec<CheckResult> {
    let (exact, euler) = reference_pair();
    // direct evaluation, independent of the recursion path
    let m1 = (-1.0f64).exp();
    let v1 = 0.5 * (1.0 - (-2.0f64).exp());
    let m2 = 0.9f64.powi(10);
    let v2 = (1.0 / 1.9) * (1.0 - 0.9f64.powi(20));
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let mut checks = vec![
        CheckResult::at_most(
            "diffusion mean matches the closed form",
            rel(exact.mean()[0], m1),
            1e-12,
        ),
        CheckResult::at_most(
            "diffusion variance matches the closed form",
            rel(exact.var()[0], v1),
            1e-12,
        ),
        CheckResult::at_most(
            "iterate mean matches the closed form",
            rel(euler.mean()[0], m2),
            1e-12,
        ),
        CheckResult::at_most(
            "iterate variance matches the closed form",
            rel(euler.var()[0], v2),
            1e-12,
        ),
    ];
    let kl = gaussian_kl(&exact, &euler).unwrap();
    let kl_direct =
        0.5 * (v2 / v1).ln() + 0.5 * (v1 / v2 - 1.0) + (m1 - m2) * (m1 - m2) / (2.0 * v2);
    checks.push(CheckResult::at_most(
        "divergence of the pair matches the three-term formula",
        rel(kl, kl_direct),
        1e-12,
    ));
    checks.push(CheckResult::at_most(
        "divergence of the pair matches the frozen reference 1.4989e-3",
        (kl - 1.498_917_781_083_088_2e-3).abs(),
        1e-15,
    ));
    let lb = kl_mean_lower_bound(&exact, &euler).unwrap();
    checks.push(CheckResult::at_most(
        "mean-shift lower bound matches (mu1 - mu2)^2 / (2 sigma2^2)",
        rel(lb, (m1 - m2) * (m1 - m2) / (2.0 * v2)),
        1e-12,
    ));
    checks.push(CheckResult::new(
        "lower bound does not exceed the divergence",
        format!("<= {kl}"),
        format!("{lb}"),
        lb <= kl,
    ));
    let w2 = gaussian_w2(&exact, &euler).unwrap();
    checks.push(CheckResult::at_most(
        "transport distance of the pair matches the frozen reference 2.9524e-2",
        (w2 - 2.952_389_525_375_739_5e-2).abs(),
        1e-15,
    ));
    checks
}

/// Negative control: feeding the divergence the swapped argument order still
/// passes the lower-bound inequality, but the closed-form cross-check must
/// flag the mismatch. Passes when the mismatch is detected.
pub fn kl_order_negative_control() -> Vec<CheckResult> {
    let (exact, euler) = reference_pair();
    let reference = 1.498_917_781_083_088_2e-3;
    let swapped = gaussian_kl(&euler, &exact).unwrap();
    let lb_swapped = kl_mean_lower_bound(&euler, &exact).unwrap();
    vec![
        CheckResult::new(
            "swapped order still satisfies its own lower bound (no detection there)",
            format!("<= {swapped}"),
            format!("{lb_swapped}"),
            lb_swapped <= swapped,
        ),
        CheckResult::new(
            "closed-form cross-check flags the swapped argument order",
            format!("relative mismatch from {reference} > 1e-3"),
            format!("{}", ((swapped - reference) / reference).abs()),
            ((swapped - reference) / reference).abs() > 1e-3,
        ),
    ]
}

/// Batch-drift consistency: Monte Carlo deviation within the normal band at
/// `samples` draws for `points` random states, and exact exhaustive averages.
pub fn batch_consistency(seed: u64, samples: usize, points: usize) -> Result<Vec<CheckResult>> {
    let p = two_offset_potential();
    let spec = BatchSpec::with_replacement(1)?;
    let band = 4.0 * p.meta().batch_deviation.unwrap() / (samples as f64).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xBA7C);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = [rand::Rng::random_range(&mut rng, -5.0..5.0)];
        let rep = check_consistency(&p, &spec, &x, samples, &mut rng)?;
        worst = worst.max(rep.deviation);
    }
    let mut checks = vec![CheckResult::at_most(
        &format!("monte-carlo batch mean within 4B/sqrt(M) of the drift ({points} states, M = {samples})"),
        worst,
        band,
    )];
    let mut worst_ex = 0.0f64;
    for x in [-3.0, -0.4, 0.0, 0.7, 4.2] {
        let rep = exhaustive_batch_mean(&p, &spec, &[x])?;
        worst_ex = worst_ex.max(rep.deviation);
    }
    checks.push(CheckResult::at_most(
        "exhaustive batch average deviation is zero to machine precision",
        worst_ex,
        1e-15,
    ));
    let full = BatchSpec::new(2, false)?;
    let rep = check_consistency(&p, &full, &[0.37], 100, &mut rng)?;
    checks.push(CheckResult::at_most(
        "full-batch deviation is exactly zero",
        rep.deviation,
        0.0,
    ));
    Ok(checks)
}

/// Second-moment boundedness of the mini-batch chain on the linear model:
/// the empirical second moment never exceeds three times the larger of the
/// initial second moment and the stationary level plus the intercept spread.
pub fn moment_bound(
    seed: u64,
    chains: usize,
    eta: f64,
    horizon_t: f64,
) -> Result<Vec<CheckResult>> {
    let p = two_offset_potential();
    let a = 1.0;
    let beta_inv = 0.5;
    let spec = BatchSpec::with_replacement(1)?;
    let s2 = p.intercept_variance(&spec).unwrap();
    let max_offset_sq = 1.0;
    let cfg = SamplerConfig::new(
        beta_inv,
        StepSchedule::constant(eta)?,
        Some(spec),
        seed ^ 0x0B0D,
        InitialLaw::point(vec![1.0])?,
    )?;
    let steps = (horizon_t / eta).round() as usize;
    let every = (steps / 50).max(1);
    let checkpoints: Vec<usize> = (1..=steps).filter(|k| k % every == 0).collect();
    let run = run_ensemble(&p, &cfg, chains, steps, &checkpoints)?;
    let stationary = (eta * s2 + 2.0 * beta_inv) / (a * (2.0 - eta * a));
    let bound = 3.0 * 1.0f64.max(stationary + max_offset_sq);
    let worst = run
        .snapshots
        .iter()
        .map(|s| s.mean_sq_norm())
        .fold(0.0f64, f64::max);
    Ok(vec![CheckResult::at_most(
        &format!(
            "empirical second moment below {bound:.4} at {} checkpoints to T = {horizon_t} ({chains} chains, no divergence)",
            run.snapshots.len()
        ),
        worst,
        bound,
    )])
}

/// Metric axioms and agreement checks for the empirical divergences.
pub fn metric_axioms(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xA110);
    let mut worst_sym = 0.0f64;
    let mut worst_tri = f64::NEG_INFINITY;
    let mut worst_order = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let mut draw = || -> Result<SampleSet> {
            SampleSet::new(
                (0..8)
                    .map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0))
                    .collect(),
            )
        };
        let a = draw()?;
        let b = draw()?;
        let c = draw()?;
        for w in [empirical_w1_1d, empirical_w2_1d] {
            worst_sym = worst_sym.max((w(&a, &b) - w(&b, &a)).abs());
            worst_tri = worst_tri.max(w(&a, &b) - w(&a, &c) - w(&c, &b));
        }
        worst_order = worst_order.max(empirical_w1_1d(&a, &b) - empirical_w2_1d(&a, &b));
    }
    Ok(vec![
        CheckResult::at_most(
            "transport distances are symmetric (1000 triples)",
            worst_sym,
            1e-12,
        ),
        CheckResult::at_most("triangle inequality holds (1000 triples)", worst_tri, 1e-12),
        CheckResult::at_most("W1 <= W2 on every tested pair", worst_order, 1e-12),
    ])
}

/// Simpson quadrature agrees with the closed-form Gaussian divergence.
pub fn quadrature_agreement(seed: u64, pairs: usize) -> Result<CheckResult> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x51AD);
    let ln_norm = |v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln();
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let m1 = rand::Rng::random_range(&mut rng, -3.0..3.0);
        let m2 = rand::Rng::random_range(&mut rng, -3.0..3.0);
        let v1 = rand::Rng::random_range(&mut rng, 0.3..3.0);
        let v2 = rand::Rng::random_range(&mut rng, 0.3..3.0);
        let p = GaussianLaw::scalar(m1, v1)?;
        let q = GaussianLaw::scalar(m2, v2)?;
        let exact = gaussian_kl(&p, &q)?;
        let lo = m1.min(m2) - 14.0 * v1.max(v2).sqrt();
        let hi = m1.max(m2) + 14.0 * v1.max(v2).sqrt();
        let quad = kl_quadrature_1d(
            |x| -0.5 * (x - m1) * (x - m1) / v1 + ln_norm(v1),
            |x| -0.5 * (x - m2) * (x - m2) / v2 + ln_norm(v2),
            lo,
            hi,
            4001,
        )?;
        worst = worst.max((quad - exact).abs());
    }
    Ok(CheckResult::at_most(
        &format!("quadrature divergence within 1e-6 of closed form ({pairs} pairs)"),
        worst,
        1e-6,
    ))
}

/// Histogram total-variation noise floor: two independent standard normal
/// sample sets at scale `m` over 64 shared bins should sit near the binomial
/// bin-noise level, well under 0.03.
pub fn tv_noise_floor(seed: u64, m: usize) -> Result<CheckResult> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x7F00);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let draw = |rng: &mut ChaCha12Rng| -> Result<SampleSet> {
        SampleSet::new((0..m).map(|_| normal.sample(rng)).collect())
    };
    let a = draw(&mut rng)?;
    let b = draw(&mut rng)?;
    let tv = crate::metrics::empirical_tv_hist(&a, &b, 64, (-5.0, 5.0))?;
    Ok(CheckResult::at_most(
        &format!("histogram TV of two independent standard normal sets at M = {m}"),
        tv,
        0.03,
    ))
}

/// Sorted-coupling transport distance against the closed form at Monte Carlo
/// scale `m`.
pub fn empirical_w2_agreement(seed: u64, m: usize) -> Result<CheckResult> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xE2E2);
    let (m1, v1, m2, v2) = (0.3, 0.8, -0.5, 1.6);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let draw = |rng: &mut ChaCha12Rng, mu: f64, var: f64| -> Result<SampleSet> {
        SampleSet::new(
            (0..m)
                .map(|_| mu + var.sqrt() * normal.sample(rng))
                .collect(),
        )
    };
    let a = draw(&mut rng, m1, v1)?;
    let b = draw(&mut rng, m2, v2)?;
    let emp = empirical_w2_1d(&a, &b);
    let exact = gaussian_w2(&GaussianLaw::scalar(m1, v1)?, &GaussianLaw::scalar(m2, v2)?)?;
    let tol = 5.0 / (m as f64).sqrt() * (1.0 + v1.sqrt() + v2.sqrt());
    Ok(CheckResult::at_most(
        &format!("empirical W2 within {tol:.5} of the closed form at M = {m}"),
        (emp - exact).abs(),
        tol,
    ))
}

/// From a point mass, one full-gradient step has a Gaussian law with mean
/// `x + eta b(x)` and per-coordinate variance `2 eta / beta`.
pub fn one_step_exactness(seed: u64, chains: usize) -> Result<Vec<CheckResult>> {
    let p = two_offset_potential();
    let eta = 0.1;
    let beta_inv = 0.5;
    let x0 = 0.7;
    let cfg = SamplerConfig::new(
        beta_inv,
        StepSchedule::constant(eta)?,
        None,
        seed ^ 0x15E9,
        InitialLaw::point(vec![x0])?,
    )?;
    let run = run_ensemble(&p, &cfg, chains, 1, &[1])?;
    let snap = &run.snapshots[0];
    let want_mean = x0 + eta * (-x0);
    let want_var = 2.0 * beta_inv * eta;
    Ok(vec![
        CheckResult::at_most(
            "one-step mean within 5 standard errors",
            (snap.mean()[0] - want_mean).abs() / snap.se_mean()[0],
            5.0,
        ),
        CheckResult::at_most(
            "one-step variance within 5 standard errors",
            (snap.var()[0] - want_var).abs() / snap.se_var()[0],
            5.0,
        ),
    ])
}

/// Full-batch mini-batch chains reproduce full-gradient chains bit for bit
/// from a shared stream.
pub fn full_batch_equivalence(seed: u64) -> Result<CheckResult> {
    let p = two_offset_potential();
    let sched = StepSchedule::constant(0.1)?;
    let mk = |batch| {
        SamplerConfig::new(
            0.5,
            sched.clone(),
            batch,
            seed ^ 0xF0B1,
            InitialLaw::point(vec![1.0]).unwrap(),
        )
        .unwrap()
    };
    let cfg_full = mk(Some(BatchSpec::new(2, false)?));
    let cfg_ula = mk(None);
    let mut a = crate::sampler::ChainState::new(&cfg_full, 0);
    let mut b = crate::sampler::ChainState::new(&cfg_ula, 0);
    let mut identical = true;
    for _ in 0..100 {
        crate::sampler::sgld_step(&mut a, &p, &cfg_full, None, None)?;
        crate::sampler::ula_step(&mut b, &p, &cfg_ula, None)?;
        identical &= a.x[0].to_bits() == b.x[0].to_bits();
    }
    Ok(CheckResult::new(
        "full-batch chain equals full-gradient chain bit for bit (100 steps)",
        "bitwise equal".into(),
        if identical {
            "bitwise equal".into()
        } else {
            "diverged".into()
        },
        identical,
    ))
}

/// Isotropic product divergence is additive across dimensions.
pub fn dimension_scaling() -> Result<CheckResult> {
    let (_, spread) =
        crate::experiment::rate_sweep::dimension_scaling_spread(1.0, 0.5, 0.1, 1.0, &[1, 2, 4, 8])?;
    Ok(CheckResult::at_most(
        "divergence per dimension constant across 1, 2, 4, 8 dimensions",
        spread,
        1e-12,
    ))
}

/// The per-interval envelope sum agrees with the analytic constant-schedule
/// expression.
pub fn envelope_agreement() -> Result<CheckResult> {
    let sched = StepSchedule::constant(0.1)?;
    let params = crate::schedule::BoundParams::new(1.0, 1.0, 1.0, 1)?;
    let mut worst = 0.0f64;
    for k in [1usize, 5, 10, 50, 200, 1000] {
        let v = crate::schedule::bound_envelope(&sched, &params, k)?;
        let t_k = 0.1 * k as f64;
        let analytic = 0.01 * (-t_k).exp() + 0.01 * (1.0 - (-t_k).exp());
        worst = worst.max(((v - analytic) / analytic).abs());
    }
    Ok(CheckResult::at_most(
        "envelope matches the analytic constant-schedule form",
        worst,
        1e-12,
    ))
}

/// Declared potential metadata survives sampling spot checks.
pub fn metadata_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x3E7A);
    let mut out = Vec::new();
    for (name, p) in [
        ("linear two-offset", two_offset_potential()),
        (
            "mixture",
            Potential::gaussian_mixture_1d(vec![0.5, 0.5], vec![-1.0, 1.0], 0.5)?,
        ),
    ] {
        for check in validate_metadata(&p, 1000, &mut rng)? {
            out.push(CheckResult::new(
                &format!("{name}: {}", check.name),
                format!("<= {}", check.bound),
                format!("{}", check.worst),
                check.pass,
            ));
        }
    }
    Ok(out)
}

/// Finite differences of the exact law solve the first two moment equations.
pub fn moment_ode_check() -> Result<CheckResult> {
    let (a, beta_inv) = (1.0, 0.5);
    let h = 1e-4;
    let mut worst = 0.0f64;
    for t in [0.05, 0.3, 1.0, 2.5] {
        let lm = ou_exact_law(a, beta_inv, &[1.0], &[0.2], t - h)?;
        let l0 = ou_exact_law(a, beta_inv, &[1.0], &[0.2], t)?;
        let lp = ou_exact_law(a, beta_inv, &[1.0], &[0.2], t + h)?;
        let dm = (lp.mean()[0] - lm.mean()[0]) / (2.0 * h);
        let dv = (lp.var()[0] - lm.var()[0]) / (2.0 * h);
        worst = worst.max((dm + a * l0.mean()[0]).abs());
        worst = worst.max((dv + 2.0 * a * l0.var()[0] - 2.0 * beta_inv).abs());
    }
    Ok(CheckResult::at_most(
        "exact law satisfies the moment equations (central differences)",
        worst,
        1e-6,
    ))
}

/// Zero-intercept surrogate reduces exactly to the full-gradient law.
pub fn surrogate_reduction() -> Result<CheckResult> {
    let sched = StepSchedule::constant(0.07)?;
    let ml = sgld_moment_law(1.0, 0.5, 0.0, &[1.0], &[0.2], &sched, 40)?;
    let gl = em_law(1.0, 0.5, &[1.0], &[0.2], &sched, 40)?;
    let same = ml.mean == gl.mean() && ml.var == gl.var() && ml.gaussian;
    Ok(CheckResult::new(
        "zero-intercept surrogate equals the full-gradient law exactly",
        "equal".into(),
        if same {
            "equal".into()
        } else {
            "different".into()
        },
        same,
    ))
}

/// Run the whole battery. Sizes follow the configured chain counts; the
/// default configuration reproduces the standard acceptance runs.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::new(ID);
    let seed = cfg.seed;
    out.checks.extend(closed_form_reference());
    out.checks.extend(kl_order_negative_control());
    out.checks.extend(batch_consistency(seed, 10_000, 20)?);
    out.checks
        .extend(moment_bound(seed, cfg.chains, 0.1, 100.0)?);
    out.checks.extend(metric_axioms(seed)?);
    out.checks.push(quadrature_agreement(seed, 100)?);
    out.checks.push(empirical_w2_agreement(seed, 100_000)?);
    out.checks.push(tv_noise_floor(seed, 100_000)?);
    out.checks.extend(one_step_exactness(seed, 100_000)?);
    out.checks.push(full_batch_equivalence(seed)?);
    out.checks.push(dimension_scaling()?);
    out.checks.push(envelope_agreement()?);
    out.checks.extend(metadata_checks(seed)?);
    out.checks.push(moment_ode_check()?);
    out.checks.push(surrogate_reduction()?);

    // contraction as part of the battery
    let mut ccfg = ExperimentConfig::default_for(ExperimentKind::Contraction);
    ccfg.seed = seed;
    let contraction_out = crate::experiment::contraction::run(&ccfg)?;
    out.checks.extend(contraction_out.checks);

    out.notes.push(format!(
        "battery sizes: consistency M = 10^4 x 20 states; moment bound {} chains to T = 100; \
one-step and transport agreement at 10^5 draws; contraction {} chains",
        cfg.chains, ccfg.chains
    ));
    Ok(out)
}
