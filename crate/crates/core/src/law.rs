//! Closed-form law propagation for linear-drift targets.
//!
//! For `dX = -aX dt + sqrt(2/beta) dW` the exact time-t law of a Gaussian
//! start stays Gaussian, and the Euler iterate's mean and variance satisfy an
//! exact linear recursion. With mini-batch intercepts the iterate's law is a
//! Gaussian mixture; the same recursion still propagates its mean and
//! variance exactly, which is what the moment-matched surrogate exposes.

use crate::error::{Error, Result};
use crate::schedule::StepSchedule;

/// Diagonal-covariance Gaussian: a mean and a per-coordinate variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLaw {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl GaussianLaw {
    /// Variances must be finite and non-negative; divergence evaluations
    /// additionally require them strictly positive.
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != var.len() {
            return Err(Error::InvalidParameter(
                "law needs non-empty mean and variance of equal length".into(),
            ));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("law mean must be finite".into()));
        }
        if var.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "law variance must be finite and >= 0".into(),
            ));
        }
        Ok(GaussianLaw { mean, var })
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(vec![mean], vec![var])
    }

    /// `d` independent copies of the same scalar marginal.
    pub fn isotropic(dim: usize, mean: f64, var: f64) -> Result<Self> {
        Self::new(vec![mean; dim], vec![var; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }
}

/// Mean/variance pair that need not be Gaussian. `gaussian` is false for
/// mini-batch marginals, which are Gaussian mixtures; their moment-matched
/// surrogate is [`MomentLaw::surrogate`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentLaw {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub gaussian: bool,
}

impl MomentLaw {
    /// The Gaussian with the same mean and variance.
    pub fn surrogate(&self) -> Result<GaussianLaw> {
        GaussianLaw::new(self.mean.clone(), self.var.clone())
    }
}

fn validate_initial(m0: &[f64], v0: &[f64]) -> Result<()> {
    if m0.is_empty() || m0.len() != v0.len() {
        return Err(Error::InvalidParameter(
            "initial mean and variance must be non-empty and equal length".into(),
        ));
    }
    if m0.iter().any(|m| !m.is_finite()) || v0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(
            "initial moments must be finite with variance >= 0".into(),
        ));
    }
    Ok(())
}

fn validate_rate(a: f64, beta_inv: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "drift rate must be positive, got {a}"
        )));
    }
    if !(beta_inv > 0.0) || !beta_inv.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "temperature must be positive, got {beta_inv}"
        )));
    }
    Ok(())
}

/// Exact law of the linear diffusion at time `t`:
/// `m(t) = exp(-a t) m0`, `v(t) = exp(-2 a t) v0 + (1/(a beta)) (1 - exp(-2 a t))`.
pub fn ou_exact_law(a: f64, beta_inv: f64, m0: &[f64], v0: &[f64], t: f64) -> Result<GaussianLaw> {
    validate_rate(a, beta_inv)?;
    validate_initial(m0, v0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time must be >= 0, got {t}"
        )));
    }
    let decay = (-a * t).exp();
    let decay2 = (-2.0 * a * t).exp();
    let stat = beta_inv / a;
    let mean = m0.iter().map(|m| decay * m).collect();
    let var = v0
        .iter()
        .map(|v| decay2 * v + stat * (1.0 - decay2))
        .collect();
    GaussianLaw::new(mean, var)
}

/// Exact mean/variance recursion of the Euler iterate (optionally with an
/// independent zero-mean intercept of variance `s2` each step):
/// `m <- (1 - eta a) m`, `v <- (1 - eta a)^2 v + eta^2 s2 + 2 eta / beta`.
#[derive(Debug, Clone)]
pub struct MomentRecursion<'a> {
    a: f64,
    beta_inv: f64,
    s2: f64,
    schedule: &'a StepSchedule,
    mean: Vec<f64>,
    var: Vec<f64>,
    k: usize,
    t: f64,
}

impl<'a> MomentRecursion<'a> {
    pub fn new(
        a: f64,
        beta_inv: f64,
        s2: f64,
        m0: &[f64],
        v0: &[f64],
        schedule: &'a StepSchedule,
    ) -> Result<Self> {
        validate_rate(a, beta_inv)?;
        validate_initial(m0, v0)?;
        if !(s2 >= 0.0) || !s2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "intercept variance must be >= 0, got {s2}"
            )));
        }
        Ok(MomentRecursion {
            a,
            beta_inv,
            s2,
            schedule,
            mean: m0.to_vec(),
            var: v0.to_vec(),
            k: 0,
            t: 0.0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Grid time of the current index.
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn advance(&mut self) -> Result<()> {
        let eta = self.schedule.step(self.k)?;
        let ea = eta * self.a;
        if ea >= 2.0 {
            return Err(Error::UnstableStep {
                index: self.k,
                value: ea,
            });
        }
        let g = 1.0 - ea;
        let noise = eta * eta * self.s2 + 2.0 * self.beta_inv * eta;
        for m in &mut self.mean {
            *m *= g;
        }
        for v in &mut self.var {
            *v = g * g * *v + noise;
        }
        self.t = self.schedule.advance_time(self.t, self.k)?;
        self.k += 1;
        Ok(())
    }

    pub fn law(&self) -> MomentLaw {
        MomentLaw {
            mean: self.mean.clone(),
            var: self.var.clone(),
            gaussian: self.s2 == 0.0,
        }
    }
}

/// Exact law of the full-gradient Euler iterate after `k` steps.
pub fn em_law(
    a: f64,
    beta_inv: f64,
    m0: &[f64],
    v0: &[f64],
    schedule: &StepSchedule,
    k: usize,
) -> Result<GaussianLaw> {
    let mut rec = MomentRecursion::new(a, beta_inv, 0.0, m0, v0, schedule)?;
    for _ in 0..k {
        rec.advance()?;
    }
    GaussianLaw::new(rec.mean, rec.var)
}

/// Exact mean/variance of the mini-batch iterate after `k` steps, with the
/// Gaussian flag false whenever the intercept variance is positive.
pub fn sgld_moment_law(
    a: f64,
    beta_inv: f64,
    s2: f64,
    m0: &[f64],
    v0: &[f64],
    schedule: &StepSchedule,
    k: usize,
) -> Result<MomentLaw> {
    let mut rec = MomentRecursion::new(a, beta_inv, s2, m0, v0, schedule)?;
    for _ in 0..k {
        rec.advance()?;
    }
    Ok(rec.law())
}

fn validate_pair(p: &GaussianLaw, q: &GaussianLaw) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    if p.var.iter().chain(q.var.iter()).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter(
            "divergence needs strictly positive variances".into(),
        ));
    }
    Ok(())
}

/// Relative entropy of `p` from `q` for diagonal Gaussians:
/// per coordinate `(1/2) ln(vq/vp) + (1/2)(vp/vq - 1) + (mp - mq)^2 / (2 vq)`,
/// summed over coordinates. Always non-negative.
pub fn gaussian_kl(p: &GaussianLaw, q: &GaussianLaw) -> Result<f64> {
    validate_pair(p, q)?;
    let mut acc = 0.0;
    for i in 0..p.dim() {
        let r1 = (p.var[i] - q.var[i]) / q.var[i];
        let dm = p.mean[i] - q.mean[i];
        // (1/2)(r - 1 - ln r) for the variance part, written against
        // cancellation when the variances are close
        acc += 0.5 * (r1 - r1.ln_1p()) + dm * dm / (2.0 * q.var[i]);
    }
    Ok(acc)
}

/// The mean-shift part of [`gaussian_kl`] alone: `sum (mp - mq)^2 / (2 vq)`.
/// A lower bound on the divergence for every argument pair.
pub fn kl_mean_lower_bound(p: &GaussianLaw, q: &GaussianLaw) -> Result<f64> {
    validate_pair(p, q)?;
    let mut acc = 0.0;
    for i in 0..p.dim() {
        let dm = p.mean[i] - q.mean[i];
        acc += dm * dm / (2.0 * q.var[i]);
    }
    Ok(acc)
}

/// Small-step lower bound on the mean gap between the diffusion and the
/// Euler iterate at matched time, scaled into divergence units by the caller:
/// `(1/4) |EX0| exp(-T) T eta`. Valid for `0 < eta <= 0.25` (enforced).
pub fn mean_gap_lower_bound(ex0: f64, t: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 0.25) {
        return Err(Error::InvalidParameter(format!(
            "mean-gap bound is validated only for 0 < eta <= 0.25, got {eta}"
        )));
    }
    if !(t >= 0.0) || !t.is_finite() || !ex0.is_finite() {
        return Err(Error::InvalidParameter(
            "mean-gap bound needs finite inputs and t >= 0".into(),
        ));
    }
    Ok(0.25 * ex0.abs() * (-t).exp() * t * eta)
}

/// Wasserstein-2 distance between diagonal Gaussians:
/// `sqrt(sum (mp - mq)^2 + (sqrt vp - sqrt vq)^2)`.
pub fn gaussian_w2(p: &GaussianLaw, q: &GaussianLaw) -> Result<f64> {
    validate_pair(p, q)?;
    let mut acc = 0.0;
    for i in 0..p.dim() {
        let dm = p.mean[i] - q.mean[i];
        let ds = p.var[i].sqrt() - q.var[i].sqrt();
        acc += dm * dm + ds * ds;
    }
    Ok(acc.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    // closed forms evaluated directly as the independent route
    fn oracle_diffusion(t: f64) -> (f64, f64) {
        ((-t).exp(), 0.5 * (1.0 - (-2.0 * t).exp()))
    }

    fn oracle_euler(eta: f64, k: u32) -> (f64, f64) {
        let g = (1.0 - eta).powi(k as i32);
        (g, (1.0 / (2.0 - eta)) * (1.0 - g * g))
    }

    #[test]
    fn exact_law_at_zero_and_infinity() {
        let l0 = ou_exact_law(1.0, 0.5, &[1.0], &[0.25], 0.0).unwrap();
        assert_eq!(l0.mean(), &[1.0]);
        assert_eq!(l0.var(), &[0.25]);
        let linf = ou_exact_law(1.0, 0.5, &[1.0], &[0.25], 800.0).unwrap();
        assert!(linf.mean()[0].abs() < 1e-300);
        assert!((linf.var()[0] - 0.5).abs() < 1e-15);
        assert!(ou_exact_law(1.0, 0.5, &[1.0], &[0.0], -0.1).is_err());
    }

    #[test]
    fn exact_law_matches_unit_rate_closed_form() {
        let l = ou_exact_law(1.0, 0.5, &[1.0], &[0.0], 1.0).unwrap();
        let (m, v) = oracle_diffusion(1.0);
        assert_eq!(l.mean()[0], m);
        assert_eq!(l.var()[0], v);
        assert!((l.mean()[0] - 0.367_879_441_171_442_33).abs() < 1e-16);
        assert!((l.var()[0] - 0.432_332_358_381_693_65).abs() < 1e-16);
    }

    #[test]
    fn exact_law_solves_the_moment_odes() {
        // central differences of m and v against -a m and -2 a v + 2/beta
        let (a, beta_inv) = (1.3, 0.7);
        let h = 1e-4;
        for t in [0.05, 0.4, 1.7] {
            let lm = ou_exact_law(a, beta_inv, &[0.8], &[0.2], t - h).unwrap();
            let l0 = ou_exact_law(a, beta_inv, &[0.8], &[0.2], t).unwrap();
            let lp = ou_exact_law(a, beta_inv, &[0.8], &[0.2], t + h).unwrap();
            let dm = (lp.mean()[0] - lm.mean()[0]) / (2.0 * h);
            let dv = (lp.var()[0] - lm.var()[0]) / (2.0 * h);
            assert!((dm - (-a * l0.mean()[0])).abs() < 1e-6);
            assert!((dv - (-2.0 * a * l0.var()[0] + 2.0 * beta_inv)).abs() < 1e-6);
        }
    }

    #[test]
    fn euler_law_zero_steps_is_initial() {
        let s = StepSchedule::constant(0.1).unwrap();
        let l = em_law(1.0, 0.5, &[1.0], &[0.3], &s, 0).unwrap();
        assert_eq!(l.mean(), &[1.0]);
        assert_eq!(l.var(), &[0.3]);
    }

    #[test]
    fn euler_law_matches_constant_step_closed_form() {
        let s = StepSchedule::constant(0.1).unwrap();
        let l = em_law(1.0, 0.5, &[1.0], &[0.0], &s, 10).unwrap();
        let (m, v) = oracle_euler(0.1, 10);
        assert!(((l.mean()[0] - m) / m).abs() < 1e-14);
        assert!(((l.var()[0] - v) / v).abs() < 1e-14);
        assert!((l.mean()[0] - 0.348_678_440_1).abs() < 1e-10);
        assert!((l.var()[0] - 0.462_328_076_531_279_5).abs() < 1e-12);
    }

    #[test]
    fn euler_law_matches_closed_form_over_random_parameters() {
        // 100 random (eta < 0.5, k <= 1000) pairs, relative error < 1e-10
        let mut state = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let eta = 1e-3 + 0.499 * next();
            let k = 1 + (next() * 999.0) as u32;
            let s = StepSchedule::constant(eta).unwrap();
            let l = em_law(1.0, 0.5, &[1.0], &[0.0], &s, k as usize).unwrap();
            let (m, v) = oracle_euler(eta, k);
            assert!(((l.mean()[0] - m) / m.abs().max(1e-300)).abs() < 1e-10);
            assert!(((l.var()[0] - v) / v).abs() < 1e-10);
        }
    }

    #[test]
    fn euler_variance_approaches_discrete_fixed_point() {
        let s = StepSchedule::constant(0.1).unwrap();
        let l = em_law(1.0, 0.5, &[1.0], &[0.0], &s, 2000).unwrap();
        assert!((l.var()[0] - 1.0 / 1.9).abs() < 1e-15);
    }

    #[test]
    fn euler_law_rejects_unstable_steps() {
        let s = StepSchedule::constant(2.0).unwrap();
        match em_law(1.0, 0.5, &[1.0], &[0.0], &s, 3) {
            Err(Error::UnstableStep { index, value }) => {
                assert_eq!(index, 0);
                assert_eq!(value, 2.0);
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn moment_law_reduces_to_euler_without_intercepts() {
        let s = StepSchedule::constant(0.07).unwrap();
        let ml = sgld_moment_law(1.0, 0.5, 0.0, &[1.0], &[0.2], &s, 25).unwrap();
        let gl = em_law(1.0, 0.5, &[1.0], &[0.2], &s, 25).unwrap();
        assert!(ml.gaussian);
        assert_eq!(ml.mean, gl.mean());
        assert_eq!(ml.var, gl.var());
    }

    #[test]
    fn moment_law_one_step_variance() {
        let s = StepSchedule::constant(0.1).unwrap();
        let ml = sgld_moment_law(1.0, 0.5, 1.0, &[1.0], &[0.0], &s, 1).unwrap();
        assert!(!ml.gaussian);
        assert!((ml.var[0] - 0.11).abs() < 1e-16);
    }

    #[test]
    fn moment_law_fixed_point() {
        let s = StepSchedule::constant(0.1).unwrap();
        let ml = sgld_moment_law(1.0, 0.5, 1.0, &[1.0], &[0.0], &s, 3000).unwrap();
        let expected = (0.1 * 1.0 + 2.0 * 0.5) / (1.0 * (2.0 - 0.1));
        assert!((ml.var[0] - expected).abs() < 1e-15);
        assert!((expected - 0.578_947_368_421_052_7).abs() < 1e-15);
    }

    #[test]
    fn kl_of_identical_laws_is_zero() {
        let p = GaussianLaw::new(vec![0.3, -1.0], vec![0.5, 2.0]).unwrap();
        assert_eq!(gaussian_kl(&p, &p).unwrap(), 0.0);
        assert_eq!(kl_mean_lower_bound(&p, &p).unwrap(), 0.0);
        assert_eq!(gaussian_w2(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_pure_mean_shift() {
        let p = GaussianLaw::scalar(1.0, 1.0).unwrap();
        let q = GaussianLaw::scalar(0.0, 1.0).unwrap();
        assert_eq!(gaussian_kl(&p, &q).unwrap(), 0.5);
        assert_eq!(gaussian_w2(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn kl_of_matched_time_law_pair() {
        // diffusion law first, Euler law second: the sharp-rate reference pair
        let (me, ve) = oracle_diffusion(1.0);
        let (md, vd) = oracle_euler(0.1, 10);
        let exact = GaussianLaw::scalar(me, ve).unwrap();
        let euler = GaussianLaw::scalar(md, vd).unwrap();
        let kl = gaussian_kl(&exact, &euler).unwrap();
        assert!((kl - 1.498_917_781_083_088_2e-3).abs() < 1e-15);
        let lb = kl_mean_lower_bound(&exact, &euler).unwrap();
        assert!((lb - 3.987_195_033_790_927_6e-4).abs() < 1e-15);
        assert!(lb <= kl);
        let w2 = gaussian_w2(&exact, &euler).unwrap();
        assert!((w2 - 2.952_389_525_375_739_5e-2).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_is_mean_term_only() {
        let p = GaussianLaw::scalar(1.0, 2.0).unwrap();
        let q = GaussianLaw::scalar(0.0, 1.0).unwrap();
        assert_eq!(kl_mean_lower_bound(&p, &q).unwrap(), 0.5);
    }

    #[test]
    fn kl_dominates_lower_bound_on_random_pairs() {
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let p = GaussianLaw::scalar(6.0 * next() - 3.0, 0.1 + 3.0 * next()).unwrap();
            let q = GaussianLaw::scalar(6.0 * next() - 3.0, 0.1 + 3.0 * next()).unwrap();
            let kl = gaussian_kl(&p, &q).unwrap();
            let lb = kl_mean_lower_bound(&p, &q).unwrap();
            assert!(kl >= 0.0);
            assert!(kl + 1e-18 >= lb);
        }
    }

    #[test]
    fn kl_is_additive_over_isotropic_products() {
        let (me, ve) = oracle_diffusion(1.0);
        let (md, vd) = oracle_euler(0.1, 10);
        let kl1 = gaussian_kl(
            &GaussianLaw::scalar(me, ve).unwrap(),
            &GaussianLaw::scalar(md, vd).unwrap(),
        )
        .unwrap();
        for d in [1usize, 2, 4, 8] {
            let p = GaussianLaw::isotropic(d, me, ve).unwrap();
            let q = GaussianLaw::isotropic(d, md, vd).unwrap();
            let kld = gaussian_kl(&p, &q).unwrap();
            assert!(((kld / d as f64 - kl1) / kl1).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn divergences_reject_bad_inputs() {
        let p = GaussianLaw::scalar(0.0, 1.0).unwrap();
        let q2 = GaussianLaw::isotropic(2, 0.0, 1.0).unwrap();
        assert!(gaussian_kl(&p, &q2).is_err());
        let degenerate = GaussianLaw::scalar(0.0, 0.0).unwrap();
        assert!(gaussian_kl(&p, &degenerate).is_err());
        assert!(gaussian_w2(&p, &degenerate).is_err());
        assert!(GaussianLaw::scalar(f64::NAN, 1.0).is_err());
        assert!(GaussianLaw::scalar(0.0, -1.0).is_err());
    }

    #[test]
    fn mean_gap_bound_examples() {
        assert_eq!(mean_gap_lower_bound(0.0, 1.0, 0.1).unwrap(), 0.0);
        let b = mean_gap_lower_bound(1.0, 1.0, 0.1).unwrap();
        assert!((b - 9.196_986_029_286_059e-3).abs() < 1e-15);
        let gap = ((-1.0f64).exp() - 0.9f64.powi(10)).abs();
        assert!(gap >= b);
        let b2 = mean_gap_lower_bound(1.0, 2.0, 0.05).unwrap();
        assert!((b2 - 3.383_382_080_915_317_7e-3).abs() < 1e-15);
        let gap2 = ((-2.0f64).exp() - 0.95f64.powi(40)).abs();
        assert!(gap2 >= b2);
        assert!(mean_gap_lower_bound(1.0, 1.0, 0.3).is_err());
        assert!(mean_gap_lower_bound(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn mean_gap_bound_holds_across_validated_range() {
        // |e^-T - (1-eta)^{T/eta}| |EX0| exceeds the bound for eta <= 0.25
        for eta in [0.25, 0.2, 0.1, 0.05, 0.02] {
            let mut k = 1;
            loop {
                let t = eta * k as f64;
                if t > 12.0 {
                    break;
                }
                let gap = ((-t).exp() - (1.0 - eta).powi(k)).abs();
                let bound = mean_gap_lower_bound(1.0, t, eta).unwrap();
                assert!(gap >= bound, "eta={eta} T={t}: {gap} < {bound}");
                k += 1;
            }
        }
    }
}
