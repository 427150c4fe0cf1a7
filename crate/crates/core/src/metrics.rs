//! Empirical divergences between 1-D sample sets and reference densities,
//! plus log-log rate fitting.
//!
//! The one-dimensional restriction is deliberate: sorted coupling makes the
//! empirical Wasserstein distances exact, so quantitative assertions do not
//! inherit solver error from an approximate transport plan.

use crate::error::{Error, Result};

/// Uniformly weighted 1-D sample set, validated non-empty and finite.
#[derive(Debug, Clone)]
pub struct SampleSet {
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("sample set is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "sample set contains non-finite entries".into(),
            ));
        }
        Ok(SampleSet { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: construction rejects empty sets.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }
}

/// Midpoint quantiles of a sorted sample, linearly interpolated, used to
/// resample unequal-size inputs down to a common size.
fn resample_sorted(sorted: &[f64], n: usize) -> Vec<f64> {
    let m = sorted.len();
    if m == n {
        return sorted.to_vec();
    }
    (0..n)
        .map(|i| {
            let q = (i as f64 + 0.5) / n as f64;
            let pos = q * m as f64 - 0.5;
            if pos <= 0.0 {
                sorted[0]
            } else if pos >= (m - 1) as f64 {
                sorted[m - 1]
            } else {
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
            }
        })
        .collect()
}

fn coupled_mean<F: Fn(f64) -> f64>(a: &SampleSet, b: &SampleSet, cost: F) -> f64 {
    let mut xs = a.sorted();
    let mut ys = b.sorted();
    let n = xs.len().min(ys.len());
    if xs.len() != n {
        xs = resample_sorted(&xs, n);
    }
    if ys.len() != n {
        ys = resample_sorted(&ys, n);
    }
    xs.iter().zip(&ys).map(|(x, y)| cost(x - y)).sum::<f64>() / n as f64
}

/// Exact Wasserstein-1 distance between the two empirical measures (sorted
/// coupling); unequal sizes are resampled to the smaller via quantile
/// interpolation.
pub fn empirical_w1_1d(a: &SampleSet, b: &SampleSet) -> f64 {
    coupled_mean(a, b, f64::abs)
}

/// Exact Wasserstein-2 distance between the two empirical measures.
pub fn empirical_w2_1d(a: &SampleSet, b: &SampleSet) -> f64 {
    coupled_mean(a, b, |d| d * d).sqrt()
}

/// Histogram total-variation estimate on shared bin edges over `range`;
/// out-of-range mass is accumulated into the edge bins.
pub fn empirical_tv_hist(
    a: &SampleSet,
    b: &SampleSet,
    bins: usize,
    range: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = range;
    if bins < 2 {
        return Err(Error::InvalidParameter(format!(
            "histogram needs at least 2 bins, got {bins}"
        )));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "degenerate histogram range [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let count = |set: &SampleSet| {
        let mut c = vec![0.0f64; bins];
        for &x in set.values() {
            let idx = ((x - lo) / width).floor() as isize;
            let idx = idx.clamp(0, bins as isize - 1) as usize;
            c[idx] += 1.0;
        }
        let inv = 1.0 / set.len() as f64;
        for v in &mut c {
            *v *= inv;
        }
        c
    };
    let pa = count(a);
    let pb = count(b);
    Ok(0.5 * pa.iter().zip(&pb).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Composite Simpson estimate of the relative entropy
/// `integral of p log(p/q)` from log-densities on `[lo, hi]` with `n` nodes
/// (an even `n` is bumped to the next odd count).
pub fn kl_quadrature_1d<P, Q>(logp: P, logq: Q, lo: f64, hi: f64, n: usize) -> Result<f64>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "degenerate quadrature range [{lo}, {hi}]"
        )));
    }
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "quadrature needs at least 3 nodes, got {n}"
        )));
    }
    let n = if n.is_multiple_of(2) { n + 1 } else { n };
    let h = (hi - lo) / (n - 1) as f64;
    let integrand = |x: f64| -> Result<f64> {
        let lp = logp(x);
        let w = lp.exp();
        if w == 0.0 {
            return Ok(0.0);
        }
        let v = w * (lp - logq(x));
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite integrand at x = {x}"
            )));
        }
        Ok(v)
    };
    let mut acc = integrand(lo)? + integrand(hi)?;
    for i in 1..n - 1 {
        let x = lo + h * i as f64;
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * integrand(x)?;
    }
    Ok(acc * h / 3.0)
}

/// Log-log least-squares fit of a positive series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Exponent estimate: slope of `ln y` against `ln x`.
    pub slope: f64,
    /// Intercept of the fit in log space.
    pub intercept: f64,
    /// Coefficient of determination in log space.
    pub r2: f64,
}

/// Fit `ln y = slope ln x + intercept` by least squares.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if points
        .iter()
        .any(|(x, y)| !(*x > 0.0) || !(*y > 0.0) || !x.is_finite() || !y.is_finite())
    {
        return Err(Error::InvalidParameter(
            "rate fit needs strictly positive finite coordinates".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "rate fit needs at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = logs.iter().map(|(_, y)| (y - my) * (y - my)).sum();
    let ss_res: f64 = logs
        .iter()
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[f64]) -> SampleSet {
        SampleSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn wasserstein_of_identical_sets_is_zero() {
        let a = set(&[0.3, -1.0, 2.0]);
        assert_eq!(empirical_w1_1d(&a, &a), 0.0);
        assert_eq!(empirical_w2_1d(&a, &a), 0.0);
    }

    #[test]
    fn wasserstein_of_unit_shift() {
        let a = set(&[0.0, 2.0]);
        let b = set(&[1.0, 3.0]);
        assert_eq!(empirical_w1_1d(&a, &b), 1.0);
        assert_eq!(empirical_w2_1d(&a, &b), 1.0);
    }

    #[test]
    fn wasserstein_sorted_coupling_examples() {
        assert_eq!(empirical_w1_1d(&set(&[0.0, 0.0]), &set(&[0.0, 1.0])), 0.5);
        let w2 = empirical_w2_1d(&set(&[0.0, 0.0]), &set(&[0.0, 2.0]));
        assert!((w2 - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unequal_sizes_resample_to_the_smaller() {
        // quantile resampling of a linear ramp keeps it a linear ramp
        let big: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let small: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = empirical_w1_1d(&set(&big), &set(&small));
        assert!(d < 2e-3, "{d}");
    }

    #[test]
    fn empty_sets_are_rejected_at_construction() {
        assert!(SampleSet::new(vec![]).is_err());
        assert!(SampleSet::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn tv_of_identical_and_disjoint_sets() {
        let a = set(&[-1.0, -0.75, -0.5, -0.25]);
        let b = set(&[0.25, 0.5, 0.75, 1.0]);
        assert_eq!(empirical_tv_hist(&a, &a, 16, (-2.0, 2.0)).unwrap(), 0.0);
        assert_eq!(empirical_tv_hist(&a, &b, 16, (-2.0, 2.0)).unwrap(), 1.0);
        assert!(empirical_tv_hist(&a, &b, 1, (-2.0, 2.0)).is_err());
        assert!(empirical_tv_hist(&a, &b, 16, (2.0, -2.0)).is_err());
    }

    #[test]
    fn tv_accumulates_out_of_range_mass_into_edge_bins() {
        let a = set(&[-100.0, -100.0]);
        let b = set(&[100.0, 100.0]);
        assert_eq!(empirical_tv_hist(&a, &b, 4, (-1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(empirical_tv_hist(&a, &a, 4, (-1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_kl_of_equal_densities_is_zero() {
        let logp = |x: f64| -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln();
        let v = kl_quadrature_1d(logp, logp, -10.0, 10.0, 2001).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn quadrature_kl_matches_gaussian_closed_form() {
        let ln_norm = |v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln();
        let logp = move |x: f64| -0.5 * (x - 1.0) * (x - 1.0) + ln_norm(1.0);
        let logq = move |x: f64| -0.5 * x * x + ln_norm(1.0);
        let v = kl_quadrature_1d(logp, logq, -10.0, 12.0, 4001).unwrap();
        assert!((v - 0.5).abs() < 1e-8, "{v}");
    }

    #[test]
    fn quadrature_self_convergence_on_mixture() {
        // equal-weight mixture at +-0.1 versus a moment-matched Gaussian
        let ln_norm = |v: f64| -0.5 * (2.0 * std::f64::consts::PI * v).ln();
        let logp = move |x: f64| {
            let e1 = (-0.5 * (x - 0.1) * (x - 0.1)).exp();
            let e2 = (-0.5 * (x + 0.1) * (x + 0.1)).exp();
            (0.5 * (e1 + e2)).ln() + ln_norm(1.0)
        };
        let logq = move |x: f64| -0.5 * x * x / 1.01 + ln_norm(1.01);
        let coarse = kl_quadrature_1d(logp, logq, -10.0, 10.0, 4001).unwrap();
        let fine = kl_quadrature_1d(logp, logq, -10.0, 10.0, 8001).unwrap();
        assert!((coarse - fine).abs() < 1e-6);
    }

    #[test]
    fn quadrature_rejects_non_finite_integrand() {
        let logp = |_x: f64| 0.0; // improper but finite weight
        let logq = |_x: f64| f64::NEG_INFINITY;
        assert!(kl_quadrature_1d(logp, logq, 0.0, 1.0, 101).is_err());
    }

    #[test]
    fn loglog_fits_exact_power_law() {
        let fit = loglog_slope(&[(1.0, 1.0), (2.0, 4.0), (4.0, 16.0)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
    }

    #[test]
    fn loglog_flat_series_has_zero_slope() {
        let fit = loglog_slope(&[(1.0, 0.7), (2.0, 0.7)]).unwrap();
        assert_eq!(fit.slope, 0.0);
        assert_eq!(fit.r2, 1.0);
    }

    #[test]
    fn loglog_matches_matched_time_divergence_pair() {
        // two points from the exact unit-rate laws at T = 1
        let kl = |eta: f64, k: i32| {
            let me = (-1.0f64).exp();
            let ve = 0.5 * (1.0 - (-2.0f64).exp());
            let md = (1.0 - eta).powi(k);
            let vd = (1.0 / (2.0 - eta)) * (1.0 - md * md);
            let r1 = (ve - vd) / vd;
            0.5 * (r1 - r1.ln_1p()) + (me - md) * (me - md) / (2.0 * vd)
        };
        let fit = loglog_slope(&[(0.1, kl(0.1, 10)), (0.05, kl(0.05, 20))]).unwrap();
        assert!(
            (fit.slope - 2.014_843_406_136_358_7).abs() < 1e-12,
            "{}",
            fit.slope
        );
        // and with the rounded figures reported for the same pair
        let rounded = loglog_slope(&[(0.1, 1.4979e-3), (0.05, 3.702e-4)]).unwrap();
        assert!((rounded.slope - 2.017).abs() < 1e-3);
    }

    #[test]
    fn loglog_rejects_degenerate_inputs() {
        assert!(loglog_slope(&[(1.0, 1.0)]).is_err());
        assert!(loglog_slope(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(loglog_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_err());
        assert!(loglog_slope(&[(-1.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn wasserstein_metric_axioms_on_random_triples() {
        let mut state = 0xD1B54A32D192ED03u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let n = 8;
            let draw = |next: &mut dyn FnMut() -> f64| {
                SampleSet::new((0..n).map(|_| 4.0 * next() - 2.0).collect()).unwrap()
            };
            let a = draw(&mut next);
            let b = draw(&mut next);
            let c = draw(&mut next);
            for (w, name) in [
                (empirical_w1_1d as fn(&SampleSet, &SampleSet) -> f64, "w1"),
                (empirical_w2_1d as fn(&SampleSet, &SampleSet) -> f64, "w2"),
            ] {
                let ab = w(&a, &b);
                let ba = w(&b, &a);
                assert!((ab - ba).abs() < 1e-12, "{name} symmetry");
                let ac = w(&a, &c);
                let cb = w(&c, &b);
                assert!(ab <= ac + cb + 1e-12, "{name} triangle");
            }
            assert!(empirical_w1_1d(&a, &b) <= empirical_w2_1d(&a, &b) + 1e-12);
        }
    }
}
