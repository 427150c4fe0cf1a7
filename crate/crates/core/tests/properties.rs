//! Property tests for the schedule, law, and metric invariants.

use proptest::prelude::*;

use sgld::law::{gaussian_kl, gaussian_w2, kl_mean_lower_bound, GaussianLaw};
use sgld::metrics::{empirical_w1_1d, empirical_w2_1d, SampleSet};
use sgld::schedule::{bound_envelope, BoundParams, StepSchedule};

fn non_increasing_steps() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.01f64..1.0, 2..20).prop_map(|mut v| {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    })
}

fn scalar_law() -> impl Strategy<Value = GaussianLaw> {
    (-3.0f64..3.0, 0.1f64..4.0).prop_map(|(m, v)| GaussianLaw::scalar(m, v).unwrap())
}

fn same_size_triple() -> impl Strategy<Value = (SampleSet, SampleSet, SampleSet)> {
    // the metric axioms hold exactly on fixed-size sample sets
    (2usize..24).prop_flat_map(|n| {
        let one = proptest::collection::vec(-5.0f64..5.0, n);
        (one.clone(), one.clone(), one).prop_map(|(a, b, c)| {
            (
                SampleSet::new(a).unwrap(),
                SampleSet::new(b).unwrap(),
                SampleSet::new(c).unwrap(),
            )
        })
    })
}

proptest! {
    #[test]
    fn grid_times_strictly_increase(steps in non_increasing_steps()) {
        let s = StepSchedule::explicit(steps.clone()).unwrap();
        let mut prev = -1.0;
        for k in 0..=steps.len() {
            let t = s.grid_time(k).unwrap();
            prop_assert!(t > prev);
            prev = t;
        }
    }

    #[test]
    fn weight_is_non_increasing_for_non_increasing_schedules(steps in non_increasing_steps()) {
        let s = StepSchedule::explicit(steps.clone()).unwrap();
        let horizon: f64 = steps.iter().sum();
        let mut prev = f64::INFINITY;
        let mut t = 0.0;
        while t < horizon * 0.999 {
            let w = s.weight_f(t).unwrap();
            prop_assert!(w <= prev + 1e-15);
            prev = w;
            t += horizon / 257.0;
        }
    }

    #[test]
    fn envelope_scales_with_the_squared_initial_step(
        eta in 0.01f64..0.4,
        k in 1usize..200,
        a0 in 0.2f64..3.0,
    ) {
        let p = BoundParams::new(a0, 1.0, 1.0, 1).unwrap();
        let base = StepSchedule::constant(eta).unwrap();
        let doubled = StepSchedule::constant(2.0 * eta).unwrap();
        // doubling every step quadruples each interval's contribution at
        // matched index up to the grid-time change; compare at k = 0 where
        // the statement is exact
        let v0 = bound_envelope(&base, &p, 0).unwrap();
        let v0d = bound_envelope(&doubled, &p, 0).unwrap();
        prop_assert!((v0d / v0 - 4.0).abs() < 1e-12);
        // and the stationary limits scale exactly by 4 as well
        let far = bound_envelope(&base, &p, 4 * k + 4000).unwrap();
        let fard = bound_envelope(&doubled, &p, 2 * k + 4000).unwrap();
        let limit = 1.0 * eta * eta / a0;
        prop_assert!((far / limit - 1.0).abs() < 1e-6);
        prop_assert!((fard / (4.0 * limit) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn divergence_dominates_its_mean_shift_bound(p in scalar_law(), q in scalar_law()) {
        let kl = gaussian_kl(&p, &q).unwrap();
        let lb = kl_mean_lower_bound(&p, &q).unwrap();
        prop_assert!(kl >= 0.0);
        prop_assert!(kl + 1e-18 >= lb);
        prop_assert!(gaussian_w2(&p, &q).unwrap() >= 0.0);
    }

    #[test]
    fn transport_metric_axioms((a, b, c) in same_size_triple()) {
        for w in [empirical_w1_1d, empirical_w2_1d] {
            let ab = w(&a, &b);
            prop_assert!((ab - w(&b, &a)).abs() < 1e-12);
            prop_assert!(ab <= w(&a, &c) + w(&c, &b) + 1e-12);
            prop_assert!(w(&a, &a) == 0.0);
        }
        prop_assert!(empirical_w1_1d(&a, &b) <= empirical_w2_1d(&a, &b) + 1e-12);
    }

    #[test]
    fn euler_law_matches_the_constant_step_closed_form(
        eta in 0.005f64..0.45,
        k in 1u32..300,
        m0 in -2.0f64..2.0,
        v0 in 0.0f64..1.5,
    ) {
        let s = StepSchedule::constant(eta).unwrap();
        let l = sgld::law::em_law(1.0, 0.5, &[m0], &[v0], &s, k as usize).unwrap();
        let g = (1.0 - eta).powi(k as i32);
        let want_m = g * m0;
        let want_v = g * g * v0 + (1.0 / (2.0 - eta)) * (1.0 - g * g);
        prop_assert!((l.mean()[0] - want_m).abs() <= 1e-10 * (1.0 + want_m.abs()));
        prop_assert!((l.var()[0] - want_v).abs() <= 1e-10 * (1.0 + want_v.abs()));
    }
}
