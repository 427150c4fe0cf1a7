//! Transport-distance contraction between two ensembles launched from
//! well-separated point masses on the mixture target. Both marginal laws
//! pull toward the same stationary law, so their distance collapses.

use crate::config::{ExperimentConfig, PotentialConfig, ScheduleConfig};
use crate::error::{Error, Result};
use crate::experiment::{CheckResult, ExperimentOutput, PlotSeries, ResultRow};
use crate::metrics::{empirical_w1_1d, SampleSet};
use crate::sampler::{run_ensemble, InitialLaw, SamplerConfig};

pub const ID: &str = "contraction";

/// Seed for the second ensemble derived from the first, so the two ensembles
/// use disjoint random streams.
fn partner_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if !matches!(cfg.potential, PotentialConfig::GaussianMixture1d { .. }) {
        return Err(Error::Config(
            "contraction needs a gaussian_mixture_1d target".into(),
        ));
    }
    let potential = cfg.potential.build()?;
    let ScheduleConfig::Constant { eta } = cfg.schedule else {
        return Err(Error::Config(
            "contraction needs a constant schedule".into(),
        ));
    };
    let steps = (cfg.horizon_t / eta).round() as usize;
    let mut out = ExperimentOutput::new(ID);

    let mut checkpoints: Vec<usize> = (0..=8).map(|i| i * steps / 8).collect();
    checkpoints.dedup();

    let mut runs = Vec::new();
    for (x0, seed) in [
        (cfg.x0_pair.0, cfg.seed),
        (cfg.x0_pair.1, partner_seed(cfg.seed)),
    ] {
        let sampler_cfg = SamplerConfig {
            init: InitialLaw::point(vec![x0])?,
            seed,
            ..cfg.sampler.build(cfg.schedule.build()?, cfg.seed)?
        };
        runs.push(run_ensemble(
            &potential,
            &sampler_cfg,
            cfg.chains,
            steps,
            &checkpoints,
        )?);
    }

    let mut w1_first = 0.0;
    let mut w1_last = 0.0;
    let mut series = Vec::new();
    for (sa, sb) in runs[0].snapshots.iter().zip(&runs[1].snapshots) {
        let a = SampleSet::new(sa.coordinate(0))?;
        let b = SampleSet::new(sb.coordinate(0))?;
        let w1 = empirical_w1_1d(&a, &b);
        out.rows.push(ResultRow::monte_carlo(
            ID,
            sa.time,
            "w1_between_ensembles",
            w1,
            0.0,
        ));
        series.push((sa.time, w1));
        if sa.step == 0 {
            w1_first = w1;
        }
        if sa.step == steps {
            w1_last = w1;
        }
    }

    out.checks.push(CheckResult::at_most(
        &format!(
            "transport distance at T = {} at most one fifth of its initial value {w1_first}",
            cfg.horizon_t
        ),
        w1_last,
        w1_first / 5.0,
    ));
    out.rows.push(ResultRow::monte_carlo(
        ID,
        cfg.horizon_t,
        "contraction_factor",
        w1_first / w1_last.max(1e-300),
        0.0,
    ));
    out.plots.push(PlotSeries {
        name: "w1_between_ensembles_vs_t".into(),
        points: series,
    });
    let mut runs = runs.into_iter();
    out.samples
        .push(("ensemble_left".into(), runs.next().unwrap()));
    out.samples
        .push(("ensemble_right".into(), runs.next().unwrap()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;

    #[test]
    fn separated_starts_collapse_on_the_mixture() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Contraction);
        cfg.chains = 2_000;
        let out = run(&cfg).unwrap();
        for c in &out.checks {
            assert!(
                c.pass,
                "{}: expected {} observed {}",
                c.name, c.expected, c.observed
            );
        }
        // the two point masses start 4 apart
        let first = out
            .rows
            .iter()
            .find(|r| r.metric == "w1_between_ensembles")
            .unwrap();
        assert_eq!(first.value, 4.0);
    }
}
