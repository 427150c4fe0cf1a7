//! Chain evolution for the full-gradient and mini-batch Langevin iterations,
//! the continuous interpolation, and independent-ensemble simulation.
//!
//! Reproducibility: every chain owns a counter-derived stream
//! (`ChaCha12` seeded from the sampler seed, stream index = chain index), and
//! Gaussian increments come from the ziggurat sampler, so ensembles are
//! bit-reproducible at any thread count. Steps accept injected noise so
//! single-step contracts stay unit-testable without statistics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BatchDraw, BatchSpec, Potential};
use crate::schedule::StepSchedule;

/// Name of the random stream recorded in output metadata.
pub const GENERATOR_NAME: &str = "chacha12-stream/ziggurat-normal";

/// Where chains start.
///
/// Analyses that assume a warm start (density ratio to the target bounded
/// both ways) are strictly satisfied by no point mass and, for a Gaussian
/// target, by no Gaussian other than the target itself: any variance or mean
/// mismatch makes one tail ratio unbounded. The empirical decay constants
/// fitted by the harness absorb the transient instead.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    /// Point mass.
    Point(Vec<f64>),
    /// Independent Gaussian coordinates.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
}

impl InitialLaw {
    pub fn point(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "point initial needs a non-empty finite vector".into(),
            ));
        }
        Ok(InitialLaw::Point(x))
    }

    pub fn gaussian(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != var.len() {
            return Err(Error::InvalidParameter(
                "gaussian initial needs equal-length mean and variance".into(),
            ));
        }
        if mean.iter().any(|v| !v.is_finite()) || var.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "gaussian initial needs finite mean and variance >= 0".into(),
            ));
        }
        Ok(InitialLaw::Gaussian { mean, var })
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Point(x) => x.len(),
            InitialLaw::Gaussian { mean, .. } => mean.len(),
        }
    }

    /// Exact first and second moments, for closed-form comparisons.
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            InitialLaw::Point(x) => (x.clone(), vec![0.0; x.len()]),
            InitialLaw::Gaussian { mean, var } => (mean.clone(), var.clone()),
        }
    }

    fn draw(&self, rng: &mut ChaCha12Rng) -> Vec<f64> {
        match self {
            InitialLaw::Point(x) => x.clone(),
            InitialLaw::Gaussian { mean, var } => mean
                .iter()
                .zip(var)
                .map(|(m, v)| m + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect(),
        }
    }
}

/// Sampler parameters shared by every chain.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// Temperature `1/beta > 0`.
    pub beta_inv: f64,
    pub schedule: StepSchedule,
    /// Mini-batch shape; absent means full-gradient stepping.
    pub batch: Option<BatchSpec>,
    pub seed: u64,
    pub init: InitialLaw,
}

impl SamplerConfig {
    pub fn new(
        beta_inv: f64,
        schedule: StepSchedule,
        batch: Option<BatchSpec>,
        seed: u64,
        init: InitialLaw,
    ) -> Result<Self> {
        if !(beta_inv > 0.0) || !beta_inv.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "temperature must be positive, got {beta_inv}"
            )));
        }
        Ok(SamplerConfig {
            beta_inv,
            schedule,
            batch,
            seed,
            init,
        })
    }

    /// Linear-stability guard: a constant step must satisfy `eta < 2/L` when
    /// the potential declares a positive Lipschitz constant, and the batch
    /// spec must fit the potential's component count.
    pub fn validate_against(&self, potential: &Potential) -> Result<()> {
        if self.init.dim() != potential.dim() {
            return Err(Error::DimensionMismatch {
                expected: potential.dim(),
                got: self.init.dim(),
            });
        }
        if let StepSchedule::Constant(eta) = self.schedule {
            let lip = potential.meta().lipschitz;
            if lip > 0.0 && eta >= 2.0 / lip {
                return Err(Error::InvalidParameter(format!(
                    "constant step {eta} violates the stability guard eta < 2/L = {}",
                    2.0 / lip
                )));
            }
        }
        if let Some(spec) = &self.batch {
            let n = potential.n_components().ok_or(Error::UnsupportedBatch)?;
            if !spec.replacement && spec.size > n {
                return Err(Error::InvalidParameter(format!(
                    "batch size {} exceeds {} components without replacement",
                    spec.size, n
                )));
            }
        }
        Ok(())
    }
}

/// One chain: position, grid index, grid time, and its private stream.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub k: usize,
    pub t: f64,
    chain: usize,
    rng: ChaCha12Rng,
    drift: Vec<f64>,
    noise: Vec<f64>,
}

impl ChainState {
    /// Start chain `chain` of an ensemble: stream `chain` of the seed, with
    /// the initial position drawn from `cfg.init`.
    pub fn new(cfg: &SamplerConfig, chain: usize) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
        rng.set_stream(chain as u64);
        let x = cfg.init.draw(&mut rng);
        let d = x.len();
        ChainState {
            x,
            k: 0,
            t: 0.0,
            chain,
            rng,
            drift: vec![0.0; d],
            noise: vec![0.0; d],
        }
    }

    /// A standalone chain at an explicit position (stream 0 of `seed`).
    pub fn at(x: Vec<f64>, seed: u64) -> Self {
        let d = x.len();
        ChainState {
            x,
            k: 0,
            t: 0.0,
            chain: 0,
            rng: ChaCha12Rng::seed_from_u64(seed),
            drift: vec![0.0; d],
            noise: vec![0.0; d],
        }
    }

    pub fn chain_index(&self) -> usize {
        self.chain
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }

    fn fill_noise(&mut self, injected: Option<&[f64]>) -> Result<()> {
        match injected {
            Some(z) => {
                if z.len() != self.x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.x.len(),
                        got: z.len(),
                    });
                }
                self.noise.copy_from_slice(z);
            }
            None => {
                for n in &mut self.noise {
                    *n = self.rng.sample(StandardNormal);
                }
            }
        }
        Ok(())
    }

    fn apply_update(&mut self, eta: f64, beta_inv: f64, sched: &StepSchedule) -> Result<()> {
        let amp = (2.0 * beta_inv * eta).sqrt();
        for i in 0..self.x.len() {
            self.x[i] += eta * self.drift[i] + amp * self.noise[i];
            if !self.x[i].is_finite() {
                return Err(Error::Divergence {
                    chain: Some(self.chain),
                    step: self.k,
                });
            }
        }
        self.t = sched.advance_time(self.t, self.k)?;
        self.k += 1;
        Ok(())
    }
}

/// One full-gradient step:
/// `x' = x + eta_k b(x) + sqrt(2 eta_k / beta) z`, advancing `(k, t)`.
/// `z`, when supplied, is a standard normal vector (test injection).
pub fn ula_step(
    state: &mut ChainState,
    potential: &Potential,
    cfg: &SamplerConfig,
    z: Option<&[f64]>,
) -> Result<()> {
    let eta = cfg.schedule.step(state.k)?;
    state.fill_noise(z)?;
    potential.drift_into(&state.x, &mut state.drift)?;
    state.apply_update(eta, cfg.beta_inv, &cfg.schedule)
}

/// One mini-batch step with drift `b_batch`; returns the batch used so runs
/// can log it. The batch is drawn from the chain's stream before the
/// Gaussian increment unless one is injected.
pub fn sgld_step(
    state: &mut ChainState,
    potential: &Potential,
    cfg: &SamplerConfig,
    z: Option<&[f64]>,
    batch: Option<BatchDraw>,
) -> Result<BatchDraw> {
    let eta = cfg.schedule.step(state.k)?;
    let batch = match batch {
        Some(b) => b,
        None => {
            let spec = cfg.batch.as_ref().ok_or_else(|| {
                Error::InvalidParameter(
                    "mini-batch step needs a batch spec or an injected batch".into(),
                )
            })?;
            potential.draw_batch(spec, &mut state.rng)?
        }
    };
    state.fill_noise(z)?;
    batch.drift_into(potential, &state.x, &mut state.drift)?;
    state.apply_update(eta, cfg.beta_inv, &cfg.schedule)?;
    Ok(batch)
}

/// Continuous interpolation inside the current interval:
/// `x(t) = x + (t - T_k) b_batch(x) + sqrt(2 (t - T_k) / beta) w` for
/// `T_k <= t < T_{k+1}`; at `t = T_k` this returns the state exactly.
/// `w` is a standard normal vector scaled internally.
///
/// One query per interval: the increment is consistent with the chain's
/// Brownian path only at a single interior time. Multiple queries inside the
/// same interval would need bridge sampling, which this does not do.
pub fn interpolate(
    state: &ChainState,
    potential: &Potential,
    cfg: &SamplerConfig,
    batch: &BatchDraw,
    t: f64,
    w: &[f64],
) -> Result<Vec<f64>> {
    let t_next = cfg.schedule.advance_time(state.t, state.k)?;
    if !(t >= state.t && t < t_next) {
        return Err(Error::InvalidParameter(format!(
            "interpolation time {t} outside [{}, {})",
            state.t, t_next
        )));
    }
    if w.len() != state.x.len() {
        return Err(Error::DimensionMismatch {
            expected: state.x.len(),
            got: w.len(),
        });
    }
    let dt = t - state.t;
    let mut drift = vec![0.0; state.x.len()];
    batch.drift_into(potential, &state.x, &mut drift)?;
    let amp = (2.0 * cfg.beta_inv * dt).sqrt();
    Ok(state
        .x
        .iter()
        .zip(&drift)
        .zip(w)
        .map(|((xi, bi), wi)| xi + dt * bi + amp * wi)
        .collect())
}

/// Cross-chain snapshot at one grid index.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    dim: usize,
    /// Chain-major layout: `data[chain * dim ..][..dim]`.
    data: Vec<f64>,
}

impl Snapshot {
    pub fn chains(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn chain(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    /// All values of one coordinate across chains.
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        (0..self.chains()).map(|j| self.chain(j)[c]).collect()
    }

    /// Per-coordinate sample mean.
    pub fn mean(&self) -> Vec<f64> {
        let m = self.chains() as f64;
        let mut acc = vec![0.0; self.dim];
        for j in 0..self.chains() {
            for (a, &v) in acc.iter_mut().zip(self.chain(j)) {
                *a += v;
            }
        }
        for a in &mut acc {
            *a /= m;
        }
        acc
    }

    /// Per-coordinate unbiased sample variance.
    pub fn var(&self) -> Vec<f64> {
        let mean = self.mean();
        let m = self.chains();
        let mut acc = vec![0.0; self.dim];
        for j in 0..m {
            for ((a, &v), mu) in acc.iter_mut().zip(self.chain(j)).zip(&mean) {
                let d = v - mu;
                *a += d * d;
            }
        }
        for a in &mut acc {
            *a /= (m - 1).max(1) as f64;
        }
        acc
    }

    /// Standard error of the per-coordinate mean.
    pub fn se_mean(&self) -> Vec<f64> {
        let m = self.chains() as f64;
        self.var().iter().map(|v| (v / m).sqrt()).collect()
    }

    /// Standard error of the per-coordinate variance, from the empirical
    /// fourth central moment.
    pub fn se_var(&self) -> Vec<f64> {
        let mean = self.mean();
        let var = self.var();
        let m = self.chains();
        let mut m4 = vec![0.0; self.dim];
        for j in 0..m {
            for ((a, &v), mu) in m4.iter_mut().zip(self.chain(j)).zip(&mean) {
                let d = v - mu;
                *a += d * d * d * d;
            }
        }
        m4.iter_mut().for_each(|a| *a /= m as f64);
        m4.iter()
            .zip(&var)
            .map(|(q, v)| ((q - v * v).max(0.0) / m as f64).sqrt())
            .collect()
    }

    /// Mean of `|x|^2` across chains.
    pub fn mean_sq_norm(&self) -> f64 {
        let m = self.chains() as f64;
        (0..self.chains())
            .map(|j| self.chain(j).iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / m
    }
}

/// Snapshots of an independent-chain ensemble at requested grid indices.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub snapshots: Vec<Snapshot>,
    pub chains: usize,
}

impl EnsembleRun {
    pub fn snapshot_at(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }
}

/// Evolve `chains` independent chains to grid index `horizon`, recording a
/// snapshot at each index in `checkpoints`. Chains run in parallel; output
/// is assembled in chain order, so results do not depend on the thread count.
pub fn run_ensemble(
    potential: &Potential,
    cfg: &SamplerConfig,
    chains: usize,
    horizon: usize,
    checkpoints: &[usize],
) -> Result<EnsembleRun> {
    if chains == 0 {
        return Err(Error::InvalidParameter(
            "ensemble needs at least one chain".into(),
        ));
    }
    cfg.validate_against(potential)?;
    let mut points: Vec<usize> = checkpoints.to_vec();
    points.sort_unstable();
    points.dedup();
    if let Some(&last) = points.last() {
        if last > horizon {
            return Err(Error::InvalidParameter(format!(
                "checkpoint {last} beyond horizon {horizon}"
            )));
        }
    }
    let grid = cfg.schedule.grid(horizon)?;
    let d = potential.dim();

    let per_chain: Vec<Result<Vec<f64>>> = (0..chains)
        .into_par_iter()
        .map(|chain| {
            let mut state = ChainState::new(cfg, chain);
            let mut out = Vec::with_capacity(points.len() * d);
            let mut next_point = 0usize;
            if points.first() == Some(&0) {
                out.extend_from_slice(&state.x);
                next_point = 1;
            }
            for k in 0..horizon {
                if next_point >= points.len() {
                    break;
                }
                if cfg.batch.is_some() {
                    sgld_step(&mut state, potential, cfg, None, None)?;
                } else {
                    ula_step(&mut state, potential, cfg, None)?;
                }
                debug_assert_eq!(state.k, k + 1);
                if points[next_point] == k + 1 {
                    out.extend_from_slice(&state.x);
                    next_point += 1;
                }
            }
            Ok(out)
        })
        .collect();

    // first error in chain order, so failures are deterministic too
    let mut columns = Vec::with_capacity(chains);
    for r in per_chain {
        columns.push(r?);
    }

    let snapshots = points
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let mut data = Vec::with_capacity(chains * d);
            for col in &columns {
                data.extend_from_slice(&col[i * d..(i + 1) * d]);
            }
            Snapshot {
                step,
                time: grid.time(step),
                dim: d,
                data,
            }
        })
        .collect();

    Ok(EnsembleRun { snapshots, chains })
}

/// Write snapshots as CSV rows `chain,k,t,x_1..x_d`.
pub fn dump_samples_csv<W: std::io::Write>(run: &EnsembleRun, mut w: W) -> std::io::Result<()> {
    let d = run.snapshots.first().map_or(0, |s| s.dim());
    write!(w, "chain,k,t")?;
    for c in 0..d {
        write!(w, ",x_{}", c + 1)?;
    }
    writeln!(w)?;
    for snap in &run.snapshots {
        for j in 0..snap.chains() {
            write!(
                w,
                "{},{},{}",
                j,
                snap.step,
                crate::experiment::fmt_f64(snap.time)
            )?;
            for v in snap.chain(j) {
                write!(w, ",{}", crate::experiment::fmt_f64(*v))?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
