//! Step-size sequences, cumulative grid times, the piecewise-constant
//! squared-step weight, and the exponential-decay bound envelope.
//!
//! Grid times are defined by `T_0 = 0`, `T_k = sum of the first k steps`.
//! The weight `f(t)` equals `eta_i^2` on `[T_i, T_{i+1})`.

use crate::error::{Error, Result};

/// A step-size sequence `{eta_k}`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepSchedule {
    /// `eta_k = eta` for all k.
    Constant(f64),
    /// `eta_k = (ell + k)^-theta`, non-increasing by construction.
    PolyDecay { ell: u64, theta: f64 },
    /// A finite, explicitly listed sequence.
    Explicit(Vec<f64>),
}

impl StepSchedule {
    pub fn constant(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "constant step must be positive and finite, got {eta}"
            )));
        }
        Ok(StepSchedule::Constant(eta))
    }

    pub fn poly_decay(ell: u64, theta: f64) -> Result<Self> {
        if ell == 0 {
            return Err(Error::InvalidParameter("poly decay needs ell >= 1".into()));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "poly decay exponent must lie in (0, 1), got {theta}"
            )));
        }
        Ok(StepSchedule::PolyDecay { ell, theta })
    }

    /// Poly decay with `ell` chosen minimal so that `eta_0 <= cap`.
    pub fn poly_decay_capped(theta: f64, cap: f64) -> Result<Self> {
        if !(cap > 0.0) || !cap.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "step cap must be positive and finite, got {cap}"
            )));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "poly decay exponent must lie in (0, 1), got {theta}"
            )));
        }
        // smallest ell with ell^-theta <= cap
        let mut ell = cap.powf(-1.0 / theta).ceil().max(1.0) as u64;
        while (ell as f64).powf(-theta) > cap {
            ell += 1;
        }
        Self::poly_decay(ell, theta)
    }

    pub fn explicit(steps: Vec<f64>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidParameter("explicit schedule is empty".into()));
        }
        if let Some(bad) = steps.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "explicit schedule contains non-positive step {bad}"
            )));
        }
        Ok(StepSchedule::Explicit(steps))
    }

    /// `eta_k`.
    pub fn step(&self, k: usize) -> Result<f64> {
        match self {
            StepSchedule::Constant(eta) => Ok(*eta),
            StepSchedule::PolyDecay { ell, theta } => Ok(((*ell as f64) + (k as f64)).powf(-theta)),
            StepSchedule::Explicit(steps) => steps.get(k).copied().ok_or(Error::ScheduleIndex {
                index: k,
                len: steps.len(),
            }),
        }
    }

    /// `eta_0`.
    pub fn initial_step(&self) -> f64 {
        self.step(0).expect("schedules always have a first step")
    }

    /// `T_k`, the sum of the first `k` steps (`T_0 = 0`).
    ///
    /// For non-constant schedules this is the left-to-right prefix sum, so it
    /// agrees bit-for-bit with a chain that accumulates `t += eta_k`.
    pub fn grid_time(&self, k: usize) -> Result<f64> {
        match self {
            StepSchedule::Constant(eta) => Ok(eta * k as f64),
            StepSchedule::Explicit(steps) if k > steps.len() => Err(Error::ScheduleIndex {
                index: k - 1,
                len: steps.len(),
            }),
            _ => {
                let mut t = 0.0;
                for i in 0..k {
                    t += self.step(i)?;
                }
                Ok(t)
            }
        }
    }

    /// Precomputed grid times `T_0 ..= T_horizon`, bit-identical to
    /// [`StepSchedule::grid_time`] at every index.
    pub fn grid(&self, horizon: usize) -> Result<GridTimes> {
        let mut times = Vec::with_capacity(horizon + 1);
        match self {
            StepSchedule::Constant(eta) => {
                for k in 0..=horizon {
                    times.push(eta * k as f64);
                }
            }
            _ => {
                let mut t = 0.0;
                times.push(t);
                for i in 0..horizon {
                    t += self.step(i)?;
                    times.push(t);
                }
            }
        }
        Ok(GridTimes { times })
    }

    /// Advance `T_k` to `T_{k+1}` the same way [`StepSchedule::grid_time`]
    /// computes it, so repeated stepping never drifts from the grid.
    pub(crate) fn advance_time(&self, t: f64, k: usize) -> Result<f64> {
        match self {
            StepSchedule::Constant(eta) => Ok(eta * (k + 1) as f64),
            _ => Ok(t + self.step(k)?),
        }
    }

    /// The weight `f(t) = eta_i^2` for the unique interval `[T_i, T_{i+1})`
    /// containing `t`.
    pub fn weight_f(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight lookup needs t >= 0, got {t}"
            )));
        }
        match self {
            // every interval carries the same weight
            StepSchedule::Constant(eta) => Ok(eta * eta),
            StepSchedule::PolyDecay { .. } => {
                let mut i = 0usize;
                let mut t_next = self.step(0)?;
                while t_next <= t {
                    i += 1;
                    t_next += self.step(i)?;
                }
                let eta = self.step(i)?;
                Ok(eta * eta)
            }
            StepSchedule::Explicit(steps) => {
                let mut t_next = 0.0;
                for eta in steps {
                    t_next += eta;
                    if t < t_next {
                        return Ok(eta * eta);
                    }
                }
                Err(Error::ScheduleHorizon { t, horizon: t_next })
            }
        }
    }

    /// True when `eta_{k+1} <= eta_k` over the whole sequence. Constant and
    /// poly-decay schedules are non-increasing by construction.
    pub fn is_non_increasing(&self) -> bool {
        match self {
            StepSchedule::Constant(_) | StepSchedule::PolyDecay { .. } => true,
            StepSchedule::Explicit(steps) => steps.windows(2).all(|w| w[1] <= w[0]),
        }
    }

    fn first_increase(&self) -> Option<usize> {
        match self {
            StepSchedule::Explicit(steps) => steps.windows(2).position(|w| w[1] > w[0]),
            _ => None,
        }
    }
}

/// Read-only prefix sums of a schedule.
#[derive(Debug, Clone)]
pub struct GridTimes {
    times: Vec<f64>,
}

impl GridTimes {
    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn horizon(&self) -> usize {
        self.times.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.times
    }
}

/// Constants of the exponential-decay error envelope
/// `c1 * eta_0^2 * exp(-a0 T_k) + c2 * d * I_k`, where
/// `I_k` is the exponentially weighted integral of `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub a0: f64,
    pub c1: f64,
    pub c2: f64,
    pub dim: usize,
}

impl BoundParams {
    pub fn new(a0: f64, c1: f64, c2: f64, dim: usize) -> Result<Self> {
        if !(a0 > 0.0) || !a0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "envelope decay rate must be positive and finite, got {a0}"
            )));
        }
        for (name, v) in [("c1", c1), ("c2", c2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "envelope constant {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(BoundParams { a0, c1, c2, dim })
    }
}

/// Evaluate the envelope at grid index `k` by the exact per-interval closed
/// form: each interval contributes
/// `eta_i^2 (exp(-a0 (T_k - T_{i+1})) - exp(-a0 (T_k - T_i))) / a0`.
pub fn bound_envelope(schedule: &StepSchedule, params: &BoundParams, k: usize) -> Result<f64> {
    if let Some(index) = schedule.first_increase() {
        return Err(Error::IncreasingSchedule { index: index + 1 });
    }
    let grid = schedule.grid(k)?;
    let t_k = grid.time(k);
    let mut integral = 0.0;
    for i in 0..k {
        let eta = schedule.step(i)?;
        let lo = (-params.a0 * (t_k - grid.time(i))).exp();
        let hi = (-params.a0 * (t_k - grid.time(i + 1))).exp();
        integral += eta * eta * (hi - lo) / params.a0;
    }
    let eta0 = schedule.initial_step();
    Ok(params.c1 * eta0 * eta0 * (-params.a0 * t_k).exp()
        + params.c2 * params.dim as f64 * integral)
}

/// Forward accumulation of the envelope over k = 0, 1, 2, ... using the same
/// per-interval closed form, for sweeps that need every grid index.
#[derive(Debug, Clone)]
pub struct EnvelopeSeries<'a> {
    schedule: &'a StepSchedule,
    params: BoundParams,
    k: usize,
    t: f64,
    integral: f64,
    prev_step: f64,
}

impl<'a> EnvelopeSeries<'a> {
    pub fn new(schedule: &'a StepSchedule, params: BoundParams) -> Result<Self> {
        if !schedule.is_non_increasing() {
            let index = schedule.first_increase().unwrap_or(0);
            return Err(Error::IncreasingSchedule { index: index + 1 });
        }
        Ok(EnvelopeSeries {
            schedule,
            params,
            k: 0,
            t: 0.0,
            integral: 0.0,
            prev_step: f64::INFINITY,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Envelope value at the current grid index.
    pub fn value(&self) -> f64 {
        let eta0 = self.schedule.initial_step();
        self.params.c1 * eta0 * eta0 * (-self.params.a0 * self.t).exp()
            + self.params.c2 * self.params.dim as f64 * self.integral
    }

    /// The weighted integral alone (the shape multiplying `c2 * d`).
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// Advance one grid interval.
    pub fn advance(&mut self) -> Result<()> {
        let eta = self.schedule.step(self.k)?;
        if eta > self.prev_step {
            return Err(Error::IncreasingSchedule { index: self.k });
        }
        self.prev_step = eta;
        let decay = (-self.params.a0 * eta).exp();
        self.integral = self.integral * decay + eta * eta * (1.0 - decay) / self.params.a0;
        self.t = self.schedule.advance_time(self.t, self.k)?;
        self.k += 1;
        Ok(())
    }
}
