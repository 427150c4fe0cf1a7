//! Target potentials, full-gradient drifts, finite-sum structure, and
//! random-batch gradient oracles.
//!
//! A potential owns a negative-gradient drift field `b(x)` together with
//! declared regularity metadata (Lipschitz constant, distance-dissipation
//! pair, batch deviation bound). Built-in constructors declare sound values;
//! [`validate_metadata`] spot-checks them by sampling.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Declared regularity constants of a drift field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialMeta {
    /// Uniform Lipschitz constant of every batch drift.
    pub lipschitz: f64,
    /// Distance dissipation: `x . b(x) <= -mu |x|^2 + sigma` for every batch drift.
    pub dissipation_mu: f64,
    pub dissipation_sigma: f64,
    /// Uniform bound on `|b_batch - b|`; `None` when not declared.
    pub batch_deviation: Option<f64>,
}

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub enum PotentialKind {
    /// `b(x) = -a x`, finite-sum components shifted by offsets that sum to zero:
    /// the i-th component drift is `-a (x - z_i)`.
    LinearDrift { rate: f64, offsets: Vec<Vec<f64>> },
    /// One-dimensional equal-variance Gaussian mixture density `pi`; the drift
    /// is `(log pi)'`, so the mixture is invariant at unit temperature.
    GaussianMixture1d {
        weights: Vec<f64>,
        means: Vec<f64>,
        variance: f64,
    },
    /// Arbitrary user drift with caller-declared metadata. No finite-sum structure.
    Custom { drift: Arc<DriftFn> },
}

impl std::fmt::Debug for PotentialKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PotentialKind::LinearDrift { rate, offsets } => f
                .debug_struct("LinearDrift")
                .field("rate", rate)
                .field("offsets", offsets)
                .finish(),
            PotentialKind::GaussianMixture1d {
                weights,
                means,
                variance,
            } => f
                .debug_struct("GaussianMixture1d")
                .field("weights", weights)
                .field("means", means)
                .field("variance", variance)
                .finish(),
            PotentialKind::Custom { .. } => f.write_str("Custom"),
        }
    }
}

/// A drift field `b = -grad U` with dimension and declared metadata.
#[derive(Debug, Clone)]
pub struct Potential {
    dim: usize,
    kind: PotentialKind,
    meta: PotentialMeta,
}

impl Potential {
    /// Linear drift `b(x) = -a x` with finite-sum offsets `z_1..z_N` summing
    /// to zero, so the i-th component drift is `-a (x - z_i)`.
    pub fn linear_drift(rate: f64, offsets: Vec<Vec<f64>>) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "linear drift rate must be positive, got {rate}"
            )));
        }
        if offsets.is_empty() {
            return Err(Error::InvalidParameter(
                "linear drift needs at least one offset".into(),
            ));
        }
        let dim = offsets[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "offsets must be non-empty vectors".into(),
            ));
        }
        let mut max_abs = 0.0f64;
        for z in &offsets {
            if z.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: z.len(),
                });
            }
            for &v in z {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter("offsets must be finite".into()));
                }
                max_abs = max_abs.max(v.abs());
            }
        }
        let n = offsets.len() as f64;
        for c in 0..dim {
            let sum: f64 = offsets.iter().map(|z| z[c]).sum();
            if sum.abs() > 1e-12 * (1.0 + max_abs) * n {
                return Err(Error::InvalidParameter(format!(
                    "offsets must sum to zero; coordinate {c} sums to {sum}"
                )));
            }
        }
        let max_norm = offsets.iter().map(|z| norm(z)).fold(0.0f64, f64::max);
        let meta = PotentialMeta {
            lipschitz: rate,
            dissipation_mu: rate / 2.0,
            dissipation_sigma: rate / 2.0 * max_norm * max_norm,
            batch_deviation: Some(rate * max_norm),
        };
        Ok(Potential {
            dim,
            kind: PotentialKind::LinearDrift { rate, offsets },
            meta,
        })
    }

    /// Equal-variance 1-D Gaussian mixture target. Metadata is estimated by a
    /// dense scan of the analytic drift derivative and dissipation defect.
    pub fn gaussian_mixture_1d(weights: Vec<f64>, means: Vec<f64>, variance: f64) -> Result<Self> {
        if weights.len() != means.len() || weights.is_empty() {
            return Err(Error::InvalidParameter(
                "mixture weights and means must be non-empty and equal length".into(),
            ));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mixture variance must be positive, got {variance}"
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(
                "mixture weights must be positive".into(),
            ));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter(
                "mixture means must be finite".into(),
            ));
        }
        let wsum: f64 = weights.iter().sum();
        if (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "mixture weights must sum to 1, got {wsum}"
            )));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / wsum).collect();

        let kind = PotentialKind::GaussianMixture1d {
            weights,
            means,
            variance,
        };
        let meta = mixture_meta(&kind);
        Ok(Potential { dim: 1, kind, meta })
    }

    /// Arbitrary drift with caller-declared metadata; no finite-sum structure.
    pub fn custom(dim: usize, drift: Arc<DriftFn>, meta: PotentialMeta) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(meta.dissipation_mu > 0.0)
            || !(meta.dissipation_sigma >= 0.0)
            || !(meta.lipschitz >= 0.0)
        {
            return Err(Error::InvalidParameter(
                "custom metadata needs mu > 0, sigma >= 0, lipschitz >= 0".into(),
            ));
        }
        Ok(Potential {
            dim,
            kind: PotentialKind::Custom { drift },
            meta,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn meta(&self) -> &PotentialMeta {
        &self.meta
    }

    /// Number of finite-sum components, when the potential has that structure.
    /// The mixture exposes the trivial single-component structure (its only
    /// batch drift is the full drift).
    pub fn n_components(&self) -> Option<usize> {
        match &self.kind {
            PotentialKind::LinearDrift { offsets, .. } => Some(offsets.len()),
            PotentialKind::GaussianMixture1d { .. } => Some(1),
            PotentialKind::Custom { .. } => None,
        }
    }

    /// Full-gradient drift `b(x)`, written into `out`.
    pub fn drift_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        debug_assert_eq!(out.len(), self.dim);
        match &self.kind {
            PotentialKind::LinearDrift { rate, .. } => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = -rate * xi;
                }
            }
            PotentialKind::GaussianMixture1d {
                weights,
                means,
                variance,
            } => {
                out[0] = mixture_drift(weights, means, *variance, x[0]);
            }
            PotentialKind::Custom { drift } => drift(x, out),
        }
        Ok(())
    }

    /// Full-gradient drift `b(x)`.
    pub fn drift_full(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.drift_into(x, &mut out)?;
        Ok(out)
    }

    /// Draw a uniformly random batch and its drift oracle.
    ///
    /// A full batch (`size == N` without replacement) is deterministic and
    /// consumes no randomness, so full-batch chains reproduce full-gradient
    /// chains bit for bit from a shared stream.
    pub fn draw_batch<R: Rng + ?Sized>(&self, spec: &BatchSpec, rng: &mut R) -> Result<BatchDraw> {
        let n = self.n_components().ok_or(Error::UnsupportedBatch)?;
        spec.validate(n)?;
        match &self.kind {
            PotentialKind::LinearDrift { rate, offsets } => {
                if !spec.replacement && spec.size == n {
                    return Ok(BatchDraw {
                        indices: (0..n).collect(),
                        kind: BatchDriftKind::Full,
                    });
                }
                let indices = if spec.replacement {
                    (0..spec.size)
                        .map(|_| rng.random_range(0..n))
                        .collect::<Vec<_>>()
                } else {
                    sample_without_replacement(n, spec.size, rng)
                };
                let mut mean_offset = vec![0.0; self.dim];
                for &i in &indices {
                    for (m, &z) in mean_offset.iter_mut().zip(&offsets[i]) {
                        *m += z;
                    }
                }
                let inv = 1.0 / spec.size as f64;
                for m in &mut mean_offset {
                    *m *= inv;
                }
                Ok(BatchDraw {
                    indices,
                    kind: BatchDriftKind::LinearOffset {
                        rate: *rate,
                        mean_offset,
                    },
                })
            }
            // single trivial component: the batch drift is the full drift
            PotentialKind::GaussianMixture1d { .. } => Ok(BatchDraw {
                indices: vec![0],
                kind: BatchDriftKind::Full,
            }),
            PotentialKind::Custom { .. } => Err(Error::UnsupportedBatch),
        }
    }

    /// The deterministic full batch (`size = N`, without replacement).
    pub fn full_batch(&self) -> Result<BatchDraw> {
        let n = self.n_components().ok_or(Error::UnsupportedBatch)?;
        Ok(BatchDraw {
            indices: (0..n).collect(),
            kind: BatchDriftKind::Full,
        })
    }

    /// Enumerate every possible batch for `spec`: ordered tuples when drawing
    /// with replacement, subsets otherwise. Errors when the batch space is
    /// larger than 2^20.
    pub fn enumerate_batches(&self, spec: &BatchSpec) -> Result<Vec<BatchDraw>> {
        let n = self.n_components().ok_or(Error::UnsupportedBatch)?;
        spec.validate(n)?;
        const CAP: f64 = (1u64 << 20) as f64;
        let count = if spec.replacement {
            (n as f64).powi(spec.size as i32)
        } else {
            binomial(n, spec.size)
        };
        if !(count <= CAP) {
            return Err(Error::InvalidParameter(format!(
                "batch space has ~{count:.3e} elements; enumeration capped at {CAP}"
            )));
        }
        let mut draws = Vec::with_capacity(count as usize);
        let mut indices = vec![0usize; spec.size];
        if spec.replacement {
            loop {
                draws.push(self.batch_from_indices(&indices)?);
                // odometer increment
                let mut pos = spec.size;
                loop {
                    if pos == 0 {
                        return Ok(draws);
                    }
                    pos -= 1;
                    indices[pos] += 1;
                    if indices[pos] < n {
                        break;
                    }
                    indices[pos] = 0;
                }
            }
        } else {
            for (i, v) in indices.iter_mut().enumerate() {
                *v = i;
            }
            loop {
                draws.push(self.batch_from_indices(&indices)?);
                // next combination in lexicographic order
                let mut pos = spec.size;
                loop {
                    if pos == 0 {
                        return Ok(draws);
                    }
                    pos -= 1;
                    if indices[pos] < n - (spec.size - pos) {
                        indices[pos] += 1;
                        for j in pos + 1..spec.size {
                            indices[j] = indices[j - 1] + 1;
                        }
                        break;
                    }
                }
            }
        }
    }

    /// Batch drift oracle for explicitly chosen component indices.
    pub fn batch_from_indices(&self, indices: &[usize]) -> Result<BatchDraw> {
        let n = self.n_components().ok_or(Error::UnsupportedBatch)?;
        if indices.is_empty() {
            return Err(Error::InvalidParameter("batch indices are empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!(
                "batch index {bad} out of range for {n} components"
            )));
        }
        match &self.kind {
            PotentialKind::LinearDrift { rate, offsets } => {
                let mut mean_offset = vec![0.0; self.dim];
                for &i in indices {
                    for (m, &z) in mean_offset.iter_mut().zip(&offsets[i]) {
                        *m += z;
                    }
                }
                let inv = 1.0 / indices.len() as f64;
                for m in &mut mean_offset {
                    *m *= inv;
                }
                Ok(BatchDraw {
                    indices: indices.to_vec(),
                    kind: BatchDriftKind::LinearOffset {
                        rate: *rate,
                        mean_offset,
                    },
                })
            }
            PotentialKind::GaussianMixture1d { .. } => Ok(BatchDraw {
                indices: indices.to_vec(),
                kind: BatchDriftKind::Full,
            }),
            PotentialKind::Custom { .. } => Err(Error::UnsupportedBatch),
        }
    }

    /// Variance of the batch-drift intercept per coordinate for 1-D linear
    /// drift: `Var(a zbar)` under the batch law of `spec`. `None` when no
    /// finite-sum intercept structure applies.
    pub fn intercept_variance(&self, spec: &BatchSpec) -> Option<f64> {
        match &self.kind {
            PotentialKind::LinearDrift { rate, offsets } if self.dim == 1 => {
                let n = offsets.len();
                spec.validate(n).ok()?;
                let pop_var: f64 = offsets.iter().map(|z| z[0] * z[0]).sum::<f64>() / n as f64;
                let mean_var = if spec.replacement {
                    pop_var / spec.size as f64
                } else if n == 1 || spec.size == n {
                    0.0
                } else {
                    pop_var / spec.size as f64 * (n - spec.size) as f64 / (n - 1) as f64
                };
                Some(rate * rate * mean_var)
            }
            PotentialKind::GaussianMixture1d { .. } => Some(0.0),
            _ => None,
        }
    }
}

/// Mini-batch shape: how many components, and whether indices repeat.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchSpec {
    pub size: usize,
    pub replacement: bool,
}

impl BatchSpec {
    pub fn new(size: usize, replacement: bool) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        Ok(BatchSpec { size, replacement })
    }

    /// With-replacement i.i.d. indices, the default sampling mode.
    pub fn with_replacement(size: usize) -> Result<Self> {
        Self::new(size, true)
    }

    fn validate(&self, n_components: usize) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        if !self.replacement && self.size > n_components {
            return Err(Error::InvalidParameter(format!(
                "batch size {} exceeds {} components without replacement",
                self.size, n_components
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum BatchDriftKind {
    /// `b_batch(x) = -a (x - zbar)` for the batch-mean offset.
    LinearOffset { rate: f64, mean_offset: Vec<f64> },
    /// The batch drift coincides with the full drift.
    Full,
}

/// One drawn batch together with its drift oracle `b_batch`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchDraw {
    indices: Vec<usize>,
    kind: BatchDriftKind,
}

impl BatchDraw {
    /// Zero-based component indices of the batch.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Whether this batch's drift is exactly the full drift.
    pub fn is_full(&self) -> bool {
        matches!(self.kind, BatchDriftKind::Full)
    }

    /// Batch drift `b_batch(x)`, written into `out`. `potential` must be the
    /// potential this batch was drawn from.
    pub fn drift_into(&self, potential: &Potential, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            BatchDriftKind::Full => potential.drift_into(x, out),
            BatchDriftKind::LinearOffset { rate, mean_offset } => {
                if x.len() != mean_offset.len() {
                    return Err(Error::DimensionMismatch {
                        expected: mean_offset.len(),
                        got: x.len(),
                    });
                }
                for ((o, &xi), &zi) in out.iter_mut().zip(x).zip(mean_offset) {
                    *o = -rate * (xi - zi);
                }
                Ok(())
            }
        }
    }

    pub fn drift(&self, potential: &Potential, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.drift_into(potential, x, &mut out)?;
        Ok(out)
    }
}

/// Monte Carlo check of batch-drift consistency at a point.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    /// Monte Carlo mean of `b_batch(x)` over the drawn batches.
    pub mc_mean: Vec<f64>,
    /// Max-abs coordinate deviation of the Monte Carlo mean from `b(x)`.
    pub deviation: f64,
}

/// Average `b_batch(x)` over `samples` random batches and report the max-abs
/// deviation from `b(x)`. Callers compare the deviation against the normal
/// band `4 B / sqrt(samples)`.
pub fn check_consistency<R: Rng + ?Sized>(
    potential: &Potential,
    spec: &BatchSpec,
    x: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<ConsistencyReport> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "consistency check needs at least 100 samples, got {samples}"
        )));
    }
    let mut full = vec![0.0; potential.dim()];
    potential.drift_into(x, &mut full)?;
    // accumulate deviations from the full drift, not raw drifts: the batch
    // terms are mean-zero, so the sum does not lose the signal to rounding
    let mut acc = vec![0.0; potential.dim()];
    let mut buf = vec![0.0; potential.dim()];
    for _ in 0..samples {
        let batch = potential.draw_batch(spec, rng)?;
        batch.drift_into(potential, x, &mut buf)?;
        for ((a, &b), &f) in acc.iter_mut().zip(&buf).zip(&full) {
            *a += b - f;
        }
    }
    let inv = 1.0 / samples as f64;
    let mut deviation = 0.0f64;
    let mc_mean: Vec<f64> = acc
        .iter()
        .zip(&full)
        .map(|(a, f)| {
            let dev = a * inv;
            deviation = deviation.max(dev.abs());
            f + dev
        })
        .collect();
    Ok(ConsistencyReport { mc_mean, deviation })
}

/// Average `b_batch(x)` over the whole batch space; exact consistency check.
pub fn exhaustive_batch_mean(
    potential: &Potential,
    spec: &BatchSpec,
    x: &[f64],
) -> Result<ConsistencyReport> {
    let draws = potential.enumerate_batches(spec)?;
    let mut full = vec![0.0; potential.dim()];
    potential.drift_into(x, &mut full)?;
    let mut acc = vec![0.0; potential.dim()];
    let mut buf = vec![0.0; potential.dim()];
    for batch in &draws {
        batch.drift_into(potential, x, &mut buf)?;
        for ((a, &b), &f) in acc.iter_mut().zip(&buf).zip(&full) {
            *a += b - f;
        }
    }
    let inv = 1.0 / draws.len() as f64;
    let mut deviation = 0.0f64;
    let mc_mean: Vec<f64> = acc
        .iter()
        .zip(&full)
        .map(|(a, f)| {
            let dev = a * inv;
            deviation = deviation.max(dev.abs());
            f + dev
        })
        .collect();
    Ok(ConsistencyReport { mc_mean, deviation })
}

/// One spot-check outcome from [`validate_metadata`].
#[derive(Debug, Clone)]
pub struct MetaCheck {
    pub name: String,
    pub worst: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Spot-validate the declared metadata by sampling: dissipation on random
/// points with `|x| <= 10 sqrt(d)`, Lipschitz on random pairs, and the batch
/// deviation bound over enumerable batches.
pub fn validate_metadata<R: Rng + ?Sized>(
    potential: &Potential,
    points: usize,
    rng: &mut R,
) -> Result<Vec<MetaCheck>> {
    let d = potential.dim();
    let radius = 10.0 * (d as f64).sqrt();
    let meta = *potential.meta();
    let mut checks = Vec::new();
    let mut b = vec![0.0; d];
    let mut b2 = vec![0.0; d];

    let mut worst_diss = f64::NEG_INFINITY;
    let mut worst_lip = 0.0f64;
    for _ in 0..points {
        let x = ball_point(d, radius, rng);
        potential.drift_into(&x, &mut b)?;
        let xb: f64 = x.iter().zip(&b).map(|(xi, bi)| xi * bi).sum();
        let x2: f64 = x.iter().map(|v| v * v).sum();
        worst_diss = worst_diss.max(xb + meta.dissipation_mu * x2 - meta.dissipation_sigma);

        let y = ball_point(d, radius, rng);
        potential.drift_into(&y, &mut b2)?;
        let dist = x
            .iter()
            .zip(&y)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt();
        if dist > 1e-12 {
            let dd = b
                .iter()
                .zip(&b2)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                .sqrt();
            worst_lip = worst_lip.max(dd / dist);
        }
    }
    checks.push(MetaCheck {
        name: "dissipation x.b <= -mu|x|^2 + sigma".into(),
        worst: worst_diss,
        bound: 1e-9,
        pass: worst_diss <= 1e-9,
    });
    checks.push(MetaCheck {
        name: "lipschitz |b(x)-b(y)| <= L|x-y|".into(),
        worst: worst_lip,
        bound: meta.lipschitz * (1.0 + 1e-9) + 1e-12,
        pass: worst_lip <= meta.lipschitz * (1.0 + 1e-9) + 1e-12,
    });

    if let (Some(bound), Some(_)) = (meta.batch_deviation, potential.n_components()) {
        let spec = BatchSpec::with_replacement(1)?;
        let draws = potential.enumerate_batches(&spec)?;
        let mut worst = 0.0f64;
        for _ in 0..points {
            let x = ball_point(d, radius, rng);
            potential.drift_into(&x, &mut b)?;
            for batch in &draws {
                batch.drift_into(potential, &x, &mut b2)?;
                let dev = b
                    .iter()
                    .zip(&b2)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(dev);
            }
        }
        checks.push(MetaCheck {
            name: "batch deviation |b_batch - b| <= B".into(),
            worst,
            bound: bound * (1.0 + 1e-9) + 1e-12,
            pass: worst <= bound * (1.0 + 1e-9) + 1e-12,
        });
    }
    Ok(checks)
}

fn ball_point<R: Rng + ?Sized>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    // direction from a standard normal, radius uniform in [0, radius]
    let mut x: Vec<f64> = (0..d)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    let n = norm(&x);
    let r: f64 = rng.random_range(0.0..=radius);
    if n > 0.0 {
        for v in &mut x {
            *v *= r / n;
        }
    }
    x
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

fn sample_without_replacement<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    // partial Fisher-Yates over 0..n
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

fn mixture_drift(weights: &[f64], means: &[f64], variance: f64, x: f64) -> f64 {
    // b(x) = (log pi)'(x), evaluated with the largest exponent factored out
    let mut lmax = f64::NEG_INFINITY;
    for m in means {
        let l = -(x - m) * (x - m) / (2.0 * variance);
        lmax = lmax.max(l);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, m) in weights.iter().zip(means) {
        let e = w * (-(x - m) * (x - m) / (2.0 * variance) - lmax).exp();
        num += e * (m - x) / variance;
        den += e;
    }
    num / den
}

fn mixture_drift_derivative(weights: &[f64], means: &[f64], variance: f64, x: f64) -> f64 {
    // b = N/D with N = sum w e s, D = sum w e, s = (m - x)/v; then
    // b' = N'/D - b^2 where N' = sum w e (s^2 - 1/v)
    let mut lmax = f64::NEG_INFINITY;
    for m in means {
        let l = -(x - m) * (x - m) / (2.0 * variance);
        lmax = lmax.max(l);
    }
    let mut den = 0.0;
    let mut num = 0.0;
    let mut numd = 0.0;
    for (w, m) in weights.iter().zip(means) {
        let e = w * (-(x - m) * (x - m) / (2.0 * variance) - lmax).exp();
        let s = (m - x) / variance;
        den += e;
        num += e * s;
        numd += e * (s * s - 1.0 / variance);
    }
    let b = num / den;
    numd / den - b * b
}

fn mixture_meta(kind: &PotentialKind) -> PotentialMeta {
    let PotentialKind::GaussianMixture1d {
        weights,
        means,
        variance,
    } = kind
    else {
        unreachable!()
    };
    let sd = variance.sqrt();
    let lo = means.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * sd - 1.0;
    let hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0 * sd + 1.0;
    let n = 4001;
    let mu = 1.0 / (4.0 * variance);
    let mut max_slope = 1.0 / variance; // asymptotic |b'|
    let mut sigma = 0.0f64;
    for i in 0..n {
        let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        max_slope = max_slope.max(mixture_drift_derivative(weights, means, *variance, x).abs());
        let b = mixture_drift(weights, means, *variance, x);
        sigma = sigma.max(x * b + mu * x * x);
    }
    PotentialMeta {
        lipschitz: max_slope * 1.05,
        dissipation_mu: mu,
        dissipation_sigma: sigma * 1.05 + 1e-9,
        batch_deviation: Some(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn two_offsets() -> Potential {
        Potential::linear_drift(1.0, vec![vec![-1.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn linear_drift_is_minus_ax() {
        let p = two_offsets();
        assert_eq!(p.drift_full(&[0.0]).unwrap(), vec![0.0]);
        assert_eq!(p.drift_full(&[2.0]).unwrap(), vec![-2.0]);
    }

    #[test]
    fn symmetric_mixture_drift_vanishes_at_center() {
        let p = Potential::gaussian_mixture_1d(vec![0.5, 0.5], vec![-1.0, 1.0], 1.0).unwrap();
        assert_eq!(p.drift_full(&[0.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn drift_rejects_dimension_mismatch() {
        let p = two_offsets();
        assert!(matches!(
            p.drift_full(&[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_component_batches_shift_the_intercept() {
        let p = two_offsets();
        let b1 = p.batch_from_indices(&[0]).unwrap();
        // b(x) = -(x - (-1)) = -x - 1
        assert_eq!(b1.drift(&p, &[1.0]).unwrap(), vec![-2.0]);
        assert_eq!(b1.drift(&p, &[0.0]).unwrap(), vec![-1.0]);
        let b2 = p.batch_from_indices(&[1]).unwrap();
        // b(x) = -x + 1
        assert_eq!(b2.drift(&p, &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(b2.drift(&p, &[2.0]).unwrap(), vec![-1.0]);
    }

    #[test]
    fn full_batch_without_replacement_is_full_gradient() {
        let p = two_offsets();
        let spec = BatchSpec::new(2, false).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let before = rng.clone();
        let b = p.draw_batch(&spec, &mut rng).unwrap();
        assert!(b.is_full());
        assert_eq!(b.drift(&p, &[3.0]).unwrap(), vec![-3.0]);
        // deterministic: consumes no randomness
        assert_eq!(rng, before);
    }

    #[test]
    fn draw_batch_respects_spec() {
        let p = two_offsets();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let spec = BatchSpec::with_replacement(1).unwrap();
        for _ in 0..50 {
            let b = p.draw_batch(&spec, &mut rng).unwrap();
            assert_eq!(b.indices().len(), 1);
            assert!(b.indices()[0] < 2);
        }
        assert!(BatchSpec::new(0, true).is_err());
        let too_big = BatchSpec::new(3, false).unwrap();
        assert!(p.draw_batch(&too_big, &mut rng).is_err());
    }

    #[test]
    fn custom_potential_has_no_batches() {
        let meta = PotentialMeta {
            lipschitz: 0.0,
            dissipation_mu: 1e-6,
            dissipation_sigma: 1.0,
            batch_deviation: None,
        };
        let p = Potential::custom(1, Arc::new(|_x, out| out[0] = 0.0), meta).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            p.draw_batch(&BatchSpec::with_replacement(1).unwrap(), &mut rng),
            Err(Error::UnsupportedBatch)
        ));
    }

    #[test]
    fn exhaustive_two_batch_average_is_exact() {
        let p = two_offsets();
        let spec = BatchSpec::with_replacement(1).unwrap();
        let rep = exhaustive_batch_mean(&p, &spec, &[0.0]).unwrap();
        assert_eq!(rep.mc_mean, vec![0.0]);
        assert_eq!(rep.deviation, 0.0);
    }

    #[test]
    fn exhaustive_average_matches_full_drift_everywhere() {
        let p = Potential::linear_drift(
            1.5,
            vec![vec![-0.75, 0.5], vec![0.25, -1.0], vec![0.5, 0.5]],
        )
        .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for spec in [
            BatchSpec::with_replacement(1).unwrap(),
            BatchSpec::with_replacement(2).unwrap(),
            BatchSpec::new(2, false).unwrap(),
        ] {
            for _ in 0..20 {
                let x = ball_point(2, 10.0 * 2f64.sqrt(), &mut rng);
                let rep = exhaustive_batch_mean(&p, &spec, &x).unwrap();
                assert!(rep.deviation <= 1e-12, "deviation {}", rep.deviation);
            }
        }
    }

    #[test]
    fn mc_consistency_within_clt_band() {
        let p = two_offsets();
        let spec = BatchSpec::with_replacement(1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let m = 10_000;
        let band = 4.0 * p.meta().batch_deviation.unwrap() / (m as f64).sqrt();
        let rep = check_consistency(&p, &spec, &[0.3], m, &mut rng).unwrap();
        assert!(rep.deviation <= band, "{} > {band}", rep.deviation);
        assert!(check_consistency(&p, &spec, &[0.3], 99, &mut rng).is_err());
    }

    #[test]
    fn full_batch_consistency_is_exact_for_every_x() {
        let p = two_offsets();
        let spec = BatchSpec::new(2, false).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for x in [-3.0, 0.0, 0.7, 11.0] {
            let rep = check_consistency(&p, &spec, &[x], 100, &mut rng).unwrap();
            assert_eq!(rep.deviation, 0.0);
        }
    }

    #[test]
    fn batch_deviation_bound_holds_on_samples() {
        let p = two_offsets();
        let bound = p.meta().batch_deviation.unwrap();
        assert_eq!(bound, 1.0);
        let spec = BatchSpec::with_replacement(1).unwrap();
        let draws = p.enumerate_batches(&spec).unwrap();
        assert_eq!(draws.len(), 2);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = ball_point(1, 10.0, &mut rng);
            let b = p.drift_full(&x).unwrap();
            for d in &draws {
                let bb = d.drift(&p, &x).unwrap();
                let dev = (bb[0] - b[0]).abs();
                assert!(dev <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn linear_dissipation_with_declared_pair() {
        // x b_batch(x) <= -(a/2)|x|^2 + (a/2) max|zbar|^2 on sampled points
        let p = two_offsets();
        let mu = p.meta().dissipation_mu;
        let sigma = p.meta().dissipation_sigma;
        assert_eq!(mu, 0.5);
        assert_eq!(sigma, 0.5);
        let spec = BatchSpec::with_replacement(1).unwrap();
        let draws = p.enumerate_batches(&spec).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let x = ball_point(1, 10.0, &mut rng);
            for d in &draws {
                let bb = d.drift(&p, &x).unwrap();
                assert!(x[0] * bb[0] <= -mu * x[0] * x[0] + sigma + 1e-9);
            }
        }
    }

    #[test]
    fn metadata_validates_for_builtins() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for p in [
            two_offsets(),
            Potential::linear_drift(2.0, vec![vec![0.0, 0.0]]).unwrap(),
            Potential::gaussian_mixture_1d(vec![0.5, 0.5], vec![-1.0, 1.0], 0.5).unwrap(),
            Potential::gaussian_mixture_1d(vec![0.3, 0.7], vec![-2.0, 0.5], 1.0).unwrap(),
        ] {
            for check in validate_metadata(&p, 1000, &mut rng).unwrap() {
                assert!(
                    check.pass,
                    "{}: worst {} bound {}",
                    check.name, check.worst, check.bound
                );
            }
        }
    }

    #[test]
    fn offsets_must_sum_to_zero() {
        assert!(Potential::linear_drift(1.0, vec![vec![-1.0], vec![0.5]]).is_err());
        assert!(Potential::linear_drift(0.0, vec![vec![0.0]]).is_err());
    }

    #[test]
    fn intercept_variance_matches_batch_law() {
        let p = two_offsets();
        let s1 = BatchSpec::with_replacement(1).unwrap();
        assert_eq!(p.intercept_variance(&s1), Some(1.0));
        let s2 = BatchSpec::with_replacement(2).unwrap();
        assert_eq!(p.intercept_variance(&s2), Some(0.5));
        let full = BatchSpec::new(2, false).unwrap();
        assert_eq!(p.intercept_variance(&full), Some(0.0));
    }
}
