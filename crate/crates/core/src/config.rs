//! Flat key-value experiment configuration with `[section]` headers.
//!
//! Four sections are recognized: `[potential]`, `[sampler]`, `[schedule]`,
//! `[experiment]`. Keys are lower_snake_case; unknown keys and sections are
//! errors so a config never silently drifts from what ran.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{BatchSpec, Potential};
use crate::sampler::{InitialLaw, SamplerConfig};
use crate::schedule::StepSchedule;

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    RateSweep,
    ScheduleDecay,
    SgldSweep,
    StationaryBias,
    Contraction,
    Verify,
}

impl ExperimentKind {
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentKind::RateSweep => "rate-sweep",
            ExperimentKind::ScheduleDecay => "schedule-decay",
            ExperimentKind::SgldSweep => "sgld-sweep",
            ExperimentKind::StationaryBias => "stationary-bias",
            ExperimentKind::Contraction => "contraction",
            ExperimentKind::Verify => "verify",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rate-sweep" | "rate_sweep" => Ok(ExperimentKind::RateSweep),
            "schedule-decay" | "schedule_decay" => Ok(ExperimentKind::ScheduleDecay),
            "sgld-sweep" | "sgld_sweep" => Ok(ExperimentKind::SgldSweep),
            "stationary-bias" | "stationary_bias" => Ok(ExperimentKind::StationaryBias),
            "contraction" => Ok(ExperimentKind::Contraction),
            "verify" => Ok(ExperimentKind::Verify),
            other => Err(Error::Config(format!("unknown experiment kind '{other}'"))),
        }
    }
}

/// Parsed and validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub potential: PotentialConfig,
    pub sampler: SamplerSection,
    pub schedule: ScheduleConfig,
    /// Step-size grid for sweeps, strictly decreasing.
    pub eta_grid: Vec<f64>,
    /// Decay exponents for the decaying-schedule experiment.
    pub theta_list: Vec<f64>,
    pub ell: u64,
    pub horizon_t: f64,
    pub horizon_k: usize,
    pub chains: usize,
    pub checkpoints: usize,
    pub pooled_target: usize,
    pub burn_in_t: f64,
    pub collect_stride_t: f64,
    pub bins: usize,
    pub x0_pair: (f64, f64),
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum PotentialConfig {
    LinearDrift {
        a: f64,
        offsets: Vec<Vec<f64>>,
    },
    GaussianMixture1d {
        weights: Vec<f64>,
        means: Vec<f64>,
        variance: f64,
    },
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential> {
        match self {
            PotentialConfig::LinearDrift { a, offsets } => {
                Potential::linear_drift(*a, offsets.clone())
            }
            PotentialConfig::GaussianMixture1d {
                weights,
                means,
                variance,
            } => Potential::gaussian_mixture_1d(weights.clone(), means.clone(), *variance),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerSection {
    pub beta_inv: f64,
    pub batch_size: Option<usize>,
    pub batch_replacement: bool,
    pub init_kind: String,
    pub init_mean: Vec<f64>,
    pub init_var: Vec<f64>,
}

impl SamplerSection {
    pub fn batch_spec(&self) -> Result<Option<BatchSpec>> {
        match self.batch_size {
            Some(s) => Ok(Some(BatchSpec::new(s, self.batch_replacement)?)),
            None => Ok(None),
        }
    }

    pub fn initial_law(&self) -> Result<InitialLaw> {
        match self.init_kind.as_str() {
            "point" => InitialLaw::point(self.init_mean.clone()),
            "gaussian" => InitialLaw::gaussian(self.init_mean.clone(), self.init_var.clone()),
            other => Err(Error::Config(format!("unknown init_kind '{other}'"))),
        }
    }

    pub fn build(&self, schedule: StepSchedule, seed: u64) -> Result<SamplerConfig> {
        SamplerConfig::new(
            self.beta_inv,
            schedule,
            self.batch_spec()?,
            seed,
            self.initial_law()?,
        )
    }
}

#[derive(Debug, Clone)]
pub enum ScheduleConfig {
    Constant { eta: f64 },
    PolyDecay { ell: u64, theta: f64 },
    Explicit { steps: Vec<f64> },
}

impl ScheduleConfig {
    pub fn build(&self) -> Result<StepSchedule> {
        match self {
            ScheduleConfig::Constant { eta } => StepSchedule::constant(*eta),
            ScheduleConfig::PolyDecay { ell, theta } => StepSchedule::poly_decay(*ell, *theta),
            ScheduleConfig::Explicit { steps } => StepSchedule::explicit(steps.clone()),
        }
    }
}

const SECTIONS: [&str; 4] = ["potential", "sampler", "schedule", "experiment"];
const POTENTIAL_KEYS: [&str; 6] = ["kind", "a", "offsets", "weights", "means", "variance"];
const SAMPLER_KEYS: [&str; 7] = [
    "beta_inv",
    "batch_size",
    "batch_replacement",
    "init_kind",
    "init_mean",
    "init_var",
    "seed",
];
const SCHEDULE_KEYS: [&str; 5] = ["kind", "eta", "ell", "theta", "steps"];
const EXPERIMENT_KEYS: [&str; 13] = [
    "kind",
    "eta_grid",
    "theta_list",
    "ell",
    "horizon_t",
    "horizon_k",
    "chains",
    "checkpoints",
    "pooled_target",
    "burn_in_t",
    "collect_stride_t",
    "bins",
    "x0_pair",
];

type Section = BTreeMap<String, String>;

fn parse_sections(text: &str) -> Result<BTreeMap<String, Section>> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Config(format!(
                    "line {}: unknown section [{name}]",
                    lineno + 1
                )));
            }
            current = Some(name.to_string());
            sections.entry(name.to_string()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let Some(section) = &current else {
            return Err(Error::Config(format!(
                "line {}: key before any [section]",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let allowed: &[&str] = match section.as_str() {
            "potential" => &POTENTIAL_KEYS,
            "sampler" => &SAMPLER_KEYS,
            "schedule" => &SCHEDULE_KEYS,
            "experiment" => &EXPERIMENT_KEYS,
            _ => unreachable!(),
        };
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "line {}: unknown key '{key}' in [{section}]",
                lineno + 1
            )));
        }
        let prev = sections
            .entry(section.clone())
            .or_default()
            .insert(key.clone(), value.trim().to_string());
        if prev.is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key '{key}' in [{section}]",
                lineno + 1
            )));
        }
    }
    Ok(sections)
}

fn parse_f64(section: &str, key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("[{section}] {key}: '{value}' is not a number")))
}

fn parse_u64(section: &str, key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("[{section}] {key}: '{value}' is not an integer")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "[{section}] {key}: '{value}' is not true/false"
        ))),
    }
}

fn parse_list(section: &str, key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| parse_f64(section, key, s.trim()))
        .collect()
}

/// Semicolon-separated vectors, each a comma list: `-1,0; 1,0`.
fn parse_vectors(section: &str, key: &str, value: &str) -> Result<Vec<Vec<f64>>> {
    value
        .split(';')
        .map(|v| parse_list(section, key, v.trim()))
        .collect()
}

struct SectionReader<'a> {
    name: &'a str,
    map: Section,
}

impl<'a> SectionReader<'a> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| Error::Config(format!("[{}] missing key '{key}'", self.name)))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            Some(v) => parse_f64(self.name, key, &v),
            None => Ok(default),
        }
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            Some(v) => parse_u64(self.name, key, &v),
            None => Ok(default),
        }
    }
}

impl ExperimentConfig {
    /// Built-in defaults for `kind`: the parameters of the standard runs.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mixture = matches!(
            kind,
            ExperimentKind::StationaryBias | ExperimentKind::Contraction
        );
        let potential = if mixture {
            PotentialConfig::GaussianMixture1d {
                weights: vec![0.5, 0.5],
                means: vec![-1.0, 1.0],
                variance: 0.5,
            }
        } else {
            PotentialConfig::LinearDrift {
                a: 1.0,
                offsets: vec![vec![-1.0], vec![1.0]],
            }
        };
        let sampler = SamplerSection {
            beta_inv: if mixture { 1.0 } else { 0.5 },
            batch_size: if kind == ExperimentKind::SgldSweep {
                Some(1)
            } else {
                None
            },
            batch_replacement: true,
            init_kind: "point".into(),
            init_mean: vec![if mixture { 0.0 } else { 1.0 }],
            init_var: vec![0.0],
        };
        let eta_grid = match kind {
            ExperimentKind::SgldSweep => vec![0.2, 0.1, 0.05, 0.025],
            ExperimentKind::StationaryBias => vec![0.2, 0.1, 0.05],
            _ => vec![0.1, 0.05, 0.025, 0.0125],
        };
        ExperimentConfig {
            kind,
            potential,
            sampler,
            schedule: ScheduleConfig::Constant { eta: 0.05 },
            eta_grid,
            theta_list: vec![0.3, 0.5, 0.8],
            ell: 4,
            horizon_t: match kind {
                ExperimentKind::Contraction => 20.0,
                ExperimentKind::StationaryBias => 10.0,
                _ => 50.0,
            },
            horizon_k: 10_000,
            chains: match kind {
                ExperimentKind::SgldSweep => 100_000,
                ExperimentKind::Contraction => 10_000,
                ExperimentKind::StationaryBias => 2_000,
                _ => 10_000,
            },
            checkpoints: 10,
            pooled_target: 1_000_000,
            burn_in_t: 10.0,
            collect_stride_t: 0.5,
            bins: 64,
            x0_pair: (-2.0, 2.0),
            seed: 12345,
        }
    }

    /// Parse a config file, starting from the defaults of `kind` and
    /// overriding whatever the file sets. The file's own `kind`, when
    /// present, must match.
    pub fn from_file(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str(&text, kind)
    }

    pub fn from_str(text: &str, kind: ExperimentKind) -> Result<Self> {
        let mut cfg = Self::default_for(kind);
        let mut sections = parse_sections(text)?;

        if let Some(map) = sections.remove("potential") {
            let mut r = SectionReader {
                name: "potential",
                map,
            };
            let pkind = r.require("kind")?;
            cfg.potential = match pkind.as_str() {
                "linear_drift" => {
                    let a = r.f64_or("a", 1.0)?;
                    let offsets = match r.take("offsets") {
                        Some(v) => parse_vectors("potential", "offsets", &v)?,
                        None => vec![vec![0.0]],
                    };
                    PotentialConfig::LinearDrift { a, offsets }
                }
                "gaussian_mixture_1d" => {
                    let weights = parse_list("potential", "weights", &r.require("weights")?)?;
                    let means = parse_list("potential", "means", &r.require("means")?)?;
                    let variance = parse_f64("potential", "variance", &r.require("variance")?)?;
                    PotentialConfig::GaussianMixture1d {
                        weights,
                        means,
                        variance,
                    }
                }
                other => return Err(Error::Config(format!("[potential] unknown kind '{other}'"))),
            };
            if let Some(leftover) = r.map.keys().next() {
                return Err(Error::Config(format!(
                    "[potential] key '{leftover}' does not apply to kind '{pkind}'"
                )));
            }
        }

        if let Some(map) = sections.remove("sampler") {
            let mut r = SectionReader {
                name: "sampler",
                map,
            };
            cfg.sampler.beta_inv = r.f64_or("beta_inv", cfg.sampler.beta_inv)?;
            if let Some(v) = r.take("batch_size") {
                cfg.sampler.batch_size = Some(parse_u64("sampler", "batch_size", &v)? as usize);
            }
            if let Some(v) = r.take("batch_replacement") {
                cfg.sampler.batch_replacement = parse_bool("sampler", "batch_replacement", &v)?;
            }
            if let Some(v) = r.take("init_kind") {
                cfg.sampler.init_kind = v;
            }
            if let Some(v) = r.take("init_mean") {
                cfg.sampler.init_mean = parse_list("sampler", "init_mean", &v)?;
            }
            if let Some(v) = r.take("init_var") {
                cfg.sampler.init_var = parse_list("sampler", "init_var", &v)?;
            }
            cfg.seed = r.u64_or("seed", cfg.seed)?;
        }

        if let Some(map) = sections.remove("schedule") {
            let mut r = SectionReader {
                name: "schedule",
                map,
            };
            let skind = r.require("kind")?;
            cfg.schedule = match skind.as_str() {
                "constant" => ScheduleConfig::Constant {
                    eta: parse_f64("schedule", "eta", &r.require("eta")?)?,
                },
                "poly_decay" => ScheduleConfig::PolyDecay {
                    ell: r.u64_or("ell", 4)?,
                    theta: parse_f64("schedule", "theta", &r.require("theta")?)?,
                },
                "explicit" => ScheduleConfig::Explicit {
                    steps: parse_list("schedule", "steps", &r.require("steps")?)?,
                },
                other => return Err(Error::Config(format!("[schedule] unknown kind '{other}'"))),
            };
            if let Some(leftover) = r.map.keys().next() {
                return Err(Error::Config(format!(
                    "[schedule] key '{leftover}' does not apply to kind '{skind}'"
                )));
            }
        }

        if let Some(map) = sections.remove("experiment") {
            let mut r = SectionReader {
                name: "experiment",
                map,
            };
            if let Some(v) = r.take("kind") {
                let file_kind = ExperimentKind::parse(&v)?;
                if file_kind != kind {
                    return Err(Error::Config(format!(
                        "config is for '{}' but the '{}' subcommand was invoked",
                        file_kind.id(),
                        kind.id()
                    )));
                }
            }
            if let Some(v) = r.take("eta_grid") {
                cfg.eta_grid = parse_list("experiment", "eta_grid", &v)?;
            }
            if let Some(v) = r.take("theta_list") {
                cfg.theta_list = parse_list("experiment", "theta_list", &v)?;
            }
            cfg.ell = r.u64_or("ell", cfg.ell)?;
            cfg.horizon_t = r.f64_or("horizon_t", cfg.horizon_t)?;
            cfg.horizon_k = r.u64_or("horizon_k", cfg.horizon_k as u64)? as usize;
            cfg.chains = r.u64_or("chains", cfg.chains as u64)? as usize;
            cfg.checkpoints = r.u64_or("checkpoints", cfg.checkpoints as u64)? as usize;
            cfg.pooled_target = r.u64_or("pooled_target", cfg.pooled_target as u64)? as usize;
            cfg.burn_in_t = r.f64_or("burn_in_t", cfg.burn_in_t)?;
            cfg.collect_stride_t = r.f64_or("collect_stride_t", cfg.collect_stride_t)?;
            cfg.bins = r.u64_or("bins", cfg.bins as u64)? as usize;
            if let Some(v) = r.take("x0_pair") {
                let pair = parse_list("experiment", "x0_pair", &v)?;
                if pair.len() != 2 {
                    return Err(Error::Config("x0_pair needs exactly two values".into()));
                }
                cfg.x0_pair = (pair[0], pair[1]);
            }
        }

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sweep_uses_grid = matches!(
            self.kind,
            ExperimentKind::RateSweep | ExperimentKind::SgldSweep | ExperimentKind::StationaryBias
        );
        if sweep_uses_grid {
            if self.eta_grid.len() < 3 {
                return Err(Error::Config(
                    "eta_grid needs at least 3 values for a slope fit".into(),
                ));
            }
            if self.eta_grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("eta_grid must be strictly decreasing".into()));
            }
            if self.eta_grid.iter().any(|e| !(*e > 0.0)) {
                return Err(Error::Config("eta_grid entries must be positive".into()));
            }
        }
        if matches!(self.kind, ExperimentKind::ScheduleDecay) {
            if self.theta_list.is_empty() {
                return Err(Error::Config("theta_list must not be empty".into()));
            }
            for th in &self.theta_list {
                if !(*th > 0.0 && *th < 1.0) {
                    return Err(Error::Config(format!(
                        "decay exponent must lie in (0, 1), got {th}"
                    )));
                }
            }
        }
        if matches!(
            self.kind,
            ExperimentKind::RateSweep | ExperimentKind::SgldSweep
        ) {
            // every swept step must fit at least 10 grid checkpoints
            if let Some(eta_max) = self.eta_grid.first() {
                if self.horizon_t / eta_max < 10.0 {
                    return Err(Error::Config(format!(
                        "horizon_t {} yields fewer than 10 checkpoints at eta {}",
                        self.horizon_t, eta_max
                    )));
                }
            }
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        Ok(())
    }
}
