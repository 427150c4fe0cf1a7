//! Experiment harness: result rows, pass/fail checks, and the flat-file
//! output surface (`results.csv`, `report.txt`, `meta.txt`, plot data).
//!
//! Output is byte-reproducible for a fixed seed: floats print with 17
//! significant digits, rows are emitted in a fixed order, and nothing
//! time- or host-dependent lands in `results.csv`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::metrics::RateFit;

pub mod contraction;
pub mod rate_sweep;
pub mod schedule_decay;
pub mod sgld_sweep;
pub mod stationary_bias;
pub mod verify;

/// One CSV row: experiment id, swept parameter, metric name, value, and the
/// standard error (zero for closed-form quantities).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub parameter: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
}

impl ResultRow {
    pub fn closed_form(experiment: &str, parameter: f64, metric: &str, value: f64) -> Self {
        ResultRow {
            experiment: experiment.into(),
            parameter,
            metric: metric.into(),
            value,
            stderr: 0.0,
        }
    }

    pub fn monte_carlo(
        experiment: &str,
        parameter: f64,
        metric: &str,
        value: f64,
        stderr: f64,
    ) -> Self {
        ResultRow {
            experiment: experiment.into(),
            parameter,
            metric: metric.into(),
            value,
            stderr,
        }
    }
}

/// One named check with its expected window and observed value.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(name: &str, expected: String, observed: String, pass: bool) -> Self {
        CheckResult {
            name: name.into(),
            expected,
            observed,
            pass,
        }
    }

    /// Check that `value` lies in the closed interval `[lo, hi]`.
    pub fn window(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        CheckResult {
            name: name.into(),
            expected: format!("[{lo}, {hi}]"),
            observed: format!("{value}"),
            pass: value >= lo && value <= hi,
        }
    }

    /// Check that `value <= bound`.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        CheckResult {
            name: name.into(),
            expected: format!("<= {bound}"),
            observed: format!("{value}"),
            pass: value <= bound,
        }
    }
}

/// Two-column series emitted under `--emit-plot-data`.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Everything one experiment run produces.
#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub id: String,
    pub rows: Vec<ResultRow>,
    pub fits: Vec<(String, RateFit)>,
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
    pub plots: Vec<PlotSeries>,
    /// Named ensemble runs dumped as `<name>.samples.csv` alongside plot data.
    pub samples: Vec<(String, crate::sampler::EnsembleRun)>,
}

impl ExperimentOutput {
    pub fn new(id: &str) -> Self {
        ExperimentOutput {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push_fit(&mut self, name: &str, fit: RateFit) {
        self.fits.push((name.into(), fit));
    }
}

/// Fixed 17-significant-digit float formatting, so CSV rows round-trip and
/// repeated runs are byte-identical.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `results.csv` with the fixed header and row order. Every value and
/// standard error must be finite.
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut out = String::from("experiment,parameter,metric,value,stderr\n");
    for r in rows {
        if !r.value.is_finite() || !r.stderr.is_finite() || !r.parameter.is_finite() {
            return Err(crate::error::Error::InvalidParameter(format!(
                "non-finite result row: {} {} {}",
                r.experiment, r.metric, r.value
            )));
        }
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.experiment,
            fmt_f64(r.parameter),
            r.metric,
            fmt_f64(r.value),
            fmt_f64(r.stderr)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Engineering tolerance windows recorded at the top of every report.
pub const TOLERANCE_HEADER: &str =
    "tolerances: closed-form rate slope +-0.1; decaying-schedule slope +-0.15; \
surrogate rate slope +-0.15; monte-carlo halving ratio window [1.4, 2.8]";

/// Write `report.txt`: tolerance header, thread count, one line per check,
/// and a verdict.
pub fn write_report(path: &Path, output: &ExperimentOutput, threads: usize) -> Result<()> {
    let mut text = format!(
        "{} report\n{}\nthreads = {threads}\n",
        output.id, TOLERANCE_HEADER
    );
    text.push_str(&"-".repeat(72));
    text.push('\n');
    for c in &output.checks {
        text.push_str(&format!(
            "{}  {}  expected {}  observed {}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.expected,
            c.observed
        ));
    }
    for (name, fit) in &output.fits {
        text.push_str(&format!(
            "fit   {}  slope {}  intercept {}  r2 {}\n",
            name,
            fmt_f64(fit.slope),
            fmt_f64(fit.intercept),
            fmt_f64(fit.r2)
        ));
    }
    for n in &output.notes {
        text.push_str(&format!("note  {n}\n"));
    }
    let failed = output.checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        text.push_str(&format!("result: PASS ({} checks)\n", output.checks.len()));
    } else {
        text.push_str(&format!(
            "result: FAIL ({failed} of {} checks)\n",
            output.checks.len()
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Write `meta.txt`: seed, generator, version, thread count.
pub fn write_meta(path: &Path, experiment: &str, seed: u64, threads: usize) -> Result<()> {
    let text = format!(
        "experiment = {experiment}\nseed = {seed}\ngenerator = {}\nversion = {}\nthreads = {threads}\n",
        crate::sampler::GENERATOR_NAME,
        env!("CARGO_PKG_VERSION"),
    );
    fs::write(path, text)?;
    Ok(())
}

/// Write each plot series as a two-column whitespace-separated data file
/// under `<dir>/plots/`.
pub fn write_plot_data(dir: &Path, output: &ExperimentOutput) -> Result<()> {
    if output.plots.is_empty() {
        return Ok(());
    }
    let plot_dir = dir.join("plots");
    fs::create_dir_all(&plot_dir)?;
    for series in &output.plots {
        let mut f = fs::File::create(plot_dir.join(format!("{}.dat", series.name)))?;
        for (x, y) in &series.points {
            writeln!(f, "{} {}", fmt_f64(*x), fmt_f64(*y))?;
        }
    }
    Ok(())
}

/// Write the full output set into `dir`.
pub fn write_output(
    dir: &Path,
    output: &ExperimentOutput,
    seed: u64,
    threads: usize,
    emit_plots: bool,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_results_csv(&dir.join("results.csv"), &output.rows)?;
    write_report(&dir.join("report.txt"), output, threads)?;
    write_meta(&dir.join("meta.txt"), &output.id, seed, threads)?;
    if emit_plots {
        write_plot_data(dir, output)?;
        for (name, run) in &output.samples {
            let f = fs::File::create(dir.join(format!("{name}.samples.csv")))?;
            crate::sampler::dump_samples_csv(run, std::io::BufWriter::new(f))?;
        }
    }
    Ok(())
}

/// Fit the exponential decay rate of the divergence-to-equilibrium of the
/// exact linear diffusion started off equilibrium; used as the default decay
/// constant of the error envelope.
pub fn fit_decay_rate(a: f64, beta_inv: f64, m0: f64, v0: f64) -> Result<f64> {
    let pi = crate::law::GaussianLaw::scalar(0.0, beta_inv / a)?;
    let mut pts = Vec::new();
    let mut t = 0.5;
    while t <= 3.0 + 1e-9 {
        let law = crate::law::ou_exact_law(a, beta_inv, &[m0], &[v0], t)?;
        let kl = crate::law::gaussian_kl(&law, &pi)?;
        if kl > 0.0 {
            pts.push((t, kl));
        }
        t += 0.1;
    }
    // log-linear least squares in plain time
    let n = pts.len() as f64;
    let mx = pts.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = pts.iter().map(|(_, y)| y.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y.ln() - my)).sum();
    let rate = -sxy / sxx;
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(crate::error::Error::InvalidParameter(format!(
            "decay-rate fit produced a non-positive rate {rate}"
        )));
    }
    Ok(rate)
}
