//! Experiment configuration: one JSON document, optionally overridden by
//! command-line flags, validated per mode into typed parameter sets.
//!
//! Relative paths inside a config file resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use chebspike::observation::scaled_sigma;
use chebspike::{separation_ok, BoundaryVector, ChebPoly, DiscreteMeasure, NonUniformSpline};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::formats::{read_json, BoundaryJson, MeasureJson, SplineJson};

pub const DEFAULT_OUT_DIR: &str = "out";
pub const DEFAULT_ETA: f64 = 1.0;
pub const DEFAULT_RICE_TRIALS: usize = 1000;
pub const MIN_RICE_TRIALS: usize = 100;
pub const DEFAULT_GRID_SIZE: usize = 10_000;
pub const DEFAULT_PREDICTION_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    RecoverSpikes,
    RecoverSpline,
    Certificate,
    RiceCheck,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::RecoverSpikes => "recover-spikes",
            Mode::RecoverSpline => "recover-spline",
            Mode::Certificate => "certificate",
            Mode::RiceCheck => "rice-check",
            Mode::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Target {
    Measure(MeasureJson),
    MeasureFile(PathBuf),
    Spline(SplineJson),
    SplineFile(PathBuf),
    /// `count` atoms passing `separation_ok` at the configured `m`, magnitudes uniform in `amplitude`, random signs.
    RandomSpikes {
        count: usize,
        amplitude: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Sigma0,
    M,
    Lambda,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Sigma0 => "sigma0",
            SweepAxis::M => "m",
            SweepAxis::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Mode run for each value: `recover-spikes` or `recover-spline`.
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub m: Option<usize>,
    pub d: Option<i32>,
    /// Noise level on the observed quantities (moments, or `Θ` for splines).
    pub sigma: Option<f64>,
    /// Spline mode: base level, scaled by `m!/(m-d-1)!`. Spike mode: same as `sigma`.
    pub sigma0: Option<f64>,
    #[serde(alias = "alpha")]
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub target: Option<Target>,
    /// `φ`-coefficients of a supplied polynomial approximation.
    pub polynomial: Option<Vec<f64>>,
    pub boundary: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
    pub trials: Option<usize>,
    pub grid_size: Option<usize>,
    pub sweep: Option<SweepSpec>,
}

/// Flag values that replace config fields when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub m: Option<usize>,
    pub sigma: Option<f64>,
    pub sigma0: Option<f64>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub trials: Option<usize>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json_str(&text, base)
    }

    pub fn from_json_str(text: &str, base: &Path) -> CliResult<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| CliError::config("config", e.to_string()))?;
        cfg.out_dir = cfg.out_dir.map(|p| resolve(base, &p));
        cfg.target = cfg.target.map(|t| match t {
            Target::MeasureFile(p) => Target::MeasureFile(resolve(base, &p)),
            Target::SplineFile(p) => Target::SplineFile(resolve(base, &p)),
            other => other,
        });
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($f:ident),*) => {$(if o.$f.is_some() { self.$f = o.$f.clone(); })*};
        }
        take!(mode, seed, out_dir, m, sigma, sigma0, lambda, eta, trials);
    }

    pub fn mode(&self) -> CliResult<Mode> {
        self.mode.ok_or_else(|| CliError::config("mode", "no mode given"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn m(&self) -> CliResult<usize> {
        match self.m {
            Some(0) => Err(CliError::config("m", "must be at least 1")),
            Some(m) => Ok(m),
            None => Err(CliError::config("m", "missing")),
        }
    }

    fn eta(&self) -> CliResult<f64> {
        let eta = self.eta.unwrap_or(DEFAULT_ETA);
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(CliError::config("eta", format!("{eta} must be finite and nonnegative")));
        }
        Ok(eta)
    }

    fn lambda(&self) -> CliResult<Option<f64>> {
        match self.lambda {
            Some(l) if !(l > 0.0 && l.is_finite()) => Err(CliError::config("lambda", format!("{l} must be positive"))),
            other => Ok(other),
        }
    }

    fn level(v: Option<f64>, field: &str) -> CliResult<Option<f64>> {
        match v {
            Some(s) if !(s >= 0.0 && s.is_finite()) => {
                Err(CliError::config(field, format!("{s} must be finite and nonnegative")))
            }
            other => Ok(other),
        }
    }

    fn spike_source(&self, m: usize) -> CliResult<SpikeSource> {
        match &self.target {
            Some(Target::Measure(x)) => Ok(SpikeSource::Measure(x.to_measure("target.measure")?)),
            Some(Target::MeasureFile(p)) => {
                let x: MeasureJson = read_json(p, "target.measure_file")?;
                Ok(SpikeSource::Measure(x.to_measure("target.measure_file")?))
            }
            Some(Target::RandomSpikes { count, amplitude }) => {
                let [lo, hi] = *amplitude;
                if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                    return Err(CliError::config(
                        "target.random_spikes.amplitude",
                        format!("[{lo}, {hi}] must be positive and ordered"),
                    ));
                }
                // a greedy packing of arcs of length 5π/m fits at most m/5 of them
                if *count > m / 5 + 1 {
                    return Err(CliError::config(
                        "target.random_spikes.count",
                        format!("{count} separated atoms do not fit at m = {m}"),
                    ));
                }
                Ok(SpikeSource::Random {
                    count: *count,
                    amplitude: (lo, hi),
                })
            }
            Some(_) => Err(CliError::config(
                "target",
                "this mode needs a measure or random_spikes target",
            )),
            None => Err(CliError::config("target", "missing")),
        }
    }

    pub fn spike_params(&self) -> CliResult<SpikeParams> {
        let m = self.m()?;
        let d = self.d.unwrap_or(-1);
        if d < -1 || m as i64 <= d as i64 {
            return Err(CliError::config("d", format!("need -1 ≤ d < m, got d = {d}, m = {m}")));
        }
        let sigma = match (Self::level(self.sigma, "sigma")?, Self::level(self.sigma0, "sigma0")?) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::config(
                    "sigma0",
                    "conflicts with sigma; spike mode uses a single noise level",
                ));
            }
            (a, b) => a.or(b).unwrap_or(0.0),
        };
        let lambda = self.lambda()?;
        if sigma == 0.0 && lambda.is_none() {
            return Err(CliError::config("lambda", "required when the noise level is zero"));
        }
        Ok(SpikeParams {
            m,
            d,
            sigma,
            eta: self.eta()?,
            lambda,
            seed: self.seed(),
            source: self.spike_source(m)?,
        })
    }

    pub fn spline_params(&self) -> CliResult<SplineParams> {
        let m = self.m()?;
        let spline = match &self.target {
            Some(Target::Spline(f)) => f.to_spline("target.spline")?,
            Some(Target::SplineFile(p)) => {
                let f: SplineJson = read_json(p, "target.spline_file")?;
                f.to_spline("target.spline_file")?
            }
            Some(_) => return Err(CliError::config("target", "recover-spline needs a spline target")),
            None => return Err(CliError::config("target", "missing")),
        };
        let d = spline.degree();
        if let Some(given) = self.d {
            if given != d as i32 {
                return Err(CliError::config(
                    "d",
                    format!("{given} differs from the spline degree {d}"),
                ));
            }
        }
        if m <= d {
            return Err(CliError::config("m", format!("must exceed the spline degree {d}")));
        }
        let boundary = match &self.boundary {
            Some(b) => BoundaryJson { boundary: b.clone() }.to_boundary(d, "boundary")?,
            None => spline.boundary_vector(),
        };
        let polynomial = match &self.polynomial {
            Some(c) if c.len() > m - d => {
                return Err(CliError::config(
                    "polynomial",
                    format!("{} coefficients exceed the degree bound m-d-1 = {}", c.len(), m - d - 1),
                ));
            }
            Some(c) if c.iter().any(|v| !v.is_finite()) => {
                return Err(CliError::config("polynomial", "non-finite coefficient"));
            }
            Some(c) => Some(ChebPoly::new(c.clone())),
            None => None,
        };
        let (sigma0, sigma) = match (Self::level(self.sigma0, "sigma0")?, Self::level(self.sigma, "sigma")?) {
            (Some(_), Some(_)) => return Err(CliError::config("sigma", "give either sigma0 or sigma, not both")),
            (Some(s0), None) => (
                Some(s0),
                scaled_sigma(s0, m, d as i32).map_err(|e| CliError::config("sigma0", e.to_string()))?,
            ),
            (None, s) => (None, s.unwrap_or(0.0)),
        };
        if !sigma.is_finite() {
            return Err(CliError::config(
                "sigma0",
                format!("scaled noise level overflows at m = {m}"),
            ));
        }
        let lambda = self.lambda()?;
        if sigma == 0.0 && lambda.is_none() {
            return Err(CliError::config("lambda", "required when the noise level is zero"));
        }
        Ok(SplineParams {
            m,
            d,
            sigma0,
            sigma,
            alpha: self.eta()?,
            lambda,
            seed: self.seed(),
            spline,
            boundary,
            polynomial,
        })
    }

    pub fn certificate_params(&self) -> CliResult<CertificateParams> {
        let m = self.m()?;
        if m % 2 == 1 || m < 2 {
            return Err(CliError::config(
                "m",
                format!("certificates need an even m ≥ 2, got {m}"),
            ));
        }
        let grid_size = self.grid_size.unwrap_or(DEFAULT_GRID_SIZE);
        if grid_size < 10 * m {
            return Err(CliError::config(
                "grid_size",
                format!("{grid_size} is below 10·m = {}", 10 * m),
            ));
        }
        let source = self.spike_source(m)?;
        if let SpikeSource::Measure(x) = &source {
            if x.is_empty() {
                return Err(CliError::config("target", "support is empty"));
            }
            if !separation_ok(x.support(), m).map_err(|e| CliError::config("target", e.to_string()))? {
                return Err(CliError::config(
                    "target",
                    format!("support is not separated at m = {m}"),
                ));
            }
        }
        Ok(CertificateParams {
            m,
            grid_size,
            seed: self.seed(),
            source,
        })
    }

    pub fn rice_params(&self) -> CliResult<RiceParams> {
        let m = self.m()?;
        let d = self.d.unwrap_or(-1);
        if d < -1 || m as i64 <= d as i64 {
            return Err(CliError::config("d", format!("need -1 ≤ d < m, got d = {d}, m = {m}")));
        }
        let sigma = match Self::level(self.sigma.or(self.sigma0), "sigma")? {
            Some(s) if s > 0.0 => s,
            _ => return Err(CliError::config("sigma", "rice-check needs a positive noise level")),
        };
        let trials = self.trials.unwrap_or(DEFAULT_RICE_TRIALS);
        if trials < MIN_RICE_TRIALS {
            return Err(CliError::config(
                "trials",
                format!("{trials} is below the minimum {MIN_RICE_TRIALS}"),
            ));
        }
        Ok(RiceParams {
            m,
            d,
            sigma,
            eta: self.eta()?,
            trials,
            seed: self.seed(),
        })
    }

    pub fn sweep_spec(&self) -> CliResult<&SweepSpec> {
        let spec = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::config("sweep", "missing"))?;
        if !matches!(spec.mode, Mode::RecoverSpikes | Mode::RecoverSpline) {
            return Err(CliError::config(
                "sweep.mode",
                "must be recover-spikes or recover-spline",
            ));
        }
        if spec.values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::config("sweep.values", "non-finite value"));
        }
        Ok(spec)
    }

    /// The config of one sweep row: the swept field replaced by `value`, mode set to the row mode.
    pub fn sweep_row(&self, value: f64) -> CliResult<ExperimentConfig> {
        let spec = self.sweep_spec()?;
        let mut row = self.clone();
        row.mode = Some(spec.mode);
        row.sweep = None;
        match spec.axis {
            SweepAxis::Sigma0 => {
                row.sigma0 = Some(value);
                row.sigma = None;
            }
            SweepAxis::Lambda => row.lambda = Some(value),
            SweepAxis::M => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(CliError::config(
                        "sweep.values",
                        format!("m = {value} is not a positive integer"),
                    ));
                }
                row.m = Some(value as usize);
            }
        }
        Ok(row)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpikeSource {
    Measure(DiscreteMeasure),
    Random { count: usize, amplitude: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeParams {
    pub m: usize,
    pub d: i32,
    pub sigma: f64,
    pub eta: f64,
    /// `None` selects `λ_0(η)`.
    pub lambda: Option<f64>,
    pub seed: u64,
    pub source: SpikeSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineParams {
    pub m: usize,
    pub d: usize,
    pub sigma0: Option<f64>,
    /// Noise level on `Θ`.
    pub sigma: f64,
    pub alpha: f64,
    /// `None` selects the Algorithm-1 level `2 λ_0(α)`.
    pub lambda: Option<f64>,
    pub seed: u64,
    pub spline: NonUniformSpline,
    pub boundary: BoundaryVector,
    /// Replaces the simulated approximation when present.
    pub polynomial: Option<ChebPoly>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateParams {
    pub m: usize,
    pub grid_size: usize,
    pub seed: u64,
    pub source: SpikeSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiceParams {
    pub m: usize,
    pub d: i32,
    pub sigma: f64,
    pub eta: f64,
    pub trials: usize,
    pub seed: u64,
}
