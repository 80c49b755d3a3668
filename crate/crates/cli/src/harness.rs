//! Experiment drivers. Each `compute_*` function is pure given its
//! parameters; the `run_*` wrappers write artifacts to the output directory.
//!
//! Seeds: the target draw uses `seed`, moment or `Θ` noise uses
//! `seed + 2^32`, prediction test polynomials use `seed + 2^33`. Monte-Carlo
//! trial `i` and sweep row `i` use `seed + i`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chebspike::blasso::{solve_blasso, BlassoOptions, KktResiduals, PrimalSolution};
use chebspike::certificate::{build_certificate, verify_certificate, CertificateKind};
use chebspike::cheb::{chebyshev_extrema, phi_row};
use chebspike::diagnostics::{lemma6_margin, recovery_report, theorem2_report, RecoveryReport, Theorem2Report};
use chebspike::observation::{
    assemble_y_from_projection, gaussian_noise, lambda_algorithm, lambda_rice, polynomial_from_theta,
    random_separated_measure, rice_tail_bound, simulate, theta_of_polynomial,
};
use chebspike::spline::{integrate_from_spikes, projection_vector, SplineReconstruction};
use chebspike::{BoundaryVector, ChebPoly, DiscreteMeasure, NonUniformSpline, Observation};
use rayon::prelude::*;

use crate::config::{
    CertificateParams, ExperimentConfig, Mode, RiceParams, SpikeParams, SpikeSource, SplineParams,
    DEFAULT_PREDICTION_TRIALS,
};
use crate::error::{CliError, CliResult};
use crate::formats::{
    write_json, CertificateReportJson, CertificateRunJson, KktJson, MeasureJson, ObservationJson, RecoveryReportJson,
    RiceSummaryJson, SolutionJson, SplineJson, SplineReportJson, TimingJson,
};
use crate::table::{Cell, TableWriter, PLOT, SPIKES, SWEEP};

const NOISE_STREAM: u64 = 1 << 32;
const PREDICTION_STREAM: u64 = 1 << 33;

/// Relative duality gap and `KKT residual / λ` accepted as optimal.
pub const OPTIMALITY_TOL: f64 = 1e-6;
/// Boundary mismatch of the rebuilt spline, relative to `1 + ‖b‖_∞`.
pub const BOUNDARY_TOL: f64 = 1e-8;
pub const PLOT_POINTS: usize = 1024;
pub const RICE_GRID: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

pub fn max_kkt(k: &KktResiduals) -> f64 {
    k.tv_identity_gap.max(k.feasibility_gap).max(k.constraint_residual)
}

/// Duality gap and first-order residuals both within [`OPTIMALITY_TOL`].
pub fn is_optimal(sol: &PrimalSolution) -> bool {
    sol.duality_gap <= OPTIMALITY_TOL && max_kkt(&sol.kkt_residuals) <= OPTIMALITY_TOL * sol.lambda
}

fn draw_measure(source: &SpikeSource, m: usize, seed: u64) -> CliResult<DiscreteMeasure> {
    match source {
        SpikeSource::Measure(x) => Ok(x.clone()),
        SpikeSource::Random { count, amplitude } => random_separated_measure(*count, m, *amplitude, seed)
            .map_err(|e| CliError::config("target.random_spikes", e.to_string())),
    }
}

/// Sup-norm of `Σ_{k>d} (y_k - c_k(x)) φ_k` on a `max(4096, 16(m+1))`-point extrema grid.
pub fn noise_sup(obs: &Observation, truth: &DiscreteMeasure) -> f64 {
    let exact = obs.exact_len();
    let coeffs: Vec<f64> = obs
        .y()
        .iter()
        .zip(truth.moments(obs.m()))
        .enumerate()
        .map(|(k, (y, c))| if k < exact { 0.0 } else { y - c })
        .collect();
    ChebPoly::new(coeffs).grid_sup(RICE_GRID.max(16 * (obs.m() + 1)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRun {
    pub truth: DiscreteMeasure,
    pub obs: Observation,
    pub lambda: f64,
    pub lambda0_rice: Option<f64>,
    pub noise_sup: f64,
    pub solution: PrimalSolution,
    pub report: RecoveryReport,
}

impl SpikeRun {
    pub fn passes(&self) -> bool {
        self.report.passes() && is_optimal(&self.solution)
    }
}

pub fn compute_spikes(p: &SpikeParams) -> CliResult<SpikeRun> {
    let truth = draw_measure(&p.source, p.m, p.seed)?;
    let obs = simulate(&truth, p.m, p.d, p.sigma, p.seed.wrapping_add(NOISE_STREAM))?;
    let lambda0_rice = if p.sigma > 0.0 {
        Some(lambda_rice(p.sigma, p.m, p.d, p.eta)?)
    } else {
        None
    };
    let lambda = p
        .lambda
        .or(lambda0_rice)
        .ok_or_else(|| CliError::config("lambda", "required when the noise level is zero"))?;
    let noise = noise_sup(&obs, &truth);
    let solution = solve_blasso(&obs, lambda, &BlassoOptions::default())?;
    let mut report = recovery_report(&solution.measure, &truth, lambda, p.m);
    report.lemma6_margin = Some(lemma6_margin(
        &solution.measure,
        &truth,
        lambda,
        noise,
        p.m,
        DEFAULT_PREDICTION_TRIALS,
        p.seed.wrapping_add(PREDICTION_STREAM),
    )?);
    Ok(SpikeRun {
        truth,
        obs,
        lambda,
        lambda0_rice,
        noise_sup: noise,
        solution,
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineRun {
    pub m: usize,
    pub d: usize,
    pub sigma0: Option<f64>,
    pub sigma: f64,
    pub truth: NonUniformSpline,
    pub boundary: BoundaryVector,
    pub theta: Vec<f64>,
    /// The polynomial approximation `P` with `Θ(P) = theta`.
    pub approx: ChebPoly,
    pub obs: Observation,
    pub lambda: f64,
    pub lambda0_rice: Option<f64>,
    pub solution: PrimalSolution,
    pub recovered: SplineReconstruction,
    pub report: Theorem2Report,
    pub left_boundary_error: f64,
}

impl SplineRun {
    fn boundary_scale(&self) -> f64 {
        1.0 + self.boundary.values().iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn boundary_ok(&self) -> bool {
        let tol = BOUNDARY_TOL * self.boundary_scale();
        self.left_boundary_error <= tol && self.recovered.max_right_residual() <= tol
    }

    pub fn passes(&self) -> bool {
        self.report.passes() && self.boundary_ok() && is_optimal(&self.solution)
    }
}

pub fn compute_spline(p: &SplineParams) -> CliResult<SplineRun> {
    let (m, d) = (p.m, p.d);
    let (theta, approx) = match &p.polynomial {
        Some(poly) => (theta_of_polynomial(poly, m, d as i32)?, poly.clone()),
        None => {
            let mut theta = projection_vector(&p.spline, m)?;
            if p.sigma > 0.0 {
                let noise = gaussian_noise(theta.len(), p.sigma, p.seed.wrapping_add(NOISE_STREAM));
                theta.iter_mut().zip(noise).for_each(|(t, e)| *t += e);
            }
            let approx = polynomial_from_theta(&theta, m, d as i32)?;
            (theta, approx)
        }
    };
    let obs = assemble_y_from_projection(&theta, &p.boundary, m, d)?.with_sigma(p.sigma)?;
    let lambda0_rice = if p.sigma > 0.0 {
        Some(lambda_rice(p.sigma, m, d as i32, p.alpha)?)
    } else {
        None
    };
    let lambda = match p.lambda {
        Some(l) => l,
        None if p.sigma > 0.0 => lambda_algorithm(p.sigma, m, d as i32, p.alpha)?,
        None => return Err(CliError::config("lambda", "required when the noise level is zero")),
    };
    let solution = solve_blasso(&obs, lambda, &BlassoOptions::default())?;
    let recovered = integrate_from_spikes(&solution.measure, &p.boundary, d)?;
    let report = theorem2_report(&recovered.spline, &p.spline, lambda, m)?;
    let left_boundary_error = recovered
        .spline
        .boundary_vector()
        .left()
        .iter()
        .zip(p.boundary.left())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    Ok(SplineRun {
        m,
        d,
        sigma0: p.sigma0,
        sigma: p.sigma,
        truth: p.spline.clone(),
        boundary: p.boundary.clone(),
        theta,
        approx,
        obs,
        lambda,
        lambda0_rice,
        solution,
        recovered,
        report,
        left_boundary_error,
    })
}

pub fn spline_report(run: &SplineRun) -> SplineReportJson {
    let x = &run.solution.measure;
    SplineReportJson {
        m: run.m,
        d: run.d,
        sigma0: run.sigma0,
        sigma: run.sigma,
        lambda: run.lambda,
        lambda0_rice: run.lambda0_rice,
        true_knots: run.truth.knots().to_vec(),
        true_jumps: run.report.true_jumps.clone(),
        recovered_knots: x.support().to_vec(),
        recovered_jumps: x.weights().to_vec(),
        global_control: run.report.global_control,
        global_bound: chebspike::diagnostics::C1 * run.lambda,
        global_ok: run.report.global_ok(),
        localization: run.report.localization.iter().map(Into::into).collect(),
        localization_ok: run.report.localization_ok(),
        boundary: run.boundary.values().to_vec(),
        left_boundary_error: run.left_boundary_error,
        right_boundary_residual: run.recovered.max_right_residual(),
        boundary_ok: run.boundary_ok(),
        duality_gap: run.solution.duality_gap,
        kkt: KktJson::from(run.solution.kkt_residuals),
        degenerate: run.solution.degenerate,
        passes: run.passes(),
    }
}

fn signs_of(x: &DiscreteMeasure) -> Vec<f64> {
    x.weights().iter().map(|w| w.signum()).collect()
}

/// One signed interpolant per support point plus the QIC certificate for the target's signs.
pub fn compute_certificates(p: &CertificateParams) -> CliResult<CertificateRunJson> {
    let x = draw_measure(&p.source, p.m, p.seed)?;
    let support = x.support().to_vec();
    let mut kinds: Vec<CertificateKind> = (0..support.len())
        .map(|anchor| CertificateKind::SignedInterpolant { anchor })
        .collect();
    kinds.push(CertificateKind::Qic { values: signs_of(&x) });
    let certificates = kinds
        .into_par_iter()
        .map(|kind| {
            let cert = build_certificate(&support, p.m, kind)?;
            let report = verify_certificate(&cert, &support, p.m, p.grid_size)?;
            Ok(CertificateReportJson::new(&cert.kind, &cert.targets, &report))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(CertificateRunJson {
        m: p.m,
        passes: certificates.iter().all(|c| c.passes),
        support,
        certificates,
    })
}

/// Monte-Carlo frequency of `sup|Σ_{k>d} ε_k φ_k| > λ_0(η)` against the tail bound.
pub fn compute_rice(p: &RiceParams) -> CliResult<RiceSummaryJson> {
    let lambda0 = lambda_rice(p.sigma, p.m, p.d, p.eta)?;
    let bound = rice_tail_bound(lambda0, p.sigma, p.m, p.d)?;
    let first = (p.d + 1) as usize;
    let width = p.m + 1 - first;
    let grid = chebyshev_extrema(RICE_GRID.max(4 * p.m));
    let table: Vec<f64> = grid.iter().flat_map(|&t| phi_row(p.m, t).split_off(first)).collect();
    let exceedances = (0..p.trials as u64)
        .into_par_iter()
        .filter(|&i| {
            let eps = gaussian_noise(width, p.sigma, p.seed.wrapping_add(i));
            table
                .chunks_exact(width)
                .any(|row| row.iter().zip(&eps).map(|(a, b)| a * b).sum::<f64>().abs() > lambda0)
        })
        .count();
    let n = p.trials as f64;
    let frequency = exceedances as f64 / n;
    let standard_error = (bound * (1.0 - bound) / n).sqrt();
    let threshold = bound + 3.0 * standard_error;
    Ok(RiceSummaryJson {
        m: p.m,
        d: p.d,
        sigma: p.sigma,
        eta: p.eta,
        trials: p.trials,
        seed: p.seed,
        grid_size: grid.len(),
        lambda0,
        exceedances,
        frequency,
        bound,
        standard_error,
        threshold,
        passes: frequency <= threshold,
    })
}

fn single_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

/// One CSV row per sweep value; failures are recorded in the row rather than aborting the sweep.
pub fn compute_sweep(cfg: &ExperimentConfig) -> CliResult<Vec<Vec<Cell>>> {
    let spec = cfg.sweep_spec()?;
    let rows = spec
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &value)| {
            let seed = cfg.seed().wrapping_add(i as u64);
            let mut row: Vec<Cell> = vec![
                spec.axis.name().into(),
                value.into(),
                spec.mode.name().into(),
                Cell::Int(seed as i64),
            ];
            let metrics = cfg.sweep_row(value).and_then(|mut c| {
                c.seed = Some(seed);
                sweep_metrics(&c, spec.mode)
            });
            match metrics {
                Ok(cells) => {
                    row.push("ok".into());
                    row.push(Cell::Empty);
                    row.extend(cells);
                }
                Err(e) => {
                    row.push("failed".into());
                    row.push(Cell::Text(single_line(&e.to_string())));
                    row.resize(SWEEP.columns.len(), Cell::Empty);
                }
            }
            row
        })
        .collect();
    Ok(rows)
}

fn sweep_metrics(cfg: &ExperimentConfig, mode: Mode) -> CliResult<Vec<Cell>> {
    match mode {
        Mode::RecoverSpikes => {
            let run = compute_spikes(&cfg.spike_params()?)?;
            Ok(vec![
                run.lambda.into(),
                run.lambda0_rice.into(),
                run.lambda0_rice.map(|l0| run.lambda < l0).into(),
                run.truth.len().into(),
                run.solution.measure.len().into(),
                run.report.global_control.into(),
                run.report.global_ok().into(),
                run.report.local_ok().into(),
                run.report.localization_ok().into(),
                run.solution.duality_gap.into(),
                max_kkt(&run.solution.kkt_residuals).into(),
                Cell::Empty,
            ])
        }
        Mode::RecoverSpline => {
            let run = compute_spline(&cfg.spline_params()?)?;
            Ok(vec![
                run.lambda.into(),
                run.lambda0_rice.into(),
                run.lambda0_rice.map(|l0| run.lambda < l0).into(),
                run.truth.knots().len().into(),
                run.solution.measure.len().into(),
                run.report.global_control.into(),
                run.report.global_ok().into(),
                Cell::Empty,
                run.report.localization_ok().into(),
                run.solution.duality_gap.into(),
                max_kkt(&run.solution.kkt_residuals).into(),
                run.left_boundary_error.max(run.recovered.max_right_residual()).into(),
            ])
        }
        other => Err(CliError::config(
            "sweep.mode",
            format!("{} cannot be swept", other.name()),
        )),
    }
}

fn prepare(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_timing(dir: &Path, mode: Mode, start: Instant, files: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join("timing.json");
    write_json(
        &path,
        &TimingJson {
            mode: mode.name().into(),
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
    )?;
    files.push(path);
    Ok(())
}

fn emit<T: serde::Serialize>(dir: &Path, name: &str, value: &T, files: &mut Vec<PathBuf>) -> CliResult<()> {
    let path = dir.join(name);
    write_json(&path, value)?;
    files.push(path);
    Ok(())
}

fn write_spikes_csv(dir: &Path, truth: &DiscreteMeasure, recovered: &DiscreteMeasure) -> CliResult<PathBuf> {
    let mut w = TableWriter::create(dir, SPIKES)?;
    for (source, x) in [("true", truth), ("recovered", recovered)] {
        for (t, a) in x.atoms() {
            w.write_row(&[source.into(), t.into(), a.into()])?;
        }
    }
    Ok(w.finish()?.0)
}

pub fn run_recover_spikes(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let start = Instant::now();
    let params = cfg.spike_params()?;
    let dir = cfg.out_dir();
    prepare(&dir)?;
    let run = compute_spikes(&params)?;
    let mut files = Vec::new();
    emit(&dir, "target.json", &MeasureJson::from_measure(&run.truth), &mut files)?;
    emit(
        &dir,
        "observation.json",
        &ObservationJson::from_observation(&run.obs),
        &mut files,
    )?;
    emit(
        &dir,
        "solution.json",
        &SolutionJson::from_solution(&run.solution),
        &mut files,
    )?;
    let report = RecoveryReportJson::new(&run.report, run.lambda0_rice, run.noise_sup);
    emit(&dir, "report.json", &report, &mut files)?;
    files.push(write_spikes_csv(&dir, &run.truth, &run.solution.measure)?);
    write_timing(&dir, Mode::RecoverSpikes, start, &mut files)?;
    Ok(Outcome {
        passed: run.passes(),
        summary: format!(
            "recovered {} of {} atoms at λ = {:.4e}; duality gap {:.2e}; diagnostics {}",
            run.solution.measure.len(),
            run.truth.len(),
            run.lambda,
            run.solution.duality_gap,
            if run.report.passes() { "pass" } else { "fail" }
        ),
        files,
    })
}

pub fn write_plot_csv(dir: &Path, run: &SplineRun) -> CliResult<PathBuf> {
    let mut w = TableWriter::create(dir, PLOT)?;
    let last = (PLOT_POINTS - 1) as f64;
    for i in 0..PLOT_POINTS {
        let t = -1.0 + 2.0 * i as f64 / last;
        w.write_row(&[
            t.into(),
            run.truth.value(t).into(),
            run.recovered.spline.value(t).into(),
            run.approx.value_at(t).into(),
        ])?;
    }
    Ok(w.finish()?.0)
}

pub fn run_algorithm1(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let start = Instant::now();
    let params = cfg.spline_params()?;
    let dir = cfg.out_dir();
    prepare(&dir)?;
    let run = compute_spline(&params)?;
    let mut files = Vec::new();
    emit(
        &dir,
        "spline.json",
        &SplineJson::from_spline(&run.recovered.spline),
        &mut files,
    )?;
    emit(
        &dir,
        "spikes.json",
        &MeasureJson::from_measure(&run.solution.measure),
        &mut files,
    )?;
    emit(
        &dir,
        "observation.json",
        &ObservationJson::from_observation(&run.obs),
        &mut files,
    )?;
    emit(&dir, "report.json", &spline_report(&run), &mut files)?;
    files.push(write_plot_csv(&dir, &run)?);
    files.push(write_spikes_csv(
        &dir,
        &run.truth.distributional_derivative(),
        &run.solution.measure,
    )?);
    write_timing(&dir, Mode::RecoverSpline, start, &mut files)?;
    Ok(Outcome {
        passed: run.passes(),
        summary: format!(
            "recovered {} knots (true {}) at λ = {:.4e}; boundary residual {:.2e}; diagnostics {}",
            run.solution.measure.len(),
            run.truth.knots().len(),
            run.lambda,
            run.recovered.max_right_residual(),
            if run.report.passes() { "pass" } else { "fail" }
        ),
        files,
    })
}

pub fn run_certificate(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let start = Instant::now();
    let params = cfg.certificate_params()?;
    let dir = cfg.out_dir();
    prepare(&dir)?;
    let report = compute_certificates(&params)?;
    let mut files = Vec::new();
    emit(&dir, "certificate_report.json", &report, &mut files)?;
    write_timing(&dir, Mode::Certificate, start, &mut files)?;
    let worst = report
        .certificates
        .iter()
        .filter_map(|c| c.worst_margin)
        .fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        passed: report.passes,
        summary: format!(
            "{} certificates on {} support points; worst margin {:.3e}",
            report.certificates.len(),
            report.support.len(),
            worst
        ),
        files,
    })
}

pub fn run_rice_check(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let start = Instant::now();
    let params = cfg.rice_params()?;
    let dir = cfg.out_dir();
    prepare(&dir)?;
    let summary = compute_rice(&params)?;
    let mut files = Vec::new();
    emit(&dir, "rice_summary.json", &summary, &mut files)?;
    write_timing(&dir, Mode::RiceCheck, start, &mut files)?;
    Ok(Outcome {
        passed: summary.passes,
        summary: format!(
            "exceedance frequency {} vs bound {} (+3 SE = {})",
            summary.frequency, summary.bound, summary.threshold
        ),
        files,
    })
}

pub fn run_sweep(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let start = Instant::now();
    let dir = cfg.out_dir();
    let rows = compute_sweep(cfg)?;
    prepare(&dir)?;
    let mut w = TableWriter::create(&dir, SWEEP)?;
    for row in &rows {
        w.write_row(row)?;
    }
    let (path, n) = w.finish()?;
    let mut files = vec![path];
    write_timing(&dir, Mode::Sweep, start, &mut files)?;
    let failed = rows.iter().filter(|r| r[4] == Cell::Text("failed".into())).count();
    Ok(Outcome {
        passed: failed == 0,
        summary: format!("{n} sweep rows, {failed} failed"),
        files,
    })
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    match cfg.mode()? {
        Mode::RecoverSpikes => run_recover_spikes(cfg),
        Mode::RecoverSpline => run_algorithm1(cfg),
        Mode::Certificate => run_certificate(cfg),
        Mode::RiceCheck => run_rice_check(cfg),
        Mode::Sweep => run_sweep(cfg),
    }
}
