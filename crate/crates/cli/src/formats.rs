//! JSON documents read and written by the harness.
//!
//! Non-finite floats have no JSON spelling; optional fields carry them as `null`.

use std::fs;
use std::path::Path;

use chebspike::blasso::{KktResiduals, PrimalSolution};
use chebspike::certificate::{CertificateKind, CertificateReport};
use chebspike::diagnostics::{Localization, RecoveryReport};
use chebspike::sdp::SdpStatus;
use chebspike::{BoundaryVector, DiscreteMeasure, NonUniformSpline, Observation};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureJson {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MeasureJson {
    pub fn from_measure(x: &DiscreteMeasure) -> Self {
        Self {
            support: x.support().to_vec(),
            weights: x.weights().to_vec(),
        }
    }

    pub fn to_measure(&self, field: &str) -> CliResult<DiscreteMeasure> {
        DiscreteMeasure::new(self.support.clone(), self.weights.clone())
            .map_err(|e| CliError::config(field, e.to_string()))
    }
}

/// `pieces[i]` are monomial coefficients in `t`, lowest order first, valid on `[knots[i-1], knots[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineJson {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub pieces: Vec<Vec<f64>>,
}

impl SplineJson {
    pub fn from_spline(f: &NonUniformSpline) -> Self {
        Self {
            degree: f.degree(),
            knots: f.knots().to_vec(),
            pieces: f.pieces().to_vec(),
        }
    }

    pub fn to_spline(&self, field: &str) -> CliResult<NonUniformSpline> {
        NonUniformSpline::new(self.degree, self.knots.clone(), self.pieces.clone())
            .map_err(|e| CliError::config(field, e.to_string()))
    }
}

/// `(f(-1), …, f^{(d)}(-1), f(1), …, f^{(d)}(1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryJson {
    pub boundary: Vec<f64>,
}

impl BoundaryJson {
    pub fn to_boundary(&self, degree: usize, field: &str) -> CliResult<BoundaryVector> {
        let want = 2 * (degree + 1);
        if self.boundary.len() != want {
            return Err(CliError::config(
                field,
                format!(
                    "degree {degree} needs {want} boundary values, got {}",
                    self.boundary.len()
                ),
            ));
        }
        BoundaryVector::new(self.boundary.clone()).map_err(|e| CliError::config(field, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationJson {
    pub y: Vec<f64>,
    pub d: i32,
    pub m: usize,
    pub sigma: f64,
}

impl ObservationJson {
    pub fn from_observation(obs: &Observation) -> Self {
        Self {
            y: obs.y().to_vec(),
            d: obs.d(),
            m: obs.m(),
            sigma: obs.sigma(),
        }
    }

    pub fn to_observation(&self, field: &str) -> CliResult<Observation> {
        Observation::new(self.y.clone(), self.d, self.m, self.sigma).map_err(|e| CliError::config(field, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktJson {
    pub tv_identity_gap: f64,
    pub feasibility_gap: f64,
    pub constraint_residual: f64,
}

impl From<KktResiduals> for KktJson {
    fn from(k: KktResiduals) -> Self {
        Self {
            tv_identity_gap: k.tv_identity_gap,
            feasibility_gap: k.feasibility_gap,
            constraint_residual: k.constraint_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionJson {
    pub lambda: f64,
    pub measure: MeasureJson,
    /// `φ`-coefficients of the dual polynomial `Σ α̂_k φ_k`.
    pub alpha: Vec<f64>,
    pub constant_part: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    pub kkt: KktJson,
    pub degenerate: bool,
    pub sdp_status: String,
    pub sdp_iterations: usize,
    pub sdp_gap: f64,
}

fn status_name(s: SdpStatus) -> &'static str {
    match s {
        SdpStatus::Solved => "solved",
        SdpStatus::MaxIter => "max_iter",
        SdpStatus::Infeasible => "infeasible",
    }
}

impl SolutionJson {
    pub fn from_solution(sol: &PrimalSolution) -> Self {
        Self {
            lambda: sol.lambda,
            measure: MeasureJson::from_measure(&sol.measure),
            alpha: sol.dual.alpha.clone(),
            constant_part: sol.constant_part.clone(),
            primal_objective: sol.primal_objective,
            dual_objective: sol.dual.objective,
            duality_gap: sol.duality_gap,
            kkt: sol.kkt_residuals.into(),
            degenerate: sol.degenerate,
            sdp_status: status_name(sol.sdp_status).into(),
            sdp_iterations: sol.sdp_iterations,
            sdp_gap: sol.sdp_gap,
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationJson {
    pub index: usize,
    pub amplitude: f64,
    pub required_radius: Option<f64>,
    /// `null` when nothing was recovered.
    pub achieved_distance: Option<f64>,
    pub holds: bool,
}

impl From<&Localization> for LocalizationJson {
    fn from(l: &Localization) -> Self {
        Self {
            index: l.index,
            amplitude: l.amplitude,
            required_radius: finite(l.required_radius),
            achieved_distance: finite(l.achieved_distance),
            holds: l.holds(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsJson {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReportJson {
    pub m: usize,
    pub lambda: f64,
    /// Rice level `λ_0(η)`; `null` without noise.
    pub lambda0_rice: Option<f64>,
    /// Realized sup-norm of the noise polynomial, used as `λ_0` in the prediction check.
    pub noise_sup: f64,
    pub global_control: f64,
    pub global_bound: f64,
    pub global_ok: bool,
    pub local_controls: Vec<f64>,
    pub local_bound: f64,
    pub local_ok: bool,
    pub localization: Vec<LocalizationJson>,
    pub localization_ok: bool,
    pub prediction_margin: Option<f64>,
    pub constants: ConstantsJson,
    pub passes: bool,
}

impl RecoveryReportJson {
    pub fn new(r: &RecoveryReport, lambda0_rice: Option<f64>, noise_sup: f64) -> Self {
        Self {
            m: r.m,
            lambda: r.lambda,
            lambda0_rice,
            noise_sup,
            global_control: r.global_control,
            global_bound: r.constants.c1 * r.lambda,
            global_ok: r.global_ok(),
            local_controls: r.local_controls.clone(),
            local_bound: r.constants.c2 * r.lambda,
            local_ok: r.local_ok(),
            localization: r.localization.iter().map(Into::into).collect(),
            localization_ok: r.localization_ok(),
            prediction_margin: r.lemma6_margin,
            constants: ConstantsJson {
                c0: r.constants.c0,
                c1: r.constants.c1,
                c2: r.constants.c2,
            },
            passes: r.passes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineReportJson {
    pub m: usize,
    pub d: usize,
    pub sigma0: Option<f64>,
    pub sigma: f64,
    pub lambda: f64,
    pub lambda0_rice: Option<f64>,
    pub true_knots: Vec<f64>,
    pub true_jumps: Vec<f64>,
    pub recovered_knots: Vec<f64>,
    pub recovered_jumps: Vec<f64>,
    pub global_control: f64,
    pub global_bound: f64,
    pub global_ok: bool,
    pub localization: Vec<LocalizationJson>,
    pub localization_ok: bool,
    pub boundary: Vec<f64>,
    /// Largest `|f̂^{(l)}(-1) - b_l|`.
    pub left_boundary_error: f64,
    /// Largest `|f̂^{(l)}(1) - b_{d+1+l}|`.
    pub right_boundary_residual: f64,
    pub boundary_ok: bool,
    pub duality_gap: f64,
    pub kkt: KktJson,
    pub degenerate: bool,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyJson {
    pub name: String,
    pub worst_margin: Option<f64>,
    pub points_checked: usize,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConstant {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReportJson {
    pub kind: String,
    pub anchor: Option<usize>,
    pub targets: Vec<f64>,
    pub m: usize,
    pub grid_size: usize,
    pub constants: Vec<NamedConstant>,
    pub properties: Vec<PropertyJson>,
    pub interpolation_error: f64,
    pub odd_residual: f64,
    pub bernstein_ratio: f64,
    pub condition: f64,
    pub worst_margin: Option<f64>,
    pub passes: bool,
}

impl CertificateReportJson {
    pub fn new(kind: &CertificateKind, targets: &[f64], r: &CertificateReport) -> Self {
        let (name, anchor) = match kind {
            CertificateKind::SignedInterpolant { anchor } => ("signed_interpolant", Some(*anchor)),
            CertificateKind::Qic { .. } => ("qic", None),
        };
        Self {
            kind: name.into(),
            anchor,
            targets: targets.to_vec(),
            m: r.m,
            grid_size: r.grid_size,
            constants: r
                .constants
                .iter()
                .map(|&(name, value)| NamedConstant {
                    name: name.into(),
                    value,
                })
                .collect(),
            properties: r
                .properties
                .iter()
                .map(|p| PropertyJson {
                    name: p.name.clone(),
                    worst_margin: p.worst_margin,
                    points_checked: p.points_checked,
                    passes: p.passes(),
                })
                .collect(),
            interpolation_error: r.interpolation_error,
            odd_residual: r.odd_residual,
            bernstein_ratio: r.bernstein_ratio,
            condition: r.condition,
            worst_margin: finite(r.worst_margin()),
            passes: r.passes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRunJson {
    pub m: usize,
    pub support: Vec<f64>,
    pub certificates: Vec<CertificateReportJson>,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiceSummaryJson {
    pub m: usize,
    pub d: i32,
    pub sigma: f64,
    pub eta: f64,
    pub trials: usize,
    pub seed: u64,
    pub grid_size: usize,
    pub lambda0: f64,
    pub exceedances: usize,
    pub frequency: f64,
    /// Tail bound at `λ_0(η)`.
    pub bound: f64,
    /// Binomial standard error `sqrt(p(1-p)/n)` at `p = bound`.
    pub standard_error: f64,
    /// `bound + 3 · standard_error`.
    pub threshold: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingJson {
    pub mode: String,
    pub elapsed_seconds: f64,
}

pub fn read_json<T: DeserializeOwned>(path: &Path, field: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(field, format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))
}

/// Pretty-printed with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Schema {
        schema: "json",
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
