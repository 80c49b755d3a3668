//! Error bounds for a recovered measure against the truth: global control of
//! mass away from the true support, local control of the weight near each
//! true spike, localization of large spikes, the same checks on spline jumps,
//! and the prediction bound `|∫P d(x̂ - x)| ≤ (λ + λ_0)‖P‖_∞`.

use alloc::vec::Vec;

use libm::sqrt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cheb::{dist, ChebPoly};
use crate::error::{invalid, Result};
use crate::measure::DiscreteMeasure;
use crate::spline::NonUniformSpline;

pub const C0: f64 = 1.0361;
pub const C1: f64 = 235.85;
pub const C2: f64 = 220.72;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

pub const CONSTANTS: Constants = Constants { c0: C0, c1: C1, c2: C2 };

fn nearest(t: f64, points: &[f64]) -> f64 {
    points.iter().map(|&s| dist(t, s)).fold(f64::INFINITY, f64::min)
}

/// `Σ_k |â_k| min(m² min_{t∈T} d(t, t̂_k)², c0²)`.
pub fn global_control(xhat: &DiscreteMeasure, truth: &[f64], m: usize) -> f64 {
    let mf = m as f64;
    xhat.atoms()
        .map(|(t, a)| {
            let d = nearest(t, truth);
            a.abs() * (mf * mf * d * d).min(C0 * C0)
        })
        .sum()
}

/// `|a_i - Σ_{d(t_i, t̂_k) ≤ c0/m} â_k|` per true spike; the ball is closed.
pub fn local_control(xhat: &DiscreteMeasure, truth: &DiscreteMeasure, m: usize) -> Vec<f64> {
    let radius = C0 / m as f64;
    truth
        .atoms()
        .map(|(t, a)| {
            let near: f64 = xhat
                .atoms()
                .filter(|&(s, _)| dist(t, s) <= radius)
                .map(|(_, w)| w)
                .sum();
            (a - near).abs()
        })
        .collect()
}

/// `[c1 λ / (|a| - c2 λ)]^{1/2} / m` when `|a| > c2 λ`, otherwise `+∞`.
pub fn localization_radius(amplitude: f64, lambda: f64, m: usize) -> f64 {
    let excess = amplitude.abs() - C2 * lambda;
    if excess > 0.0 {
        sqrt(C1 * lambda / excess) / m as f64
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Localization {
    /// Index of the true spike (or knot).
    pub index: usize,
    pub amplitude: f64,
    pub required_radius: f64,
    /// Arccos distance to the closest recovered atom; `+∞` if none.
    pub achieved_distance: f64,
}

impl Localization {
    pub fn holds(&self) -> bool {
        self.achieved_distance <= self.required_radius
    }
}

fn localizations(
    xhat: &DiscreteMeasure,
    points: &[f64],
    amplitudes: &[f64],
    lambda: f64,
    m: usize,
) -> Vec<Localization> {
    points
        .iter()
        .zip(amplitudes)
        .enumerate()
        .filter(|(_, (_, a))| a.abs() > C2 * lambda)
        .map(|(index, (&t, &a))| Localization {
            index,
            amplitude: a,
            required_radius: localization_radius(a, lambda, m),
            achieved_distance: nearest(t, xhat.support()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub m: usize,
    pub lambda: f64,
    pub global_control: f64,
    pub local_controls: Vec<f64>,
    pub localization: Vec<Localization>,
    pub lemma6_margin: Option<f64>,
    pub constants: Constants,
}

impl RecoveryReport {
    pub fn global_ok(&self) -> bool {
        self.global_control <= C1 * self.lambda
    }

    pub fn local_ok(&self) -> bool {
        self.local_controls.iter().all(|&v| v <= C2 * self.lambda)
    }

    pub fn localization_ok(&self) -> bool {
        self.localization.iter().all(Localization::holds)
    }

    pub fn passes(&self) -> bool {
        self.global_ok() && self.local_ok() && self.localization_ok() && self.lemma6_margin.is_none_or(|v| v <= 0.0)
    }
}

pub fn recovery_report(xhat: &DiscreteMeasure, truth: &DiscreteMeasure, lambda: f64, m: usize) -> RecoveryReport {
    RecoveryReport {
        m,
        lambda,
        global_control: global_control(xhat, truth.support(), m),
        local_controls: local_control(xhat, truth, m),
        localization: localizations(xhat, truth.support(), truth.weights(), lambda, m),
        lemma6_margin: None,
        constants: CONSTANTS,
    }
}

/// Worst `|∫P d(x̂ - x)| - (λ + λ_0)` over `trials` degree-`m` polynomials with
/// standard Gaussian `φ`-coefficients, each scaled to unit sup-norm on a grid
/// of `16(m+1)` Chebyshev extrema. Drawn from ChaCha8 seeded with `seed`.
pub fn lemma6_margin(
    xhat: &DiscreteMeasure,
    truth: &DiscreteMeasure,
    lambda: f64,
    lambda0: f64,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("lemma 6 check needs at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let coeffs: Vec<f64> = (0..=m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p = ChebPoly::new(coeffs);
        let sup = p.grid_sup(16 * (m + 1));
        let p = p.scaled(1.0 / sup);
        let integral = xhat.integrate(&p) - truth.integrate(&p);
        worst = worst.max(integral.abs() - (lambda + lambda0));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    pub m: usize,
    pub lambda: f64,
    /// `Σ_k |ĵ_k| min(m² min_{t∈T} d(t, t̂_k)², c0²)` over recovered jumps `ĵ_k`,
    /// with `T` the true knots together with `±1`.
    pub global_control: f64,
    /// Knots whose jump exceeds `c2 λ`.
    pub localization: Vec<Localization>,
    /// Jump sizes at the true knots, in knot order.
    pub true_jumps: Vec<f64>,
}

impl Theorem2Report {
    pub fn global_ok(&self) -> bool {
        self.global_control <= C1 * self.lambda
    }

    pub fn localization_ok(&self) -> bool {
        self.localization.iter().all(Localization::holds)
    }

    pub fn passes(&self) -> bool {
        self.global_ok() && self.localization_ok()
    }
}

/// Theorem-1 style checks applied to the jumps of `P^{(d)}`, i.e. to the
/// distributional derivatives `f̂^{(d+1)}` and `f^{(d+1)}`.
pub fn theorem2_report(fhat: &NonUniformSpline, f: &NonUniformSpline, lambda: f64, m: usize) -> Result<Theorem2Report> {
    if fhat.degree() != f.degree() {
        return Err(invalid(alloc::format!(
            "spline degrees differ: {} recovered vs {} true",
            fhat.degree(),
            f.degree()
        )));
    }
    let xhat = fhat.distributional_derivative();
    let jumps = f.jumps();
    let mut anchors = Vec::with_capacity(f.knots().len() + 2);
    anchors.push(-1.0);
    anchors.extend_from_slice(f.knots());
    anchors.push(1.0);
    Ok(Theorem2Report {
        m,
        lambda,
        global_control: global_control(&xhat, &anchors, m),
        localization: localizations(&xhat, f.knots(), &jumps, lambda, m),
        true_jumps: jumps,
    })
}
