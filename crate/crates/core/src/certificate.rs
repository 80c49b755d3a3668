//! Explicit dual certificates for separated supports.
//!
//! A support `T ⊂ [-1, 1]` is lifted to the torus as
//! `X = {1/2 ± arccos(t)/(2π)}`, a trigonometric interpolant
//! `q̃(x) = Σ α_i K(x - x_i) + β_i K'(x - x_i)` is built from the fourth power
//! `K` of the Fejér kernel with `q̃(x_i) = v_i` and `q̃'(x_i) = 0`, and mapped
//! back to an algebraic polynomial through `t = cos θ`, `x = θ/(2π) + 1/2`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, floor, sin};
use nalgebra::{DMatrix, DVector};

use crate::cheb::{acos_clamped, dist, ChebPoly};
use crate::error::{invalid, Error, Result};
use crate::measure::separation_ok;

/// Constant `c_0` of the near/far split, `2π·0.1649`.
pub const C0: f64 = 2.0 * PI * 0.1649;
/// Lower quadratic constant.
pub const C1: f64 = 0.00424;
/// Upper quadratic constant.
pub const C2: f64 = 0.25;
/// Quadratic isolation constants.
pub const QIC_CA: f64 = 0.00848;
pub const QIC_CB: f64 = 0.00879;

/// Margins below this count as violations.
pub const MARGIN_TOL: f64 = -1e-9;
pub const INTERPOLATION_TOL: f64 = 1e-8;
pub const ODD_TOL: f64 = 1e-10;

/// Images of a support on the torus `[0, 1)`, sorted, each tagged with the
/// index of the support point it comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedSupport {
    points: Vec<f64>,
    owners: Vec<usize>,
    /// Set when `-1 ∈ T`, whose images `0` and `1` were identified.
    pub wrapped: bool,
}

impl SymmetrizedSupport {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn owners(&self) -> &[usize] {
        &self.owners
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest gap between distinct points, measured around the circle.
    pub fn min_gap(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let mut gap = 1.0 - self.points[n - 1] + self.points[0];
        for w in self.points.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
        gap
    }

    /// Largest distance from `1 - x` (mod 1) to the set, over `x` in the set.
    pub fn symmetry_defect(&self) -> f64 {
        self.points
            .iter()
            .map(|&x| {
                let mirror = wrap(1.0 - x);
                self.points
                    .iter()
                    .map(|&y| torus_dist(mirror, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}

fn wrap(x: f64) -> f64 {
    x - floor(x)
}

fn torus_dist(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(1.0 - d)
}

/// `X = {1/2 ± arccos(t)/(2π) : t ∈ T}` on `[0, 1)`; `t = 1` has the single
/// image `1/2` and `t = -1` the single image `0`.
pub fn symmetrize_support(points: &[f64]) -> Result<SymmetrizedSupport> {
    let mut images: Vec<(f64, usize)> = Vec::with_capacity(2 * points.len());
    let mut wrapped = false;
    for (j, &t) in points.iter().enumerate() {
        let t = crate::cheb::check_point(t)?;
        let h = acos_clamped(t) / (2.0 * PI);
        if h == 0.0 {
            images.push((0.5, j));
        } else if t == -1.0 {
            wrapped = true;
            images.push((0.0, j));
        } else {
            images.push((0.5 - h, j));
            images.push((0.5 + h, j));
        }
    }
    images.sort_by(|a, b| a.0.total_cmp(&b.0));
    images.dedup_by(|a, b| a.0 == b.0);
    let (points, owners) = images.into_iter().unzip();
    Ok(SymmetrizedSupport {
        points,
        owners,
        wrapped,
    })
}

/// `K(t) = [sin(Mπt) / (M sin(πt))]^4` with `M = m/2 + 1`, a trigonometric
/// polynomial of degree `m` with period 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FejerKernelSq {
    m: usize,
}

impl FejerKernelSq {
    pub fn m(&self) -> usize {
        self.m
    }

    /// `g(t) = sin(Mπt)/(M sin(πt)) = (1/M) Σ_{k<M} cos((M-1-2k)πt)` and its
    /// first two derivatives, from the cosine sum so that integers need no
    /// special case.
    fn base(&self, t: f64) -> [f64; 3] {
        let big = self.m / 2 + 1;
        let mut out = [0.0; 3];
        for k in 0..big {
            let w = (big as f64 - 1.0 - 2.0 * k as f64) * PI;
            let (s, c) = (sin(w * t), cos(w * t));
            out[0] += c;
            out[1] -= w * s;
            out[2] -= w * w * c;
        }
        let scale = 1.0 / big as f64;
        out.map(|v| v * scale)
    }

    pub fn value(&self, t: f64) -> f64 {
        let g = self.base(t)[0];
        g * g * g * g
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let [g, g1, _] = self.base(t);
        4.0 * g * g * g * g1
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let [g, g1, g2] = self.base(t);
        12.0 * g * g * g1 * g1 + 4.0 * g * g * g * g2
    }

    /// `(K, K', K'')` at `t`.
    pub fn eval_all(&self, t: f64) -> [f64; 3] {
        let [g, g1, g2] = self.base(t);
        let g2p = g * g;
        [g2p * g2p, 4.0 * g2p * g * g1, 12.0 * g2p * g1 * g1 + 4.0 * g2p * g * g2]
    }
}

pub fn fejer_kernel_sq(m: usize) -> Result<FejerKernelSq> {
    if m < 2 || m % 2 == 1 {
        return Err(invalid(format!("kernel order m = {m} must be even and at least 2")));
    }
    Ok(FejerKernelSq { m })
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertificateKind {
    /// `q(t_anchor) = 1`, `q(t_l) = 0` otherwise, with `0 ≤ q ≤ 1`.
    SignedInterpolant { anchor: usize },
    /// `q(t_j) = v_j` with `|v_j| = 1` and quadratic decay of `|q|` away from `T`.
    Qic { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub poly: ChebPoly,
    pub kind: CertificateKind,
    pub support: Vec<f64>,
    /// Values the polynomial must take on `support`.
    pub targets: Vec<f64>,
    pub m: usize,
    pub symmetrized: SymmetrizedSupport,
    /// Coefficients `(α_i, β_i)` of the kernel expansion on the torus.
    pub kernel_coeffs: Vec<(f64, f64)>,
    /// `a_k` in `p(θ) = Σ_{k≤m} a_k cos(kθ)`.
    pub cosine_coeffs: Vec<f64>,
    /// 2-norm condition number of the (derivative-rescaled) interpolation system.
    pub condition: f64,
}

impl Certificate {
    /// `q̃(x) = Σ α_i K(x - x_i) + β_i K'(x - x_i)`.
    pub fn torus_value(&self, x: f64) -> f64 {
        let kernel = FejerKernelSq { m: self.m };
        self.symmetrized
            .points()
            .iter()
            .zip(&self.kernel_coeffs)
            .map(|(&xi, &(a, b))| {
                let [k0, k1, _] = kernel.eval_all(x - xi);
                a * k0 + b * k1
            })
            .sum()
    }

    /// `p(θ) = q̃(θ/(2π) + 1/2)`.
    pub fn angle_value(&self, theta: f64) -> f64 {
        self.torus_value(theta / (2.0 * PI) + 0.5)
    }
}

/// Solves for the kernel expansion interpolating `values` (one per torus
/// point) with zero derivative. The derivative rows and `β` are rescaled by
/// `m` so that all blocks are of unit size.
fn interpolate(kernel: &FejerKernelSq, xs: &[f64], values: &[f64]) -> Result<(Vec<(f64, f64)>, f64)> {
    let n = xs.len();
    let mf = kernel.m() as f64;
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for (l, &xl) in xs.iter().enumerate() {
        for (i, &xi) in xs.iter().enumerate() {
            let [k0, k1, k2] = kernel.eval_all(xl - xi);
            a[(l, i)] = k0;
            a[(l, n + i)] = k1 / mf;
            a[(n + l, i)] = k1 / mf;
            a[(n + l, n + i)] = k2 / (mf * mf);
        }
    }
    let sv = a.clone().singular_values();
    let condition = sv.max() / sv.min();
    let mut rhs = DVector::zeros(2 * n);
    for (l, &v) in values.iter().enumerate() {
        rhs[l] = v;
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .filter(|s| s.iter().all(|v| v.is_finite()))
        .ok_or(Error::SingularInterpolation { condition })?;
    if !condition.is_finite() || condition > 1e12 {
        return Err(Error::SingularInterpolation { condition });
    }
    Ok(((0..n).map(|i| (sol[i], sol[n + i] / mf)).collect(), condition))
}

/// Cosine coefficients of a degree-`m` even trigonometric polynomial from its
/// values at `θ_j = πj/m` (type-I DCT; exact for degree `≤ m`).
fn cosine_coefficients(values: &[f64]) -> Vec<f64> {
    let m = values.len() - 1;
    let mf = m as f64;
    (0..=m)
        .map(|k| {
            let mut s = 0.0;
            for (j, &v) in values.iter().enumerate() {
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                s += w * v * cos(PI * (k * j % (2 * m)) as f64 / mf);
            }
            let scale = if k == 0 || k == m { 1.0 / mf } else { 2.0 / mf };
            s * scale
        })
        .collect()
}

/// Builds the certificate of the requested kind for the separated support `T`.
pub fn build_certificate(support: &[f64], m: usize, kind: CertificateKind) -> Result<Certificate> {
    let kernel = fejer_kernel_sq(m)?;
    if support.is_empty() {
        return Err(invalid("certificate support must be nonempty"));
    }
    if !separation_ok(support, m)? {
        return Err(invalid(format!("support is not separated at m = {m}")));
    }
    let targets: Vec<f64> = match &kind {
        CertificateKind::SignedInterpolant { anchor } => {
            if *anchor >= support.len() {
                return Err(invalid(format!(
                    "anchor {anchor} outside a support of {} points",
                    support.len()
                )));
            }
            (0..support.len())
                .map(|l| if l == *anchor { 1.0 } else { 0.0 })
                .collect()
        }
        CertificateKind::Qic { values } => {
            if values.len() != support.len() {
                return Err(Error::Dimension {
                    what: "certificate values",
                    expected: support.len(),
                    got: values.len(),
                });
            }
            if values.iter().any(|v| (v.abs() - 1.0).abs() > 1e-12) {
                return Err(invalid("certificate values must have unit modulus"));
            }
            values.clone()
        }
    };
    let sym = symmetrize_support(support)?;
    let torus_targets: Vec<f64> = sym
        .owners()
        .iter()
        .map(|&j| match &kind {
            CertificateKind::SignedInterpolant { anchor } => {
                if j == *anchor {
                    1.0
                } else {
                    -1.0
                }
            }
            CertificateKind::Qic { values } => values[j],
        })
        .collect();
    let (kernel_coeffs, condition) = interpolate(&kernel, sym.points(), &torus_targets)?;
    let mut cert = Certificate {
        poly: ChebPoly::zero(m),
        kind,
        support: support.to_vec(),
        targets,
        m,
        symmetrized: sym,
        kernel_coeffs,
        cosine_coeffs: Vec::new(),
        condition,
    };
    let samples: Vec<f64> = (0..=m).map(|j| cert.angle_value(PI * j as f64 / m as f64)).collect();
    let mut a = cosine_coefficients(&samples);
    if matches!(cert.kind, CertificateKind::SignedInterpolant { .. }) {
        // (p + 1)/2
        for v in a.iter_mut() {
            *v *= 0.5;
        }
        a[0] += 0.5;
    }
    cert.poly = ChebPoly::from_t_coeffs(&a);
    cert.cosine_coeffs = cosine_coefficients(&samples);
    Ok(cert)
}

/// Worst margin of one family of inequalities; `None` if no grid point fell in its region.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyMargin {
    pub name: String,
    pub worst_margin: Option<f64>,
    pub points_checked: usize,
}

impl PropertyMargin {
    pub fn passes(&self) -> bool {
        self.worst_margin.is_none_or(|w| w >= MARGIN_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub m: usize,
    pub grid_size: usize,
    pub constants: [(&'static str, f64); 6],
    pub properties: Vec<PropertyMargin>,
    /// Largest `|q(t_l) - target_l|`.
    pub interpolation_error: f64,
    /// Largest `|q̃(x) - q̃(1 - x)|` on the grid.
    pub odd_residual: f64,
    /// Largest `|p''(θ)|` on the grid, divided by `m²`.
    pub bernstein_ratio: f64,
    pub condition: f64,
}

impl CertificateReport {
    pub fn passes(&self) -> bool {
        self.properties.iter().all(PropertyMargin::passes)
            && self.interpolation_error <= INTERPOLATION_TOL
            && self.odd_residual <= ODD_TOL
            && self.bernstein_ratio <= 1.0 + 1e-6
    }

    pub fn worst_margin(&self) -> f64 {
        self.properties
            .iter()
            .filter_map(|p| p.worst_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

struct Tracker {
    name: &'static str,
    worst: Option<f64>,
    count: usize,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            worst: None,
            count: 0,
        }
    }

    fn record(&mut self, margin: f64) {
        self.count += 1;
        self.worst = Some(self.worst.map_or(margin, |w| w.min(margin)));
    }

    fn finish(self) -> PropertyMargin {
        PropertyMargin {
            name: self.name.into(),
            worst_margin: self.worst,
            points_checked: self.count,
        }
    }
}

/// Checks the certified inequalities on `grid_size` points uniform in
/// `θ = arccos t` (plus the support itself).
///
/// For a signed interpolant anchored at `t_j`:
/// near `t_j`, `1 - C2 m² d² ≤ q ≤ 1 - C1 m² d²`;
/// near another `t_l`, `C1 m² d(t,t_l)² ≤ q ≤ C2 m² d(t,t_l)²`;
/// away from `T`, `c0² C1 ≤ q ≤ 1 - c0² C1`.
/// For a QIC certificate: near the closest `t_j`, `1 - |q| ≥ 2 C1 m² d²`;
/// away from `T`, `1 - |q| ≥ 2 c0² C1`; everywhere
/// `1 - |q| ≥ min(Ca m² d(t,T)², Cb)`.
pub fn verify_certificate(
    cert: &Certificate,
    support: &[f64],
    m: usize,
    grid_size: usize,
) -> Result<CertificateReport> {
    if grid_size < 10 * m {
        return Err(invalid(format!(
            "grid of {grid_size} points is below 10·m = {}",
            10 * m
        )));
    }
    if support != cert.support.as_slice() || m != cert.m {
        return Err(invalid("certificate was built for a different support or degree"));
    }
    let mf = m as f64;
    let radius = C0 / mf;
    let far = C0 * C0 * C1;
    let mut thetas: Vec<f64> = (0..grid_size).map(|i| PI * i as f64 / (grid_size - 1) as f64).collect();
    thetas.extend(support.iter().map(|&t| acos_clamped(t)));

    let mut near_upper = Tracker::new("near anchor: q <= 1 - C1 m^2 d^2");
    let mut near_lower = Tracker::new("near anchor: q >= 1 - C2 m^2 d^2");
    let mut other_lower = Tracker::new("near other: q >= C1 m^2 d^2");
    let mut other_upper = Tracker::new("near other: q <= C2 m^2 d^2");
    let mut far_lower = Tracker::new("far: q >= c0^2 C1");
    let mut far_upper = Tracker::new("far: q <= 1 - c0^2 C1");
    let mut qic_near = Tracker::new("near: 1 - |q| >= 2 C1 m^2 d^2");
    let mut qic_far = Tracker::new("far: 1 - |q| >= 2 c0^2 C1");
    let mut qic_iso = Tracker::new("isolation: 1 - |q| >= min(Ca m^2 d^2, Cb)");

    let mut odd_residual = 0.0f64;
    let mut p2_max = 0.0f64;
    for &theta in &thetas {
        let t = cos(theta);
        let q = cert.poly.value_at(t);
        let (nearest, dn) = support
            .iter()
            .enumerate()
            .map(|(l, &s)| (l, dist(t, s)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty support");
        match &cert.kind {
            CertificateKind::SignedInterpolant { anchor } => {
                let dj = dist(t, support[*anchor]);
                if dj <= radius {
                    near_upper.record(1.0 - C1 * mf * mf * dj * dj - q);
                    near_lower.record(q - (1.0 - C2 * mf * mf * dj * dj));
                }
                for (l, &tl) in support.iter().enumerate() {
                    if l == *anchor {
                        continue;
                    }
                    let dl = dist(t, tl);
                    if dl <= radius {
                        other_lower.record(q - C1 * mf * mf * dl * dl);
                        other_upper.record(C2 * mf * mf * dl * dl - q);
                    }
                }
                if dn > radius {
                    far_lower.record(q - far);
                    far_upper.record(1.0 - far - q);
                }
            }
            CertificateKind::Qic { .. } => {
                let gap = 1.0 - q.abs();
                if dn <= radius {
                    qic_near.record(gap - 2.0 * C1 * mf * mf * dn * dn);
                } else {
                    qic_far.record(gap - 2.0 * far);
                }
                let _ = nearest;
                qic_iso.record(gap - (QIC_CA * mf * mf * dn * dn).min(QIC_CB));
            }
        }
        let x = theta / (2.0 * PI) + 0.5;
        odd_residual = odd_residual.max((cert.torus_value(x) - cert.torus_value(1.0 - x)).abs());
        let p2: f64 = cert
            .cosine_coeffs
            .iter()
            .enumerate()
            .map(|(k, &a)| -((k * k) as f64) * a * cos(k as f64 * theta))
            .sum();
        p2_max = p2_max.max(p2.abs());
    }
    let interpolation_error = support
        .iter()
        .zip(&cert.targets)
        .map(|(&t, &v)| (cert.poly.value_at(t) - v).abs())
        .fold(0.0, f64::max);
    let properties = match cert.kind {
        CertificateKind::SignedInterpolant { .. } => vec![
            near_lower.finish(),
            near_upper.finish(),
            other_lower.finish(),
            other_upper.finish(),
            far_lower.finish(),
            far_upper.finish(),
        ],
        CertificateKind::Qic { .. } => vec![qic_near.finish(), qic_far.finish(), qic_iso.finish()],
    };
    Ok(CertificateReport {
        m,
        grid_size,
        constants: [
            ("c0", C0),
            ("C1", C1),
            ("C2", C2),
            ("Ca", QIC_CA),
            ("Cb", QIC_CB),
            ("c0^2 C1", far),
        ],
        properties,
        interpolation_error,
        odd_residual,
        bernstein_ratio: p2_max / (mf * mf),
        condition: cert.condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::unit_level_roots;
    use crate::observation::random_separated_measure;

    #[test]
    fn symmetrized_examples() {
        let s = symmetrize_support(&[0.0]).unwrap();
        assert!((s.points()[0] - 0.25).abs() < 1e-15 && (s.points()[1] - 0.75).abs() < 1e-15);
        assert_eq!(symmetrize_support(&[1.0]).unwrap().points(), &[0.5]);
        let w = symmetrize_support(&[-1.0]).unwrap();
        assert_eq!(w.points(), &[0.0]);
        assert!(w.wrapped);
        let s = symmetrize_support(&[-0.6, 0.1, 0.7, 1.0]).unwrap();
        assert_eq!(s.len(), 7);
        assert!(s.symmetry_defect() < 1e-12);
    }

    #[test]
    fn separated_supports_have_torus_gaps() {
        for seed in 0..20 {
            let x = random_separated_measure(4, 128, (1.0, 1.0), seed).unwrap();
            let s = symmetrize_support(x.support()).unwrap();
            assert!(s.min_gap() >= 2.5 / 128.0 - 1e-12, "{}", s.min_gap());
            assert!(s.symmetry_defect() < 1e-12);
        }
    }

    #[test]
    fn kernel_examples() {
        assert!(fejer_kernel_sq(7).is_err());
        assert!(fejer_kernel_sq(0).is_err());
        let k = fejer_kernel_sq(128).unwrap();
        assert!((k.value(0.0) - 1.0).abs() < 1e-14);
        assert!((k.value(1.0) - 1.0).abs() < 1e-12);
        assert!(k.value(1.0 / 65.0).abs() < 1e-20);
        for i in 0..1000 {
            assert!(k.value(i as f64 / 999.0 - 0.5) >= 0.0);
        }
    }

    #[test]
    fn kernel_matches_closed_form_and_differences() {
        let k = fejer_kernel_sq(16).unwrap();
        let big = 9.0;
        for &t in &[0.013, 0.1, 0.27, 0.49, -0.33] {
            let g = libm::sin(big * PI * t) / (big * libm::sin(PI * t));
            assert!((k.value(t) - g.powi(4)).abs() < 1e-14);
            let h = 1e-5;
            let fd1 = (k.value(t + h) - k.value(t - h)) / (2.0 * h);
            let fd2 = (k.derivative(t + h) - k.derivative(t - h)) / (2.0 * h);
            assert!((k.derivative(t) - fd1).abs() < 1e-6 * (1.0 + fd1.abs()));
            assert!((k.second_derivative(t) - fd2).abs() < 1e-5 * (1.0 + fd2.abs()));
        }
    }

    #[test]
    fn dct_recovers_cosine_polynomial() {
        let m = 12;
        let a: Vec<f64> = (0..=m).map(|k| 0.1 * k as f64 - 0.3).collect();
        let samples: Vec<f64> = (0..=m)
            .map(|j| {
                let th = PI * j as f64 / m as f64;
                a.iter().enumerate().map(|(k, c)| c * cos(k as f64 * th)).sum()
            })
            .collect();
        let back = cosine_coefficients(&samples);
        for (x, y) in a.iter().zip(back) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn single_point_interpolant() {
        let c = build_certificate(&[0.0], 128, CertificateKind::SignedInterpolant { anchor: 0 }).unwrap();
        assert!((c.poly.value_at(0.0) - 1.0).abs() < 1e-8);
        assert_eq!(c.poly.degree_bound(), 128);
    }

    #[test]
    fn three_point_interpolant_vanishes_elsewhere() {
        let t = [-0.6, 0.1, 0.7];
        assert!(separation_ok(&t, 128).unwrap());
        let c = build_certificate(&t, 128, CertificateKind::SignedInterpolant { anchor: 1 }).unwrap();
        assert!(c.poly.value_at(-0.6).abs() < 1e-8);
        assert!(c.poly.value_at(0.7).abs() < 1e-8);
        assert!((c.poly.value_at(0.1) - 1.0).abs() < 1e-8);
        let r = verify_certificate(&c, &t, 128, 10_000).unwrap();
        assert!(r.passes(), "{r:?}");
    }

    #[test]
    fn qic_single_point() {
        let c = build_certificate(&[0.0], 128, CertificateKind::Qic { values: vec![1.0] }).unwrap();
        assert!((c.poly.value_at(0.0) - 1.0).abs() < 1e-8);
        let r = verify_certificate(&c, &[0.0], 128, 10_000).unwrap();
        assert!(r.passes(), "{r:?}");
        let grid_max = (0..10_000)
            .map(|i| c.poly.value_at(cos(PI * i as f64 / 9999.0)).abs())
            .fold(0.0, f64::max);
        assert!(grid_max <= 1.0 + 1e-12);
    }

    #[test]
    fn level_roots_of_scaled_interpolant() {
        let c = build_certificate(&[0.0], 64, CertificateKind::SignedInterpolant { anchor: 0 }).unwrap();
        let lambda = 0.3;
        let roots = unit_level_roots(&c.poly.scaled(lambda), lambda, 1e-3).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(roots[0].abs() < 1e-6);
    }

    #[test]
    fn verify_rejects_small_grid() {
        let c = build_certificate(&[0.0], 16, CertificateKind::Qic { values: vec![-1.0] }).unwrap();
        assert!(verify_certificate(&c, &[0.0], 16, 100).is_err());
    }

    #[test]
    fn unseparated_or_odd_input_is_rejected() {
        assert!(build_certificate(&[0.0, 0.01], 128, CertificateKind::SignedInterpolant { anchor: 0 }).is_err());
        assert!(build_certificate(&[0.0], 127, CertificateKind::SignedInterpolant { anchor: 0 }).is_err());
        assert!(build_certificate(&[0.0], 128, CertificateKind::Qic { values: vec![0.5] }).is_err());
    }

    #[test]
    fn endpoint_support_is_handled() {
        let t = [-1.0, 0.0];
        let c = build_certificate(
            &t,
            128,
            CertificateKind::Qic {
                values: vec![1.0, -1.0],
            },
        )
        .unwrap();
        assert!(c.symmetrized.wrapped);
        let r = verify_certificate(&c, &t, 128, 2_000).unwrap();
        assert!(r.interpolation_error < 1e-8, "{r:?}");
    }
}
