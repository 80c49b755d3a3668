//! Chebyshev polynomials of the first kind in the orthonormal normalization
//! `φ_0 = 1`, `φ_k = √2 T_k`, the arccos metric on `[-1, 1]`, and root
//! localization through the colleague matrix.

use alloc::vec;
use alloc::vec::Vec;

use libm::{acos, cos};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const SQRT_2: f64 = core::f64::consts::SQRT_2;

/// Points this far outside `[-1, 1]` are still accepted and clamped.
const DOMAIN_SLACK: f64 = 1e-12;

/// Imaginary-part tolerance for accepting colleague-matrix eigenvalues as real.
const IMAG_TOL: f64 = 1e-6;

pub(crate) fn check_point(t: f64) -> Result<f64> {
    if !t.is_finite() || !(-1.0 - DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&t) {
        return Err(Error::Domain(t));
    }
    Ok(t.clamp(-1.0, 1.0))
}

#[inline]
pub(crate) fn acos_clamped(t: f64) -> f64 {
    acos(t.clamp(-1.0, 1.0))
}

/// `φ_k(t)`: 1 for `k = 0`, `√2 cos(k arccos t)` otherwise.
pub fn eval_phi(k: usize, t: f64) -> Result<f64> {
    let t = check_point(t)?;
    Ok(phi(k, t))
}

#[inline]
pub(crate) fn phi(k: usize, t: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        SQRT_2 * cos(k as f64 * acos_clamped(t))
    }
}

/// All of `φ_0(t), …, φ_m(t)` by the three-term recurrence.
pub fn phi_row(m: usize, t: f64) -> Vec<f64> {
    let mut row = vec![0.0; m + 1];
    let mut prev = 1.0;
    let mut cur = t;
    row[0] = 1.0;
    for (k, slot) in row.iter_mut().enumerate().skip(1) {
        if k > 1 {
            let next = 2.0 * t * cur - prev;
            prev = cur;
            cur = next;
        }
        *slot = SQRT_2 * cur;
    }
    row
}

/// Table `out[l][k] = T_k^{(l)}(t)` for `k ≤ kmax`, `l ≤ lmax`, from the
/// differentiated recurrence `T_{k+1}^{(l)} = 2t T_k^{(l)} + 2l T_k^{(l-1)} - T_{k-1}^{(l)}`.
pub fn t_derivative_table(kmax: usize, lmax: usize, t: f64) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; kmax + 1]; lmax + 1];
    for l in 0..=lmax {
        for k in 0..=kmax {
            let value = match k {
                0 => {
                    if l == 0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                1 => match l {
                    0 => t,
                    1 => 1.0,
                    _ => 0.0,
                },
                _ => {
                    let lower = if l > 0 { table[l - 1][k - 1] } else { 0.0 };
                    2.0 * t * table[l][k - 1] + 2.0 * l as f64 * lower - table[l][k - 2]
                }
            };
            table[l][k] = value;
        }
    }
    table
}

/// Same as [`t_derivative_table`] for the orthonormal family `φ_k`.
pub fn phi_derivative_table(kmax: usize, lmax: usize, t: f64) -> Vec<Vec<f64>> {
    let mut table = t_derivative_table(kmax, lmax, t);
    for row in &mut table {
        for v in row.iter_mut().skip(1) {
            *v *= SQRT_2;
        }
    }
    table
}

/// `d(u, v) = |arccos u - arccos v|`.
pub fn arccos_distance(u: f64, v: f64) -> Result<f64> {
    let u = check_point(u)?;
    let v = check_point(v)?;
    Ok(dist(u, v))
}

#[inline]
pub(crate) fn dist(u: f64, v: f64) -> f64 {
    (acos_clamped(u) - acos_clamped(v)).abs()
}

/// `w_{k,l} = T_k^{(l)}(1)`, zero when `k < l`.
///
/// The product `Π_{j<l} (k² - j²)/(2j + 1)` is an integer; it is accumulated
/// as an exact rational in `u128` when it fits so that the result is exact.
pub fn endpoint_weight(k: usize, l: usize) -> f64 {
    if k < l {
        return 0.0;
    }
    let k2 = (k as u128) * (k as u128);
    let mut num: Option<u128> = Some(1);
    let mut den: u128 = 1;
    for j in 0..l {
        let j = j as u128;
        num = num.and_then(|n| n.checked_mul(k2 - j * j));
        den = den.saturating_mul(2 * j + 1);
    }
    match num {
        Some(n) if den != u128::MAX => (n / den) as f64,
        _ => {
            let k2 = k2 as f64;
            (0..l).fold(1.0, |acc, j| {
                let j = j as f64;
                acc * (k2 - j * j) / (2.0 * j + 1.0)
            })
        }
    }
}

/// Points `cos(π j / (n-1))`, `j = 0..n`, sorted increasingly (both endpoints included).
pub fn chebyshev_extrema(n: usize) -> Vec<f64> {
    let n = n.max(2);
    let last = (n - 1) as f64;
    (0..n)
        .map(|j| cos(core::f64::consts::PI * (n - 1 - j) as f64 / last))
        .collect()
}

/// Polynomial `Σ α_k φ_k` stored by its coefficients in the orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebPoly {
    coeffs: Vec<f64>,
}

impl ChebPoly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self { coeffs: vec![0.0] };
        }
        Self { coeffs }
    }

    pub fn zero(degree_bound: usize) -> Self {
        Self {
            coeffs: vec![0.0; degree_bound + 1],
        }
    }

    /// Build from coefficients in the plain `T_k` basis.
    pub fn from_t_coeffs(t_coeffs: &[f64]) -> Self {
        let coeffs = t_coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| if k == 0 { c } else { c / SQRT_2 })
            .collect();
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn degree_bound(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn t_coeffs(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &a)| if k == 0 { a } else { SQRT_2 * a })
            .collect()
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.value_at(check_point(t)?))
    }

    /// Clenshaw evaluation without the domain check.
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.coeffs.len();
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for k in (1..n).rev() {
            let b0 = SQRT_2 * self.coeffs[k] + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + t * b1 - b2
    }

    pub fn derivative(&self) -> ChebPoly {
        let c = self.t_coeffs();
        let n = c.len() - 1;
        if n == 0 {
            return ChebPoly::zero(0);
        }
        let mut d = vec![0.0; n + 2];
        for k in (0..n).rev() {
            d[k] = d[k + 2] + 2.0 * (k + 1) as f64 * c[k + 1];
        }
        d[0] *= 0.5;
        d.truncate(n);
        ChebPoly::from_t_coeffs(&d)
    }

    pub fn scaled(&self, factor: f64) -> ChebPoly {
        ChebPoly::new(self.coeffs.iter().map(|a| a * factor).collect())
    }

    /// Maximum of `|p|` over the `n`-point extrema grid.
    pub fn grid_sup(&self, n: usize) -> f64 {
        chebyshev_extrema(n)
            .into_iter()
            .map(|t| self.value_at(t).abs())
            .fold(0.0, f64::max)
    }

    /// Real roots in `[-1, 1]`, increasing, from the eigenvalues of the colleague matrix.
    pub fn real_roots(&self) -> Vec<f64> {
        let c = self.t_coeffs();
        let scale = c.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if scale == 0.0 {
            return Vec::new();
        }
        let mut n = c.len() - 1;
        while n > 0 && c[n].abs() <= 1e-14 * scale {
            n -= 1;
        }
        let mut roots: Vec<f64> = match n {
            0 => Vec::new(),
            1 => vec![-c[0] / c[1]],
            _ => colleague_eigenvalues(&c[..=n]),
        };
        let deriv = self.derivative();
        for r in roots.iter_mut() {
            *r = newton_root(self, &deriv, *r);
        }
        roots.retain(|r| (-1.0 - 1e-8..=1.0 + 1e-8).contains(r));
        for r in roots.iter_mut() {
            *r = r.clamp(-1.0, 1.0);
        }
        roots.sort_by(f64::total_cmp);
        roots
    }
}

/// `Σ α_k φ_k(t)`; equivalent to `p.eval(t)`.
pub fn eval_poly(p: &ChebPoly, t: f64) -> Result<f64> {
    p.eval(t)
}

fn colleague_eigenvalues(c: &[f64]) -> Vec<f64> {
    let n = c.len() - 1;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    mat[(0, 1)] = 1.0;
    for k in 1..n {
        mat[(k, k - 1)] = 0.5;
        if k + 1 < n {
            mat[(k, k + 1)] = 0.5;
        }
    }
    let lead = 2.0 * c[n];
    for j in 0..n {
        mat[(n - 1, j)] -= c[j] / lead;
    }
    match mat.try_schur(f64::EPSILON, 10_000) {
        Some(schur) => schur
            .complex_eigenvalues()
            .iter()
            .filter(|z| z.im.abs() <= IMAG_TOL * (1.0 + z.re.abs()))
            .map(|z| z.re)
            .filter(|r| r.abs() <= 1.0 + 1e-4)
            .collect(),
        None => Vec::new(),
    }
}

fn newton_root(p: &ChebPoly, dp: &ChebPoly, start: f64) -> f64 {
    let mut x = start.clamp(-1.0, 1.0);
    for _ in 0..8 {
        let slope = dp.value_at(x);
        if slope == 0.0 {
            break;
        }
        let step = p.value_at(x) / slope;
        if !step.is_finite() || step.abs() > 1e-3 {
            break;
        }
        x = (x - step).clamp(-1.0, 1.0);
        if step.abs() <= 1e-16 {
            break;
        }
    }
    // keep the refined value only if it did not wander off
    if (x - start).abs() <= 1e-3 {
        x
    } else {
        start
    }
}

/// Local maximizers `t` of `|p|` with `|p(t)| ≥ λ(1-τ)`.
///
/// Candidates are the real critical points of `p` (colleague-matrix roots of
/// `p'`) together with the endpoints; candidates closer than `0.5/m` in the
/// arccos metric are merged, keeping the one with the larger `|p|`.
/// Returns [`Error::ConstantDual`] when `p` is numerically constant with
/// `|p| ≈ λ`, where the level set is the whole interval.
pub fn unit_level_roots(p: &ChebPoly, lambda: f64, tau: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(crate::error::invalid("level must be positive"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(crate::error::invalid("tolerance must lie in (0, 1)"));
    }
    let m = p.degree_bound().max(1);
    let grid = chebyshev_extrema(4 * m);
    let (lo, hi) = grid.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &t| {
        let v = p.value_at(t).abs();
        (lo.min(v), hi.max(v))
    });
    let level = lambda * (1.0 - tau);
    if hi - lo < 1e-9 * lambda {
        return if hi >= level {
            Err(Error::ConstantDual)
        } else {
            Ok(Vec::new())
        };
    }

    let dp = p.derivative();
    let ddp = dp.derivative();
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for t in dp.real_roots() {
        let v = p.value_at(t);
        if v.abs() < level {
            continue;
        }
        let interior = t > -1.0 && t < 1.0;
        if interior && v.signum() * ddp.value_at(t) > 0.0 {
            continue;
        }
        candidates.push((t, v.abs()));
    }
    for (t, outward) in [(-1.0, -1.0), (1.0, 1.0)] {
        let v = p.value_at(t);
        if v.abs() >= level && v.signum() * dp.value_at(t) * outward >= 0.0 {
            candidates.push((t, v.abs()));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    let radius = 0.5 / m as f64;
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (t, v) in candidates {
        match merged.last_mut() {
            Some(last) if dist(last.0, t) <= radius => {
                if v > last.1 {
                    *last = (t, v);
                }
            }
            _ => merged.push((t, v)),
        }
    }
    Ok(merged.into_iter().map(|(t, _)| t).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn direct_sum(coeffs: &[f64], t: f64) -> f64 {
        coeffs.iter().enumerate().map(|(k, a)| a * phi(k, t)).sum()
    }

    #[test]
    fn phi_examples() {
        assert_eq!(eval_phi(0, 0.37).unwrap(), 1.0);
        assert!((eval_phi(2, 1.0).unwrap() - SQRT_2).abs() < 1e-15);
        assert!((eval_phi(3, 0.5).unwrap() + SQRT_2).abs() < 1e-14);
        assert_eq!(eval_phi(1, 1.5), Err(Error::Domain(1.5)));
    }

    #[test]
    fn poly_examples() {
        let p = |c: &[f64], t| eval_poly(&ChebPoly::new(c.to_vec()), t).unwrap();
        assert!((p(&[1.0, 0.0, 0.0], 0.9) - 1.0).abs() < 1e-15);
        assert!(p(&[0.0, 1.0, 0.0], 0.0).abs() < 1e-15);
        assert!((p(&[0.0, 0.0, 1.0], 0.0) + SQRT_2).abs() < 1e-15);
        assert!(eval_poly(&ChebPoly::new(vec![1.0]), -1.1).is_err());
    }

    #[test]
    fn distance_examples() {
        assert!((arccos_distance(1.0, -1.0).unwrap() - PI).abs() < 1e-15);
        assert_eq!(arccos_distance(0.3, 0.3).unwrap(), 0.0);
        let d = arccos_distance(0.0, core::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((d - PI / 4.0).abs() < 1e-15);
        assert!(arccos_distance(2.0, 0.0).is_err());
    }

    #[test]
    fn endpoint_weight_examples() {
        assert_eq!(endpoint_weight(1, 2), 0.0);
        assert_eq!(endpoint_weight(3, 1), 9.0);
        assert_eq!(endpoint_weight(2, 2), 4.0);
        assert_eq!(endpoint_weight(5, 0), 1.0);
    }

    /// Monomial coefficients of T_k from the recurrence, in exact integers.
    fn monomial_t(k: usize) -> Vec<i128> {
        let mut prev = vec![1i128];
        let mut cur = vec![0i128, 1];
        if k == 0 {
            return prev;
        }
        for _ in 1..k {
            let mut next = vec![0i128; cur.len() + 1];
            for (i, c) in cur.iter().enumerate() {
                next[i + 1] += 2 * c;
            }
            for (i, c) in prev.iter().enumerate() {
                next[i] -= c;
            }
            prev = cur;
            cur = next;
        }
        cur
    }

    #[test]
    fn endpoint_weight_matches_symbolic_derivatives() {
        for k in 0..=20 {
            for l in 0..=5 {
                let mut c = monomial_t(k);
                for _ in 0..l {
                    c = c.iter().enumerate().skip(1).map(|(i, v)| v * i as i128).collect();
                }
                let at_one: i128 = c.iter().sum();
                let at_minus_one: i128 = c
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if i % 2 == 0 { *v } else { -v })
                    .sum();
                let w = endpoint_weight(k, l);
                assert_eq!(w, at_one as f64, "k={k} l={l}");
                let sign = if (k + l) % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(sign * w, at_minus_one as f64, "k={k} l={l} at -1");
            }
        }
    }

    #[test]
    fn derivative_table_matches_endpoint_weights() {
        let table = t_derivative_table(12, 3, 1.0);
        for l in 0..=3 {
            for k in 0..=12 {
                assert!((table[l][k] - endpoint_weight(k, l)).abs() <= 1e-9 * (1.0 + table[l][k].abs()));
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let p = ChebPoly::new(vec![0.3, -1.2, 0.7, 0.25, -0.5, 0.1]);
        let dp = p.derivative();
        for &t in &[-0.8, -0.1, 0.45, 0.9] {
            let h = 1e-6;
            let fd = (p.value_at(t + h) - p.value_at(t - h)) / (2.0 * h);
            assert!((dp.value_at(t) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn real_roots_of_t3() {
        let p = ChebPoly::from_t_coeffs(&[0.0, 0.0, 0.0, 1.0]);
        let roots = p.real_roots();
        let expected = [-(3.0f64.sqrt()) / 2.0, 0.0, 3.0f64.sqrt() / 2.0];
        assert_eq!(roots.len(), 3);
        for (r, e) in roots.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12);
        }
    }

    #[test]
    fn level_set_empty_below_level() {
        let p = ChebPoly::new(vec![0.1, 0.2, -0.1]);
        let lambda = 2.0 * p.grid_sup(1000);
        assert!(unit_level_roots(&p, lambda, 1e-3).unwrap().is_empty());
    }

    #[test]
    fn level_set_constant_dual() {
        let lambda = 0.7;
        let p = ChebPoly::new(vec![lambda, 0.0, 0.0]);
        assert_eq!(unit_level_roots(&p, lambda, 1e-3), Err(Error::ConstantDual));
        let q = ChebPoly::new(vec![-lambda]);
        assert_eq!(unit_level_roots(&q, lambda, 1e-3), Err(Error::ConstantDual));
    }

    #[test]
    fn level_set_of_peaked_polynomial() {
        // Fejér-type bump: (1 + cos θ)^2 / 4 rescaled peaks only at t = 1.
        let p = ChebPoly::from_t_coeffs(&[3.0 / 8.0, 0.5, 1.0 / 8.0]);
        assert_eq!(unit_level_roots(&p, 1.0, 1e-3).unwrap(), vec![1.0]);
        // T_4 reaches ±1 at five points.
        let q = ChebPoly::from_t_coeffs(&[0.0, 0.0, 0.0, 0.0, 1.0]);
        let roots = unit_level_roots(&q, 1.0, 1e-6).unwrap();
        let expected: Vec<f64> = (0..5).map(|j| cos(PI * (4 - j) as f64 / 4.0)).collect();
        assert_eq!(roots.len(), 5);
        for (r, e) in roots.iter().zip(expected) {
            assert!((r - e).abs() < 1e-10, "{r} vs {e}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(1000))]
            #[test]
            fn clenshaw_matches_direct_summation(
                coeffs in prop::collection::vec(-1.0f64..1.0, 1..=65),
                t in -1.0f64..=1.0,
            ) {
                let p = ChebPoly::new(coeffs.clone());
                let direct = direct_sum(&coeffs, t);
                prop_assert!((p.value_at(t) - direct).abs() <= 1e-12);
            }
        }

        #[test]
        fn arccos_distance_triangle_inequality() {
            let grid: Vec<f64> = (0..100).map(|i| -1.0 + 2.0 * i as f64 / 99.0).collect();
            for &a in &grid {
                for &b in &grid {
                    for &c in &grid {
                        assert!(dist(a, c) <= dist(a, b) + dist(b, c) + 1e-12);
                    }
                }
            }
        }

        proptest! {
            #[test]
            fn level_roots_reach_the_level(
                coeffs in prop::collection::vec(-1.0f64..1.0, 3..=24),
                tau in 1e-4f64..1e-2,
            ) {
                let p = ChebPoly::new(coeffs);
                let sup = p.grid_sup(20_000);
                prop_assume!(sup > 1e-3);
                let lambda = sup * (1.0 - 0.5 * tau);
                if let Ok(roots) = unit_level_roots(&p, lambda, tau) {
                    prop_assert!(!roots.is_empty());
                    for t in roots {
                        prop_assert!(p.value_at(t).abs() >= lambda * (1.0 - 2.0 * tau));
                    }
                }
            }
        }
    }
}
