//! Moment observations with an exact prefix and a Gaussian tail, the
//! polynomial-approximation route to spline moments, and the Rice-method
//! choice of regularization level.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, exp, log, sqrt};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cheb::{ChebPoly, SQRT_2};
use crate::error::{invalid, Error, Result};
use crate::measure::{separation_ok, DiscreteMeasure};
use crate::spline::{moments_via_transfer, BoundaryVector};

/// `y` of length `m+1`; orders `0..=d` are exact, orders `d+1..=m` carry noise of level `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    y: Vec<f64>,
    d: i32,
    m: usize,
    sigma: f64,
}

impl Observation {
    pub fn new(y: Vec<f64>, d: i32, m: usize, sigma: f64) -> Result<Self> {
        if d < -1 {
            return Err(invalid(format!("noiseless order d = {d} must be at least -1")));
        }
        if (m as i64) <= d as i64 {
            return Err(invalid(format!("need m > d, got m = {m}, d = {d}")));
        }
        if y.len() != m + 1 {
            return Err(Error::Dimension {
                what: "observation",
                expected: m + 1,
                got: y.len(),
            });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("noise level {sigma} must be finite and nonnegative")));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(invalid("observation contains a non-finite value"));
        }
        Ok(Self { y, d, m, sigma })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("noise level {sigma} must be finite and nonnegative")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> i32 {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of exact orders, `d + 1`.
    pub fn exact_len(&self) -> usize {
        (self.d + 1) as usize
    }
}

/// `n` draws of `N(0, σ²)` from ChaCha8 seeded with `seed`, using the ziggurat
/// standard normal sampler of `rand_distr`.
pub fn gaussian_noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect()
}

/// `y_k = c_k(x)` for `k ≤ d`, `y_k = c_k(x) + ε_k` for `k > d`; the noise is
/// drawn in increasing order `k = d+1..=m`.
pub fn simulate(x: &DiscreteMeasure, m: usize, d: i32, sigma: f64, seed: u64) -> Result<Observation> {
    let probe = Observation::new(vec![0.0; m + 1], d, m, sigma)?;
    let mut y = x.moments(m);
    let exact = probe.exact_len();
    if sigma > 0.0 {
        for (yk, e) in y[exact..].iter_mut().zip(gaussian_noise(m + 1 - exact, sigma, seed)) {
            *yk += e;
        }
    }
    Observation::new(y, d, m, sigma)
}

/// `count` atoms with angles uniform on `(0, π)`, redrawn until the set
/// passes [`separation_ok`] at order `m`; magnitudes uniform on
/// `[amplitude.0, amplitude.1]` with independent random signs.
pub fn random_separated_measure(count: usize, m: usize, amplitude: (f64, f64), seed: u64) -> Result<DiscreteMeasure> {
    let (lo, hi) = amplitude;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(invalid(format!(
            "amplitude range [{lo}, {hi}] must be positive and ordered"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<f64> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while points.len() < count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(invalid(format!("could not place {count} separated atoms at m = {m}")));
        }
        let t = cos(rng.random_range(0.0..core::f64::consts::PI));
        points.push(t);
        if !separation_ok(&points, m)? {
            points.pop();
        }
    }
    let weights = (0..count)
        .map(|_| {
            let a = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            if rng.random::<bool>() {
                a
            } else {
                -a
            }
        })
        .collect();
    DiscreteMeasure::new(points, weights)
}

/// `y = [0 W1; (-1)^{d+1} Id  W2] (Θ, b)`, with `sigma` left at 0.
pub fn assemble_y_from_projection(theta: &[f64], b: &BoundaryVector, m: usize, d: usize) -> Result<Observation> {
    let y = moments_via_transfer(theta, b, m, d)?;
    Observation::new(y, d as i32, m, 0.0)
}

/// Chebyshev `T`-coefficients of `φ_k^{(order)}`.
fn phi_derivative_coeffs(k: usize, order: usize) -> Vec<f64> {
    let mut basis = vec![0.0; k + 1];
    basis[k] = 1.0;
    let mut p = ChebPoly::new(basis);
    for _ in 0..order {
        p = p.derivative();
    }
    p.t_coeffs()
}

/// `∫_{-1}^{1} T_n dt`.
fn t_integral(n: usize) -> f64 {
    if n % 2 == 1 {
        0.0
    } else {
        let n = n as f64;
        2.0 / (1.0 - n * n)
    }
}

/// `∫ P Q dt` for `T`-coefficient vectors, via `T_a T_b = (T_{a+b} + T_{|a-b|})/2`.
fn t_inner(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (a, &pa) in p.iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        for (b, &qb) in q.iter().enumerate() {
            total += 0.5 * pa * qb * (t_integral(a + b) + t_integral(a.abs_diff(b)));
        }
    }
    total
}

fn check_theta_orders(m: usize, d: i32) -> Result<usize> {
    if d < 0 || m as i64 <= d as i64 {
        return Err(invalid(format!("need m > d ≥ 0, got m = {m}, d = {d}")));
    }
    Ok(d as usize)
}

/// `Θ_k(P) = ∫ P φ_k^{(d+1)} dt`, `k = d+1..=m`, for `P` of degree `≤ m-d-1`.
pub fn theta_of_polynomial(p: &ChebPoly, m: usize, d: i32) -> Result<Vec<f64>> {
    let d = check_theta_orders(m, d)?;
    let limit = m - d - 1;
    let coeffs = p.coeffs();
    if let Some(extra) = coeffs.iter().skip(limit + 1).position(|&c| c != 0.0) {
        return Err(invalid(format!(
            "polynomial has degree {} above the bound {limit}",
            limit + 1 + extra
        )));
    }
    let pt: Vec<f64> = p.t_coeffs().into_iter().take(limit + 1).collect();
    Ok((d + 1..=m)
        .map(|k| t_inner(&pt, &phi_derivative_coeffs(k, d + 1)))
        .collect())
}

/// The unique `P` of degree `≤ m-d-1` with `Θ(P) = theta`. For `theta = p(f)` this
/// is the `L²` projection of `f` onto polynomials of that degree.
pub fn polynomial_from_theta(theta: &[f64], m: usize, d: i32) -> Result<ChebPoly> {
    let d = check_theta_orders(m, d)?;
    let n = m - d;
    if theta.len() != n {
        return Err(Error::Dimension {
            what: "projection vector",
            expected: n,
            got: theta.len(),
        });
    }
    let mut gram = DMatrix::zeros(n, n);
    for (row, k) in (d + 1..=m).enumerate() {
        let dphi = phi_derivative_coeffs(k, d + 1);
        for j in 0..n {
            let mut tj = vec![0.0; j + 1];
            tj[j] = if j == 0 { 1.0 } else { SQRT_2 };
            gram[(row, j)] = t_inner(&tj, &dphi);
        }
    }
    let rhs = DVector::from_column_slice(theta);
    let coeffs = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("singular projection Gram matrix".into()))?;
    Ok(ChebPoly::new(coeffs.iter().copied().collect()))
}

fn check_rice(sigma: f64, m: usize, d: i32) -> Result<f64> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise level {sigma} must be finite and nonnegative")));
    }
    if d < -1 || m as i64 <= d as i64 {
        return Err(invalid(format!("need m > d ≥ -1, got m = {m}, d = {d}")));
    }
    Ok((m as i64 - d as i64) as f64)
}

fn rice_log(m: usize, d: i32) -> f64 {
    log(5.0 * (m as i64 + d as i64 + 1) as f64)
}

/// `λ_0(η) = σ [8(1+η)(m-d) log(5(m+d+1))]^{1/2}`.
pub fn lambda_rice(sigma: f64, m: usize, d: i32, eta: f64) -> Result<f64> {
    let span = check_rice(sigma, m, d)?;
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid(format!("η = {eta} must be finite and nonnegative")));
    }
    Ok(sigma * sqrt(8.0 * (1.0 + eta) * span * rice_log(m, d)))
}

/// Twice [`lambda_rice`].
pub fn lambda_algorithm(sigma: f64, m: usize, d: i32, alpha: f64) -> Result<f64> {
    Ok(2.0 * lambda_rice(sigma, m, d, alpha)?)
}

/// `σ0 · m!/(m-d-1)!`.
pub fn scaled_sigma(sigma0: f64, m: usize, d: i32) -> Result<f64> {
    if d < 0 || m as i64 <= d as i64 {
        return Err(invalid(format!("need m > d ≥ 0, got m = {m}, d = {d}")));
    }
    let d = d as usize;
    Ok((m - d..=m).fold(sigma0, |acc, v| acc * v as f64))
}

/// `min(1, exp[-(u² - λ_R²)/(8σ²(m-d))])` with `λ_R = σ[8(m-d) log(5(m+d+1))]^{1/2}`.
pub fn rice_tail_bound(u: f64, sigma: f64, m: usize, d: i32) -> Result<f64> {
    let span = check_rice(sigma, m, d)?;
    if !(sigma > 0.0) {
        return Err(invalid("tail bound needs σ > 0"));
    }
    if !(u > sigma * sqrt(2.0 * span)) {
        return Err(invalid(format!(
            "level {u} must exceed σ√(2(m-d)) = {}",
            sigma * sqrt(2.0 * span)
        )));
    }
    let lambda_r2 = sigma * sigma * 8.0 * span * rice_log(m, d);
    Ok(exp(-(u * u - lambda_r2) / (8.0 * sigma * sigma * span)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::{projection_vector, NonUniformSpline};

    #[test]
    fn noiseless_simulation_is_exact() {
        let x = DiscreteMeasure::new(vec![-0.5, 0.2], vec![1.0, -2.0]).unwrap();
        let obs = simulate(&x, 12, -1, 0.0, 7).unwrap();
        assert_eq!(obs.y(), x.moments(12).as_slice());
    }

    #[test]
    fn simulation_is_reproducible() {
        let x = DiscreteMeasure::dirac(0.1, 1.0).unwrap();
        let a = simulate(&x, 20, 1, 0.3, 42).unwrap();
        let b = simulate(&x, 20, 1, 0.3, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate(&x, 20, 1, 0.3, 43).unwrap();
        assert_ne!(a, c);
        assert_eq!(&a.y()[..2], &x.moments(20)[..2]);
    }

    #[test]
    fn pure_noise_has_the_right_variance() {
        let sigma = 0.7;
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut n = 0.0;
        for seed in 0..200 {
            let obs = simulate(&DiscreteMeasure::empty(), 49, -1, sigma, seed).unwrap();
            for &v in obs.y() {
                sum += v;
                sq += v * v;
                n += 1.0;
            }
        }
        let mean = sum / n;
        let var = sq / n - mean * mean;
        // 10^4 samples: the sample variance has relative sd ≈ √(2/n) ≈ 1.4%
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.06, "variance {var}");
    }

    #[test]
    fn observation_validation() {
        assert!(Observation::new(vec![0.0; 3], 2, 2, 0.0).is_err());
        assert!(Observation::new(vec![0.0; 4], -2, 3, 0.0).is_err());
        assert!(Observation::new(vec![0.0; 4], 0, 4, 0.0).is_err());
        assert!(Observation::new(vec![0.0; 4], 0, 3, -1.0).is_err());
    }

    #[test]
    fn rice_examples() {
        let l = lambda_rice(0.01, 128, 1, 1.0).unwrap();
        assert!((l - 0.02 * sqrt(4.0 * 127.0 * log(650.0))).abs() < 1e-12);
        assert!((l - 1.1472).abs() < 1e-4);
        let l0 = lambda_rice(1.0, 2, -1, 0.0).unwrap();
        assert!((l0 - sqrt(24.0 * log(10.0))).abs() < 1e-12);
        assert!((l0 - 7.432).abs() < 5e-3);
        assert!((lambda_rice(2.0, 30, 3, 0.5).unwrap() - 2.0 * lambda_rice(1.0, 30, 3, 0.5).unwrap()).abs() < 1e-12);

        let a = lambda_algorithm(0.01, 128, 1, 1.0).unwrap();
        assert!((a - 2.2944).abs() < 1e-4);
        assert_eq!(a, 2.0 * l);
        assert_eq!(lambda_algorithm(0.0, 10, 2, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn scaled_sigma_examples() {
        assert!((scaled_sigma(0.002, 10, 2).unwrap() - 1.44).abs() < 1e-12);
        assert!(scaled_sigma(0.002, 10, -1).is_err());
        assert_eq!(scaled_sigma(0.0, 10, 2).unwrap(), 0.0);
        let big = scaled_sigma(1.0, 200, 40).unwrap();
        let by_logs: f64 = (160..=200).map(|v| log(v as f64)).sum();
        assert!((log(big) - by_logs).abs() < 1e-10);
    }

    #[test]
    fn tail_bound_examples() {
        let (sigma, m, d) = (1.3, 40, 2);
        let span = (m as i32 - d) as f64;
        let lambda_r = sigma * sqrt(8.0 * span * log(5.0 * (m as f64 + d as f64 + 1.0)));
        assert!((rice_tail_bound(lambda_r, sigma, m, d).unwrap() - 1.0).abs() < 1e-12);
        let l0 = lambda_rice(sigma, m, d, 1.0).unwrap();
        let expected = 1.0 / (5.0 * (m as f64 + d as f64 + 1.0));
        assert!((rice_tail_bound(l0, sigma, m, d).unwrap() - expected).abs() < 1e-12);
        let l0 = lambda_rice(1.0, 32, -1, 1.0).unwrap();
        assert!((rice_tail_bound(l0, 1.0, 32, -1).unwrap() - 0.00625).abs() < 1e-12);
        assert!(rice_tail_bound(1.0, 1.0, 32, -1).is_err());
    }

    #[test]
    fn projection_assembly_reproduces_spike_moments() {
        let x = DiscreteMeasure::new(vec![-0.3, 0.45], vec![2.0, -1.0]).unwrap();
        let b = BoundaryVector::new(vec![0.2, 1.0, 0.0, 0.0]).unwrap();
        let f = crate::spline::integrate_from_spikes(&x, &b, 1).unwrap().spline;
        let b = f.boundary_vector();
        let m = 11;
        let p = projection_vector(&f, m).unwrap();
        let obs = assemble_y_from_projection(&p, &b, m, 1).unwrap();
        for (a, e) in obs.y().iter().zip(x.moments(m)) {
            assert!((a - e).abs() < 1e-10);
        }
        let noise: Vec<f64> = (0..p.len()).map(|i| 0.01 * i as f64 - 0.03).collect();
        let noisy: Vec<f64> = p.iter().zip(&noise).map(|(a, n)| a + n).collect();
        let obs = assemble_y_from_projection(&noisy, &b, m, 1).unwrap();
        for (k, (a, e)) in obs.y().iter().zip(x.moments(m)).enumerate() {
            let shift = if k < 2 { 0.0 } else { noise[k - 2] };
            assert!((a - e - shift).abs() < 1e-10);
        }
        let zero = assemble_y_from_projection(&[0.0; 10], &BoundaryVector::new(vec![0.0; 4]).unwrap(), m, 1).unwrap();
        assert!(zero.y().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn theta_matches_projection_for_global_polynomials() {
        let mono = vec![0.4, -1.0, 0.3, 0.8];
        let f = NonUniformSpline::polynomial(mono.clone()).unwrap();
        let (m, d) = (10, 3);
        // T-coefficients of the same cubic: t² = (T0+T2)/2, t³ = (3T1+T3)/4
        let t = [
            mono[0] + mono[2] / 2.0,
            mono[1] + 0.75 * mono[3],
            mono[2] / 2.0,
            mono[3] / 4.0,
        ];
        let p = ChebPoly::from_t_coeffs(&t);
        let theta = theta_of_polynomial(&p, m, d).unwrap();
        let direct = projection_vector(&f, m).unwrap();
        for (a, b) in theta.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
        }
        assert!(theta_of_polynomial(&ChebPoly::zero(3), m, 3)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        assert!(theta_of_polynomial(&ChebPoly::new(vec![0.0; 8]), m, 3).is_ok());
        assert!(theta_of_polynomial(&ChebPoly::new(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]), m, 3).is_err());
    }

    #[test]
    fn theta_inverse_roundtrip() {
        let p = ChebPoly::new(vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.05]);
        let theta = theta_of_polynomial(&p, 8, 2).unwrap();
        let back = polynomial_from_theta(&theta, 8, 2).unwrap();
        for (a, b) in back.coeffs().iter().zip(p.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn theta_is_linear(
                a in prop::collection::vec(-1.0f64..1.0, 8),
                b in prop::collection::vec(-1.0f64..1.0, 8),
                s in -3.0f64..3.0,
            ) {
                let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
                let ta = theta_of_polynomial(&ChebPoly::new(a), 10, 1).unwrap();
                let tb = theta_of_polynomial(&ChebPoly::new(b), 10, 1).unwrap();
                let tc = theta_of_polynomial(&ChebPoly::new(combo), 10, 1).unwrap();
                for ((x, y), z) in ta.iter().zip(&tb).zip(&tc) {
                    prop_assert!((x + s * y - z).abs() <= 1e-9 * (1.0 + z.abs()));
                }
            }
        }
    }
}
