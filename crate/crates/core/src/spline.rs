//! Non-uniform splines, their `(d+1)`-th distributional derivative, boundary
//! vectors and the linear maps taking (projection, boundary) data to the
//! moments of that derivative.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::cheb::{endpoint_weight, phi_derivative_table, SQRT_2};
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Horner evaluation of the `l`-th derivative of `Σ c_i t^i`.
pub fn monomial_derivative(c: &[f64], l: usize, t: f64) -> f64 {
    let mut acc = 0.0;
    for i in (l..c.len()).rev() {
        acc = acc * t + c[i] * falling(i, l);
    }
    acc
}

fn falling(i: usize, l: usize) -> f64 {
    ((i + 1 - l)..=i).fold(1.0, |acc, v| acc * v as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, v| acc * v as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Monomial coefficients of `scale·(t - c)^n`, padded to length `len`.
fn shifted_power(c: f64, n: usize, scale: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len.max(n + 1)];
    let mut pow = 1.0;
    for i in (0..=n).rev() {
        out[i] = scale * binomial(n, i) * pow;
        pow *= -c;
    }
    out
}

/// `d`-degree piecewise polynomial with `C^{d-1}` joins at strictly increasing knots in `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonUniformSpline {
    degree: usize,
    knots: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

impl NonUniformSpline {
    /// `pieces[i]` holds the monomial coefficients of `P_i`, valid on `[t_i, t_{i+1})`.
    pub fn new(degree: usize, knots: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if pieces.len() != knots.len() + 1 {
            return Err(Error::InvalidSpline(format!(
                "{} knots need {} pieces, got {}",
                knots.len(),
                knots.len() + 1,
                pieces.len()
            )));
        }
        for (i, piece) in pieces.iter().enumerate() {
            if piece.len() != degree + 1 {
                return Err(Error::InvalidSpline(format!(
                    "piece {i} has {} coefficients, degree {degree} needs {}",
                    piece.len(),
                    degree + 1
                )));
            }
            if piece.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidSpline(format!("piece {i} has a non-finite coefficient")));
            }
        }
        for (i, &t) in knots.iter().enumerate() {
            if !(t > -1.0 && t < 1.0) {
                return Err(Error::InvalidSpline(format!("knot {t} is not inside (-1, 1)")));
            }
            if i > 0 && knots[i - 1] >= t {
                return Err(Error::InvalidSpline("knots must be strictly increasing".into()));
            }
        }
        let spline = Self { degree, knots, pieces };
        if let Some((knot, order, gap)) = spline.worst_smoothness_defect() {
            return Err(Error::InvalidSpline(format!(
                "derivative {order} jumps by {gap:e} at knot {knot}"
            )));
        }
        Ok(spline)
    }

    /// First join violating `C^{d-1}` continuity beyond a relative 1e-9.
    fn worst_smoothness_defect(&self) -> Option<(f64, usize, f64)> {
        for (i, &t) in self.knots.iter().enumerate() {
            for l in 0..self.degree {
                let left = monomial_derivative(&self.pieces[i], l, t);
                let right = monomial_derivative(&self.pieces[i + 1], l, t);
                let gap = (left - right).abs();
                if gap > 1e-9 * (1.0 + left.abs() + right.abs()) {
                    return Some((t, l, gap));
                }
            }
        }
        None
    }

    /// A single global polynomial.
    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let degree = coeffs.len().saturating_sub(1);
        Self::new(degree, Vec::new(), vec![coeffs])
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    /// Index of the piece used at `t`; knots belong to the piece on their right.
    pub fn piece_index(&self, t: f64) -> usize {
        self.knots.partition_point(|&k| k <= t)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative_value(0, t)
    }

    pub fn derivative_value(&self, l: usize, t: f64) -> f64 {
        monomial_derivative(&self.pieces[self.piece_index(t)], l, t)
    }

    /// Jumps `P_i^{(d)} - P_{i-1}^{(d)}` at each knot.
    pub fn jumps(&self) -> Vec<f64> {
        let d = self.degree;
        let lead = factorial(d);
        (0..self.knots.len())
            .map(|i| lead * (self.pieces[i + 1][d] - self.pieces[i][d]))
            .collect()
    }

    /// `f^{(d+1)} = Σ_i (P_i^{(d)} - P_{i-1}^{(d)}) δ_{t_i}`.
    pub fn distributional_derivative(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(self.knots.clone(), self.jumps()).expect("knots are valid support points")
    }

    pub fn boundary_vector(&self) -> BoundaryVector {
        let d = self.degree;
        let first = &self.pieces[0];
        let last = self.pieces.last().unwrap();
        let mut values = Vec::with_capacity(2 * (d + 1));
        values.extend((0..=d).map(|l| monomial_derivative(first, l, -1.0)));
        values.extend((0..=d).map(|l| monomial_derivative(last, l, 1.0)));
        BoundaryVector { values }
    }
}

/// `(P_0(-1), …, P_0^{(d)}(-1), P_s(1), …, P_s^{(d)}(1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryVector {
    values: Vec<f64>,
}

impl BoundaryVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(2) {
            return Err(Error::InvalidSpline(format!(
                "boundary vector needs an even, nonzero length, got {}",
                values.len()
            )));
        }
        Ok(Self { values })
    }

    pub fn degree(&self) -> usize {
        self.values.len() / 2 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left(&self) -> &[f64] {
        &self.values[..self.values.len() / 2]
    }

    pub fn right(&self) -> &[f64] {
        &self.values[self.values.len() / 2..]
    }
}

pub fn distributional_derivative(f: &NonUniformSpline) -> DiscreteMeasure {
    f.distributional_derivative()
}

fn check_orders(m: usize, d: usize) -> Result<()> {
    if m <= d {
        return Err(crate::error::invalid(format!("need m > d, got m = {m}, d = {d}")));
    }
    Ok(())
}

/// Writes the boundary coefficients of moment order `k` into `row` (length `2(d+1)`).
fn transfer_row(k: usize, d: usize, row: &mut [f64]) {
    if k == 0 {
        row[d] = -1.0;
        row[2 * d + 1] = 1.0;
        return;
    }
    for l in 0..=k.min(d) {
        let w = SQRT_2 * endpoint_weight(k, l);
        let sign_l = if l % 2 == 0 { 1.0 } else { -1.0 };
        let sign_k = if k.is_multiple_of(2) { -1.0 } else { 1.0 };
        row[d + 1 + (d - l)] += sign_l * w;
        row[d - l] += sign_k * w;
    }
}

/// `W1` (orders `0..=d`) and `W2` (orders `d+1..=m`), each with `2(d+1)` columns
/// acting on the boundary vector.
pub fn transfer_matrices(m: usize, d: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_orders(m, d)?;
    let cols = 2 * (d + 1);
    let mut w1 = DMatrix::zeros(d + 1, cols);
    let mut w2 = DMatrix::zeros(m - d, cols);
    let mut row = vec![0.0; cols];
    for k in 0..=m {
        row.iter_mut().for_each(|v| *v = 0.0);
        transfer_row(k, d, &mut row);
        let (target, r) = if k <= d { (&mut w1, k) } else { (&mut w2, k - d - 1) };
        for (j, v) in row.iter().enumerate() {
            target[(r, j)] = *v;
        }
    }
    Ok((w1, w2))
}

/// `p_k = ∫ f φ_k^{(d+1)} dt` for `k = d+1..=m`, exact by integrating by parts
/// on each piece (the pieces have degree `≤ d`).
pub fn projection_vector(f: &NonUniformSpline, m: usize) -> Result<Vec<f64>> {
    let d = f.degree();
    check_orders(m, d)?;
    let mut breaks = Vec::with_capacity(f.knots.len() + 2);
    breaks.push(-1.0);
    breaks.extend_from_slice(&f.knots);
    breaks.push(1.0);
    let tables: Vec<Vec<Vec<f64>>> = breaks.iter().map(|&t| phi_derivative_table(m, d, t)).collect();
    let mut p = vec![0.0; m - d];
    for (i, piece) in f.pieces.iter().enumerate() {
        for j in 0..=d {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let hi = sign * monomial_derivative(piece, j, breaks[i + 1]);
            let lo = sign * monomial_derivative(piece, j, breaks[i]);
            for (slot, k) in p.iter_mut().zip(d + 1..=m) {
                *slot += hi * tables[i + 1][d - j][k] - lo * tables[i][d - j][k];
            }
        }
    }
    Ok(p)
}

/// `c = [0 W1; (-1)^{d+1} Id  W2] (p, b)`.
pub fn moments_via_transfer(p: &[f64], b: &BoundaryVector, m: usize, d: usize) -> Result<Vec<f64>> {
    check_orders(m, d)?;
    if p.len() != m - d {
        return Err(Error::Dimension {
            what: "projection vector",
            expected: m - d,
            got: p.len(),
        });
    }
    if b.values.len() != 2 * (d + 1) {
        return Err(Error::Dimension {
            what: "boundary vector",
            expected: 2 * (d + 1),
            got: b.values.len(),
        });
    }
    let mut row = vec![0.0; 2 * (d + 1)];
    let sign = if d.is_multiple_of(2) { -1.0 } else { 1.0 };
    Ok((0..=m)
        .map(|k| {
            row.iter_mut().for_each(|v| *v = 0.0);
            transfer_row(k, d, &mut row);
            let boundary: f64 = row.iter().zip(&b.values).map(|(w, v)| w * v).sum();
            if k <= d {
                boundary
            } else {
                sign * p[k - d - 1] + boundary
            }
        })
        .collect())
}

/// Output of [`integrate_from_spikes`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplineReconstruction {
    pub spline: NonUniformSpline,
    /// `P_s^{(l)}(1) - b_{d+1+l}` for `l = 0..=d`.
    pub right_boundary_residual: Vec<f64>,
}

impl SplineReconstruction {
    pub fn max_right_residual(&self) -> f64 {
        self.right_boundary_residual.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// The spline whose `(d+1)`-th derivative is `x` and whose left boundary data is
/// `b.left()`, built left to right by adding `(a_k/d!)(t - t_k)^d` past each spike.
///
/// A spike at `-1` is folded into the first piece and a spike at `1` does not
/// affect `[-1, 1)`; both only show up through the boundary residual.
pub fn integrate_from_spikes(x: &DiscreteMeasure, b: &BoundaryVector, d: usize) -> Result<SplineReconstruction> {
    if b.degree() != d {
        return Err(Error::Dimension {
            what: "boundary vector",
            expected: 2 * (d + 1),
            got: b.values.len(),
        });
    }
    let mut first = vec![0.0; d + 1];
    for (l, &v) in b.left().iter().enumerate() {
        let term = shifted_power(-1.0, l, v / factorial(l), d + 1);
        first.iter_mut().zip(term).for_each(|(c, t)| *c += t);
    }
    let lead = factorial(d);
    let mut knots = Vec::new();
    let mut pieces = vec![first];
    for (t, a) in x.atoms() {
        if t >= 1.0 {
            continue;
        }
        let bump = shifted_power(t, d, a / lead, d + 1);
        if t <= -1.0 {
            pieces[0].iter_mut().zip(bump).for_each(|(c, v)| *c += v);
            continue;
        }
        let mut next = pieces.last().unwrap().clone();
        next.iter_mut().zip(bump).for_each(|(c, v)| *c += v);
        knots.push(t);
        pieces.push(next);
    }
    let spline = NonUniformSpline {
        degree: d,
        knots,
        pieces,
    };
    let last = spline.pieces.last().unwrap();
    let right_boundary_residual = b
        .right()
        .iter()
        .enumerate()
        .map(|(l, v)| monomial_derivative(last, l, 1.0) - v)
        .collect();
    Ok(SplineReconstruction {
        spline,
        right_boundary_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::ChebPoly;

    fn step() -> NonUniformSpline {
        NonUniformSpline::new(0, vec![0.0], vec![vec![0.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn derivative_examples() {
        let mu = step().distributional_derivative();
        assert_eq!(mu.support(), &[0.0]);
        assert_eq!(mu.weights(), &[1.0]);

        let hinge = NonUniformSpline::new(1, vec![0.5], vec![vec![0.0, 2.0], vec![1.5, -1.0]]).unwrap();
        let mu = hinge.distributional_derivative();
        assert_eq!(mu.support(), &[0.5]);
        assert_eq!(mu.weights(), &[-3.0]);

        let disguised = NonUniformSpline::new(1, vec![0.2], vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(disguised.distributional_derivative().is_empty());
    }

    #[test]
    fn smoothness_is_checked() {
        let broken = NonUniformSpline::new(1, vec![0.0], vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(broken, Err(Error::InvalidSpline(_))));
        assert!(NonUniformSpline::new(0, vec![1.0], vec![vec![0.0], vec![1.0]]).is_err());
        assert!(NonUniformSpline::new(0, vec![0.3, 0.1], vec![vec![0.0]; 3]).is_err());
    }

    #[test]
    fn transfer_examples() {
        let (w1, w2) = transfer_matrices(1, 0).unwrap();
        assert_eq!(w1.as_slice(), &[-1.0, 1.0]);
        assert_eq!(w2.nrows(), 1);
        let (_, w2) = transfer_matrices(2, 0).unwrap();
        assert!((w2[(0, 0)] - SQRT_2).abs() < 1e-15);
        assert!((w2[(0, 1)] - SQRT_2).abs() < 1e-15);
        assert!(transfer_matrices(2, 2).is_err());
    }

    #[test]
    fn projection_examples() {
        let one = NonUniformSpline::polynomial(vec![1.0]).unwrap();
        let p = projection_vector(&one, 6).unwrap();
        for (k, v) in (1..=6).zip(&p) {
            let expected = SQRT_2 * (1.0 - if k % 2 == 0 { 1.0 } else { -1.0 });
            assert!((v - expected).abs() < 1e-13, "k={k}");
        }
        let zero = NonUniformSpline::polynomial(vec![0.0, 0.0]).unwrap();
        assert!(projection_vector(&zero, 5).unwrap().iter().all(|&v| v == 0.0));
        let p = projection_vector(&step(), 2).unwrap();
        assert!((p[1] - 2.0 * SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn transfer_reproduces_step_moments() {
        let f = step();
        let p = projection_vector(&f, 4).unwrap();
        let b = f.boundary_vector();
        assert_eq!(b.values(), &[0.0, 1.0]);
        let c = moments_via_transfer(&p, &b, 4, 0).unwrap();
        let expected = [1.0, 0.0, -SQRT_2, 0.0, SQRT_2];
        for (a, e) in c.iter().zip(expected) {
            assert!((a - e).abs() < 1e-13);
        }
        let doubled: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let b2 = BoundaryVector::new(b.values().iter().map(|v| 2.0 * v).collect()).unwrap();
        let c2 = moments_via_transfer(&doubled, &b2, 4, 0).unwrap();
        assert!(c.iter().zip(&c2).all(|(a, b)| (2.0 * a - b).abs() < 1e-13));
    }

    #[test]
    fn global_polynomial_has_zero_derivative_moments() {
        let f = NonUniformSpline::polynomial(vec![0.3, -1.0, 2.0, 0.5]).unwrap();
        let c = moments_via_transfer(&projection_vector(&f, 9).unwrap(), &f.boundary_vector(), 9, 3).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-9), "{c:?}");
    }

    #[test]
    fn transfer_dimension_errors() {
        let b = BoundaryVector::new(vec![0.0, 1.0]).unwrap();
        assert!(moments_via_transfer(&[0.0; 3], &b, 4, 0).is_err());
        assert!(moments_via_transfer(&[0.0; 3], &b, 4, 1).is_err());
        assert!(BoundaryVector::new(vec![0.0; 3]).is_err());
    }

    #[test]
    fn integrate_examples() {
        let one = BoundaryVector::new(vec![1.0, 1.0]).unwrap();
        let rec = integrate_from_spikes(&DiscreteMeasure::empty(), &one, 0).unwrap();
        assert_eq!(rec.spline.pieces(), &[vec![1.0]]);
        assert_eq!(rec.max_right_residual(), 0.0);

        let b = BoundaryVector::new(vec![0.0, 1.0]).unwrap();
        let rec = integrate_from_spikes(&DiscreteMeasure::dirac(0.0, 1.0).unwrap(), &b, 0).unwrap();
        assert_eq!(rec.spline, step());
    }

    /// Golub–Welsch Gauss–Legendre rule.
    fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let k = i as f64;
            let beta = k / libm::sqrt(4.0 * k * k - 1.0);
            jac[(i, i - 1)] = beta;
            jac[(i - 1, i)] = beta;
        }
        let eig = jac.symmetric_eigen();
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..n)
            .map(|j| 2.0 * eig.eigenvectors[(0, j)] * eig.eigenvectors[(0, j)])
            .collect();
        (nodes, weights)
    }

    /// `∫ f φ_k^{(d+1)}` by Gauss–Legendre on each piece, differentiating `φ_k`
    /// through its Chebyshev coefficients.
    fn quadrature_projection(f: &NonUniformSpline, m: usize) -> Vec<f64> {
        let d = f.degree();
        let (nodes, weights) = gauss_legendre(m + 2);
        let mut breaks = vec![-1.0];
        breaks.extend_from_slice(f.knots());
        breaks.push(1.0);
        (d + 1..=m)
            .map(|k| {
                let mut basis = vec![0.0; k + 1];
                basis[k] = 1.0;
                let mut dphi = ChebPoly::new(basis);
                for _ in 0..=d {
                    dphi = dphi.derivative();
                }
                let mut total = 0.0;
                for (i, piece) in f.pieces().iter().enumerate() {
                    let (a, b) = (breaks[i], breaks[i + 1]);
                    for (x, w) in nodes.iter().zip(&weights) {
                        let t = 0.5 * (b - a) * x + 0.5 * (a + b);
                        let deriv = dphi.value_at(t);
                        total += 0.5 * (b - a) * w * monomial_derivative(piece, 0, t) * deriv;
                    }
                }
                total
            })
            .collect()
    }

    #[test]
    fn projection_matches_quadrature() {
        let b = BoundaryVector::new(vec![0.5, -0.5, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let x = DiscreteMeasure::new(vec![-0.4, 0.3], vec![1.5, -2.0]).unwrap();
        let f = integrate_from_spikes(&x, &b, 2).unwrap().spline;
        let exact = projection_vector(&f, 12).unwrap();
        let quad = quadrature_projection(&f, 12);
        for (e, q) in exact.iter().zip(&quad) {
            assert!((e - q).abs() <= 1e-9 * (1.0 + e.abs()), "{e} vs {q}");
        }
    }
}
