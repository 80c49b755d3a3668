//! Finite signed atomic measures on `[-1, 1]`, their moments, TV norm and
//! the separation geometry of a support set.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::cheb::{check_point, dist, phi_row, ChebPoly};
use crate::error::{invalid, Result};

/// `Σ a_k δ_{t_k}` with strictly increasing support and nonzero weights.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteMeasure {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Coincident points have their weights summed; zero weights are dropped.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(crate::error::Error::Dimension {
                what: "measure weights",
                expected: support.len(),
                got: weights.len(),
            });
        }
        let mut atoms = Vec::with_capacity(support.len());
        for (t, w) in support.into_iter().zip(weights) {
            if !w.is_finite() {
                return Err(crate::error::Error::InvalidMeasure(alloc::format!(
                    "non-finite weight at t = {t}"
                )));
            }
            atoms.push((check_point(t)?, w));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut support = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (t, w) in atoms {
            if support.last() == Some(&t) {
                *weights.last_mut().unwrap() += w;
            } else {
                support.push(t);
                weights.push(w);
            }
        }
        let (support, weights) = support.into_iter().zip(weights).filter(|&(_, w)| w != 0.0).unzip();
        Ok(Self { support, weights })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn dirac(t: f64, weight: f64) -> Result<Self> {
        Self::new(alloc::vec![t], alloc::vec![weight])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.weights.iter().copied())
    }

    /// `c_k = Σ_j a_j φ_k(t_j)` for `k = 0..=m`.
    pub fn moments(&self, m: usize) -> Vec<f64> {
        let mut c = alloc::vec![0.0; m + 1];
        for (t, a) in self.atoms() {
            for (ck, phi) in c.iter_mut().zip(phi_row(m, t)) {
                *ck += a * phi;
            }
        }
        c
    }

    pub fn tv_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// `∫ p dμ`.
    pub fn integrate(&self, p: &ChebPoly) -> f64 {
        self.atoms().map(|(t, a)| a * p.value_at(t)).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.support.clone(), self.weights.iter().map(|w| w * factor).collect())
            .expect("scaling keeps the support valid")
    }

    /// `self + factor·other`, merging coincident atoms.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        let mut support = self.support.clone();
        let mut weights = self.weights.clone();
        support.extend_from_slice(&other.support);
        weights.extend(other.weights.iter().map(|w| w * factor));
        Self::new(support, weights).expect("merging two valid measures")
    }
}

pub fn moments(mu: &DiscreteMeasure, m: usize) -> Vec<f64> {
    mu.moments(m)
}

pub fn tv_norm(mu: &DiscreteMeasure) -> f64 {
    mu.tv_norm()
}

/// `Δ(T) = min_{t ≠ t'} min(d(t,t'), π - d(t,t'))`; `+∞` for fewer than two points.
pub fn min_separation(points: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, &u) in points.iter().enumerate() {
        for &v in &points[i + 1..] {
            let d = dist(u, v);
            best = best.min(d.min(PI - d));
        }
    }
    best
}

/// `ε(T)`: arccos distance from `T \ {-1, 1}` to the endpoints; `+∞` if that set is empty.
pub fn edge_distance(points: &[f64]) -> f64 {
    points
        .iter()
        .filter(|&&t| t != 1.0 && t != -1.0)
        .map(|&t| dist(t, 1.0).min(dist(t, -1.0)))
        .fold(f64::INFINITY, f64::min)
}

/// `min(Δ(T), 2ε(T)) ≥ 5π/m`.
pub fn separation_ok(points: &[f64], m: usize) -> Result<bool> {
    if m == 0 {
        return Err(invalid("separation needs m ≥ 1"));
    }
    let sep = min_separation(points).min(2.0 * edge_distance(points));
    Ok(sep >= 5.0 * PI / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::SQRT_2;
    use libm::cos;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn moment_examples() {
        let delta0 = DiscreteMeasure::dirac(0.0, 1.0).unwrap();
        assert!(close(&delta0.moments(4), &[1.0, 0.0, -SQRT_2, 0.0, SQRT_2], 1e-14));
        let two_at_one = DiscreteMeasure::dirac(1.0, 2.0).unwrap();
        let s = 2.0 * SQRT_2;
        assert!(close(&two_at_one.moments(3), &[2.0, s, s, s], 1e-14));
        assert_eq!(DiscreteMeasure::empty().moments(2), alloc::vec![0.0; 3]);
    }

    #[test]
    fn tv_examples() {
        let mu = DiscreteMeasure::new(alloc::vec![-0.3, 0.4], alloc::vec![3.0, -2.0]).unwrap();
        assert_eq!(mu.tv_norm(), 5.0);
        assert_eq!(DiscreteMeasure::empty().tv_norm(), 0.0);
        let nu = DiscreteMeasure::new(alloc::vec![-0.5, 0.0, 0.5], alloc::vec![0.5, -0.25, 1.0]).unwrap();
        assert_eq!(tv_norm(&nu), 1.75);
    }

    #[test]
    fn coincident_points_merge() {
        let mu = DiscreteMeasure::new(alloc::vec![0.2, -0.1, 0.2], alloc::vec![1.0, 3.0, -1.0]).unwrap();
        assert_eq!(mu.support(), &[-0.1]);
        assert_eq!(mu.weights(), &[3.0]);
        assert!(DiscreteMeasure::new(alloc::vec![1.5], alloc::vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(alloc::vec![0.5], alloc::vec![]).is_err());
    }

    #[test]
    fn separation_examples() {
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert!((min_separation(&[-h, h]) - PI / 2.0).abs() < 1e-14);
        assert_eq!(min_separation(&[0.3]), f64::INFINITY);
        assert!(min_separation(&[1.0, -1.0]).abs() < 1e-15);
        assert!((edge_distance(&[0.5]) - PI / 3.0).abs() < 1e-14);
        assert_eq!(edge_distance(&[1.0]), f64::INFINITY);
        assert!((edge_distance(&[0.0]) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn separation_condition_examples() {
        assert!(separation_ok(&[0.0], 64).unwrap());
        let a = cos(1.0);
        let b = cos(1.1);
        assert!(!separation_ok(&[a, b], 64).unwrap());
        assert!(!separation_ok(&[0.99999], 128).unwrap());
        assert!(separation_ok(&[0.0], 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn measure() -> impl Strategy<Value = DiscreteMeasure> {
            prop::collection::vec((-1.0f64..=1.0, -3.0f64..3.0), 0..6).prop_map(|atoms| {
                let (s, w) = atoms.into_iter().unzip();
                DiscreteMeasure::new(s, w).unwrap()
            })
        }

        proptest! {
            #[test]
            fn moments_are_linear(mu in measure(), nu in measure(), m in 0usize..40) {
                let sum = mu.add_scaled(&nu, 1.0).moments(m);
                let separate: Vec<f64> = mu.moments(m).iter().zip(nu.moments(m)).map(|(a, b)| a + b).collect();
                prop_assert!(close(&sum, &separate, 1e-12));
            }

            #[test]
            fn tv_is_a_norm(mu in measure(), nu in measure(), c in -5.0f64..5.0) {
                prop_assert!((mu.scaled(c).tv_norm() - c.abs() * mu.tv_norm()).abs() <= 1e-12);
                prop_assert!(mu.add_scaled(&nu, 1.0).tv_norm() <= mu.tv_norm() + nu.tv_norm() + 1e-12);
            }

            #[test]
            fn separation_ignores_order(
                (pts, shuffled) in prop::collection::vec(-1.0f64..=1.0, 0..8)
                    .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()))
            ) {
                prop_assert_eq!(min_separation(&pts), min_separation(&shuffled));
            }
        }
    }
}
