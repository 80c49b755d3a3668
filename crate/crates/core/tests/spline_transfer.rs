use chebspike::measure::DiscreteMeasure;
use chebspike::spline::{integrate_from_spikes, moments_via_transfer, projection_vector, NonUniformSpline};
use proptest::prelude::*;

/// Monomial coefficients of `(t - c)^n` by repeated multiplication.
fn power(c: f64, n: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; out.len() + 1];
        for (i, v) in out.iter().enumerate() {
            next[i + 1] += v;
            next[i] -= c * v;
        }
        out = next;
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

fn spline() -> impl Strategy<Value = NonUniformSpline> {
    (0usize..=3, 1usize..=4).prop_flat_map(|(d, s)| {
        (
            Just(d),
            prop::collection::btree_set(-900i32..900, s),
            prop::collection::vec(-2.0f64..2.0, d + 1),
            prop::collection::vec(prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], s),
        )
            .prop_map(|(d, knots, first, jumps)| {
                let knots: Vec<f64> = knots.into_iter().map(|k| k as f64 / 1000.0).collect();
                let mut pieces = vec![first];
                for (t, j) in knots.iter().zip(&jumps) {
                    let mut next = pieces.last().unwrap().clone();
                    for (c, v) in next.iter_mut().zip(power(*t, d)) {
                        *c += j / factorial(d) * v;
                    }
                    pieces.push(next);
                }
                NonUniformSpline::new(d, knots, pieces).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn transfer_matches_spike_moments(f in spline(), extra in 1usize..=16) {
        let d = f.degree();
        let m = d + extra;
        let direct = f.distributional_derivative().moments(m);
        let via = moments_via_transfer(&projection_vector(&f, m).unwrap(), &f.boundary_vector(), m, d).unwrap();
        let scale = direct.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for (a, b) in direct.iter().zip(&via) {
            prop_assert!((a - b).abs() <= 1e-8 * scale, "{a} vs {b} (scale {scale})");
        }
    }

    #[test]
    fn reconstruction_roundtrip(f in spline()) {
        let d = f.degree();
        let rec = integrate_from_spikes(&f.distributional_derivative(), &f.boundary_vector(), d).unwrap();
        prop_assert!(rec.max_right_residual() <= 1e-9);
        for i in 0..=200 {
            let t = -1.0 + i as f64 / 100.0;
            prop_assert!((rec.spline.value(t) - f.value(t)).abs() <= 1e-9);
        }
    }

    #[test]
    fn joins_are_smooth(f in spline()) {
        let d = f.degree();
        for (i, &t) in f.knots().iter().enumerate() {
            for l in 0..d {
                let left = chebspike::spline::monomial_derivative(&f.pieces()[i], l, t);
                let right = chebspike::spline::monomial_derivative(&f.pieces()[i + 1], l, t);
                prop_assert!((left - right).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn empty_measure_gives_no_knots() {
    let b = chebspike::spline::BoundaryVector::new(vec![0.0, 2.0, 4.0, 2.0]).unwrap();
    let rec = integrate_from_spikes(&DiscreteMeasure::empty(), &b, 1).unwrap();
    assert!(rec.spline.knots().is_empty());
    assert!(rec.max_right_residual() < 1e-12);
}
