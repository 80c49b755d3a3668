use chebspike::blasso::{solve_blasso, BlassoOptions};
use chebspike::cheb::chebyshev_extrema;
use chebspike::measure::DiscreteMeasure;
use chebspike::observation::{lambda_rice, simulate};
use chebspike::sdp::{solve, SdpProblem, SdpStatus, DEFAULT_MAX_ITER, DEFAULT_TOL};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random feasible problem: one PSD block of size `n`, two free variables,
/// right-hand sides generated from a strictly feasible point.
fn feasible_problem(n: usize, entries: &[f64], rows: usize) -> SdpProblem {
    let g = DMatrix::from_fn(n, n, |i, j| entries[(i * n + j) % entries.len()]);
    let x0 = &g * g.transpose() + DMatrix::identity(n, n);
    let free0 = [0.5, -0.25];
    let mut p = SdpProblem::new(vec![n], 2);
    p.set_quadratic(0, 0, 1.0);
    p.set_quadratic(1, 1, 2.0);
    p.set_linear(0, entries[0]);
    p.set_linear(1, -entries[1]);
    for r in 0..rows {
        let (i, j) = (r % n, (r / n + r) % n);
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let a = 1.0 + entries[r % entries.len()].abs();
        let b = entries[(r + 3) % entries.len()];
        let row = p.add_constraint(a * x0[(i, j)] + b * free0[r % 2]);
        p.add_block_entry(row, 0, i, j, a);
        p.add_free_entry(row, r % 2, b);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sdp_solutions_are_psd_and_feasible(
        n in 2usize..5,
        entries in prop::collection::vec(-1.0f64..1.0, 8),
        rows in 1usize..4,
    ) {
        let p = feasible_problem(n, &entries, rows);
        let sol = solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        prop_assert_eq!(sol.status, SdpStatus::Solved);
        for x in &sol.psd_blocks {
            let min = x.clone().symmetric_eigen().eigenvalues.min();
            prop_assert!(min >= -1e-8 * (1.0 + x.trace()), "eigenvalue {}", min);
        }
        let rhs_norm = p.rows().iter().fold(0.0f64, |a, r| a.max(r.rhs.abs()));
        for r in p.rows() {
            let lhs: f64 = r.block_entries.iter().map(|e| e.value * sol.psd_blocks[e.block][(e.row, e.col)]).sum::<f64>()
                + r.free_entries.iter().map(|&(k, v)| v * sol.free_vector[k]).sum::<f64>();
            prop_assert!((lhs - r.rhs).abs() <= 1e-6 * (1.0 + rhs_norm), "residual {}", lhs - r.rhs);
        }
    }

    #[test]
    fn sdp_is_deterministic(entries in prop::collection::vec(-1.0f64..1.0, 8)) {
        let p = feasible_problem(3, &entries, 2);
        prop_assert_eq!(solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap(), solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn noisy_blasso_solutions_satisfy_the_solution_invariants(
        angles in prop::collection::btree_set(1u32..10, 1..3),
        amps in prop::collection::vec(prop_oneof![-3.0f64..-1.0, 1.0f64..3.0], 3),
        d in -1i32..2,
        sigma in 0.01f64..0.2,
        seed in 0u64..1000,
    ) {
        let m = 16;
        // angles on a 0.3 rad lattice keep atoms apart without forcing separation
        let support: Vec<f64> = angles.iter().map(|&a| (0.3 * a as f64).cos()).collect();
        let weights = amps[..support.len()].to_vec();
        let x = DiscreteMeasure::new(support, weights).unwrap();
        let obs = simulate(&x, m, d, sigma, seed).unwrap();
        let lambda = lambda_rice(sigma, m, d, 1.0).unwrap();
        let sol = solve_blasso(&obs, lambda, &BlassoOptions::default()).unwrap();
        if !sol.degenerate {
            prop_assert!(sol.measure.len() <= m + 1);
        }
        for t in chebyshev_extrema(4 * m) {
            prop_assert!(sol.dual.dual_poly.value_at(t).abs() <= lambda * (1.0 + 1e-6));
        }
        let cert = sol.dual.certificate();
        for (t, a) in sol.measure.atoms() {
            prop_assert!(a * cert.value_at(t) > 0.0, "atom {} weight {} against certificate {}", t, a, cert.value_at(t));
        }
        prop_assert!(sol.duality_gap <= 1e-6, "gap {}", sol.duality_gap);
    }
}
