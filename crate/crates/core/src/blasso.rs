//! TV-regularized least squares over signed measures with exact low-order
//! moments,
//!
//! ```text
//! minimize ½ Σ_{k>d} (c_k(μ) - y_k)² + λ ‖μ‖_TV   subject to  c_k(μ) = y_k, k ≤ d,
//! ```
//!
//! solved through its dual
//!
//! ```text
//! minimize ⟨α, y⟩ + ½ Σ_{k>d} α_k²   subject to  |Σ α_k φ_k| ≤ λ on [-1, 1].
//! ```
//!
//! The sup-norm constraint becomes two trace-parameterized PSD blocks. At the
//! optimum the certificate `P̂ = -Σ α̂_k φ_k` satisfies `P̂(t̂_i) = λ sign(â_i)` on
//! the support of any minimizer, so the support is read off the level set
//! `|P̂| = λ`; weights then come from the finite-dimensional KKT system.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{acos, cos, sin};
use nalgebra::{DMatrix, DVector};

use crate::cheb::{chebyshev_extrema, phi_derivative_table, phi_row, unit_level_roots, ChebPoly};
use crate::error::{invalid, Error, Result};
use crate::measure::DiscreteMeasure;
use crate::observation::Observation;
use crate::sdp::{self, SdpProblem, SdpStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlassoOptions {
    /// Relative slack `τ` of the level set `|P̂| ≥ λ(1-τ)`.
    pub tau: f64,
    pub sdp_tol: f64,
    pub sdp_max_iter: usize,
    /// Refine support and weights by Newton's method on the KKT system.
    pub polish: bool,
}

impl Default for BlassoOptions {
    fn default() -> Self {
        Self {
            tau: 1e-4,
            sdp_tol: 1e-9,
            sdp_max_iter: sdp::DEFAULT_MAX_ITER,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Dual variables `α̂`; the certificate is `P̂ = -Σ α̂_k φ_k`.
    pub alpha: Vec<f64>,
    /// `Σ α̂_k φ_k`.
    pub dual_poly: ChebPoly,
    /// `⟨α̂, y⟩ + ½ Σ_{k>d} α̂_k²`.
    pub objective: f64,
}

impl DualSolution {
    pub fn certificate(&self) -> ChebPoly {
        self.dual_poly.scaled(-1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `|λ‖x̂‖_TV - Σ_i â_i P̂_λ(t̂_i)|`.
    pub tv_identity_gap: f64,
    /// `max(0, sup|P̂_λ| - λ)`.
    pub feasibility_gap: f64,
    /// `max_{k ≤ d} |c_k(x̂) - y_k|`.
    pub constraint_residual: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.tv_identity_gap
            .max(self.feasibility_gap)
            .max(self.constraint_residual)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalSolution {
    pub measure: DiscreteMeasure,
    pub dual: DualSolution,
    /// Coefficients of `P̂_λ` on `φ_0..φ_d` (negated equality multipliers).
    pub constant_part: Vec<f64>,
    pub kkt_residuals: KktResiduals,
    pub degenerate: bool,
    pub lambda: f64,
    pub primal_objective: f64,
    /// `|primal + dual| / (1 + |primal|)`.
    pub duality_gap: f64,
    pub sdp_status: SdpStatus,
    pub sdp_iterations: usize,
    pub sdp_gap: f64,
}

fn trig_coef(k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        core::f64::consts::FRAC_1_SQRT_2
    }
}

/// Variables: `α` free (length `m+1`), then blocks `Q1`, `Q2` of size `m+1` with
/// `λ - Σ α_k φ_k` and `λ + Σ α_k φ_k` written as `r_k = Σ_j Q[j+k, j]`.
fn build_dual(y: &[f64], exact: usize, level: f64, linear_scale: f64, quad_scale: f64) -> SdpProblem {
    let n = y.len();
    let mut p = SdpProblem::new(vec![n, n], n);
    for (k, &yk) in y.iter().enumerate() {
        p.set_linear(k, yk * linear_scale);
        if k >= exact {
            p.set_quadratic(k, k, quad_scale);
        }
    }
    for (block, sign) in [(0usize, 1.0), (1usize, -1.0)] {
        for k in 0..n {
            let row = p.add_constraint(if k == 0 { level } else { 0.0 });
            for j in 0..n - k {
                p.add_block_entry(row, block, j + k, j, 1.0);
            }
            p.add_free_entry(row, k, sign * trig_coef(k));
        }
    }
    p
}

/// The dual program as an SDP in the original scaling.
pub fn assemble_dual_sdp(obs: &Observation, lambda: f64) -> Result<SdpProblem> {
    check_lambda(lambda)?;
    Ok(build_dual(obs.y(), obs.exact_len(), lambda, 1.0, 1.0))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("λ = {lambda} must be positive and finite")));
    }
    Ok(())
}

/// `½ Σ_{k>d} (c_k(x) - y_k)² + λ ‖x‖_TV`.
pub fn primal_objective(x: &DiscreteMeasure, obs: &Observation, lambda: f64) -> f64 {
    let c = x.moments(obs.m());
    let fit: f64 = c
        .iter()
        .zip(obs.y())
        .skip(obs.exact_len())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    0.5 * fit + lambda * x.tv_norm()
}

/// `⟨α, y⟩ + ½ Σ_{k>d} α_k²`.
pub fn dual_objective(alpha: &[f64], obs: &Observation) -> f64 {
    let lin: f64 = alpha.iter().zip(obs.y()).map(|(a, y)| a * y).sum();
    let quad: f64 = alpha.iter().skip(obs.exact_len()).map(|a| a * a).sum();
    lin + 0.5 * quad
}

/// Orders `0..=m` evaluated at the atoms: `out[(k, i)] = φ_k(t_i)`.
fn design(support: &[f64], m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m + 1, support.len());
    for (i, &t) in support.iter().enumerate() {
        for (k, v) in phi_row(m, t).into_iter().enumerate() {
            out[(k, i)] = v;
        }
    }
    out
}

fn numeric_rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let top = sv.max();
    let cut = 1e-10 * top * a.nrows().max(a.ncols()) as f64;
    sv.iter().filter(|&&s| s > cut).count()
}

/// Rows of `e` that do not raise the rank when added in order.
fn dependent_rows(e: &DMatrix<f64>) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    let mut bad = Vec::new();
    for k in 0..e.nrows() {
        let mut rows = kept.clone();
        rows.push(k);
        let sub = e.select_rows(rows.iter());
        if numeric_rank(&sub) == rows.len() {
            kept.push(k);
        } else {
            bad.push(k);
        }
    }
    bad
}

fn solve_square(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(x) = a.clone().lu().solve(b) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let x = a.svd(true, true).solve(b, 1e-13).ok()?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// KKT solution on a fixed support: weights and equality multipliers `ν`.
fn kkt_fit(phi: &DMatrix<f64>, y: &[f64], exact: usize, lambda: f64, signs: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = phi.ncols();
    let rows = phi.nrows();
    let f = phi.rows(exact, rows - exact);
    let e = phi.rows(0, exact);
    let yf = DVector::from_column_slice(&y[exact..]);
    let mut kkt = DMatrix::zeros(n + exact, n + exact);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(f.transpose() * f));
    kkt.view_mut((0, n), (n, exact)).copy_from(&e.transpose());
    kkt.view_mut((n, 0), (exact, n)).copy_from(&e);
    let mut rhs = DVector::zeros(n + exact);
    let fy = f.transpose() * yf;
    for i in 0..n {
        rhs[i] = fy[i] - lambda * signs[i];
    }
    for k in 0..exact {
        rhs[n + k] = y[k];
    }
    let sol = solve_square(kkt, &rhs)?;
    Some((
        sol.rows(0, n).iter().copied().collect(),
        sol.rows(n, exact).iter().copied().collect(),
    ))
}

/// Sign-consistent weights on a fixed support, with the equality multipliers.
fn fit_with_multipliers(
    support: &[f64],
    obs: &Observation,
    lambda: f64,
    signs: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let exact = obs.exact_len();
    let phi = design(support, obs.m());
    if exact > 0 {
        let bad = dependent_rows(&phi.rows(0, exact).into_owned());
        if !bad.is_empty() {
            return Err(Error::RankDeficient { rows: bad });
        }
    }
    let mut active: Vec<usize> = (0..support.len()).collect();
    let mut weights = vec![0.0; support.len()];
    let mut nu = vec![0.0; exact];
    for _ in 0..=support.len() {
        let sub = phi.select_columns(active.iter());
        let sub_signs: Vec<f64> = active.iter().map(|&i| signs[i]).collect();
        let (a, multipliers) = kkt_fit(&sub, obs.y(), exact, lambda, &sub_signs)
            .ok_or_else(|| Error::Solver("singular weight-fitting system".into()))?;
        nu = multipliers;
        let worst = a
            .iter()
            .zip(&sub_signs)
            .enumerate()
            .filter(|(_, (w, s))| *w * *s <= 0.0)
            .min_by(|x, y| (x.1 .0 * x.1 .1).total_cmp(&(y.1 .0 * y.1 .1)))
            .map(|(j, _)| j);
        weights.iter_mut().for_each(|w| *w = 0.0);
        for (&i, &w) in active.iter().zip(&a) {
            weights[i] = w;
        }
        match worst {
            Some(j) if active.len() > 1 || exact == 0 => {
                active.remove(j);
                if active.is_empty() {
                    weights.iter_mut().for_each(|w| *w = 0.0);
                    break;
                }
                if exact > 0 {
                    let e = phi.select_columns(active.iter()).rows(0, exact).into_owned();
                    let bad = dependent_rows(&e);
                    if !bad.is_empty() {
                        return Err(Error::RankDeficient { rows: bad });
                    }
                }
            }
            _ => break,
        }
    }
    Ok((weights, nu))
}

/// Weights on a fixed support minimizing the penalized fit with sign pattern
/// `signs`, subject to the exact low-order moments. Atoms whose fitted weight
/// disagrees with its sign are dropped (weight 0) and the fit repeated.
pub fn fit_weights(support: &[f64], obs: &Observation, lambda: f64, signs: &[f64]) -> Result<Vec<f64>> {
    if support.is_empty() {
        return Err(invalid("support must be nonempty"));
    }
    if signs.len() != support.len() {
        return Err(Error::Dimension {
            what: "signs",
            expected: support.len(),
            got: signs.len(),
        });
    }
    if !(lambda >= 0.0) {
        return Err(invalid("λ must be nonnegative"));
    }
    Ok(fit_with_multipliers(support, obs, lambda, signs)?.0)
}

/// Least squares with the equalities enforced by a heavy penalty; used as a
/// starting point when the equalities alone do not pin the weights.
fn penalized_fit(support: &[f64], obs: &Observation, lambda: f64, signs: &[f64]) -> Vec<f64> {
    let exact = obs.exact_len();
    let phi = design(support, obs.m());
    let n = support.len();
    let mut weight = DVector::from_element(obs.m() + 1, 1.0);
    let penalty = 1e6 * (1.0 + phi.norm_squared());
    for k in 0..exact {
        weight[k] = penalty;
    }
    let mut normal = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for i in 0..n {
        for j in 0..n {
            normal[(i, j)] = (0..=obs.m()).map(|k| weight[k] * phi[(k, i)] * phi[(k, j)]).sum();
        }
        rhs[i] = (0..=obs.m()).map(|k| weight[k] * phi[(k, i)] * obs.y()[k]).sum::<f64>() - lambda * signs[i];
    }
    solve_square(normal, &rhs)
        .map(|v| v.iter().copied().collect())
        .unwrap_or_else(|| vec![0.0; n])
}

/// Newton's method on the KKT conditions of the primal restricted to `s`
/// atoms, moving weights, interior locations (as angles) and multipliers.
struct Polisher<'a> {
    obs: &'a Observation,
    lambda: f64,
    signs: Vec<f64>,
}

struct PolishState {
    theta: Vec<f64>,
    weights: Vec<f64>,
    nu: Vec<f64>,
}

impl Polisher<'_> {
    fn movable(&self, theta: &[f64]) -> Vec<usize> {
        theta
            .iter()
            .enumerate()
            .filter(|(_, &th)| th > 0.0 && th < core::f64::consts::PI)
            .map(|(i, _)| i)
            .collect()
    }

    /// `(φ_k, φ_k', φ_k'')` in the angle variable, evaluated through `t = cos θ`
    /// with the same recurrence that produces moments elsewhere.
    fn basis(m: usize, theta: f64) -> [Vec<f64>; 3] {
        let t = cos(theta);
        let (s, c) = (sin(theta), t);
        let table = phi_derivative_table(m, 2, t);
        let v = phi_row(m, t);
        let d1 = table[1].iter().map(|p1| -s * p1).collect();
        let d2 = table[2]
            .iter()
            .zip(&table[1])
            .map(|(p2, p1)| s * s * p2 - c * p1)
            .collect();
        [v, d1, d2]
    }

    fn residual_and_jacobian(&self, st: &PolishState, movable: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.obs.m();
        let exact = self.obs.exact_len();
        let n = st.theta.len();
        let nm = movable.len();
        let size = n + nm + exact;
        let bases: Vec<[Vec<f64>; 3]> = st.theta.iter().map(|&th| Self::basis(m, th)).collect();
        let y = self.obs.y();
        let mut r = vec![0.0; m + 1];
        for k in exact..=m {
            r[k] = st.weights.iter().zip(&bases).map(|(a, b)| a * b[0][k]).sum::<f64>() - y[k];
        }
        let mut fvec = DVector::zeros(size);
        let mut jac = DMatrix::zeros(size, size);
        // weight equations
        let mut g1 = vec![0.0; n];
        let mut g2 = vec![0.0; n];
        for i in 0..n {
            let b = &bases[i];
            let mut g0 = 0.0;
            for k in exact..=m {
                g0 += b[0][k] * r[k];
                g1[i] += b[1][k] * r[k];
                g2[i] += b[2][k] * r[k];
            }
            for k in 0..exact {
                g0 += b[0][k] * st.nu[k];
                g1[i] += b[1][k] * st.nu[k];
                g2[i] += b[2][k] * st.nu[k];
            }
            fvec[i] = g0 + self.lambda * self.signs[i];
        }
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] = (exact..=m).map(|k| bases[i][0][k] * bases[j][0][k]).sum();
            }
            for (jj, &j) in movable.iter().enumerate() {
                let mut v: f64 = (exact..=m).map(|k| bases[i][0][k] * bases[j][1][k]).sum::<f64>() * st.weights[j];
                if i == j {
                    v += g1[i];
                }
                jac[(i, n + jj)] = v;
            }
            for l in 0..exact {
                jac[(i, n + nm + l)] = bases[i][0][l];
            }
        }
        // stationarity in the angles
        for (ii, &i) in movable.iter().enumerate() {
            let row = n + ii;
            fvec[row] = g1[i];
            for j in 0..n {
                jac[(row, j)] = (exact..=m).map(|k| bases[i][1][k] * bases[j][0][k]).sum();
            }
            for (jj, &j) in movable.iter().enumerate() {
                let mut v: f64 = (exact..=m).map(|k| bases[i][1][k] * bases[j][1][k]).sum::<f64>() * st.weights[j];
                if i == j {
                    v += g2[i];
                }
                jac[(row, n + jj)] = v;
            }
            for l in 0..exact {
                jac[(row, n + nm + l)] = bases[i][1][l];
            }
        }
        // exact moments
        for l in 0..exact {
            let row = n + nm + l;
            fvec[row] = st.weights.iter().zip(&bases).map(|(a, b)| a * b[0][l]).sum::<f64>() - y[l];
            for j in 0..n {
                jac[(row, j)] = bases[j][0][l];
            }
            for (jj, &j) in movable.iter().enumerate() {
                jac[(row, n + jj)] = st.weights[j] * bases[j][1][l];
            }
        }
        (fvec, jac)
    }

    /// Scaled max-norm of the KKT residual.
    fn merit(&self, f: &DVector<f64>, n: usize, nm: usize) -> f64 {
        let m = self.obs.m() as f64;
        let yscale = 1.0 + self.obs.y().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut worst = 0.0f64;
        for (i, v) in f.iter().enumerate() {
            let scale = if i < n {
                self.lambda
            } else if i < n + nm {
                m * self.lambda
            } else {
                yscale
            };
            worst = worst.max(v.abs() / scale);
        }
        worst
    }

    /// Damped Newton with a monotone line search on the scaled residual. The
    /// angle rows bottom out near `|a| m³ ε`, so the iteration stops when no
    /// step reduces the residual and the best iterate is returned.
    fn run(&self, mut st: PolishState) -> PolishState {
        let n = st.theta.len();
        let movable = self.movable(&st.theta);
        let nm = movable.len();
        let (mut f, mut jac) = self.residual_and_jacobian(&st, &movable);
        let mut merit = self.merit(&f, n, nm);
        for _ in 0..30 {
            if merit <= 1e-13 {
                break;
            }
            let Some(step) = solve_square(jac.clone(), &(-&f)) else {
                break;
            };
            let mut alpha = 1.0;
            let mut accepted = None;
            while alpha >= 1.0 / 1024.0 {
                let mut trial = PolishState {
                    theta: st.theta.clone(),
                    weights: st.weights.clone(),
                    nu: st.nu.clone(),
                };
                for i in 0..n {
                    trial.weights[i] += alpha * step[i];
                }
                let mut inside = true;
                for (jj, &j) in movable.iter().enumerate() {
                    trial.theta[j] += alpha * step[n + jj];
                    inside &= trial.theta[j] > 0.0 && trial.theta[j] < core::f64::consts::PI;
                }
                for l in 0..trial.nu.len() {
                    trial.nu[l] += alpha * step[n + nm + l];
                }
                if inside {
                    let (tf, tj) = self.residual_and_jacobian(&trial, &movable);
                    let tm = self.merit(&tf, n, nm);
                    if tm < merit {
                        accepted = Some((trial, tf, tj, tm));
                        break;
                    }
                }
                alpha *= 0.5;
            }
            let Some((trial, tf, tj, tm)) = accepted else {
                break;
            };
            st = trial;
            f = tf;
            jac = tj;
            merit = tm;
        }
        st
    }
}

/// `P̂_λ = Σ_{k≤d} â_k φ_k + Σ_{k>d} (y_k - c_k(x̂)) φ_k`.
pub fn certificate_polynomial(x: &DiscreteMeasure, constant_part: &[f64], obs: &Observation) -> ChebPoly {
    let c = x.moments(obs.m());
    let exact = obs.exact_len();
    let coeffs = (0..=obs.m())
        .map(|k| {
            if k < exact {
                constant_part.get(k).copied().unwrap_or(0.0)
            } else {
                obs.y()[k] - c[k]
            }
        })
        .collect();
    ChebPoly::new(coeffs)
}

/// The constant part closest to `base` for which the certificate equals `λ·sign(â_i)` at every atom
/// (least squares when the atoms outnumber the free coefficients).
fn nearest_interpolating_part(x: &DiscreteMeasure, base: &[f64], obs: &Observation, lambda: f64) -> Vec<f64> {
    let exact = obs.exact_len();
    if exact == 0 || x.is_empty() {
        return base.to_vec();
    }
    let p = certificate_polynomial(x, base, obs);
    let phi = design(x.support(), obs.m());
    let a = phi.rows(0, exact).transpose();
    let r = DVector::from_iterator(x.len(), x.atoms().map(|(t, w)| lambda * w.signum() - p.value_at(t)));
    match a.svd(true, true).solve(&r, 1e-12) {
        Ok(delta) if delta.iter().all(|v| v.is_finite()) => base.iter().zip(delta.iter()).map(|(b, d)| b + d).collect(),
        _ => base.to_vec(),
    }
}

/// Residuals of the first-order conditions for `sol` on the data `obs`.
pub fn verify_first_order(sol: &PrimalSolution, obs: &Observation, lambda: f64) -> KktResiduals {
    first_order_residuals(&sol.measure, &sol.constant_part, obs, lambda)
}

fn first_order_residuals(x: &DiscreteMeasure, constant_part: &[f64], obs: &Observation, lambda: f64) -> KktResiduals {
    let p = certificate_polynomial(x, constant_part, obs);
    let integral: f64 = x.atoms().map(|(t, a)| a * p.value_at(t)).sum();
    let tv_identity_gap = (lambda * x.tv_norm() - integral).abs();
    let mut points = chebyshev_extrema((4 * obs.m()).max(2048));
    points.extend_from_slice(x.support());
    points.extend(p.derivative().real_roots());
    let sup = points.iter().map(|&t| p.value_at(t).abs()).fold(0.0, f64::max);
    let c = x.moments(obs.m());
    let constraint_residual = (0..obs.exact_len())
        .map(|k| (c[k] - obs.y()[k]).abs())
        .fold(0.0, f64::max);
    KktResiduals {
        tv_identity_gap,
        feasibility_gap: (sup - lambda).max(0.0),
        constraint_residual,
    }
}

/// Nonnegative least squares in normal-equation form,
/// `min ½uᵀGu - hᵀu` over `u ≥ 0`, by the Lawson–Hanson active-set method.
pub fn nnls_normal(g: &DMatrix<f64>, h: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let n = h.len();
    let mut u = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = h.amax().max(1e-300);
    for _ in 0..max_iter {
        let grad = h - g * &u;
        let candidate = (0..n)
            .filter(|&i| !passive[i])
            .max_by(|&a, &b| grad[a].total_cmp(&grad[b]));
        match candidate {
            Some(i) if grad[i] > 1e-12 * scale => passive[i] = true,
            _ => break,
        }
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let gp = g.select_rows(idx.iter()).select_columns(idx.iter());
            let hp = DVector::from_iterator(idx.len(), idx.iter().map(|&i| h[i]));
            let Some(zp) = solve_square(gp, &hp) else {
                return u;
            };
            if zp.iter().all(|&v| v > 0.0) {
                for (j, &i) in idx.iter().enumerate() {
                    u[i] = zp[j];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (j, &i) in idx.iter().enumerate() {
                if zp[j] <= 0.0 {
                    alpha = alpha.min(u[i] / (u[i] - zp[j]));
                }
            }
            for (j, &i) in idx.iter().enumerate() {
                u[i] += alpha * (zp[j] - u[i]);
                if u[i] <= 1e-15 * scale {
                    u[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    u
}

/// Fallback for a constant certificate `P̂ ≡ ±λ`: every atom has the same
/// sign, so fit sign-constrained weights on a fixed 512-point grid.
fn constant_dual_fallback(obs: &Observation, lambda: f64, sign: f64) -> DiscreteMeasure {
    let grid = chebyshev_extrema(512);
    let phi = design(&grid, obs.m());
    let exact = obs.exact_len();
    let penalty = 1e6;
    let mut row_weight = vec![1.0; obs.m() + 1];
    for w in row_weight.iter_mut().take(exact) {
        *w = penalty;
    }
    let n = grid.len();
    let mut g = DMatrix::zeros(n, n);
    let mut h = DVector::zeros(n);
    let weighted = DMatrix::from_fn(obs.m() + 1, n, |k, i| row_weight[k] * phi[(k, i)]);
    g.gemm_tr(1.0, &weighted, &phi, 0.0);
    for i in 0..n {
        h[i] = sign * (0..=obs.m()).map(|k| weighted[(k, i)] * obs.y()[k]).sum::<f64>() - lambda;
    }
    let u = nnls_normal(&g, &h, 4 * n);
    let floor = (1e-6 * lambda).max(1e-8);
    let (support, weights): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(u.iter())
        .filter(|(_, &w)| w > floor)
        .map(|(&t, &w)| (t, sign * w))
        .unzip();
    DiscreteMeasure::new(support, weights).expect("grid points are valid")
}

struct Fitted {
    support: Vec<f64>,
    weights: Vec<f64>,
    nu: Vec<f64>,
}

/// Weights (and multipliers) on a candidate support, then Newton polishing and pruning.
fn fit_and_polish(
    mut support: Vec<f64>,
    mut signs: Vec<f64>,
    obs: &Observation,
    lambda: f64,
    nu_hint: &[f64],
    opts: &BlassoOptions,
) -> Fitted {
    let exact = obs.exact_len();
    let floor = (1e-6 * lambda).max(1e-8);
    for _ in 0..=support.len() {
        if support.is_empty() {
            return Fitted {
                support,
                weights: Vec::new(),
                nu: nu_hint.to_vec(),
            };
        }
        let (weights, nu) = match fit_with_multipliers(&support, obs, lambda, &signs) {
            Ok(fit) => fit,
            Err(_) => (penalized_fit(&support, obs, lambda, &signs), nu_hint.to_vec()),
        };
        // drop atoms that vanished or flipped before moving anything
        let keep: Vec<usize> = (0..support.len()).filter(|&i| weights[i] * signs[i] > floor).collect();
        if keep.is_empty() {
            return Fitted {
                support: Vec::new(),
                weights: Vec::new(),
                nu,
            };
        }
        let mut state = PolishState {
            theta: keep.iter().map(|&i| acos(support[i])).collect(),
            weights: keep.iter().map(|&i| weights[i]).collect(),
            nu,
        };
        let kept_signs: Vec<f64> = keep.iter().map(|&i| signs[i]).collect();
        if opts.polish {
            let polisher = Polisher {
                obs,
                lambda,
                signs: kept_signs.clone(),
            };
            state = polisher.run(state);
        }
        let pts: Vec<f64> = state.theta.iter().map(|&th| cos(th)).collect();
        // the locations are now fixed; one linear solve settles weights and multipliers
        if let Some((w, nu)) = kkt_fit(&design(&pts, obs.m()), obs.y(), exact, lambda, &kept_signs) {
            if w.iter().zip(&kept_signs).all(|(a, s)| a * s > 0.0) {
                state.weights = w;
                state.nu = nu;
            }
        }
        let ok: Vec<usize> = (0..pts.len())
            .filter(|&i| state.weights[i] * kept_signs[i] > floor)
            .collect();
        let distinct = pts.windows(2).all(|w| (w[0] - w[1]).abs() > 1e-12) || pts.len() < 2;
        if ok.len() == pts.len() && distinct {
            let mut order: Vec<usize> = (0..pts.len()).collect();
            order.sort_by(|&a, &b| pts[a].total_cmp(&pts[b]));
            return Fitted {
                support: order.iter().map(|&i| pts[i]).collect(),
                weights: order.iter().map(|&i| state.weights[i]).collect(),
                nu: state.nu,
            };
        }
        // refit on the surviving atoms at their refined positions
        support = ok.iter().map(|&i| pts[i]).collect();
        signs = ok.iter().map(|&i| kept_signs[i]).collect();
        if !distinct {
            let mut merged_s = Vec::new();
            let mut merged_sign = Vec::new();
            let mut order: Vec<usize> = (0..support.len()).collect();
            order.sort_by(|&a, &b| support[a].total_cmp(&support[b]));
            for i in order {
                if merged_s.last().is_some_and(|&l: &f64| (l - support[i]).abs() <= 1e-12) {
                    continue;
                }
                merged_s.push(support[i]);
                merged_sign.push(signs[i]);
            }
            support = merged_s;
            signs = merged_sign;
        }
    }
    Fitted {
        support: Vec::new(),
        weights: Vec::new(),
        nu: nu_hint.to_vec(),
    }
}

/// Solves the regularized problem for observation `obs` at level `λ`.
pub fn solve_blasso(obs: &Observation, lambda: f64, opts: &BlassoOptions) -> Result<PrimalSolution> {
    check_lambda(lambda)?;
    if !(opts.tau > 0.0 && opts.tau < 1.0) {
        return Err(invalid("level-set tolerance must lie in (0, 1)"));
    }
    let m = obs.m();
    let exact = obs.exact_len();
    let y = obs.y();
    // Solve for β = α/λ with the objective divided by λ·scale so that all data are O(1).
    let scale = y.iter().fold(lambda, |a, v| a.max(v.abs()));
    let problem = build_dual(y, exact, 1.0, 1.0 / scale, lambda / scale);
    let sdp_sol = sdp::solve(&problem, opts.sdp_tol, opts.sdp_max_iter)?;
    match sdp_sol.status {
        SdpStatus::Solved => {}
        SdpStatus::MaxIter if sdp_sol.gap <= 1e-6 && sdp_sol.primal_infeasibility <= 1e-6 => {}
        status => {
            return Err(Error::Solver(format!(
                "dual SDP stopped with {status:?} after {} iterations (gap {:e}, infeasibility {:e})",
                sdp_sol.iterations, sdp_sol.gap, sdp_sol.primal_infeasibility
            )))
        }
    }
    let alpha: Vec<f64> = sdp_sol.free_vector.iter().map(|b| b * lambda).collect();
    let dual = DualSolution {
        dual_poly: ChebPoly::new(alpha.clone()),
        objective: dual_objective(&alpha, obs),
        alpha: alpha.clone(),
    };
    let certificate = dual.certificate();
    let nu_hint: Vec<f64> = alpha[..exact].to_vec();

    let (measure, constant_part, degenerate) = match unit_level_roots(&certificate, lambda, opts.tau) {
        Ok(roots) => {
            let mut support = Vec::new();
            let mut signs = Vec::new();
            for t in roots {
                let v = certificate.value_at(t);
                if v.abs() >= 0.9 * lambda {
                    support.push(t);
                    signs.push(v.signum());
                }
            }
            let fitted = fit_and_polish(support, signs, obs, lambda, &nu_hint, opts);
            let measure = DiscreteMeasure::new(fitted.support, fitted.weights)?;
            let constant_part: Vec<f64> = fitted.nu.iter().map(|v| -v).collect();
            (measure, constant_part, false)
        }
        Err(Error::ConstantDual) => {
            let sign = certificate.value_at(0.0).signum();
            let measure = constant_dual_fallback(obs, lambda, sign);
            (measure, nu_hint.iter().map(|v| -v).collect(), true)
        }
        Err(e) => return Err(e),
    };
    let _ = m;
    // the linear refit can be badly conditioned when there are fewer atoms than exact rows;
    // fall back to the SDP multipliers when they certify better
    let sdp_part: Vec<f64> = nu_hint.iter().map(|v| -v).collect();
    let nearest = nearest_interpolating_part(&measure, &sdp_part, obs, lambda);
    let (constant_part, kkt_residuals) = [constant_part, sdp_part, nearest]
        .into_iter()
        .map(|part| {
            let r = first_order_residuals(&measure, &part, obs, lambda);
            (part, r)
        })
        .min_by(|a, b| a.1.max().total_cmp(&b.1.max()))
        .expect("three candidates");
    let primal = primal_objective(&measure, obs, lambda);
    let duality_gap = (primal + dual.objective).abs() / (1.0 + primal.abs());
    Ok(PrimalSolution {
        measure,
        dual,
        constant_part,
        kkt_residuals,
        degenerate,
        lambda,
        primal_objective: primal,
        duality_gap,
        sdp_status: sdp_sol.status,
        sdp_iterations: sdp_sol.iterations,
        sdp_gap: sdp_sol.gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observation::simulate;

    fn obs_of(x: &DiscreteMeasure, m: usize, d: i32) -> Observation {
        simulate(x, m, d, 0.0, 0).unwrap()
    }

    #[test]
    fn zero_data_dual_is_zero() {
        let obs = Observation::new(vec![0.0; 9], -1, 8, 0.0).unwrap();
        let p = assemble_dual_sdp(&obs, 0.5).unwrap();
        let sol = sdp::solve(&p, 1e-9, 100).unwrap();
        assert_eq!(sol.status, SdpStatus::Solved);
        assert!(sol.free_vector.amax() < 1e-7);
        assert!(sol.objective_value.abs() < 1e-8);
    }

    #[test]
    fn zero_dual_is_feasible_with_scaled_identity() {
        let obs = Observation::new(vec![0.0; 6], -1, 5, 0.0).unwrap();
        let lambda = 0.8;
        let p = assemble_dual_sdp(&obs, lambda).unwrap();
        let n = 6;
        // Q = λ/(m+1) I, α = 0
        for row in p.rows() {
            let lhs: f64 = row
                .block_entries
                .iter()
                .map(|e| {
                    if e.row == e.col {
                        e.value * lambda / n as f64
                    } else {
                        0.0
                    }
                })
                .sum();
            assert!((lhs - row.rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_polynomial_at_level_is_boundary_feasible() {
        let lambda = 1.3;
        let mut alpha = vec![0.0; 7];
        alpha[0] = lambda;
        let p = ChebPoly::new(alpha);
        let sup = p.grid_sup(100);
        assert!((sup - lambda).abs() < 1e-15);
    }

    #[test]
    fn recovers_single_spike() {
        let x = DiscreteMeasure::dirac(0.0, 2.0).unwrap();
        let obs = obs_of(&x, 16, -1);
        let sol = solve_blasso(&obs, 1e-6, &BlassoOptions::default()).unwrap();
        assert_eq!(sol.measure.len(), 1, "{:?}", sol.measure);
        assert!(sol.measure.support()[0].abs() < 1e-4);
        assert!((sol.measure.weights()[0] - 2.0).abs() < 1e-4);
        let r = verify_first_order(&sol, &obs, 1e-6);
        assert!(r.tv_identity_gap <= 1e-6 * 1e-6);
        assert!(r.feasibility_gap <= 1e-6 * 1e-6);
    }

    #[test]
    fn zero_data_gives_empty_measure() {
        let obs = Observation::new(vec![0.0; 11], -1, 10, 0.0).unwrap();
        let sol = solve_blasso(&obs, 0.1, &BlassoOptions::default()).unwrap();
        assert!(sol.measure.is_empty());
        let r = verify_first_order(&sol, &obs, 0.1);
        assert_eq!(r.tv_identity_gap, 0.0);
    }

    #[test]
    fn fit_weights_examples() {
        let x = DiscreteMeasure::dirac(0.0, 2.0).unwrap();
        let obs = obs_of(&x, 10, -1);
        let w = fit_weights(&[0.0], &obs, 0.0, &[1.0]).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12);

        // one atom, d = -1: a = (⟨φ(t), y⟩ - λ s) / ‖φ(t)‖²
        let t = 0.3;
        let y = Observation::new((0..=10).map(|k| 0.1 * k as f64 - 0.4).collect(), -1, 10, 0.0).unwrap();
        let phi = crate::cheb::phi_row(10, t);
        let dot: f64 = phi.iter().zip(y.y()).map(|(a, b)| a * b).sum();
        let norm: f64 = phi.iter().map(|a| a * a).sum();
        let lambda = 0.05;
        let s = if dot > 0.0 { 1.0 } else { -1.0 };
        let w = fit_weights(&[t], &y, lambda, &[s]).unwrap();
        assert!((w[0] - (dot - lambda * s) / norm).abs() < 1e-12);

        let mut yv = vec![0.0; 9];
        yv[0] = 1.7;
        yv[3] = 0.4;
        let pinned = Observation::new(yv, 0, 8, 0.0).unwrap();
        let w = fit_weights(&[0.0], &pinned, 0.3, &[1.0]).unwrap();
        assert!((w[0] - 1.7).abs() < 1e-12);
    }

    #[test]
    fn fit_weights_reports_dependent_rows() {
        let obs = Observation::new(vec![1.0, 0.5, 0.2, 0.0, 0.1, 0.0], 2, 5, 0.0).unwrap();
        match fit_weights(&[0.1], &obs, 0.1, &[1.0]) {
            Err(Error::RankDeficient { rows }) => assert_eq!(rows, vec![1, 2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn perturbed_solution_breaks_optimality() {
        let x = DiscreteMeasure::new(vec![-0.5, 0.4], vec![1.0, -1.5]).unwrap();
        let obs = simulate(&x, 24, -1, 0.01, 3).unwrap();
        let lambda = 0.2;
        let sol = solve_blasso(&obs, lambda, &BlassoOptions::default()).unwrap();
        let r = verify_first_order(&sol, &obs, lambda);
        assert!(r.tv_identity_gap <= 1e-6 * lambda, "{r:?}");
        assert!(r.feasibility_gap <= 1e-6 * lambda, "{r:?}");
        let mut weights = sol.measure.weights().to_vec();
        weights[0] *= 2.0;
        let mut broken = sol.clone();
        broken.measure = DiscreteMeasure::new(sol.measure.support().to_vec(), weights).unwrap();
        let r = verify_first_order(&broken, &obs, lambda);
        assert!(r.tv_identity_gap > 1e-6 * lambda || r.feasibility_gap > 1e-6 * lambda);
    }

    #[test]
    fn constant_dual_uses_grid_fallback() {
        let mut y = vec![0.0; 9];
        y[0] = 5.0;
        let obs = Observation::new(y, -1, 8, 0.0).unwrap();
        let sol = solve_blasso(&obs, 1.0, &BlassoOptions::default()).unwrap();
        assert!(sol.degenerate);
        let c = sol.measure.moments(8);
        assert!((c[0] - 4.0).abs() < 1e-3, "{c:?}");
        assert!(sol.measure.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn nnls_matches_a_hand_solution() {
        // min ½‖u - (1, -2)‖² over u ≥ 0 → u = (1, 0)
        let g = DMatrix::identity(2, 2);
        let h = DVector::from_column_slice(&[1.0, -2.0]);
        let u = nnls_normal(&g, &h, 10);
        assert!((u[0] - 1.0).abs() < 1e-14 && u[1] == 0.0);
    }
}
