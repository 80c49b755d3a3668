//! Dense primal-dual interior-point solver for
//!
//! ```text
//! minimize    cᵀx + ½ xᵀHx
//! subject to  Σ_b A_b(X_b) + Bx = rhs,   X_b ⪰ 0,
//! ```
//!
//! where each constraint row reads a few entries of the PSD blocks `X_b` and of
//! the free vector `x`. Search directions are HKM with a Mehrotra
//! predictor-corrector; all variables share one step length `α`. The iteration
//! starts infeasible, so neither objective is monotone; what is monotone is the
//! equality residual, which every step scales by exactly `1 - α`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;

const STEP_FRACTION: f64 = 0.95;

/// One entry of a constraint row: contributes `value · X_block[row, col]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintRow {
    pub block_entries: Vec<BlockEntry>,
    pub free_entries: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    psd_block_dims: Vec<usize>,
    free_dim: usize,
    quadratic: DMatrix<f64>,
    linear: DVector<f64>,
    rows: Vec<ConstraintRow>,
}

impl SdpProblem {
    pub fn new(psd_block_dims: Vec<usize>, free_dim: usize) -> Self {
        Self {
            psd_block_dims,
            free_dim,
            quadratic: DMatrix::zeros(free_dim, free_dim),
            linear: DVector::zeros(free_dim),
            rows: Vec::new(),
        }
    }

    pub fn psd_block_dims(&self) -> &[usize] {
        &self.psd_block_dims
    }

    pub fn free_dim(&self) -> usize {
        self.free_dim
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.quadratic
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    /// Sets `H[i,j] = H[j,i] = value`.
    pub fn set_quadratic(&mut self, i: usize, j: usize, value: f64) {
        self.quadratic[(i, j)] = value;
        self.quadratic[(j, i)] = value;
    }

    pub fn set_linear(&mut self, i: usize, value: f64) {
        self.linear[i] = value;
    }

    /// Appends an empty row and returns its index.
    pub fn add_constraint(&mut self, rhs: f64) -> usize {
        self.rows.push(ConstraintRow {
            rhs,
            ..ConstraintRow::default()
        });
        self.rows.len() - 1
    }

    pub fn add_block_entry(&mut self, row: usize, block: usize, r: usize, c: usize, value: f64) {
        self.rows[row].block_entries.push(BlockEntry {
            block,
            row: r,
            col: c,
            value,
        });
    }

    pub fn add_free_entry(&mut self, row: usize, var: usize, value: f64) {
        self.rows[row].free_entries.push((var, value));
    }

    pub fn validate(&self) -> Result<()> {
        let total: usize = self.psd_block_dims.iter().map(|n| n * (n + 1) / 2).sum::<usize>() + self.free_dim;
        if self.rows.len() > total {
            return Err(invalid(format!(
                "{} constraints exceed the {total} variable dimensions",
                self.rows.len()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(invalid(format!("row {i} has a non-finite right-hand side")));
            }
            for e in &row.block_entries {
                let n = *self
                    .psd_block_dims
                    .get(e.block)
                    .ok_or_else(|| invalid(format!("row {i} references missing block {}", e.block)))?;
                if e.row >= n || e.col >= n || !e.value.is_finite() {
                    return Err(invalid(format!("row {i} has an invalid entry in block {}", e.block)));
                }
            }
            for &(var, v) in &row.free_entries {
                if var >= self.free_dim || !v.is_finite() {
                    return Err(invalid(format!("row {i} has an invalid free entry")));
                }
            }
        }
        if self.free_dim > 0 {
            let scale = self.quadratic.amax();
            let eig = self.quadratic.clone().symmetric_eigenvalues();
            if eig.iter().any(|&v| v < -1e-12 * (1.0 + scale)) {
                return Err(invalid("quadratic form is not positive semidefinite"));
            }
        }
        Ok(())
    }

    /// Text dump: one record per line, see the project README for the grammar.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let dims: Vec<String> = self.psd_block_dims.iter().map(|d| format!("{d}")).collect();
        let _ = writeln!(out, "sdp-dump 1");
        let _ = writeln!(out, "blocks {} {}", self.psd_block_dims.len(), dims.join(" "));
        let _ = writeln!(out, "free {}", self.free_dim);
        let _ = writeln!(out, "constraints {}", self.rows.len());
        for i in 0..self.free_dim {
            if self.linear[i] != 0.0 {
                let _ = writeln!(out, "linear {i} {}", self.linear[i]);
            }
            for j in i..self.free_dim {
                if self.quadratic[(i, j)] != 0.0 {
                    let _ = writeln!(out, "quad {i} {j} {}", self.quadratic[(i, j)]);
                }
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            let _ = writeln!(out, "rhs {i} {}", row.rhs);
            for e in &row.block_entries {
                let _ = writeln!(out, "entry {i} {} {} {} {}", e.block, e.row, e.col, e.value);
            }
            for &(var, v) in &row.free_entries {
                let _ = writeln!(out, "freeentry {i} {var} {v}");
            }
        }
        let _ = writeln!(out, "end");
        out
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        fn bad(line: usize, what: &str) -> Error {
            invalid(format!("dump line {}: {what}", line + 1))
        }
        fn num<T: core::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(line, "malformed number"))
        }
        let mut problem: Option<SdpProblem> = None;
        let mut dims = Vec::new();
        let mut ended = false;
        for (ln, line) in text.lines().enumerate() {
            let mut tok = line.split_whitespace();
            let Some(key) = tok.next() else { continue };
            match key {
                "sdp-dump" => {
                    if num::<u32>(tok.next(), ln)? != 1 {
                        return Err(bad(ln, "unsupported version"));
                    }
                }
                "blocks" => {
                    let n: usize = num(tok.next(), ln)?;
                    dims = (0..n).map(|_| num(tok.next(), ln)).collect::<Result<_>>()?;
                }
                "free" => problem = Some(SdpProblem::new(dims.clone(), num(tok.next(), ln)?)),
                "constraints" => {
                    let p = problem.as_mut().ok_or_else(|| bad(ln, "constraints before free"))?;
                    for _ in 0..num::<usize>(tok.next(), ln)? {
                        p.add_constraint(0.0);
                    }
                }
                "linear" | "quad" | "rhs" | "entry" | "freeentry" => {
                    let p = problem.as_mut().ok_or_else(|| bad(ln, "record before header"))?;
                    let a: usize = num(tok.next(), ln)?;
                    match key {
                        "linear" => {
                            if a >= p.free_dim {
                                return Err(bad(ln, "index out of range"));
                            }
                            p.set_linear(a, num(tok.next(), ln)?);
                        }
                        "quad" => {
                            let b: usize = num(tok.next(), ln)?;
                            if a >= p.free_dim || b >= p.free_dim {
                                return Err(bad(ln, "index out of range"));
                            }
                            p.set_quadratic(a, b, num(tok.next(), ln)?);
                        }
                        _ => {
                            if a >= p.rows.len() {
                                return Err(bad(ln, "row out of range"));
                            }
                            match key {
                                "rhs" => p.rows[a].rhs = num(tok.next(), ln)?,
                                "entry" => {
                                    let block = num(tok.next(), ln)?;
                                    let r = num(tok.next(), ln)?;
                                    let c = num(tok.next(), ln)?;
                                    p.add_block_entry(a, block, r, c, num(tok.next(), ln)?);
                                }
                                _ => {
                                    let var = num(tok.next(), ln)?;
                                    p.add_free_entry(a, var, num(tok.next(), ln)?);
                                }
                            }
                        }
                    }
                }
                "end" => {
                    ended = true;
                    break;
                }
                _ => return Err(bad(ln, "unknown record")),
            }
        }
        if !ended {
            return Err(invalid("dump is missing its end record"));
        }
        let p = problem.ok_or_else(|| invalid("dump has no header"))?;
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Solved,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub mu: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub psd_blocks: Vec<DMatrix<f64>>,
    pub free_vector: DVector<f64>,
    /// Equality multipliers `z`.
    pub multipliers: DVector<f64>,
    pub objective_value: f64,
    pub dual_objective: f64,
    /// `max(|pobj - dobj|, ⟨X,S⟩) / (1 + |pobj| + |dobj|)`.
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub history: Vec<IterationLog>,
}

/// Symmetric-matrix entry `(r, c, v)` with `r ≥ c`: `A[r,c] = A[c,r] = v/2` off the diagonal.
type SymEntry = (usize, usize, f64);

struct BlockRows {
    dim: usize,
    /// Constraint rows touching this block, with their canonical entries.
    rows: Vec<(usize, Vec<SymEntry>)>,
}

struct Prepared {
    blocks: Vec<BlockRows>,
    b_mat: DMatrix<f64>,
    rhs: DVector<f64>,
    c: DVector<f64>,
    h: DMatrix<f64>,
}

fn prepare(p: &SdpProblem) -> Prepared {
    let nrows = p.rows.len();
    let mut blocks: Vec<BlockRows> = p
        .psd_block_dims
        .iter()
        .map(|&dim| BlockRows { dim, rows: Vec::new() })
        .collect();
    let mut b_mat = DMatrix::zeros(nrows, p.free_dim);
    let mut rhs = DVector::zeros(nrows);
    for (i, row) in p.rows.iter().enumerate() {
        rhs[i] = row.rhs;
        for &(var, v) in &row.free_entries {
            b_mat[(i, var)] += v;
        }
        let mut per_block: Vec<Vec<SymEntry>> = vec![Vec::new(); blocks.len()];
        for e in &row.block_entries {
            let (r, c) = if e.row >= e.col { (e.row, e.col) } else { (e.col, e.row) };
            let list = &mut per_block[e.block];
            match list.iter_mut().find(|(rr, cc, _)| *rr == r && *cc == c) {
                Some(entry) => entry.2 += e.value,
                None => list.push((r, c, e.value)),
            }
        }
        for (b, list) in per_block.into_iter().enumerate() {
            if !list.is_empty() {
                blocks[b].rows.push((i, list));
            }
        }
    }
    Prepared {
        blocks,
        b_mat,
        rhs,
        c: p.linear.clone(),
        h: p.quadratic.clone(),
    }
}

impl Prepared {
    /// `A(X) + Bx`.
    fn apply(&self, xs: &[DMatrix<f64>], x: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.b_mat * x;
        for (blk, xb) in self.blocks.iter().zip(xs) {
            for (i, entries) in &blk.rows {
                out[*i] += entries.iter().map(|&(r, c, v)| v * xb[(r, c)]).sum::<f64>();
            }
        }
        out
    }

    /// `A_b^*(z)` as a symmetric matrix.
    fn adjoint(&self, b: usize, z: &DVector<f64>) -> DMatrix<f64> {
        let blk = &self.blocks[b];
        let mut out = DMatrix::zeros(blk.dim, blk.dim);
        for (i, entries) in &blk.rows {
            let zi = z[*i];
            for &(r, c, v) in entries {
                if r == c {
                    out[(r, r)] += zi * v;
                } else {
                    out[(r, c)] += 0.5 * zi * v;
                    out[(c, r)] += 0.5 * zi * v;
                }
            }
        }
        out
    }

    /// Adds `M_ij = tr(A_i X A_j Z)` over one block into `m`.
    fn add_schur_block(&self, b: usize, x: &DMatrix<f64>, z: &DMatrix<f64>, m: &mut DMatrix<f64>) {
        let blk = &self.blocks[b];
        let n = blk.dim;
        let count = blk.rows.len();
        if count == 0 {
            return;
        }
        let mut g = DMatrix::zeros(n, n * count);
        for (j, (_, entries)) in blk.rows.iter().enumerate() {
            let off = j * n;
            for &(r, c, v) in entries {
                if r == c {
                    for q in 0..n {
                        g[(r, off + q)] += v * z[(r, q)];
                    }
                } else {
                    let h = 0.5 * v;
                    for q in 0..n {
                        g[(r, off + q)] += h * z[(c, q)];
                        g[(c, off + q)] += h * z[(r, q)];
                    }
                }
            }
        }
        let prod = x * g;
        for (jj, (j, _)) in blk.rows.iter().enumerate() {
            let off = jj * n;
            for (i, entries) in &blk.rows {
                let mut acc = 0.0;
                for &(r, c, v) in entries {
                    if r == c {
                        acc += v * prod[(r, off + r)];
                    } else {
                        acc += 0.5 * v * (prod[(r, off + c)] + prod[(c, off + r)]);
                    }
                }
                m[(*i, *j)] += acc;
            }
        }
    }
}

fn sym(a: DMatrix<f64>) -> DMatrix<f64> {
    let t = a.transpose();
    (a + t) * 0.5
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Largest `α` with `X + α ΔX ⪰ 0` (`+∞` if unbounded), given the Cholesky factor of `X`.
fn max_step(chol: &Cholesky<f64, nalgebra::Dyn>, dx: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(left) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(w) = l.solve_lower_triangular(&left.transpose()) else {
        return 0.0;
    };
    let lam_min = sym(w).symmetric_eigenvalues().min();
    if lam_min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam_min
    }
}

struct Direction {
    dz: DVector<f64>,
    dx: DVector<f64>,
    d_s: Vec<DMatrix<f64>>,
    d_x: Vec<DMatrix<f64>>,
}

/// Solves `min cᵀx + ½xᵀHx` subject to the block constraints.
pub fn solve(problem: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    problem.validate()?;
    let p = prepare(problem);
    let nrows = p.rhs.len();
    let nfree = p.c.len();
    let cone_dim: usize = p.blocks.iter().map(|b| b.dim).sum();

    let mut xs: Vec<DMatrix<f64>> = p.blocks.iter().map(|b| DMatrix::identity(b.dim, b.dim)).collect();
    let mut ss = xs.clone();
    let mut x = DVector::zeros(nfree);
    let mut z = DVector::zeros(nrows);

    let b_norm = inf_norm(&p.rhs);
    let c_norm = inf_norm(&p.c).max(p.h.amax());
    let mut history = Vec::new();
    let mut status = SdpStatus::MaxIter;
    let mut iterations = 0;
    let mut last = (0.0, 0.0, f64::INFINITY, f64::INFINITY, f64::INFINITY);

    for iter in 0..=max_iter {
        // residuals
        let r_p = &p.rhs - p.apply(&xs, &x);
        let r_d: Vec<DMatrix<f64>> = (0..xs.len()).map(|b| -p.adjoint(b, &z) - &ss[b]).collect();
        let hx = &p.h * &x;
        let r_f = p.b_mat.tr_mul(&z) - &p.c - &hx;
        let quad = 0.5 * x.dot(&hx);
        let pobj = p.c.dot(&x) + quad;
        let dobj = p.rhs.dot(&z) - quad;
        let comp: f64 = xs.iter().zip(&ss).map(|(a, b)| inner(a, b)).sum();
        let mu = if cone_dim > 0 { comp / cone_dim as f64 } else { 0.0 };
        let pinf = inf_norm(&r_p) / (1.0 + b_norm);
        let dinf = r_d.iter().map(|m| m.amax()).fold(inf_norm(&r_f), f64::max) / (1.0 + c_norm);
        let gap = (pobj - dobj).abs().max(comp) / (1.0 + pobj.abs() + dobj.abs());
        last = (pobj, dobj, gap, pinf, dinf);
        iterations = iter;
        if !(pinf.is_finite() && dinf.is_finite() && gap.is_finite()) {
            status = SdpStatus::Infeasible;
            break;
        }
        if pinf <= tol && dinf <= tol && gap <= tol {
            status = SdpStatus::Solved;
            history.push(IterationLog {
                iteration: iter,
                primal_objective: pobj,
                dual_objective: dobj,
                mu,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                step: 0.0,
            });
            break;
        }
        if iter == max_iter {
            history.push(IterationLog {
                iteration: iter,
                primal_objective: pobj,
                dual_objective: dobj,
                mu,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                step: 0.0,
            });
            break;
        }

        let x_chol: Vec<_> = xs.iter().map(|m| Cholesky::new(m.clone())).collect();
        let s_chol: Vec<_> = ss.iter().map(|m| Cholesky::new(m.clone())).collect();
        if x_chol.iter().chain(&s_chol).any(|c| c.is_none()) {
            status = SdpStatus::Infeasible;
            break;
        }
        let x_chol: Vec<_> = x_chol.into_iter().map(Option::unwrap).collect();
        let s_chol: Vec<_> = s_chol.into_iter().map(Option::unwrap).collect();
        let zs: Vec<DMatrix<f64>> = s_chol.iter().map(|c| c.inverse()).collect();

        let mut kkt = DMatrix::zeros(nrows + nfree, nrows + nfree);
        {
            let mut schur = DMatrix::zeros(nrows, nrows);
            for b in 0..xs.len() {
                p.add_schur_block(b, &xs[b], &zs[b], &mut schur);
            }
            kkt.view_mut((0, 0), (nrows, nrows)).copy_from(&schur);
            kkt.view_mut((0, nrows), (nrows, nfree)).copy_from(&p.b_mat);
            kkt.view_mut((nrows, 0), (nfree, nrows)).copy_from(&p.b_mat.transpose());
            kkt.view_mut((nrows, nrows), (nfree, nfree)).copy_from(&(-&p.h));
        }
        let lu = kkt.lu();

        // X R_d Z is shared by both solves
        let xrz: Vec<DMatrix<f64>> = (0..xs.len()).map(|b| &xs[b] * &r_d[b] * &zs[b]).collect();
        let direction = |sigma_mu: f64, second: Option<&Vec<DMatrix<f64>>>| -> Option<Direction> {
            let targets: Vec<DMatrix<f64>> = (0..xs.len())
                .map(|b| {
                    let mut t = &zs[b] * sigma_mu - &xs[b] - sym(xrz[b].clone());
                    if let Some(extra) = second {
                        t -= &extra[b];
                    }
                    t
                })
                .collect();
            let h_vec = &r_p - p.apply(&targets, &DVector::zeros(nfree));
            let mut rhs = DVector::zeros(nrows + nfree);
            rhs.rows_mut(0, nrows).copy_from(&h_vec);
            rhs.rows_mut(nrows, nfree).copy_from(&(-&r_f));
            let sol = lu.solve(&rhs)?;
            let dz = sol.rows(0, nrows).into_owned();
            let dx = sol.rows(nrows, nfree).into_owned();
            let d_s: Vec<DMatrix<f64>> = (0..xs.len()).map(|b| &r_d[b] - p.adjoint(b, &dz)).collect();
            let d_x: Vec<DMatrix<f64>> = (0..xs.len())
                .map(|b| {
                    let mut t = &zs[b] * sigma_mu - &xs[b] - sym(&xs[b] * &d_s[b] * &zs[b]);
                    if let Some(extra) = second {
                        t -= &extra[b];
                    }
                    t
                })
                .collect();
            if sol.iter().any(|v| !v.is_finite()) {
                return None;
            }
            Some(Direction { dz, dx, d_s, d_x })
        };
        let step_limit = |dir: &Direction| -> f64 {
            let mut alpha = f64::INFINITY;
            for b in 0..xs.len() {
                alpha = alpha.min(max_step(&x_chol[b], &dir.d_x[b]));
                alpha = alpha.min(max_step(&s_chol[b], &dir.d_s[b]));
            }
            alpha
        };
        let mu_after = |dir: &Direction, alpha: f64| -> f64 {
            if cone_dim == 0 {
                return 0.0;
            }
            let total: f64 = (0..xs.len())
                .map(|b| inner(&(&xs[b] + &dir.d_x[b] * alpha), &(&ss[b] + &dir.d_s[b] * alpha)))
                .sum();
            total / cone_dim as f64
        };

        let Some(affine) = direction(0.0, None) else {
            status = SdpStatus::Infeasible;
            break;
        };
        let dir = if cone_dim > 0 {
            let a_aff = step_limit(&affine).min(1.0);
            let mu_aff = mu_after(&affine, a_aff);
            let ratio = (mu_aff / mu).clamp(0.0, 1.0);
            let sigma = ratio * ratio * ratio;
            let second: Vec<DMatrix<f64>> = (0..xs.len())
                .map(|b| sym(&affine.d_x[b] * &affine.d_s[b] * &zs[b]))
                .collect();
            match direction(sigma * mu, Some(&second)) {
                Some(d) => d,
                None => {
                    status = SdpStatus::Infeasible;
                    break;
                }
            }
        } else {
            affine
        };
        let alpha = (STEP_FRACTION * step_limit(&dir)).min(1.0);
        for b in 0..xs.len() {
            xs[b] += &dir.d_x[b] * alpha;
            ss[b] += &dir.d_s[b] * alpha;
            xs[b] = sym(core::mem::take(&mut xs[b]));
            ss[b] = sym(core::mem::take(&mut ss[b]));
        }
        x += &dir.dx * alpha;
        z += &dir.dz * alpha;
        history.push(IterationLog {
            iteration: iter,
            primal_objective: pobj,
            dual_objective: dobj,
            mu,
            primal_infeasibility: pinf,
            dual_infeasibility: dinf,
            step: alpha,
        });
    }

    let (pobj, dobj, gap, pinf, dinf) = last;
    if status == SdpStatus::MaxIter && pinf > tol {
        status = SdpStatus::Infeasible;
    }
    Ok(SdpSolution {
        psd_blocks: xs,
        free_vector: x,
        multipliers: z,
        objective_value: pobj,
        dual_objective: dobj,
        gap,
        primal_infeasibility: pinf,
        dual_infeasibility: dinf,
        iterations,
        status,
        history,
    })
}
