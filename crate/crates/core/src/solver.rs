//! Krylov solvers for the per-step linear systems
//! `(M0 + c1 (M1 + A) + c2 M2) x = b`, preconditioned by the exactly
//! factored node-local part of the system matrix.
//!
//! The node-local part assembles each operator's per-node block plus the
//! node-diagonal entries of the differential coupling; for the forward
//! difference stencils used here that diagonal is the same on every node,
//! so a single dense LU factorization serves the whole grid.

use nalgebra::{DMatrix, LU};

use crate::blocks::{BlockData, BlockOperator};
use crate::{Error, Result};

/// Matrix-free linear operator.
pub trait LinearOp {
    fn dim(&self) -> usize;
    /// `y = A x`.
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// The shifted block system `M0 + c1 (M1 + A) + c2 M2`.
pub struct ShiftedSystem<'a> {
    pub m0: &'a BlockOperator,
    pub m1: &'a BlockOperator,
    pub m2: &'a BlockOperator,
    pub a: &'a BlockOperator,
    pub c1: f64,
    pub c2: f64,
}

impl LinearOp for ShiftedSystem<'_> {
    fn dim(&self) -> usize {
        self.m0.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.m0.matvec_acc(1.0, x, y);
        if self.c1 != 0.0 {
            self.m1.matvec_acc(self.c1, x, y);
            self.a.matvec_acc(self.c1, x, y);
        }
        if self.c2 != 0.0 {
            self.m2.matvec_acc(self.c2, x, y);
        }
    }
}

/// Extracts the per-node matrix of a block operator: pointwise blocks
/// contribute their full per-node action, sparse blocks the entries coupling
/// a node to itself. Assumes that node-diagonal part is node-independent and
/// reads it off node zero (true for the forward-difference couplings here,
/// whose self-entry is `-1/h` on every node).
pub fn node_matrix(op: &BlockOperator, nodes: usize) -> Result<DMatrix<f64>> {
    let rdims: Vec<usize> = op.row_spaces().iter().map(|s| s.dim / nodes).collect();
    let cdims: Vec<usize> = op.col_spaces().iter().map(|s| s.dim / nodes).collect();
    for (s, d) in op.row_spaces().iter().zip(&rdims) {
        if d * nodes != s.dim {
            return Err(Error::Shape(format!(
                "space '{}' of dimension {} is not divisible by {} nodes",
                s.label, s.dim, nodes
            )));
        }
    }
    let roff: Vec<usize> = rdims
        .iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let coff: Vec<usize> = cdims
        .iter()
        .scan(0, |acc, d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let total_r: usize = rdims.iter().sum();
    let total_c: usize = cdims.iter().sum();
    let mut out = DMatrix::zeros(total_r, total_c);
    for (&(i, j), data) in op.blocks() {
        match data {
            BlockData::Pointwise { mat, .. } => {
                out.view_mut((roff[i], coff[j]), (rdims[i], cdims[j])).copy_from(mat);
            }
            BlockData::Sparse(s) => {
                for r in 0..rdims[i] {
                    for k in s.indptr[r]..s.indptr[r + 1] {
                        let c = s.indices[k];
                        if c < cdims[j] {
                            out[(roff[i] + r, coff[j] + c)] += s.values[k];
                        }
                    }
                }
            }
            BlockData::Dense(m) => {
                for r in 0..rdims[i] {
                    for c in 0..cdims[j] {
                        out[(roff[i] + r, coff[j] + c)] += m[(r, c)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Node-local preconditioner: one dense LU shared by all nodes, applied to
/// the per-node subvectors gathered across the block-major state layout.
pub struct NodePreconditioner {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    node_dim: usize,
    nodes: usize,
    /// (global block offset, per-node dim) per layout block.
    gather: Vec<(usize, usize)>,
}

impl NodePreconditioner {
    pub fn new(system_node_matrix: DMatrix<f64>, op: &BlockOperator, nodes: usize) -> Result<Self> {
        let node_dim = system_node_matrix.nrows();
        if system_node_matrix.ncols() != node_dim {
            return Err(Error::Shape("node matrix must be square".into()));
        }
        let mut gather = Vec::new();
        let mut off = 0;
        for s in op.row_spaces() {
            gather.push((off, s.dim / nodes));
            off += s.dim;
        }
        let lu = LU::new(system_node_matrix);
        Ok(NodePreconditioner { lu, node_dim, nodes, gather })
    }

    /// `y = P^{-1} x`, node by node.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut local = nalgebra::DVector::zeros(self.node_dim);
        for node in 0..self.nodes {
            let mut at = 0;
            for &(off, d) in &self.gather {
                local
                    .view_mut((at, 0), (d, 1))
                    .copy_from_slice(&x[off + node * d..off + (node + 1) * d]);
                at += d;
            }
            let solved = self.lu.solve(&local).expect("preconditioner factor is singular");
            let mut at = 0;
            for &(off, d) in &self.gather {
                y[off + node * d..off + (node + 1) * d]
                    .copy_from_slice(&solved.as_slice()[at..at + d]);
                at += d;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned BiCGStab. Returns the solution and iteration stats, or the
/// best residual reached if the method stagnates or breaks down.
pub fn bicgstab(
    op: &dyn LinearOp,
    pre: &NodePreconditioner,
    b: &[f64],
    tol_rel: f64,
    max_iter: usize,
) -> std::result::Result<(Vec<f64>, SolveStats), SolveStats> {
    let n = op.dim();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, residual: 0.0 }));
    }
    let tol = tol_rel * bnorm;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0f64;
    let mut alpha = 1.0f64;
    let mut omega = 1.0f64;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            return Err(SolveStats { iterations: it, residual: norm2(&r) });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut phat);
        op.apply(&phat, &mut v);
        let denom = dot(&r0, &v);
        if denom.abs() < 1e-300 {
            return Err(SolveStats { iterations: it, residual: norm2(&r) });
        }
        alpha = rho / denom;
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        if norm2(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            let res = final_residual(op, &x, b);
            return Ok((x, SolveStats { iterations: it, residual: res }));
        }
        pre.apply(&s, &mut shat);
        op.apply(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(SolveStats { iterations: it, residual: norm2(&s) });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm2(&r) <= tol {
            let res = final_residual(op, &x, b);
            if res <= tol * 10.0 {
                return Ok((x, SolveStats { iterations: it, residual: res }));
            }
        }
        if omega.abs() < 1e-300 {
            return Err(SolveStats { iterations: it, residual: norm2(&r) });
        }
    }
    Err(SolveStats { iterations: max_iter, residual: norm2(&r) })
}

fn final_residual(op: &dyn LinearOp, x: &[f64], b: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    op.apply(x, &mut ax);
    let mut s = 0.0;
    for i in 0..b.len() {
        let d = ax[i] - b[i];
        s += d * d;
    }
    s.sqrt()
}

/// Restarted GMRES with right preconditioning (robust fallback).
pub fn gmres(
    op: &dyn LinearOp,
    pre: &NodePreconditioner,
    b: &[f64],
    tol_rel: f64,
    restart: usize,
    max_outer: usize,
) -> std::result::Result<(Vec<f64>, SolveStats), SolveStats> {
    let n = op.dim();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { iterations: 0, residual: 0.0 }));
    }
    let tol = tol_rel * bnorm;
    let mut x = vec![0.0; n];
    let mut total_it = 0;
    let mut tmp = vec![0.0; n];
    for _ in 0..max_outer {
        let mut r = vec![0.0; n];
        op.apply(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm2(&r);
        if beta <= tol {
            return Ok((x, SolveStats { iterations: total_it, residual: beta }));
        }
        let m = restart;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|a| a / beta).collect());
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            total_it += 1;
            pre.apply(&v[k], &mut tmp);
            let mut w = vec![0.0; n];
            op.apply(&tmp, &mut w);
            for (j, vj) in v.iter().enumerate().take(k + 1) {
                h[j][k] = dot(&w, vj);
                for i in 0..n {
                    w[i] -= h[j][k] * vj[i];
                }
            }
            h[k + 1][k] = norm2(&w);
            if h[k + 1][k] > 1e-300 {
                v.push(w.iter().map(|a| a / h[k + 1][k]).collect());
            }
            for j in 0..k {
                let t0 = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t0;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom < 1e-300 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= tol || v.len() == k + 1 {
                break;
            }
        }
        // Back-substitution for the small triangular system.
        let mut y = vec![0.0f64; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                update[i] += yj * v[j][i];
            }
        }
        pre.apply(&update, &mut tmp);
        for i in 0..n {
            x[i] += tmp[i];
        }
        let res = final_residual(op, &x, b);
        if res <= tol {
            return Ok((x, SolveStats { iterations: total_it, residual: res }));
        }
    }
    let res = final_residual(op, &x, b);
    Err(SolveStats { iterations: total_it, residual: res })
}

/// Solves the shifted system: an exactly zero right-hand side short-circuits
/// to the exactly zero solution (the system matrix is invertible), otherwise
/// BiCGStab with a GMRES fallback. Failure reports the best residual.
pub fn solve(
    op: &dyn LinearOp,
    pre: &NodePreconditioner,
    b: &[f64],
    tol_rel: f64,
) -> Result<Vec<f64>> {
    if b.iter().all(|v| *v == 0.0) {
        return Ok(vec![0.0; op.dim()]);
    }
    let max_iter = 400;
    match bicgstab(op, pre, b, tol_rel, max_iter) {
        Ok((x, _)) => Ok(x),
        Err(first) => match gmres(op, pre, b, tol_rel, 60, 40) {
            Ok((x, _)) => Ok(x),
            Err(second) => Err(Error::Solver {
                residual: second.residual.min(first.residual),
                iterations: first.iterations + second.iterations,
            }),
        },
    }
}
