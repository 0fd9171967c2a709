//! Block-structured linear operators.
//!
//! A [`BlockOperator`] is a matrix of labeled row and column spaces whose
//! blocks are stored dense, sparse, or pointwise (one small matrix replicated
//! over grid nodes). Absent blocks are zero. The module provides assembly,
//! block arithmetic, structural classification (selfadjoint, skew,
//! positive definite), Schur complements, the 2x2 block inverse, and
//! conjugation `S M S^T` by partial isometries.
//!
//! Structural defects are computed blockwise without assembling the full
//! matrix, so antisymmetry of grid-scale operators whose upper blocks are
//! stored as negated transposes of the lower ones evaluates to exactly zero.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::sparse::Csr;
use crate::{Error, Result};

/// A labeled coordinate space with its total dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub label: String,
    pub dim: usize,
}

/// Convenience constructor for a list of labeled spaces.
pub fn spaces(items: &[(&str, usize)]) -> Vec<SpaceSpec> {
    items
        .iter()
        .map(|(label, dim)| SpaceSpec { label: (*label).to_string(), dim: *dim })
        .collect()
}

/// Storage of one block.
///
/// `Pointwise` represents `I_nodes (x) mat` for the node-major, slot-fastest
/// state layout: the same per-node matrix acts at every grid node.
#[derive(Debug, Clone)]
pub enum BlockData {
    Dense(DMatrix<f64>),
    Pointwise { nodes: usize, mat: DMatrix<f64> },
    Sparse(Csr),
}

impl BlockData {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            BlockData::Dense(m) => (m.nrows(), m.ncols()),
            BlockData::Pointwise { nodes, mat } => (nodes * mat.nrows(), nodes * mat.ncols()),
            BlockData::Sparse(s) => (s.nrows, s.ncols),
        }
    }

    pub fn to_csr(&self) -> Csr {
        match self {
            BlockData::Dense(m) => Csr::from_dense(m),
            BlockData::Pointwise { nodes, mat } => {
                let (r, c) = (mat.nrows(), mat.ncols());
                let mut trips = Vec::new();
                for node in 0..*nodes {
                    for i in 0..r {
                        for j in 0..c {
                            let v = mat[(i, j)];
                            if v != 0.0 {
                                trips.push((node * r + i, node * c + j, v));
                            }
                        }
                    }
                }
                Csr::from_triplets(nodes * r, nodes * c, &trips).expect("valid kron triplets")
            }
            BlockData::Sparse(s) => s.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            BlockData::Dense(m) => m.clone(),
            BlockData::Sparse(s) => s.to_dense(),
            BlockData::Pointwise { .. } => self.to_csr().to_dense(),
        }
    }

    pub fn transpose(&self) -> BlockData {
        match self {
            BlockData::Dense(m) => BlockData::Dense(m.transpose()),
            BlockData::Pointwise { nodes, mat } => {
                BlockData::Pointwise { nodes: *nodes, mat: mat.transpose() }
            }
            BlockData::Sparse(s) => BlockData::Sparse(s.transpose()),
        }
    }

    pub fn scale(&self, s: f64) -> BlockData {
        match self {
            BlockData::Dense(m) => BlockData::Dense(m * s),
            BlockData::Pointwise { nodes, mat } => {
                BlockData::Pointwise { nodes: *nodes, mat: mat * s }
            }
            BlockData::Sparse(c) => BlockData::Sparse(c.scale(s)),
        }
    }

    pub fn neg(&self) -> BlockData {
        match self {
            BlockData::Sparse(c) => BlockData::Sparse(c.neg()),
            other => other.scale(-1.0),
        }
    }

    pub fn max_norm(&self) -> f64 {
        match self {
            BlockData::Dense(m) => m.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            BlockData::Pointwise { mat, .. } => mat.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            BlockData::Sparse(s) => s.max_norm(),
        }
    }

    /// `y += alpha * self * x`; slice lengths must match the block shape.
    pub fn matvec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let (nr, nc) = self.shape();
        assert_eq!(x.len(), nc);
        assert_eq!(y.len(), nr);
        match self {
            BlockData::Dense(m) => {
                for i in 0..nr {
                    let mut acc = 0.0;
                    for j in 0..nc {
                        acc += m[(i, j)] * x[j];
                    }
                    y[i] += alpha * acc;
                }
            }
            BlockData::Pointwise { nodes: _, mat } => {
                let (r, c) = (mat.nrows(), mat.ncols());
                crate::threads::for_row_chunks(y, r, |node0, chunk| {
                    for (k, ys) in chunk.chunks_mut(r).enumerate() {
                        let node = node0 + k;
                        let xs = &x[node * c..(node + 1) * c];
                        for i in 0..r {
                            let mut acc = 0.0;
                            for j in 0..c {
                                acc += mat[(i, j)] * xs[j];
                            }
                            ys[i] += alpha * acc;
                        }
                    }
                });
            }
            BlockData::Sparse(s) => s.matvec_acc(alpha, x, y),
        }
    }

    /// Block sum; pointwise and dense layouts are preserved when both sides
    /// share them, otherwise the result is sparse.
    pub fn add(&self, other: &BlockData) -> Result<BlockData> {
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "block add shape mismatch: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(match (self, other) {
            (BlockData::Dense(a), BlockData::Dense(b)) => BlockData::Dense(a + b),
            (
                BlockData::Pointwise { nodes: na, mat: a },
                BlockData::Pointwise { nodes: nb, mat: b },
            ) if na == nb => BlockData::Pointwise { nodes: *na, mat: a + b },
            (a, b) => BlockData::Sparse(a.to_csr().add(&b.to_csr())?),
        })
    }

    /// Block product; pointwise times pointwise stays pointwise, so grid-level
    /// conjugation reduces to the per-node matrix products.
    pub fn mul(&self, other: &BlockData) -> Result<BlockData> {
        let (_, k1) = self.shape();
        let (k2, _) = other.shape();
        if k1 != k2 {
            return Err(Error::Shape(format!("block mul inner dims {} vs {}", k1, k2)));
        }
        Ok(match (self, other) {
            (BlockData::Dense(a), BlockData::Dense(b)) => BlockData::Dense(a * b),
            (
                BlockData::Pointwise { nodes: na, mat: a },
                BlockData::Pointwise { nodes: nb, mat: b },
            ) if na == nb => BlockData::Pointwise { nodes: *na, mat: a * b },
            (a, b) => BlockData::Sparse(a.to_csr().matmul(&b.to_csr())?),
        })
    }
}

/// Block matrix over labeled spaces; absent blocks are zero.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    row_spaces: Vec<SpaceSpec>,
    col_spaces: Vec<SpaceSpec>,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
    blocks: BTreeMap<(usize, usize), BlockData>,
}

fn offsets(spaces: &[SpaceSpec]) -> Vec<usize> {
    let mut out = Vec::with_capacity(spaces.len() + 1);
    let mut acc = 0;
    out.push(0);
    for s in spaces {
        acc += s.dim;
        out.push(acc);
    }
    out
}

impl BlockOperator {
    pub fn new(row_spaces: Vec<SpaceSpec>, col_spaces: Vec<SpaceSpec>) -> Self {
        let row_offsets = offsets(&row_spaces);
        let col_offsets = offsets(&col_spaces);
        BlockOperator { row_spaces, col_spaces, row_offsets, col_offsets, blocks: BTreeMap::new() }
    }

    pub fn square(spaces: Vec<SpaceSpec>) -> Self {
        Self::new(spaces.clone(), spaces)
    }

    /// Wraps a single dense matrix as a one-block operator.
    pub fn from_single(label: &str, m: DMatrix<f64>) -> Self {
        let rs = spaces(&[(label, m.nrows())]);
        let cs = spaces(&[(label, m.ncols())]);
        let mut op = Self::new(rs, cs);
        op.set_block(0, 0, BlockData::Dense(m)).expect("single block fits");
        op
    }

    pub fn row_spaces(&self) -> &[SpaceSpec] {
        &self.row_spaces
    }

    pub fn col_spaces(&self) -> &[SpaceSpec] {
        &self.col_spaces
    }

    pub fn nrows(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub fn ncols(&self) -> usize {
        *self.col_offsets.last().unwrap()
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    pub fn col_range(&self, j: usize) -> std::ops::Range<usize> {
        self.col_offsets[j]..self.col_offsets[j + 1]
    }

    pub fn row_index(&self, label: &str) -> Option<usize> {
        self.row_spaces.iter().position(|s| s.label == label)
    }

    pub fn col_index(&self, label: &str) -> Option<usize> {
        self.col_spaces.iter().position(|s| s.label == label)
    }

    pub fn set_block(&mut self, i: usize, j: usize, data: BlockData) -> Result<()> {
        let want = (self.row_spaces[i].dim, self.col_spaces[j].dim);
        if data.shape() != want {
            return Err(Error::Shape(format!(
                "block ({}, {}) has shape {:?}, expected {:?}",
                self.row_spaces[i].label, self.col_spaces[j].label, data.shape(), want
            )));
        }
        self.blocks.insert((i, j), data);
        Ok(())
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&BlockData> {
        self.blocks.get(&(i, j))
    }

    pub fn blocks(&self) -> impl Iterator<Item = (&(usize, usize), &BlockData)> {
        self.blocks.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `y += alpha * self * x` over the full assembled index ranges.
    pub fn matvec_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols());
        assert_eq!(y.len(), self.nrows());
        for (&(i, j), b) in &self.blocks {
            let xr = self.col_range(j);
            let yr = self.row_range(i);
            b.matvec_acc(alpha, &x[xr], &mut y[yr]);
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.matvec_acc(1.0, x, &mut y);
        y
    }

    /// Bilinear form `x^T (self) y`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let my = self.matvec(y);
        x.iter().zip(&my).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &BlockOperator) -> Result<BlockOperator> {
        if self.row_spaces != other.row_spaces || self.col_spaces != other.col_spaces {
            return Err(Error::Shape("block operator add: space mismatch".into()));
        }
        let mut out = self.clone();
        for (&(i, j), b) in &other.blocks {
            let merged = match out.blocks.get(&(i, j)) {
                Some(mine) => mine.add(b)?,
                None => b.clone(),
            };
            out.blocks.insert((i, j), merged);
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> BlockOperator {
        let mut out = self.clone();
        for b in out.blocks.values_mut() {
            *b = b.scale(s);
        }
        out
    }

    pub fn transpose(&self) -> BlockOperator {
        let mut out = BlockOperator::new(self.col_spaces.clone(), self.row_spaces.clone());
        for (&(i, j), b) in &self.blocks {
            out.blocks.insert((j, i), b.transpose());
        }
        out
    }

    pub fn matmul(&self, other: &BlockOperator) -> Result<BlockOperator> {
        if self.ncols() != other.nrows()
            || self.col_spaces.iter().map(|s| s.dim).ne(other.row_spaces.iter().map(|s| s.dim))
        {
            return Err(Error::Shape("block operator product: inner spaces mismatch".into()));
        }
        let mut out = BlockOperator::new(self.row_spaces.clone(), other.col_spaces.clone());
        for (&(i, k), a) in &self.blocks {
            for (&(k2, j), b) in &other.blocks {
                if k2 != k {
                    continue;
                }
                let prod = a.mul(b)?;
                let merged = match out.blocks.get(&(i, j)) {
                    Some(existing) => existing.add(&prod)?,
                    None => prod,
                };
                out.blocks.insert((i, j), merged);
            }
        }
        Ok(out)
    }

    /// `S * self * S^T` for `S = s`; the result lives on `s`'s row spaces.
    pub fn conjugate_by(&self, s: &BlockOperator) -> Result<BlockOperator> {
        s.matmul(self)?.matmul(&s.transpose())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols());
        for (&(i, j), b) in &self.blocks {
            let d = b.to_dense();
            m.view_mut((self.row_offsets[i], self.col_offsets[j]), (d.nrows(), d.ncols()))
                .copy_from(&d);
        }
        m
    }

    pub fn to_csr(&self) -> Csr {
        let mut trips = Vec::new();
        for (&(i, j), b) in &self.blocks {
            let (r0, c0) = (self.row_offsets[i], self.col_offsets[j]);
            let s = b.to_csr();
            for r in 0..s.nrows {
                for k in s.indptr[r]..s.indptr[r + 1] {
                    trips.push((r0 + r, c0 + s.indices[k], s.values[k]));
                }
            }
        }
        Csr::from_triplets(self.nrows(), self.ncols(), &trips).expect("assembly triplets valid")
    }

    pub fn max_norm(&self) -> f64 {
        self.blocks.values().fold(0.0f64, |a, b| a.max(b.max_norm()))
    }

    fn pair_defect(&self, i: usize, j: usize, sign: f64) -> f64 {
        let a = self.blocks.get(&(i, j));
        let b = self.blocks.get(&(j, i));
        match (a, b) {
            (None, None) => 0.0,
            (Some(a), None) => a.max_norm(),
            (None, Some(b)) => b.max_norm(),
            (Some(a), Some(b)) => {
                // defect block M_ij + sign * M_ji^T
                match (a, b) {
                    (
                        BlockData::Pointwise { nodes: na, mat: ma },
                        BlockData::Pointwise { nodes: nb, mat: mb },
                    ) if na == nb => {
                        let d = ma + mb.transpose() * sign;
                        d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
                    }
                    (BlockData::Dense(ma), BlockData::Dense(mb)) => {
                        let d = ma + mb.transpose() * sign;
                        d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
                    }
                    (a, b) => {
                        // Scaling by +-1 is exact, so stored negated-transpose
                        // pairs cancel bitwise.
                        let d = a
                            .to_csr()
                            .add(&b.to_csr().transpose().scale(sign))
                            .expect("defect shapes match");
                        d.max_norm()
                    }
                }
            }
        }
    }

    /// Max-norm of `self - self^T`, computed blockwise.
    pub fn sym_defect(&self) -> f64 {
        self.defect(-1.0)
    }

    /// Max-norm of `self + self^T`, computed blockwise.
    pub fn skew_defect(&self) -> f64 {
        self.defect(1.0)
    }

    fn defect(&self, sign: f64) -> f64 {
        assert_eq!(self.nrows(), self.ncols(), "defect of a square operator");
        let n = self.row_spaces.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max(self.pair_defect(i, j, sign));
            }
        }
        worst
    }

    /// The shared per-node matrix when every block is pointwise over the same
    /// node count (absent blocks allowed). Exposes the grid operator's
    /// spectrum: the assembly is a node permutation of `I_nodes (x) result`.
    pub fn per_node_matrix(&self) -> Option<DMatrix<f64>> {
        let mut nodes = None;
        for b in self.blocks.values() {
            match b {
                BlockData::Pointwise { nodes: n, .. } => {
                    if *nodes.get_or_insert(*n) != *n {
                        return None;
                    }
                }
                _ => return None,
            }
        }
        let nodes = nodes?;
        let rdims: Vec<usize> = self.row_spaces.iter().map(|s| s.dim / nodes).collect();
        let cdims: Vec<usize> = self.col_spaces.iter().map(|s| s.dim / nodes).collect();
        if self
            .row_spaces
            .iter()
            .zip(&rdims)
            .any(|(s, d)| s.dim != d * nodes)
            || self.col_spaces.iter().zip(&cdims).any(|(s, d)| s.dim != d * nodes)
        {
            return None;
        }
        let total_r: usize = rdims.iter().sum();
        let total_c: usize = cdims.iter().sum();
        let roff = {
            let mut v = vec![0];
            for d in &rdims {
                v.push(v.last().unwrap() + d);
            }
            v
        };
        let coff = {
            let mut v = vec![0];
            for d in &cdims {
                v.push(v.last().unwrap() + d);
            }
            v
        };
        let mut m = DMatrix::zeros(total_r, total_c);
        for (&(i, j), b) in &self.blocks {
            if let BlockData::Pointwise { mat, .. } = b {
                m.view_mut((roff[i], coff[j]), (mat.nrows(), mat.ncols())).copy_from(mat);
            }
        }
        Some(m)
    }
}

/// Symmetry verdict of a square operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    Selfadjoint,
    SkewSelfadjoint,
    Neither,
}

/// Three-valued positivity verdict with a tolerance band around zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Definiteness {
    PositiveDefinite,
    Marginal,
    Indefinite,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Classification {
    pub symmetry: Symmetry,
    pub positive_definite: bool,
}

/// Smallest eigenvalue of the symmetric part, the quantity positivity
/// verdicts are read from.
pub fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Positivity with a relative band: eigenvalues within
/// `band * max(1, max-norm)` of zero are marginal.
pub fn definiteness(m: &DMatrix<f64>, band: f64) -> Definiteness {
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let lam = min_symmetric_eigenvalue(m);
    if lam > band * scale {
        Definiteness::PositiveDefinite
    } else if lam < -band * scale {
        Definiteness::Indefinite
    } else {
        Definiteness::Marginal
    }
}

/// Symmetry and positivity of a square operator. Pointwise operators are
/// classified through their per-node matrix, so grid-scale mass operators
/// stay cheap; everything else is assembled dense.
pub fn classify(op: &BlockOperator, tol: f64) -> Result<Classification> {
    if op.nrows() != op.ncols() {
        return Err(Error::Shape("classify requires a square operator".into()));
    }
    let scale = op.max_norm().max(1.0);
    let symmetry = if op.sym_defect() <= tol * scale {
        Symmetry::Selfadjoint
    } else if op.skew_defect() <= tol * scale {
        Symmetry::SkewSelfadjoint
    } else {
        Symmetry::Neither
    };
    let dense = match op.per_node_matrix() {
        Some(m) => m,
        None => op.to_dense(),
    };
    let positive_definite = definiteness(&dense, tol) == Definiteness::PositiveDefinite;
    Ok(Classification { symmetry, positive_definite })
}

/// `d - c a^{-1} b`, eliminating the top-left block.
pub fn schur_complement(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let lu = a.clone().lu();
    let x = lu
        .solve(b)
        .ok_or_else(|| Error::Singular("top-left block in Schur complement".into()))?;
    Ok(d - c * x)
}

fn assemble_sub(op: &BlockOperator, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    let rdim: usize = rows.iter().map(|&i| op.row_spaces[i].dim).sum();
    let cdim: usize = cols.iter().map(|&j| op.col_spaces[j].dim).sum();
    let mut m = DMatrix::zeros(rdim, cdim);
    let mut r0 = 0;
    for &i in rows {
        let mut c0 = 0;
        for &j in cols {
            if let Some(b) = op.block(i, j) {
                let d = b.to_dense();
                m.view_mut((r0, c0), (d.nrows(), d.ncols())).copy_from(&d);
            }
            c0 += op.col_spaces[j].dim;
        }
        r0 += op.row_spaces[i].dim;
    }
    m
}

/// Schur complement of the sub-operator selected by `top` labels inside the
/// square operator, leaving the `bottom` labels.
pub fn schur_complement_op(
    op: &BlockOperator,
    top: &[&str],
    bottom: &[&str],
) -> Result<DMatrix<f64>> {
    let resolve = |labels: &[&str]| -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                op.row_index(l)
                    .ok_or_else(|| Error::Shape(format!("unknown block label '{}'", l)))
            })
            .collect()
    };
    let ti = resolve(top)?;
    let bi = resolve(bottom)?;
    let a = assemble_sub(op, &ti, &ti);
    let b = assemble_sub(op, &ti, &bi);
    let c = assemble_sub(op, &bi, &ti);
    let d = assemble_sub(op, &bi, &bi);
    schur_complement(&a, &b, &c, &d)
}

/// The four blocks of the inverse of `[[c0, e_star], [e, c2]]`.
#[derive(Debug, Clone)]
pub struct BlockInverse2 {
    pub tl: DMatrix<f64>,
    pub tr: DMatrix<f64>,
    pub bl: DMatrix<f64>,
    pub br: DMatrix<f64>,
}

/// Inverts a 2x2 block matrix by eliminating the top-left block:
/// the bottom-right of the result is the inverse Schur complement, and the
/// top-left is `c0^{-1} + c0^{-1} e_star s^{-1} e c0^{-1}`.
pub fn block_inverse_2x2(
    c0: &DMatrix<f64>,
    e_star: &DMatrix<f64>,
    e: &DMatrix<f64>,
    c2: &DMatrix<f64>,
) -> Result<BlockInverse2> {
    let lu0 = c0.clone().lu();
    let c0_inv = lu0
        .solve(&DMatrix::identity(c0.nrows(), c0.ncols()))
        .ok_or_else(|| Error::Singular("top-left block of 2x2 inverse".into()))?;
    let x = &c0_inv * e_star;
    let s = c2 - e * &x;
    let s_inv = s
        .clone()
        .lu()
        .solve(&DMatrix::identity(s.nrows(), s.ncols()))
        .ok_or_else(|| Error::Singular("Schur complement of 2x2 inverse".into()))?;
    let tr = -(&x * &s_inv);
    let bl = -(&s_inv * e * &c0_inv);
    let tl = &c0_inv + &x * &s_inv * e * &c0_inv;
    Ok(BlockInverse2 { tl, tr, bl, br: s_inv })
}

/// A block operator whose transpose is a one-sided inverse: either
/// `S S^T = I` (orthonormal rows) or `S^T S = I` (orthonormal columns).
#[derive(Debug, Clone)]
pub struct Isometry {
    op: BlockOperator,
}

impl Isometry {
    /// Validates the partial-isometry identity to `tol` before wrapping.
    pub fn new(op: BlockOperator, tol: f64) -> Result<Self> {
        let d = Self::defect(&op)?;
        if d > tol {
            return Err(Error::Shape(format!(
                "partial isometry defect {:.3e} exceeds tolerance {:.1e}",
                d, tol
            )));
        }
        Ok(Isometry { op })
    }

    /// min(|S S^T - I|, |S^T S - I|) in max-norm.
    pub fn defect(op: &BlockOperator) -> Result<f64> {
        let t = op.transpose();
        let right = op.matmul(&t)?.to_csr().add(&Csr::identity(op.nrows()).neg())?.max_norm();
        let left = t.matmul(op)?.to_csr().add(&Csr::identity(op.ncols()).neg())?.max_norm();
        Ok(right.min(left))
    }

    pub fn op(&self) -> &BlockOperator {
        &self.op
    }

    /// `S m S^T`.
    pub fn conjugate(&self, m: &BlockOperator) -> Result<BlockOperator> {
        m.conjugate_by(&self.op)
    }
}

/// Conjugates `m` by the isometry: the descendant operator `S m S^T`.
pub fn conjugate(m: &BlockOperator, s: &Isometry) -> Result<BlockOperator> {
    s.conjugate(m)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockJson {
    row: String,
    col: String,
    format: String,
    data: serde_json::Value,
}

/// Interchange form: `{row_spaces, col_spaces, blocks: [{row, col, format, data}]}`
/// with `format` either `"dense"` (nested row arrays) or `"coo"`
/// (`{"entries": [[row, col, value], ...]}` with block-local indices).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockOperatorJson {
    row_spaces: Vec<SpaceSpec>,
    col_spaces: Vec<SpaceSpec>,
    blocks: Vec<BlockJson>,
}

impl BlockOperator {
    pub fn to_json(&self) -> BlockOperatorJson {
        let mut blocks = Vec::new();
        for (&(i, j), b) in &self.blocks {
            let (format, data) = match b {
                BlockData::Dense(m) => {
                    let rows: Vec<Vec<f64>> = (0..m.nrows())
                        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
                        .collect();
                    ("dense", serde_json::json!(rows))
                }
                other => {
                    let s = other.to_csr();
                    let mut entries = Vec::with_capacity(s.nnz());
                    for r in 0..s.nrows {
                        for k in s.indptr[r]..s.indptr[r + 1] {
                            entries.push(serde_json::json!([r, s.indices[k], s.values[k]]));
                        }
                    }
                    ("coo", serde_json::json!({ "entries": entries }))
                }
            };
            blocks.push(BlockJson {
                row: self.row_spaces[i].label.clone(),
                col: self.col_spaces[j].label.clone(),
                format: format.to_string(),
                data,
            });
        }
        BlockOperatorJson {
            row_spaces: self.row_spaces.clone(),
            col_spaces: self.col_spaces.clone(),
            blocks,
        }
    }

    pub fn from_json(j: &BlockOperatorJson) -> Result<BlockOperator> {
        let mut op = BlockOperator::new(j.row_spaces.clone(), j.col_spaces.clone());
        for b in &j.blocks {
            let i = op
                .row_index(&b.row)
                .ok_or_else(|| Error::Shape(format!("unknown row label '{}'", b.row)))?;
            let jj = op
                .col_index(&b.col)
                .ok_or_else(|| Error::Shape(format!("unknown col label '{}'", b.col)))?;
            let (nr, nc) = (op.row_spaces[i].dim, op.col_spaces[jj].dim);
            let data = match b.format.as_str() {
                "dense" => {
                    let rows: Vec<Vec<f64>> = serde_json::from_value(b.data.clone())?;
                    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
                        return Err(Error::Shape(format!(
                            "dense block ({}, {}) has wrong shape",
                            b.row, b.col
                        )));
                    }
                    let mut m = DMatrix::zeros(nr, nc);
                    for (r, row) in rows.iter().enumerate() {
                        for (c, v) in row.iter().enumerate() {
                            m[(r, c)] = *v;
                        }
                    }
                    BlockData::Dense(m)
                }
                "coo" => {
                    #[derive(Deserialize)]
                    #[serde(deny_unknown_fields)]
                    struct CooData {
                        entries: Vec<(usize, usize, f64)>,
                    }
                    let coo: CooData = serde_json::from_value(b.data.clone())?;
                    BlockData::Sparse(Csr::from_triplets(nr, nc, &coo.entries)?)
                }
                other => {
                    return Err(Error::Shape(format!("unknown block format '{}'", other)));
                }
            };
            op.set_block(i, jj, data)?;
        }
        Ok(op)
    }
}
