//! Structure-preserving model reduction: blockwise restriction maps, the
//! conjugation of a full problem to a relative or descendant problem, rank
//! reduction of degenerate mass operators, and a dynamic consistency check
//! that integrates mother and child side by side.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::blocks::{BlockData, BlockOperator, SpaceSpec};
use crate::evolution::{CompiledForcing, Scheme, Stepper, System};
use crate::grid::DiffEdge;
use crate::material::{BlockDesc, MaterialLaw};
use crate::tensor::{self, SubspaceTag};
use crate::{Error, Result};

/// Whether a map is a blockwise bijection (relative problem) or loses rank
/// (descendant problem).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Relative,
    Descendant,
}

/// One per-block action of a reduction map. The transpose-of-embedding
/// actions have orthonormal rows; the axial actions are scaled bijections
/// identifying antisymmetric 2-tensors with their axial vectors.
#[derive(Debug, Clone)]
pub enum BlockAction {
    Identity,
    /// Rows of the symmetric embedding: keeps the symmetric part.
    SymT,
    /// Rows of the antisymmetric embedding.
    SkewT,
    /// Rows of the trace-free symmetric embedding.
    Sym0T,
    /// Annihilates the block (kept as a tombstone in reports).
    ZeroT,
    /// Antisymmetric restriction on the last two slots of an order-3 field.
    LastTwoSkewT,
    /// Trace-free symmetric restriction on the last two slots.
    LastTwoSym0T,
    /// Half the axial-coefficient map on vectors (3x3, scaled unitary).
    AxialHalf,
    /// The axial-coefficient map on the last slot of a 2-tensor (9x9).
    LastTwoAxial,
    /// Explicit user matrix (columns must match the source block).
    Custom(DMatrix<f64>),
}

impl BlockAction {
    pub fn name(&self) -> String {
        match self {
            BlockAction::Identity => "identity".into(),
            BlockAction::SymT => "sym_t".into(),
            BlockAction::SkewT => "skew_t".into(),
            BlockAction::Sym0T => "sym0_t".into(),
            BlockAction::ZeroT => "zero".into(),
            BlockAction::LastTwoSkewT => "last_two_skew_t".into(),
            BlockAction::LastTwoSym0T => "last_two_sym0_t".into(),
            BlockAction::AxialHalf => "axial_half".into(),
            BlockAction::LastTwoAxial => "last_two_axial".into(),
            BlockAction::Custom(m) => format!("custom({}x{})", m.nrows(), m.ncols()),
        }
    }

    fn required_source(&self) -> Option<usize> {
        match self {
            BlockAction::Identity | BlockAction::ZeroT | BlockAction::Custom(_) => None,
            BlockAction::SymT | BlockAction::SkewT | BlockAction::Sym0T => Some(9),
            BlockAction::LastTwoSkewT | BlockAction::LastTwoSym0T => Some(27),
            BlockAction::AxialHalf => Some(3),
            BlockAction::LastTwoAxial => Some(9),
        }
    }

    pub fn target_dim(&self, source_dim: usize) -> Result<usize> {
        if let Some(req) = self.required_source() {
            if source_dim != req {
                return Err(Error::Reduction(format!(
                    "action {} expects a {}-dimensional source block, got {}",
                    self.name(),
                    req,
                    source_dim
                )));
            }
        }
        Ok(match self {
            BlockAction::Identity => source_dim,
            BlockAction::SymT => 6,
            BlockAction::SkewT | BlockAction::AxialHalf => 3,
            BlockAction::Sym0T => 5,
            BlockAction::ZeroT => 0,
            BlockAction::LastTwoSkewT | BlockAction::LastTwoAxial => 9,
            BlockAction::LastTwoSym0T => 15,
            BlockAction::Custom(m) => {
                if m.ncols() != source_dim {
                    return Err(Error::Reduction(format!(
                        "custom action is {}x{} but the source block has dimension {}",
                        m.nrows(),
                        m.ncols(),
                        source_dim
                    )));
                }
                m.nrows()
            }
        })
    }

    /// The per-node matrix of the action (target_dim x source_dim).
    pub fn matrix(&self, source_dim: usize) -> Result<DMatrix<f64>> {
        let target = self.target_dim(source_dim)?;
        Ok(match self {
            BlockAction::Identity => DMatrix::identity(source_dim, source_dim),
            BlockAction::SymT => tensor::iota_sym().transpose(),
            BlockAction::SkewT => tensor::iota_skew().transpose(),
            BlockAction::Sym0T => tensor::iota_sym0().transpose(),
            BlockAction::ZeroT => DMatrix::zeros(0, source_dim),
            BlockAction::LastTwoSkewT => {
                tensor::lift_last_two(&tensor::iota_skew().transpose())
            }
            BlockAction::LastTwoSym0T => {
                tensor::lift_last_two(&tensor::iota_sym0().transpose())
            }
            BlockAction::AxialHalf => {
                tensor::iota_skew().transpose() * tensor::lambda_matrix() * 0.5
            }
            BlockAction::LastTwoAxial => {
                tensor::lift_last_two(&(tensor::iota_skew().transpose() * tensor::lambda_matrix()))
            }
            BlockAction::Custom(m) => {
                let _ = target;
                m.clone()
            }
        })
    }

    /// Whether the action has orthonormal rows (a partial isometry).
    pub fn is_partial_isometry(&self) -> bool {
        !matches!(
            self,
            BlockAction::AxialHalf | BlockAction::LastTwoAxial | BlockAction::Custom(_)
        )
    }

    /// Target block descriptor for the catalog actions.
    pub fn target_desc(&self, source: &BlockDesc) -> Result<BlockDesc> {
        let d = match self {
            BlockAction::Identity => source.clone(),
            BlockAction::SymT => BlockDesc::new(&source.label, 2, SubspaceTag::Sym),
            BlockAction::SkewT => BlockDesc::new(&source.label, 2, SubspaceTag::Skew),
            BlockAction::Sym0T => BlockDesc::new(&source.label, 2, SubspaceTag::Sym0),
            BlockAction::ZeroT => BlockDesc::new(&source.label, source.order, SubspaceTag::Zero),
            BlockAction::LastTwoSkewT => BlockDesc::new(&source.label, 3, SubspaceTag::Skew),
            BlockAction::LastTwoSym0T => BlockDesc::new(&source.label, 3, SubspaceTag::Sym0),
            BlockAction::AxialHalf => BlockDesc::new(&source.label, 2, SubspaceTag::Skew),
            BlockAction::LastTwoAxial => BlockDesc::new(&source.label, 3, SubspaceTag::Skew),
            BlockAction::Custom(_) => {
                return Err(Error::Reduction(
                    "custom actions have no canonical target descriptor".into(),
                ))
            }
        };
        let _ = self.target_dim(source.dim())?;
        Ok(d)
    }
}

/// A blockwise reduction map over a state layout.
#[derive(Debug, Clone)]
pub struct ReductionMap {
    pub kind: MapKind,
    pub actions: Vec<BlockAction>,
}

impl ReductionMap {
    pub fn new(kind: MapKind, actions: Vec<BlockAction>) -> Self {
        ReductionMap { kind, actions }
    }

    pub fn action_names(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.name()).collect()
    }

    /// The grid-level block operator of the map. Annihilated blocks get
    /// zero-dimensional rows (tombstones preserved in the space list).
    pub fn operator(&self, source: &[BlockDesc], nodes: usize) -> Result<BlockOperator> {
        if self.actions.len() != source.len() {
            return Err(Error::Reduction(format!(
                "map has {} actions but the layout has {} blocks",
                self.actions.len(),
                source.len()
            )));
        }
        let col_spaces: Vec<SpaceSpec> = source
            .iter()
            .map(|b| SpaceSpec { label: b.label.clone(), dim: b.dim() * nodes })
            .collect();
        let mut row_spaces = Vec::new();
        for (action, block) in self.actions.iter().zip(source) {
            let td = action.target_dim(block.dim())?;
            row_spaces.push(SpaceSpec { label: block.label.clone(), dim: td * nodes });
        }
        let mut op = BlockOperator::new(row_spaces, col_spaces);
        for (i, (action, block)) in self.actions.iter().zip(source).enumerate() {
            let m = action.matrix(block.dim())?;
            if m.nrows() == 0 {
                continue;
            }
            op.set_block(i, i, BlockData::Pointwise { nodes, mat: m })?;
        }
        Ok(op)
    }

    /// Per-node orthogonal projector onto the kept subspace, blockwise
    /// (`S* S` for partial isometries, the range projector otherwise).
    pub fn kept_projector(&self, source: &[BlockDesc]) -> Result<Vec<DMatrix<f64>>> {
        let mut out = Vec::new();
        for (action, block) in self.actions.iter().zip(source) {
            let m = action.matrix(block.dim())?;
            if action.is_partial_isometry() {
                out.push(m.transpose() * &m);
            } else {
                // Range projector of S^T via the normal equations.
                let st = m.transpose();
                let gram = &m * &st;
                let inv = gram
                    .lu()
                    .solve(&DMatrix::identity(m.nrows(), m.nrows()))
                    .ok_or_else(|| Error::Reduction("rank-deficient block action".into()))?;
                out.push(&st * inv * &m);
            }
        }
        Ok(out)
    }
}

/// Transpose-compatibility identity used when mirroring conjugated blocks:
/// `(A B^T)^T` and `B A^T` are formed from identical products and must agree
/// bitwise.
pub fn check_compatibility(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    if a.ncols() != b.ncols() {
        return false;
    }
    let left = (a * b.transpose()).transpose();
    let right = b * a.transpose();
    left == right
}

/// A conjugated problem: the mother operators sandwiched by a reduction map.
pub struct Conjugated {
    /// Kept blocks (label, per-node dimension), tombstones excluded.
    pub kept: Vec<(String, usize)>,
    /// Labels of annihilated mother blocks.
    pub tombstones: Vec<String>,
    pub m0: BlockOperator,
    pub m1: BlockOperator,
    pub m2: BlockOperator,
    pub a: BlockOperator,
    /// Deviation between the mirrored differential blocks and the direct
    /// conjugation of the mother's upper blocks (the two constructions
    /// coincide in finite dimensions up to roundoff).
    pub a_coincidence_defect: f64,
}

fn drop_zero_spaces(op: &BlockOperator) -> BlockOperator {
    let rows: Vec<(usize, SpaceSpec)> = op
        .row_spaces()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.dim > 0)
        .map(|(i, s)| (i, s.clone()))
        .collect();
    let cols: Vec<(usize, SpaceSpec)> = op
        .col_spaces()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.dim > 0)
        .map(|(i, s)| (i, s.clone()))
        .collect();
    let mut out = BlockOperator::new(
        rows.iter().map(|(_, s)| s.clone()).collect(),
        cols.iter().map(|(_, s)| s.clone()).collect(),
    );
    for (ri, (oi, _)) in rows.iter().enumerate() {
        for (ci, (oj, _)) in cols.iter().enumerate() {
            if let Some(b) = op.block(*oi, *oj) {
                out.set_block(ri, ci, b.clone()).expect("shapes preserved");
            }
        }
    }
    out
}

/// Conjugates `(M0, M1, M2, A)` by the map. Mass operators are sandwiched
/// directly; the differential operator is rebuilt from its strictly lower
/// block triangle and mirrored exactly, so the child coupling is exactly
/// skew-symmetric (its agreement with the plain sandwich is reported).
pub fn conjugate_problem(
    layout: &[BlockDesc],
    sys: &System,
    map: &ReductionMap,
    nodes: usize,
) -> Result<Conjugated> {
    let s = map.operator(layout, nodes)?;
    let st = s.transpose();
    let m0 = drop_zero_spaces(&s.matmul(&sys.m0.matmul(&st)?)?);
    let m1 = drop_zero_spaces(&s.matmul(&sys.m1.matmul(&st)?)?);
    let m2 = drop_zero_spaces(&s.matmul(&sys.m2.matmul(&st)?)?);
    // Rebuild the differential part: conjugate lower blocks, mirror upper.
    let a_full = s.matmul(&sys.a.matmul(&st)?)?;
    let sandwich = drop_zero_spaces(&a_full);
    let nblocks = layout.len();
    let mut a_mirrored = BlockOperator::new(
        a_full.row_spaces().to_vec(),
        a_full.col_spaces().to_vec(),
    );
    for i in 0..nblocks {
        for j in 0..i {
            if let Some(b) = a_full.block(i, j) {
                let lower = b.to_csr();
                let upper = lower.transpose().neg();
                a_mirrored.set_block(i, j, BlockData::Sparse(lower))?;
                a_mirrored.set_block(j, i, BlockData::Sparse(upper))?;
            }
        }
    }
    let a = drop_zero_spaces(&a_mirrored);
    let mut defect = 0.0f64;
    let diff = a.add(&sandwich.scale(-1.0))?;
    defect = defect.max(diff.max_norm());
    let kept: Vec<(String, usize)> = layout
        .iter()
        .zip(&map.actions)
        .filter_map(|(b, act)| {
            let td = act.target_dim(b.dim()).ok()?;
            (td > 0).then(|| (b.label.clone(), td))
        })
        .collect();
    let tombstones: Vec<String> = layout
        .iter()
        .zip(&map.actions)
        .filter(|(_, act)| matches!(act, BlockAction::ZeroT))
        .map(|(b, _)| b.label.clone())
        .collect();
    Ok(Conjugated { kept, tombstones, m0, m1, m2, a, a_coincidence_defect: defect })
}

/// Result of reducing a degenerate mass coefficient to its numerical range.
#[derive(Debug, Clone)]
pub struct DegenerateReduction {
    /// Orthonormal basis of the numerical range (columns).
    pub embedding: DMatrix<f64>,
    /// Reduced mass: inverse of the compressed coefficient.
    pub m0_reduced: DMatrix<f64>,
    pub dropped: usize,
    /// True when eigenvalues sit suspiciously close to the rank cutoff.
    pub marginal: bool,
}

/// Compresses a positive semidefinite coefficient `N0` onto its numerical
/// range: eigenvalues below `1e-10 * max` count as zero, and the reduced
/// mass operator is `(Q^T N0 Q)^{-1}`.
pub fn degenerate_reduce(n0: &DMatrix<f64>) -> Result<DegenerateReduction> {
    if n0.nrows() != n0.ncols() {
        return Err(Error::Shape("degenerate reduction needs a square coefficient".into()));
    }
    let symmetrized = (n0 + n0.transpose()) * 0.5;
    let eig = symmetrized.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if max_ev == 0.0 {
        return Err(Error::Reduction("coefficient is identically zero".into()));
    }
    let cut = 1e-10 * max_ev;
    let marginal_band = 1e-7 * max_ev;
    let mut keep = Vec::new();
    let mut marginal = false;
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cut {
            keep.push(k);
            if ev <= marginal_band {
                marginal = true;
            }
        } else if ev.abs() > cut * 0.1 && ev.abs() <= marginal_band {
            marginal = true;
        }
    }
    if keep.is_empty() {
        return Err(Error::Reduction("coefficient has empty numerical range".into()));
    }
    let n = n0.nrows();
    let r = keep.len();
    let mut q = DMatrix::zeros(n, r);
    for (c, &k) in keep.iter().enumerate() {
        q.view_mut((0, c), (n, 1)).copy_from(&eig.eigenvectors.column(k));
    }
    let compressed = q.transpose() * &symmetrized * &q;
    let m0_reduced = compressed
        .lu()
        .solve(&DMatrix::identity(r, r))
        .ok_or_else(|| Error::Singular("compressed coefficient".into()))?;
    Ok(DegenerateReduction { embedding: q, m0_reduced, dropped: n - r, marginal })
}

/// A law with one state block compressed onto the range of a degenerate
/// stiffness coefficient: the compressed per-node law and differential
/// edges, the compression map, and the eigenvalue report of the coefficient.
#[derive(Debug)]
pub struct BlockCompression {
    pub law: MaterialLaw,
    pub edges: Vec<DiffEdge>,
    pub map: ReductionMap,
    pub report: DegenerateReduction,
}

/// Compresses one state block whose mass coefficient is defined through a
/// positive-semidefinite stiffness `n0` (the mass is the inverse of `n0` on
/// its range). When `n0` is rank deficient the stored mass can only be a
/// kernel regularization, arbitrarily stiff as the regularization weight
/// shrinks; restricting the block to range coordinates removes those
/// directions exactly instead, and the compressed problem is independent of
/// the regularization. The other blocks keep their coefficients; algebraic
/// couplings and differential edges touching the block are restricted to
/// the range basis.
///
/// Refuses when the mass operator couples the block to the rest of the
/// state (that coupling would be discarded), or when the compressed
/// dimension is not expressible as a block descriptor of the same tensor
/// order.
pub fn compress_degenerate_block(
    law: &MaterialLaw,
    edges: &[DiffEdge],
    block: usize,
    n0: &DMatrix<f64>,
) -> Result<BlockCompression> {
    let nblocks = law.layout.len();
    if block >= nblocks {
        return Err(Error::Shape(format!(
            "block index {block} out of range for a {nblocks}-block layout"
        )));
    }
    let src = &law.layout[block];
    let d = src.dim();
    if n0.nrows() != d || n0.ncols() != d {
        return Err(Error::Shape(format!(
            "stiffness is {}x{} but block '{}' has dimension {}",
            n0.nrows(),
            n0.ncols(),
            src.label,
            d
        )));
    }
    for j in 0..nblocks {
        if j != block && (law.m0.block(block, j).is_some() || law.m0.block(j, block).is_some()) {
            return Err(Error::Reduction(format!(
                "mass operator couples block '{}' to '{}'; compressing the \
                 block would discard that coupling",
                src.label, law.layout[j].label
            )));
        }
    }
    let report = degenerate_reduce(n0)?;
    let rank = report.embedding.ncols();
    let compressed_desc = if rank == d {
        src.clone()
    } else {
        [
            SubspaceTag::Full,
            SubspaceTag::Sym,
            SubspaceTag::Sym0,
            SubspaceTag::Skew,
            SubspaceTag::Trace,
        ]
        .into_iter()
        .map(|tag| BlockDesc::new(&src.label, src.order, tag))
        .find(|desc| desc.dim() == rank)
        .ok_or_else(|| {
            Error::Reduction(format!(
                "block '{}' compresses to dimension {}, which no order-{} \
                 descriptor expresses",
                src.label, rank, src.order
            ))
        })?
    };
    let mut layout = law.layout.clone();
    layout[block] = compressed_desc;

    let mut actions: Vec<BlockAction> = vec![BlockAction::Identity; nblocks];
    actions[block] = BlockAction::Custom(report.embedding.transpose());
    let kind = if report.dropped > 0 { MapKind::Descendant } else { MapKind::Relative };
    let map = ReductionMap::new(kind, actions);

    let s = map.operator(&law.layout, 1)?;
    let st = s.transpose();
    let mut m0 = s.matmul(&law.m0.matmul(&st)?)?;
    // Whatever mass was stored on the compressed block is a kernel
    // regularization; replace it by the exact inverse on the range.
    let reduced = (&report.m0_reduced + report.m0_reduced.transpose()) * 0.5;
    m0.set_block(block, block, BlockData::Pointwise { nodes: 1, mat: reduced })?;
    let m1 = s.matmul(&law.m1.matmul(&st)?)?;
    let m2 = s.matmul(&law.m2.matmul(&st)?)?;

    let q = &report.embedding;
    let qt = q.transpose();
    let mut new_edges = Vec::with_capacity(edges.len());
    for e in edges {
        let mut e2 = e.clone();
        if e.row == block {
            e2.left = Some(match &e.left {
                Some(l) => &qt * l,
                None => qt.clone(),
            });
        }
        if e.col == block {
            e2.right = Some(match &e.right {
                Some(r) => r * q,
                None => q.clone(),
            });
        }
        new_edges.push(e2);
    }

    Ok(BlockCompression { law: MaterialLaw { layout, m0, m1, m2 }, edges: new_edges, map, report })
}

/// Result of the mother/child dynamic consistency run.
#[derive(Debug, Clone, Serialize)]
pub struct DynamicsReport {
    /// Largest per-node mass coupling between kept and dropped subspaces.
    pub decoupling_defect: f64,
    /// `max_k |S u_mother - u_child|_inf / max_k |u_child|_inf`.
    pub discrepancy: f64,
    pub steps: usize,
}

/// Integrates the mother system under the lifted forcing `S^T f` and the
/// child system under `f`, in lockstep, and reports the relative mismatch of
/// the mapped mother state. Refuses when any mass coefficient couples the
/// kept and dropped subspaces (the reduction would not be dynamics-preserving).
#[allow(clippy::too_many_arguments)]
pub fn verify_descendant_dynamics(
    mother_law: &MaterialLaw,
    mother_sys: &System,
    child_sys: &System,
    map: &ReductionMap,
    nodes: usize,
    scheme: Scheme,
    dt: f64,
    steps: usize,
    child_forcing: &CompiledForcing,
    tol: f64,
) -> Result<DynamicsReport> {
    // Precondition: each mass coefficient must be block-diagonal with
    // respect to kept plus dropped, checked per node.
    let projectors = map.kept_projector(&mother_law.layout)?;
    let dims: Vec<usize> = mother_law.layout.iter().map(|b| b.dim()).collect();
    let total: usize = dims.iter().sum();
    let mut p = DMatrix::zeros(total, total);
    let mut off = 0;
    for (pb, d) in projectors.iter().zip(&dims) {
        p.view_mut((off, off), (*d, *d)).copy_from(pb);
        off += d;
    }
    let mut defect = 0.0f64;
    for (name, op) in [("M0", &mother_law.m0), ("M1", &mother_law.m1), ("M2", &mother_law.m2)] {
        let m = match op.per_node_matrix() {
            Some(m) => m,
            None => op.to_dense(),
        };
        if m.nrows() == 0 {
            continue;
        }
        let mp = &m * &p;
        let pm = &p * &m;
        let coupling = (&mp - &p * &mp).abs().max().max((&pm - &pm * &p).abs().max());
        let scale = m.abs().max().max(1.0);
        if coupling > 1e-10 * scale {
            return Err(Error::Reduction(format!(
                "{} couples the kept and dropped subspaces (defect {:.3e}); \
                 the reduced dynamics would not match",
                name,
                coupling / scale
            )));
        }
        defect = defect.max(coupling / scale);
    }
    let s = map.operator(&mother_law.layout, nodes)?;
    let st = s.transpose();
    let nm = mother_sys.dim();
    let nc = child_sys.dim();
    if s.nrows() != nc || s.ncols() != nm {
        return Err(Error::Shape(format!(
            "map is {}x{} but mother/child dimensions are {}/{}",
            s.nrows(),
            s.ncols(),
            nm,
            nc
        )));
    }
    let mut stepper_m = Stepper::new(mother_sys, nodes, scheme, dt, tol)?;
    let mut stepper_c = Stepper::new(child_sys, nodes, scheme, dt, tol)?;
    let mut um = vec![0.0; nm];
    let mut vm = vec![0.0; nm];
    let mut uc = vec![0.0; nc];
    let mut vc = vec![0.0; nc];
    let mut fc = vec![0.0; nc];
    let mut mapped = vec![0.0; nc];
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for k in 0..steps {
        let t = k as f64 * dt;
        let mut f_child = |tt: f64, out: &mut [f64]| child_forcing.fill(tt, out);
        stepper_c.step(child_sys, &mut uc, &mut vc, t, &mut f_child)?;
        let mut f_mother = |tt: f64, out: &mut [f64]| {
            child_forcing.fill(tt, &mut fc);
            out.fill(0.0);
            st.matvec_acc(1.0, &fc, out);
        };
        stepper_m.step(mother_sys, &mut um, &mut vm, t, &mut f_mother)?;
        mapped.fill(0.0);
        s.matvec_acc(1.0, &um, &mut mapped);
        for i in 0..nc {
            num = num.max((mapped[i] - uc[i]).abs());
            den = den.max(uc[i].abs());
        }
    }
    let discrepancy = if den > 0.0 { num / den } else { num };
    Ok(DynamicsReport { decoupling_defect: defect, discrepancy, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::spaces;
    use crate::material::{BlockDesc, MaterialLaw};
    use crate::tensor::SubspaceTag;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn catalog_actions_have_orthonormal_rows() {
        let descs = [
            (BlockAction::SymT, BlockDesc::new("x", 2, SubspaceTag::Full)),
            (BlockAction::SkewT, BlockDesc::new("x", 2, SubspaceTag::Full)),
            (BlockAction::Sym0T, BlockDesc::new("x", 2, SubspaceTag::Full)),
            (BlockAction::LastTwoSkewT, BlockDesc::new("x", 3, SubspaceTag::Full)),
            (BlockAction::LastTwoSym0T, BlockDesc::new("x", 3, SubspaceTag::Full)),
        ];
        for (action, desc) in descs {
            let m = action.matrix(desc.dim()).unwrap();
            let gram = &m * m.transpose();
            let dev = (&gram - DMatrix::identity(gram.nrows(), gram.ncols()))
                .abs()
                .max();
            assert!(dev <= 1e-12, "{}: {dev}", action.name());
        }
    }

    #[test]
    fn axial_actions_are_scaled_unitaries() {
        // The half-axial map has gram (1/2) I: applying it twice with the
        // adjoint recovers half the identity.
        let half = BlockAction::AxialHalf.matrix(3).unwrap();
        let gram = &half * half.transpose();
        let s2 = gram[(0, 0)];
        approx::assert_abs_diff_eq!(s2, 0.5, epsilon = 1e-14);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { s2 } else { 0.0 };
                approx::assert_abs_diff_eq!(gram[(i, j)], want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn compatibility_identity_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = DMatrix::from_fn(4, 7, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::from_fn(5, 7, |_, _| rng.gen_range(-1.0..1.0));
            assert!(check_compatibility(&a, &b));
        }
    }

    #[test]
    fn degenerate_reduce_recovers_the_symmetric_channel() {
        // Stiffness annihilating antisymmetric tensors: numerical range is
        // the 6-dimensional symmetric subspace.
        let c = crate::material::isotropic_c(0.0, 1.0, 0.5);
        let red = degenerate_reduce(&c).unwrap();
        assert_eq!(red.dropped, 3);
        assert!(!red.marginal);
        // Basis-free comparison: range projector equals the symmetric
        // projector, and the embedded reduced mass equals the symmetric
        // pseudo-inverse.
        let q = &red.embedding;
        let proj = q * q.transpose();
        let dev = (&proj - tensor::sym_projector().matrix).abs().max();
        assert!(dev <= 1e-12, "projector deviation {dev}");
        let iota = tensor::iota_sym();
        let c0 = iota.transpose() * &c * &iota;
        let c0_inv = c0.lu().solve(&DMatrix::identity(6, 6)).unwrap();
        let lhs = q * &red.m0_reduced * q.transpose();
        let rhs = &iota * c0_inv * iota.transpose();
        let dev = (&lhs - &rhs).abs().max();
        assert!(dev <= 1e-10, "embedded mass deviation {dev}");
    }

    #[test]
    fn block_compression_replaces_a_regularized_mass_by_the_range_inverse() {
        // Two-block law: a vector block, and a 2-tensor block whose
        // stiffness annihilates the antisymmetric channel. The stored mass
        // carries a stiff kernel regularization that must not survive.
        let layout = vec![
            BlockDesc::new("velocity", 1, SubspaceTag::Full),
            BlockDesc::new("stress", 2, SubspaceTag::Full),
        ];
        let sp = spaces(&[("velocity", 3), ("stress", 9)]);
        let (mu, lambda) = (1.0, 0.5);
        let n0 = crate::material::isotropic_c(0.0, mu, lambda);
        let eps = 1e-8;
        let mass_reg = tensor::sym0_projector().matrix * (0.5 / mu)
            + tensor::skew_projector().matrix * (0.5 / eps)
            + tensor::p_projector().matrix * (1.0 / (3.0 * lambda + 2.0 * mu));
        let mut m0 = BlockOperator::square(sp.clone());
        m0.set_block(0, 0, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) * 2.0 })
            .unwrap();
        m0.set_block(1, 1, BlockData::Pointwise { nodes: 1, mat: mass_reg }).unwrap();
        let zero = BlockOperator::square(sp);
        let law = MaterialLaw { layout, m0, m1: zero.clone(), m2: zero };
        let edges = vec![crate::grid::DiffEdge::plain(1, 0, 1)];

        let comp = compress_degenerate_block(&law, &edges, 1, &n0).unwrap();
        assert_eq!(comp.report.dropped, 3);
        assert_eq!(comp.law.layout[1].dim(), 6);
        assert_eq!(comp.law.layout[1].tag, SubspaceTag::Sym);
        assert!(matches!(comp.map.kind, MapKind::Descendant));
        assert!(crate::material::validate(&comp.law).is_valid());

        // Basis-free: the embedded compressed mass is the symmetric-channel
        // pseudo-inverse of the stiffness, with no trace of the 1/eps part.
        let q = &comp.report.embedding;
        let mt = match comp.law.m0.block(1, 1).unwrap() {
            BlockData::Pointwise { mat, .. } => mat.clone(),
            _ => unreachable!(),
        };
        let embedded = q * mt * q.transpose();
        let iota = tensor::iota_sym();
        let c0_inv = (iota.transpose() * &n0 * &iota)
            .lu()
            .solve(&DMatrix::identity(6, 6))
            .unwrap();
        let want = &iota * c0_inv * iota.transpose();
        let dev = (&embedded - &want).abs().max();
        assert!(dev <= 1e-10, "embedded mass deviation {dev}");

        // The differential edge is restricted to the range basis.
        let left = comp.edges[0].left.as_ref().unwrap();
        assert_eq!((left.nrows(), left.ncols()), (6, 9));
        let gram_dev = (left * left.transpose() - DMatrix::identity(6, 6)).abs().max();
        assert!(gram_dev <= 1e-12, "edge restriction gram deviation {gram_dev}");
    }

    #[test]
    fn block_compression_refuses_mass_couplings_and_inexpressible_ranks() {
        let layout = vec![
            BlockDesc::new("velocity", 1, SubspaceTag::Full),
            BlockDesc::new("stress", 2, SubspaceTag::Full),
        ];
        let sp = spaces(&[("velocity", 3), ("stress", 9)]);
        let mut m0 = BlockOperator::square(sp.clone());
        m0.set_block(0, 0, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) })
            .unwrap();
        m0.set_block(0, 1, BlockData::Pointwise { nodes: 1, mat: DMatrix::zeros(3, 9).add_scalar(0.1) })
            .unwrap();
        let zero = BlockOperator::square(sp);
        let coupled = MaterialLaw { layout: layout.clone(), m0, m1: zero.clone(), m2: zero.clone() };
        let n0 = crate::material::isotropic_c(0.0, 1.0, 0.5);
        let err = compress_degenerate_block(&coupled, &[], 1, &n0).unwrap_err();
        assert!(err.to_string().contains("couples"), "{err}");

        // Rank 2 has no order-2 descriptor.
        let mut m0 = BlockOperator::square(spaces(&[("velocity", 3), ("stress", 9)]));
        m0.set_block(0, 0, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) })
            .unwrap();
        let zero = BlockOperator::square(spaces(&[("velocity", 3), ("stress", 9)]));
        let law = MaterialLaw { layout, m0, m1: zero.clone(), m2: zero };
        let mut rank2 = DMatrix::zeros(9, 9);
        rank2[(0, 0)] = 1.0;
        rank2[(4, 4)] = 2.0;
        let err = compress_degenerate_block(&law, &[], 1, &rank2).unwrap_err();
        assert!(err.to_string().contains("compresses to dimension 2"), "{err}");
    }

    #[test]
    fn conjugation_by_identity_map_is_identity() {
        let layout = vec![
            BlockDesc::new("a", 1, SubspaceTag::Full),
            BlockDesc::new("b", 2, SubspaceTag::Full),
        ];
        let sp = spaces(&[("a", 3), ("b", 9)]);
        let mut m0 = BlockOperator::square(sp.clone());
        m0.set_block(0, 0, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) * 2.0 })
            .unwrap();
        m0.set_block(1, 1, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(9, 9) * 0.5 })
            .unwrap();
        let zero = BlockOperator::square(sp.clone());
        let a = BlockOperator::square(sp);
        let sys = System { m0: &m0, m1: &zero, m2: &zero, a: &a };
        let map = ReductionMap::new(
            MapKind::Relative,
            vec![BlockAction::Identity, BlockAction::Identity],
        );
        let conj = conjugate_problem(&layout, &sys, &map, 1).unwrap();
        let dev = conj.m0.add(&m0.scale(-1.0)).unwrap().max_norm();
        assert!(dev <= 1e-15);
        assert!(conj.tombstones.is_empty());
    }

    #[test]
    fn dynamics_check_refuses_coupled_masses() {
        // Mass coupling a kept block to a dropped one must be rejected.
        let layout = vec![
            BlockDesc::new("keep", 1, SubspaceTag::Full),
            BlockDesc::new("drop", 1, SubspaceTag::Full),
        ];
        let sp = spaces(&[("keep", 3), ("drop", 3)]);
        let mut m0 = BlockOperator::square(sp.clone());
        m0.set_block(0, 0, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) })
            .unwrap();
        m0.set_block(1, 1, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) })
            .unwrap();
        m0.set_block(0, 1, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) * 0.1 })
            .unwrap();
        m0.set_block(1, 0, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) * 0.1 })
            .unwrap();
        let zero = BlockOperator::square(sp.clone());
        let a = BlockOperator::square(sp);
        let law = MaterialLaw {
            layout: layout.clone(),
            m0: m0.clone(),
            m1: zero.clone(),
            m2: zero.clone(),
        };
        let sys = System { m0: &m0, m1: &zero, m2: &zero, a: &a };
        // Child: just the kept block.
        let spc = spaces(&[("keep", 3)]);
        let mut m0c = BlockOperator::square(spc.clone());
        m0c.set_block(0, 0, BlockData::Pointwise { nodes: 1, mat: DMatrix::identity(3, 3) })
            .unwrap();
        let zc = BlockOperator::square(spc.clone());
        let ac = BlockOperator::square(spc);
        let csys = System { m0: &m0c, m1: &zc, m2: &zc, a: &ac };
        let map = ReductionMap::new(
            MapKind::Descendant,
            vec![BlockAction::Identity, BlockAction::ZeroT],
        );
        let forcing = CompiledForcing::zero(3);
        let err = verify_descendant_dynamics(
            &law,
            &sys,
            &csys,
            &map,
            1,
            Scheme::Midpoint,
            0.01,
            5,
            &forcing,
            1e-13,
        )
        .unwrap_err();
        assert!(err.to_string().contains("couples"));
    }
}
