//! Pointwise tensor algebra on a 3-dimensional Euclidean space.
//!
//! Tensor values of order `q` (0 to 3) are stored as `3^q` entries in
//! row-major slot order: a 2-tensor entry `(i, j)` sits at `3*i + j`, a
//! 3-tensor entry `(i, j, k)` at `9*i + 3*j + k`. The Euclidean metric is the
//! identity, so adjoints are plain transposes.
//!
//! Subspace embeddings are matrices whose columns form an orthonormal basis of
//! the subspace. The paired off-diagonal weights `W_LO`, `W_HI` are adjacent
//! floats chosen so that `W_LO^2 + W_HI^2` rounds to exactly 1.0; this makes
//! the Gram identity `iota^T iota = I` hold bitwise for the symmetric and
//! antisymmetric bases, at the price of a one-ulp asymmetry in each basis
//! tensor.

use nalgebra::DMatrix;

/// Lower member of the adjacent-float pair straddling `1/sqrt(2)`.
pub const W_LO: f64 = f64::from_bits(0x3FE6A09E667F3BCC);
/// Upper member; `W_LO * W_LO + W_HI * W_HI == 1.0` exactly.
pub const W_HI: f64 = f64::from_bits(0x3FE6A09E667F3BCD);

/// A tensor value of order 0 to 3.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorValue {
    pub order: usize,
    pub entries: Vec<f64>,
}

impl TensorValue {
    pub fn new(order: usize, entries: Vec<f64>) -> Self {
        assert!(order <= 3, "tensor order must be 0..=3");
        assert_eq!(entries.len(), 3usize.pow(order as u32), "entry count must be 3^order");
        TensorValue { order, entries }
    }

    pub fn zeros(order: usize) -> Self {
        Self::new(order, vec![0.0; 3usize.pow(order as u32)])
    }

    /// 2-tensor from a row-major 3x3 array.
    pub fn from_matrix3(m: [[f64; 3]; 3]) -> Self {
        let mut e = Vec::with_capacity(9);
        for row in m {
            e.extend_from_slice(&row);
        }
        Self::new(2, e)
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        assert_eq!(self.order, 2);
        self.entries[3 * i + j]
    }

    pub fn frobenius_dot(&self, other: &TensorValue) -> f64 {
        assert_eq!(self.order, other.order);
        self.entries.iter().zip(&other.entries).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.frobenius_dot(self).sqrt()
    }
}

/// A linear map between slot spaces of 2-tensors, stored as a 9x9 matrix.
/// `projector` records whether the map was built as an orthogonal projector.
#[derive(Debug, Clone)]
pub struct SlotMap {
    pub matrix: DMatrix<f64>,
    pub projector: bool,
}

impl SlotMap {
    pub fn apply(&self, t: &TensorValue) -> TensorValue {
        assert_eq!(t.order, 2);
        let v = self.matrix.clone() * DMatrix::from_column_slice(9, 1, &t.entries);
        TensorValue::new(2, v.as_slice().to_vec())
    }
}

fn idx2(i: usize, j: usize) -> usize {
    3 * i + j
}

/// Orthogonal projector onto symmetric 2-tensors: `T -> (T + T^t) / 2`.
pub fn sym_projector() -> SlotMap {
    let mut m = DMatrix::zeros(9, 9);
    for i in 0..3 {
        for j in 0..3 {
            m[(idx2(i, j), idx2(i, j))] += 0.5;
            m[(idx2(i, j), idx2(j, i))] += 0.5;
        }
    }
    SlotMap { matrix: m, projector: true }
}

/// Orthogonal projector onto antisymmetric 2-tensors: `T -> (T - T^t) / 2`.
pub fn skew_projector() -> SlotMap {
    let mut m = DMatrix::zeros(9, 9);
    for i in 0..3 {
        for j in 0..3 {
            m[(idx2(i, j), idx2(i, j))] += 0.5;
            m[(idx2(i, j), idx2(j, i))] -= 0.5;
        }
    }
    SlotMap { matrix: m, projector: true }
}

/// Trace functional on 2-tensors as a 1x9 matrix (sum of diagonal entries).
pub fn trace_matrix() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(1, 9);
    for i in 0..3 {
        m[(0, idx2(i, i))] = 1.0;
    }
    m
}

/// Adjoint of the trace: scalar `s -> s * identity tensor`, a 9x1 matrix.
pub fn trace_star_matrix() -> DMatrix<f64> {
    trace_matrix().transpose()
}

/// Orthogonal projector onto multiples of the identity tensor:
/// `P = (1/3) trace^* trace`.
pub fn p_projector() -> SlotMap {
    let m = trace_star_matrix() * trace_matrix() / 3.0;
    SlotMap { matrix: m, projector: true }
}

/// Orthogonal projector onto trace-free symmetric 2-tensors:
/// `sym0 = sym - P` (the two commute, so this equals `(1 - P) sym`).
pub fn sym0_projector() -> SlotMap {
    let m = sym_projector().matrix - p_projector().matrix;
    SlotMap { matrix: m, projector: true }
}

pub fn sym(t: &TensorValue) -> TensorValue {
    sym_projector().apply(t)
}

pub fn skew(t: &TensorValue) -> TensorValue {
    skew_projector().apply(t)
}

pub fn trace(t: &TensorValue) -> f64 {
    assert_eq!(t.order, 2);
    t.entries[0] + t.entries[4] + t.entries[8]
}

pub fn trace_star(s: f64) -> TensorValue {
    TensorValue::from_matrix3([[s, 0.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, s]])
}

pub fn proj_p(t: &TensorValue) -> TensorValue {
    p_projector().apply(t)
}

pub fn sym0(t: &TensorValue) -> TensorValue {
    sym0_projector().apply(t)
}

/// Axial embedding of vectors into antisymmetric 2-tensors, as a 9x3 matrix.
/// Acting on `b = (b1, b2, b3)` it yields the tensor with rows
/// `[[0, b3, -b2], [-b3, 0, b1], [b2, -b1, 0]]`, so that `-lambda(b)` is the
/// cross-product map `x -> b x x`.
pub fn lambda_matrix() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(9, 3);
    m[(idx2(0, 1), 2)] = 1.0;
    m[(idx2(0, 2), 1)] = -1.0;
    m[(idx2(1, 0), 2)] = -1.0;
    m[(idx2(1, 2), 0)] = 1.0;
    m[(idx2(2, 0), 1)] = 1.0;
    m[(idx2(2, 1), 0)] = -1.0;
    m
}

/// Adjoint of [`lambda_matrix`], a 3x9 matrix:
/// `alpha -> (a23 - a32, a31 - a13, a12 - a21)`.
pub fn lambda_star_matrix() -> DMatrix<f64> {
    lambda_matrix().transpose()
}

pub fn lambda(b: [f64; 3]) -> TensorValue {
    let v = lambda_matrix() * DMatrix::from_column_slice(3, 1, &b);
    TensorValue::new(2, v.as_slice().to_vec())
}

pub fn lambda_star(t: &TensorValue) -> [f64; 3] {
    assert_eq!(t.order, 2);
    let v = lambda_star_matrix() * DMatrix::from_column_slice(9, 1, &t.entries);
    [v[(0, 0)], v[(1, 0)], v[(2, 0)]]
}

/// Extends a map `F` on 2-tensors to 3-tensors by acting on the last two
/// slots: `((1 (x) F) T)(i, -, -) = F(T(i, -, -))`. With the row-major layout
/// this is the Kronecker product `I3 (x) F`.
pub fn lift_last_two(f: &DMatrix<f64>) -> DMatrix<f64> {
    let (fr, fc) = (f.nrows(), f.ncols());
    let mut m = DMatrix::zeros(3 * fr, 3 * fc);
    for b in 0..3 {
        m.view_mut((b * fr, b * fc), (fr, fc)).copy_from(f);
    }
    m
}

/// Orthonormal basis of symmetric 2-tensors, as a 9x6 embedding matrix.
/// Column order: E11, E22, E33, then the (1,2), (1,3), (2,3) pairs with the
/// adjacent-float weights. `iota^T iota = I6` holds exactly.
pub fn iota_sym() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(9, 6);
    for i in 0..3 {
        m[(idx2(i, i), i)] = 1.0;
    }
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    for (col, &(i, j)) in pairs.iter().enumerate() {
        m[(idx2(i, j), 3 + col)] = W_LO;
        m[(idx2(j, i), 3 + col)] = W_HI;
    }
    m
}

/// Orthonormal basis of antisymmetric 2-tensors, as a 9x3 embedding matrix.
/// Column `k` is supported on the slot pair that the axial component `k`
/// addresses: (2,3), (3,1), (1,2) in 1-based labels. `iota^T iota = I3`
/// holds exactly.
pub fn iota_skew() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(9, 3);
    let pairs = [(1usize, 2usize), (2, 0), (0, 1)];
    for (col, &(i, j)) in pairs.iter().enumerate() {
        m[(idx2(i, j), col)] = W_LO;
        m[(idx2(j, i), col)] = -W_HI;
    }
    m
}

/// Orthonormal basis of trace-free symmetric 2-tensors, as a 9x5 matrix.
/// Columns: (E11 - E22)/sqrt(2), (E11 + E22 - 2 E33)/sqrt(6), then the three
/// off-diagonal symmetric pairs. Gram identity holds to one ulp.
pub fn iota_sym0() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(9, 5);
    let s2 = 1.0 / 2.0f64.sqrt();
    let s6 = 1.0 / 6.0f64.sqrt();
    m[(idx2(0, 0), 0)] = s2;
    m[(idx2(1, 1), 0)] = -s2;
    m[(idx2(0, 0), 1)] = s6;
    m[(idx2(1, 1), 1)] = s6;
    m[(idx2(2, 2), 1)] = -2.0 * s6;
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    for (col, &(i, j)) in pairs.iter().enumerate() {
        m[(idx2(i, j), 2 + col)] = W_LO;
        m[(idx2(j, i), 2 + col)] = W_HI;
    }
    m
}

/// Unit basis of the span of the identity tensor, as a 9x1 matrix.
pub fn iota_p() -> DMatrix<f64> {
    let s3 = 1.0 / 3.0f64.sqrt();
    let mut m = DMatrix::zeros(9, 1);
    for i in 0..3 {
        m[(idx2(i, i), 0)] = s3;
    }
    m
}

/// Embedding of the zero space, a d x 0 matrix. Conjugating by its transpose
/// drops a block.
pub fn iota_zero(dim: usize) -> DMatrix<f64> {
    DMatrix::zeros(dim, 0)
}

/// Per-node dimension of each subspace tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceTag {
    Full,
    Sym,
    Skew,
    Sym0,
    Trace,
    Zero,
}

impl SubspaceTag {
    /// Coefficient dimension of the tagged subspace of 2-tensors.
    pub fn dim2(self) -> usize {
        match self {
            SubspaceTag::Full => 9,
            SubspaceTag::Sym => 6,
            SubspaceTag::Skew => 3,
            SubspaceTag::Sym0 => 5,
            SubspaceTag::Trace => 1,
            SubspaceTag::Zero => 0,
        }
    }

    /// Embedding of the tagged subspace into full 2-tensors.
    pub fn embedding(self) -> DMatrix<f64> {
        match self {
            SubspaceTag::Full => DMatrix::identity(9, 9),
            SubspaceTag::Sym => iota_sym(),
            SubspaceTag::Skew => iota_skew(),
            SubspaceTag::Sym0 => iota_sym0(),
            SubspaceTag::Trace => iota_p(),
            SubspaceTag::Zero => iota_zero(9),
        }
    }
}
